"""Absorbing subuniverses with explicit term witnesses, and the absorption reduction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .algebra import (
    App,
    FiniteAlgebra,
    Subuniverse,
    Term,
    Var,
    clone_slice,
    close_elements,
    subalgebra,
    term_table,
    term_to_str,
    term_variables,
)
from .affine import PassiveSubinstance, update_passive
from .consistency import BinaryInstance, Trace, enforce_1_consistency, run_slac, slac_instance
from .errors import InvariantError, PreconditionError, ResourceLimitError


@dataclass(frozen=True)
class AbsorptionWitness:
    subuniverse: frozenset[int]
    term: Term
    arity: int

    def describe(self, alg: FiniteAlgebra) -> str:
        return f"{{{','.join(map(str, sorted(self.subuniverse)))}}} by {term_to_str(alg, self.term)}"


@dataclass(frozen=True)
class AbsorptionSearch:
    witness: AbsorptionWitness | None
    exhaustive: bool  # absence is certified, not merely "not found at the bound"


def _term_arity(t: Term) -> int:
    vs = term_variables(t)
    return max(vs) + 1 if vs else 0


def _absorbs(table: np.ndarray, inside: np.ndarray, universe: np.ndarray) -> bool:
    """``table`` maps every tuple with at most one coordinate outside ``inside`` into ``inside``."""
    member = np.zeros(table.shape[0], dtype=bool)
    member[inside] = True
    n = table.ndim
    for i in range(n):
        axes = [inside] * n
        axes[i] = universe
        if not member[table[np.ix_(*axes)]].all():
            return False
    return True


def check_witness(alg: FiniteAlgebra, elements: Iterable[int], t: Term, arity: int | None = None) -> bool:
    """Exhaustive check of ``t(B,..,B,A,B,..,B) <= B`` for every position of the ``A`` slot."""
    inside = sorted(set(elements))
    if not inside or close_elements(alg, inside) != frozenset(inside):
        raise PreconditionError("B is not a subuniverse")
    n = _term_arity(t) if arity is None else arity
    if n == 0:
        raise PreconditionError("a witness term needs at least one variable")
    return _absorbs(term_table(alg, t, n), np.array(inside), np.arange(alg.size))


def proper_subuniverses(alg: FiniteAlgebra, cap: int = 4096) -> list[frozenset[int]]:
    """All proper subuniverses, smallest first then lexicographic."""
    found = {close_elements(alg, [a]) for a in range(alg.size)}
    frontier = set(found)
    while frontier:
        new = set()
        for s in frontier:
            for t in list(found):
                u = close_elements(alg, s | t)
                if u not in found and u not in new:
                    new.add(u)
        found |= new
        frontier = new
        if len(found) > cap:
            raise ResourceLimitError(f"more than {cap} subuniverses")
    whole = frozenset(range(alg.size))
    return sorted((s for s in found if s != whole), key=lambda s: (len(s), sorted(s)))


_ABS_CACHE: dict[tuple, tuple[list[AbsorptionWitness], bool]] = {}


def witnessed_absorbers(alg: FiniteAlgebra, depth_bound: int = 3,
                        arities: Sequence[int] = (2, 3)) -> tuple[list[AbsorptionWitness], bool]:
    """Every proper subuniverse with a witness among term operations of the given arities."""
    key = (alg.key, depth_bound, tuple(arities))
    if key in _ABS_CACHE:
        return _ABS_CACHE[key]
    subs = proper_subuniverses(alg)
    slices = [clone_slice(alg, n, depth_bound) for n in arities]
    universe = np.arange(alg.size)
    found = []
    for s in subs:
        inside = np.array(sorted(s))
        for sl in slices:
            hit = next((i for i, tab in enumerate(sl.tables)
                        if _is_nontrivial(sl.terms[i]) and _absorbs(tab, inside, universe)), None)
            if hit is not None:
                found.append(AbsorptionWitness(s, sl.terms[hit], sl.arity))
                break
    exhaustive = alg.size <= 2 and all(sl.exhaustive for sl in slices)
    _ABS_CACHE[key] = (found, exhaustive)
    return found, exhaustive


def _is_nontrivial(t: Term) -> bool:
    # projections absorb nothing proper, so they are skipped outright
    return isinstance(t, App)


def search_absorbing(alg: FiniteAlgebra, depth_bound: int = 3) -> AbsorptionSearch:
    found, exhaustive = witnessed_absorbers(alg, depth_bound)
    return AbsorptionSearch(found[0] if found else None, exhaustive and not found)


def find_absorbing(alg: FiniteAlgebra, depth_bound: int = 3) -> tuple[Subuniverse, AbsorptionWitness] | None:
    w = search_absorbing(alg, depth_bound).witness
    return None if w is None else (Subuniverse(w.subuniverse, alg), w)


def minimal_absorbing(alg: FiniteAlgebra, depth_bound: int = 3) -> tuple[Subuniverse, AbsorptionWitness] | None:
    """A minimal witnessed absorber; ties go to the smallest, then lexicographically least, set.

    Candidates are closed under nonempty intersection of witnessed absorbers,
    whose absorption is then re-witnessed directly.
    """
    found, _ = witnessed_absorbers(alg, depth_bound)
    if not found:
        return None
    pool = {w.subuniverse: w for w in found}
    for w1 in found:
        for w2 in found:
            meet = w1.subuniverse & w2.subuniverse
            if meet and meet not in pool:
                term, n = compose_witnesses(w1.term, w1.arity, w2.term, w2.arity)
                if close_elements(alg, meet) == meet and check_witness(alg, meet, term, n):
                    pool[meet] = AbsorptionWitness(meet, term, n)
    minimal = [w for s, w in pool.items() if not any(o < s for o in pool)]
    best = min(minimal, key=lambda w: (len(w.subuniverse), sorted(w.subuniverse)))
    return Subuniverse(best.subuniverse, alg), best


def compose_witnesses(t1: Term, n1: int, t2: Term, n2: int) -> tuple[Term, int]:
    """``t1(t2(x..), t2(x..), ...)`` on ``n1 * n2`` fresh variables; it witnesses whatever either one does."""

    def shift(t: Term, offset: int) -> Term:
        if isinstance(t, Var):
            return Var(t.index + offset)
        return App(t.op, tuple(shift(a, offset) for a in t.args))

    def substitute(t: Term, subs: Sequence[Term]) -> Term:
        if isinstance(t, Var):
            return subs[t.index]
        return App(t.op, tuple(substitute(a, subs) for a in t.args))

    inner = [shift(t2, i * n2) for i in range(n1)]
    return substitute(t1, inner), n1 * n2


# --------------------------------------------------------------------------- reduction


_SUB_CACHE: dict[tuple, tuple[FiniteAlgebra, tuple[int, ...]]] = {}


def domain_algebra(b: BinaryInstance, var) -> tuple[FiniteAlgebra, tuple[int, ...]]:
    """The subalgebra on ``S_x`` relabelled as ``0..m-1``, with the relabelling."""
    elems = tuple(int(a) for a in np.flatnonzero(b.domains[b.index(var)]))
    key = (b.algebra.key, elems)
    if key not in _SUB_CACHE:
        _SUB_CACHE[key] = subalgebra(b.algebra, elems)
    return _SUB_CACHE[key]


def absorption_reduce(b: BinaryInstance, x, elements: Iterable[int], passives: Sequence[PassiveSubinstance],
                      witness: AbsorptionWitness | None = None, depth_bound: int = 3,
                      trace: Trace | None = None,
                      check_invariants: bool = False) -> tuple[BinaryInstance | None, list[PassiveSubinstance]]:
    """Shrink ``S_x`` to the absorbing ``B`` and every ``S_y`` to ``R+_{x,y}(B)``.

    ``witness`` (a term over the relabelled domain algebra of ``x``) is
    re-checked; without one a witness is searched for.  Returns ``None`` for
    the instance when 1-consistency or SLAC fails on the reduced instance.
    """
    i = b.index(x)
    block = frozenset(int(a) for a in elements)
    dom_alg, elems = domain_algebra(b, x)
    if not block or not block <= set(elems):
        raise PreconditionError("B must be a nonempty subset of S_x")
    if block == set(elems):
        return b, list(passives)
    local = frozenset(elems.index(a) for a in block)
    if witness is None:
        found, _ = witnessed_absorbers(dom_alg, depth_bound)
        witness = next((w for w in found if w.subuniverse == local), None)
        if witness is None:
            raise PreconditionError(f"no witness that {sorted(block)} absorbs S_{b.variables[i]}")
    elif witness.subuniverse != local or not check_witness(dom_alg, local, witness.term, witness.arity):
        raise PreconditionError("the witness does not certify absorption")
    mask = np.zeros(b.size, dtype=bool)
    mask[list(block)] = True
    doms = b.relations[i][:, mask].any(axis=1)
    doms[i] = mask
    if check_invariants:
        _check_image_law(b, i, doms, witness, depth_bound)
    if trace is not None:
        trace.append(f"absorb {b.variables[i]} -> {sorted(block)} by {term_to_str(dom_alg, witness.term)}")
    reduced = enforce_1_consistency(b.restrict(doms), trace)
    if reduced is not None:
        reduced = slac_instance(reduced, trace)
    if reduced is None:
        return None, []
    kept = update_passive(passives, reduced)
    if passives and not kept:
        raise InvariantError("every passive subinstance was lost under an absorption reduction")
    if check_invariants:
        for ps in kept:
            sub = reduced.restrict(ps.domains)
            store = run_slac(sub, shortcut=False)
            if store is None or any(len(store[v]) != c for v, c in zip(sub.variables, sub.domain_sizes())):
                raise InvariantError(f"passive subinstance at {ps.var} lost SLAC after the reduction")
    return reduced, kept


def _check_image_law(b: BinaryInstance, i: int, doms: np.ndarray, witness: AbsorptionWitness, depth_bound: int) -> None:
    """``R+_{x,y}(B)`` absorbs ``S_y`` with the same term (checked on the ambient algebra)."""
    for j in range(len(b.variables)):
        if j == i:
            continue
        image = np.flatnonzero(doms[j])
        dom = np.flatnonzero(b.domains[j])
        if len(image) == len(dom):
            continue
        table = term_table(b.algebra, witness.term, witness.arity)
        if not _absorbs(table, image, dom):
            raise InvariantError(f"image at {b.variables[j]!r} is not absorbed by the witness term")


