"""Binary instances, binarization and local-consistency propagation.

A :class:`BinaryInstance` is stored densely: ``domains[i]`` is a boolean mask
over the universe of the parametrizing algebra and ``relations[i, j]`` a
boolean ``N x N`` matrix for every ordered pair of variables.  Pairs without an
explicit constraint hold the full product of their domains, and the diagonal
``relations[i, i]`` is the identity restricted to ``domains[i]``.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .algebra import FiniteAlgebra, decode_element, power
from .csp import CspInstance
from .errors import PreconditionError

Trace = list  # of str; appended to when passed in


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BinaryInstance:
    algebra: FiniteAlgebra = field(repr=False)
    variables: tuple[str, ...]
    domains: np.ndarray = field(repr=False)  # (V, N) bool
    relations: np.ndarray = field(repr=False)  # (V, V, N, N) bool
    scopes: frozenset = frozenset()  # ordered pairs that carried an explicit constraint
    groups: tuple[tuple[str, ...], ...] | None = None  # original variables behind each variable

    @classmethod
    def build(cls, algebra: FiniteAlgebra, variables: Sequence[str], domains,
              constraints: Mapping[tuple[int, int], Iterable[tuple[int, int]]] = (),
              groups=None) -> BinaryInstance:
        """Assemble from explicit pair sets; constraints on the same pair are intersected."""
        n, v = algebra.size, len(variables)
        dom = np.zeros((v, n), dtype=bool)
        for i, d in enumerate(domains):
            dom[i, list(d)] = True
        rel = np.ones((v, v, n, n), dtype=bool)
        scopes = set()
        for (i, j), pairs in dict(constraints).items():
            m = np.zeros((n, n), dtype=bool)
            for a, b in pairs:
                m[a, b] = True
            if i == j:
                dom[i] &= np.diagonal(m)
                continue
            rel[i, j] &= m
            rel[j, i] &= m.T
            scopes |= {(i, j), (j, i)}
        return cls.from_arrays(algebra, variables, dom, rel, frozenset(scopes), groups)

    @classmethod
    def from_arrays(cls, algebra, variables, domains, relations, scopes=frozenset(), groups=None) -> BinaryInstance:
        dom = np.array(domains, dtype=bool)
        rel = np.array(relations, dtype=bool)
        rel &= dom[:, None, :, None] & dom[None, :, None, :]
        eye = np.eye(algebra.size, dtype=bool)
        for i in range(len(variables)):
            rel[i, i] = eye & dom[i][:, None]
        return cls(algebra, tuple(variables), _readonly(dom), _readonly(rel), frozenset(scopes), groups)

    @property
    def size(self) -> int:
        return self.algebra.size

    def index(self, var: str | int) -> int:
        if isinstance(var, (int, np.integer)):
            return int(var)
        try:
            return self._index[var]
        except KeyError:
            raise PreconditionError(f"unknown variable {var!r}") from None

    @cached_property
    def _index(self):
        return {v: i for i, v in enumerate(self.variables)}

    @cached_property
    def bits(self) -> np.ndarray:
        """``relations`` with the last axis packed into ``uint64`` rows."""
        return _kernels.to_bits(self.relations)

    def domain(self, var) -> frozenset[int]:
        return frozenset(int(a) for a in np.flatnonzero(self.domains[self.index(var)]))

    def relation(self, x, y) -> frozenset[tuple[int, int]]:
        i, j = self.index(x), self.index(y)
        return frozenset((int(a), int(b)) for a, b in zip(*np.nonzero(self.relations[i, j])))

    def restrict(self, domains) -> BinaryInstance:
        """Same constraints on the domains ``domains`` (a ``(V, N)`` mask) intersected with the current ones."""
        return BinaryInstance.from_arrays(self.algebra, self.variables, self.domains & domains,
                                          self.relations, self.scopes, self.groups)

    def with_domain(self, var, elements: Iterable[int]) -> BinaryInstance:
        mask = np.ones_like(self.domains)
        mask[self.index(var)] = False
        mask[self.index(var), list(elements)] = True
        return self.restrict(mask)

    def domain_sizes(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self.domains.sum(axis=1))

    def is_empty(self) -> bool:
        return bool((~self.domains.any(axis=1)).any()) if len(self.variables) else False

    def same_as(self, other: BinaryInstance) -> bool:
        return (self.variables == other.variables and np.array_equal(self.domains, other.domains)
                and np.array_equal(self.relations, other.relations))

    def is_one_consistent(self) -> bool:
        """Every constraint is subdirect in the current domains."""
        support = self.relations.any(axis=3)  # (V, V, N)
        return bool((support == self.domains[:, None, :]).all())

    def is_23_consistent(self) -> bool:
        if self.is_empty():
            return False
        fixed = _fixpoint_23(np.array(self.relations))
        return fixed is not None and bool(np.array_equal(fixed, self.relations))


# --------------------------------------------------------------------------- binarization


def group_size(instance: CspInstance, k: int) -> int:
    big_k = max(instance.max_arity, k - 1)
    return max(1, math.ceil(big_k / 2))


def _groups(variables: Sequence[str], c: int) -> list[tuple[str, ...]]:
    if len(variables) < c:
        # a single padded group; the padding repeats the last variable
        return [tuple(variables) + (variables[-1],) * (c - len(variables))] if variables else []
    return list(itertools.combinations(variables, c))


_POWER_CACHE: dict[tuple, FiniteAlgebra] = {}


def cached_power(alg: FiniteAlgebra, c: int) -> FiniteAlgebra:
    key = (alg.key, c)
    if key not in _POWER_CACHE:
        _POWER_CACHE[key] = power(alg, c)
    return _POWER_CACHE[key]


def binarize(instance: CspInstance, algebra: FiniteAlgebra, k: int) -> BinaryInstance:
    """Syntactically simple instance over ``algebra ** c``, ``c = ceil(max(p, k-1) / 2)``.

    One new variable per ``c``-element set of original variables (in variable
    order).  A pair of new variables admits a pair of tuples when the tuples
    agree on shared variables and satisfy every constraint whose scope lies in
    the union of the two sets.  With ``c == 1`` this is the instance itself.
    """
    if algebra.size != instance.template.domain_size:
        raise PreconditionError("algebra and template sizes differ")
    c = group_size(instance, k)
    groups = _groups(instance.variables, c)
    big = cached_power(algebra, c)
    n, v = big.size, len(groups)
    coords = np.array([decode_element(e, algebra.size, c) for e in range(n)], dtype=np.int64).reshape(n, c)
    cons = []
    for con in instance.constraints:
        rel = instance.template.relation(con.relation)
        mask = np.zeros((algebra.size,) * rel.arity, dtype=bool)
        if rel.tuples:
            mask[tuple(rel.array.T)] = True
        cons.append((set(con.scope), con.scope, mask))
    names = ["|".join(g) for g in groups]

    # value of each original variable as an array over pairs (s, t) of group elements
    def columns(g, h):
        cols = {}
        for pos, var in enumerate(g):
            cols.setdefault(var, []).append(np.broadcast_to(coords[:, pos][:, None], (n, n)))
        for pos, var in enumerate(h):
            cols.setdefault(var, []).append(np.broadcast_to(coords[:, pos][None, :], (n, n)))
        return cols

    def admissible(g, h):
        cols = columns(g, h)
        ok = np.ones((n, n), dtype=bool)
        for vals in cols.values():
            for other in vals[1:]:
                ok &= vals[0] == other
        union = set(cols)
        for scope_set, scope, mask in cons:
            if scope_set <= union:
                ok &= mask[tuple(cols[var][0] for var in scope)]
        return ok

    dom = np.zeros((v, n), dtype=bool)
    for i, g in enumerate(groups):
        dom[i] = np.diagonal(admissible(g, g))
    rel = np.ones((v, v, n, n), dtype=bool)
    scopes = set()
    for i, j in itertools.combinations(range(v), 2):
        g, h = groups[i], groups[j]
        m = admissible(g, h)
        rel[i, j], rel[j, i] = m, m.T
        union = set(g) | set(h)
        if any(s <= union and not s <= set(g) and not s <= set(h) for s, _, _ in cons) or set(g) & set(h):
            scopes |= {(i, j), (j, i)}
    return BinaryInstance.from_arrays(big, names, dom, rel, frozenset(scopes), tuple(groups))


def unbinarize(b: BinaryInstance, values: Sequence[int], base_size: int) -> dict[str, int]:
    """Original assignment read off one element per new variable."""
    if b.groups is None:
        raise PreconditionError("instance does not record its variable groups")
    out: dict[str, int] = {}
    for group, code in zip(b.groups, values):
        for var, val in zip(group, decode_element(int(code), base_size, len(group))):
            if out.setdefault(var, val) != val:
                raise PreconditionError(f"inconsistent values for {var!r}")
    return out


# --------------------------------------------------------------------------- (2,3)-consistency


def _compose_all(rel: np.ndarray) -> np.ndarray:
    """``rel[x, y]`` intersected with ``rel[x, z] o rel[z, y]`` for every ``z``."""
    v, _, n, _ = rel.shape
    if v == 0:
        return rel.copy()
    f = rel.astype(np.float32)
    left = f.transpose(1, 0, 2, 3).reshape(v, v * n, n)  # [z] -> rows (x, a), cols c
    right = f.transpose(0, 2, 1, 3).reshape(v, n, v * n)  # [z] -> rows c, cols (y, b)
    out = np.ones((v * n, v * n), dtype=bool)
    for z in range(v):
        out &= (left[z] @ right[z]) > 0
    return rel & out.reshape(v, n, v, n).transpose(0, 2, 1, 3)


def _fixpoint_23(rel: np.ndarray) -> np.ndarray | None:
    if rel.shape[0] and rel.shape[-1] <= _kernels.MAX_BITS:
        return _kernels.pc_fixpoint(rel)
    while True:
        new = _compose_all(rel)
        if rel.shape[0] and (~np.einsum("iiaa->ia", new).any(axis=1)).any():
            return None
        if np.array_equal(new, rel):
            return new
        rel = new


def closure_domains(b: BinaryInstance, domains: np.ndarray) -> np.ndarray | None:
    """Domains of the (2,3)-consistent closure of ``b`` restricted to ``domains``, or ``None``."""
    domains = np.asarray(domains, dtype=bool) & b.domains
    if b.size <= _kernels.MAX_BITS and len(b.variables):
        return _kernels.restricted_domains(b.bits, _kernels.mask_bits(domains))
    sub = enforce_23_consistency(b.restrict(domains))
    return None if sub is None else np.array(sub.domains)


def enforce_23_consistency(b: BinaryInstance, trace: Trace | None = None) -> BinaryInstance | None:
    """Greatest (2,3)-consistent sub-instance, or ``None`` when a domain empties."""
    rel = _fixpoint_23(np.array(b.relations))
    if rel is None:
        if trace is not None:
            trace.append("pc23 UNSAT")
        return None
    new_dom = np.einsum("iiaa->ia", rel).reshape(b.domains.shape).copy()
    if trace is not None:
        for i, a in zip(*np.nonzero(b.domains & ~new_dom)):
            trace.append(f"pc23 remove {b.variables[i]}={int(a)}")
    return BinaryInstance(b.algebra, b.variables, _readonly(new_dom), _readonly(rel), b.scopes, b.groups)


def enforce_1_consistency(b: BinaryInstance, trace: Trace | None = None) -> BinaryInstance | None:
    """Prune domains until every constraint is subdirect; ``None`` on an empty domain."""
    dom = np.array(b.domains)
    rel = b.relations
    while True:
        live = rel & dom[:, None, :, None] & dom[None, :, None, :]
        new_dom = dom & live.any(axis=3).all(axis=1)
        if trace is not None:
            for i, a in zip(*np.nonzero(dom & ~new_dom)):
                trace.append(f"ac remove {b.variables[i]}={int(a)}")
        if len(b.variables) and (~new_dom.any(axis=1)).any():
            if trace is not None:
                trace.append("ac UNSAT")
            return None
        if np.array_equal(new_dom, dom):
            return b.restrict(dom)
        dom = new_dom


# --------------------------------------------------------------------------- patterns, LAC, SLAC


@dataclass(frozen=True)
class PathPattern:
    steps: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(tuple(s) for s in self.steps))
        for (_, y), (u, _) in zip(self.steps, self.steps[1:]):
            if y != u:
                raise PreconditionError("steps do not chain")

    @property
    def start(self):
        return self.steps[0][0]

    @property
    def end(self):
        return self.steps[-1][1]

    def inverse(self) -> PathPattern:
        return PathPattern(tuple((y, x) for x, y in reversed(self.steps)))


def pattern_image(b: BinaryInstance, elements: Iterable[int], pattern: PathPattern) -> frozenset[int]:
    """End elements of all realizations of ``pattern`` starting in ``elements``."""
    if not pattern.steps:
        return frozenset(elements)
    start = b.index(pattern.start)
    cur = np.zeros(b.size, dtype=bool)
    for a in elements:
        if not b.domains[start, a]:
            raise PreconditionError(f"{a} is not in the domain of {pattern.start!r}")
        cur[a] = True
    for x, y in pattern.steps:
        i, j = b.index(x), b.index(y)
        if i == j:
            raise PreconditionError("a step needs two distinct variables")
        cur = (cur[:, None] & b.relations[i, j]).any(axis=0)
    return frozenset(int(a) for a in np.flatnonzero(cur))


def _image_tables(b: BinaryInstance) -> np.ndarray:
    """``tables[i, j, a]`` is the bitmask of ``R[i, j]``-images of ``a``."""
    weights = (1 << np.arange(b.size, dtype=np.int64))
    return (b.relations.astype(np.int64) * weights).sum(axis=3)


def _mask(elements: Iterable[int]) -> int:
    m = 0
    for a in elements:
        m |= 1 << int(a)
    return m


def run_lac(b: BinaryInstance, start: Mapping, tables: np.ndarray | None = None) -> bool:
    """Linear arc consistency from the facts ``start``; ``False`` means a contradiction.

    Explores states ``(variable, subset)``.  A state is skipped when a visited
    state at the same variable holds a subset of it: images are monotone, so
    anything derivable from the larger set is derivable, smaller, from the
    smaller one.
    """
    if tables is None:
        tables = _image_tables(b)
    v = len(b.variables)
    image = tables.tolist()
    visited: list[list[int]] = [[] for _ in range(v)]
    queue = deque((b.index(x), _mask(s)) for x, s in start.items())

    def subsumed(i, m):
        return any(old & m == old for old in visited[i])

    while queue:
        i, m = queue.popleft()
        if m == 0:
            return False
        if subsumed(i, m):
            continue
        visited[i] = [old for old in visited[i] if old & m != m] + [m]
        row = image[i]
        bits = [a for a in range(b.size) if m >> a & 1]
        for j in range(v):
            if j == i:
                continue
            out = 0
            rj = row[j]
            for a in bits:
                out |= rj[a]
            if out == 0:
                return False
            if not subsumed(j, out):
                queue.append((j, out))
    return True


def run_slac(b: BinaryInstance, trace: Trace | None = None, shortcut: bool = True) -> dict[str, frozenset[int]] | None:
    """Singleton linear arc consistency; the surviving sets ``B_x`` or ``None``.

    With ``shortcut`` a (2,3)-consistent input is returned unchanged: every
    LAC state reached from ``(x, {a})`` at ``y`` then contains the nonempty
    image of ``a`` under ``R[x, y]``, so no probe can fail.
    """
    if shortcut and b.is_23_consistent():
        return {x: b.domain(x) for x in b.variables}
    dom = np.array(b.domains)
    changed = True
    while changed:
        changed = False
        cur = b.restrict(dom)
        tables = _image_tables(cur)
        base = {x: cur.domain(x) for x in cur.variables}
        for i, x in enumerate(b.variables):
            for a in np.flatnonzero(dom[i]):
                probe = dict(base)
                probe[x] = frozenset([int(a)])
                # the singleton start is explored first
                ordered = {x: probe[x], **{y: s for y, s in probe.items() if y != x}}
                t = tables.copy()
                t[:, i, :] &= 1 << int(a)
                if not run_lac(cur, ordered, t):
                    dom[i, a] = False
                    changed = True
                    if trace is not None:
                        trace.append(f"slac remove {x}={int(a)}")
                    if not dom[i].any():
                        if trace is not None:
                            trace.append("slac UNSAT")
                        return None
                    cur = b.restrict(dom)
                    tables = _image_tables(cur)
                    base = {y: cur.domain(y) for y in cur.variables}
    return {x: frozenset(int(a) for a in np.flatnonzero(dom[i])) for i, x in enumerate(b.variables)}


def slac_instance(b: BinaryInstance, trace: Trace | None = None) -> BinaryInstance | None:
    store = run_slac(b, trace)
    if store is None:
        return None
    mask = np.zeros_like(b.domains)
    for i, x in enumerate(b.variables):
        mask[i, list(store[x])] = True
    return b.restrict(mask)


def _raw_binary(b: BinaryInstance):
    from .csp import RawCsp

    v = len(b.variables)
    cons = [((i, j), b.relation(i, j)) for i in range(v) for j in range(i + 1, v)]
    return RawCsp([b.domain(i) for i in range(v)], cons)


def binary_oracle(b: BinaryInstance) -> tuple[int, ...] | None:
    """The lexicographically first solution of ``b``, or ``None``."""
    sol = next(_raw_binary(b).solutions(), None)
    return None if sol is None else tuple(sol)


def binary_solution_set(b: BinaryInstance, cap: int = 100_000) -> set[tuple[int, ...]]:
    """All solutions of ``b`` as value tuples in variable order (backtracking oracle)."""
    from .errors import ResourceLimitError

    out = set()
    for sol in _raw_binary(b).solutions():
        out.add(tuple(sol))
        if len(out) > cap:
            raise ResourceLimitError(f"more than {cap} solutions")
    return out
