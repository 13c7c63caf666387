"""Affine consistency: test pairs, test instances over affine quotients, block pruning."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .algebra import (
    Congruence,
    FiniteAlgebra,
    close_elements,
    find_isomorphism,
    maximal_congruences,
    quotient,
    subalgebra,
)
from .consistency import BinaryInstance, Trace, closure_domains, enforce_23_consistency
from .errors import InvariantError, PreconditionError, ResourceLimitError
from .linear import AffineCoordinatization, LinearSystem, compile_binary_constraint, recognize_affine_module, solve_system


@dataclass(frozen=True)
class AffineCaps:
    generator_cap: int = 2
    term_depth_bound: int = 3
    congruence_cap: int = 12
    subuniverse_cap: int = 4096
    verify_paths: bool = False
    check_invariants: bool = False


@dataclass(frozen=True, eq=False)
class TestPair:
    var: str
    elements: tuple[int, ...]
    theta: Congruence  # on positions of ``elements``
    coordinatization: AffineCoordinatization = field(repr=False)  # of A / theta, element t = block t

    @property
    def blocks(self) -> tuple[frozenset[int], ...]:
        out: list[set[int]] = [set() for _ in range(self.theta.block_count)]
        for a, t in zip(self.elements, self.theta.partition):
            out[t].add(a)
        return tuple(frozenset(b) for b in out)

    def labels(self, size: int) -> np.ndarray:
        lab = np.full(size, -1, dtype=np.int64)
        lab[list(self.elements)] = self.theta.partition
        return lab

    def describe(self) -> str:
        blocks = " ".join("{" + ",".join(map(str, sorted(b))) + "}" for b in self.blocks)
        return f"{self.var} A={{{','.join(map(str, self.elements))}}} blocks={blocks} p={self.coordinatization.p}"


@dataclass(frozen=True, eq=False)
class TestInstance:
    pair: TestPair
    relevant: tuple[str, ...]  # pair.var first
    labels: dict = field(repr=False)  # variable -> (N,) block labels, -1 outside R+(A)
    system: LinearSystem = field(repr=False)

    def unknowns(self, var: str) -> list[int]:
        d = self.pair.coordinatization.dim
        i = self.relevant.index(var)
        return list(range(i * d, (i + 1) * d))

    def strands(self) -> list[dict[str, frozenset[int]]]:
        """For each block of the base pair, the linked block at every relevant variable."""
        out = []
        for t in range(self.pair.theta.block_count):
            out.append({y: frozenset(int(a) for a in np.flatnonzero(lab == t)) for y, lab in self.labels.items()})
        return out


@dataclass(frozen=True, eq=False)
class PassiveSubinstance:
    pair: TestPair
    block: frozenset[int]
    domains: np.ndarray = field(repr=False)  # (V, N) mask
    live: bool = True

    @property
    def var(self) -> str:
        return self.pair.var

    def describe(self, b: BinaryInstance) -> str:
        return f"{self.var} B={{{','.join(map(str, sorted(self.block)))}}} sizes={tuple(int(c) for c in self.domains.sum(axis=1))}"


# --------------------------------------------------------------------------- images and test pairs


def r_plus(b: BinaryInstance, x, y, elements: Iterable[int]) -> frozenset[int]:
    """Elements of ``S_y`` related to some element of ``elements`` by ``R_{x,y}``."""
    i, j = b.index(x), b.index(y)
    if i == j:
        raise PreconditionError("r_plus needs two distinct variables")
    mask = np.zeros(b.size, dtype=bool)
    for a in elements:
        if not b.domains[i, a]:
            raise PreconditionError(f"{a} is not in the domain of {b.variables[i]!r}")
        mask[a] = True
    return frozenset(int(c) for c in np.flatnonzero(_image(b, i, j, mask)))


def _image(b: BinaryInstance, i: int, j: int, mask: np.ndarray) -> np.ndarray:
    return (b.relations[i, j] & mask[:, None]).any(axis=0)


_PAIR_CACHE: dict[tuple, list] = {}


def _subuniverses(alg: FiniteAlgebra, domain: tuple[int, ...], cap: int, gen_cap: int) -> list[tuple[int, ...]]:
    found = {domain}
    for r in range(2, gen_cap + 1):
        for gens in itertools.combinations(domain, r):
            found.add(tuple(sorted(close_elements(alg, gens))))
            if len(found) > cap:
                raise ResourceLimitError(f"more than {cap} subuniverses in domain {domain}")
    return [s for s in found if len(s) > 1]


def _domain_pairs(alg: FiniteAlgebra, domain: tuple[int, ...], caps: AffineCaps) -> list:
    key = (alg.key, domain, caps.generator_cap, caps.term_depth_bound, caps.congruence_cap, caps.subuniverse_cap)
    if key in _PAIR_CACHE:
        return _PAIR_CACHE[key]
    out = []
    for elems in _subuniverses(alg, domain, caps.subuniverse_cap, caps.generator_cap):
        sub, _ = subalgebra(alg, elems)
        for theta in maximal_congruences(sub, caps.congruence_cap):
            q, _ = quotient(sub, theta)
            coord = recognize_affine_module(q, caps.term_depth_bound)
            if coord is not None:
                out.append((elems, theta, coord))
    out.sort(key=lambda e: (-len(e[0]), e[0], e[1].partition))
    _PAIR_CACHE[key] = out
    return out


def enumerate_test_pairs(b: BinaryInstance, caps: AffineCaps = AffineCaps()) -> list[TestPair]:
    """All ``(x, A, theta)`` with ``A / theta`` a simple affine module.

    Per variable (in order) larger subuniverses come first, so a subuniverse
    lying inside a block of an earlier one is always listed after it.
    """
    pairs = []
    for i, x in enumerate(b.variables):
        dom = tuple(int(a) for a in np.flatnonzero(b.domains[i]))
        if len(dom) < 2:
            continue
        for elems, theta, coord in _domain_pairs(b.algebra, dom, caps):
            pairs.append(TestPair(x, elems, theta, coord))
    return pairs


# --------------------------------------------------------------------------- relevance and test instances


def _linked_labels(b: BinaryInstance, i: int, j: int, labels: np.ndarray, blocks: int) -> np.ndarray | None:
    """Labels at ``j`` induced by block labels at ``i`` through ``R_{i,j}``, or ``None`` if blocks collide."""
    out = np.full(b.size, -1, dtype=np.int64)
    rel = b.relations[i, j]
    for t in range(blocks):
        img = rel[labels == t].any(axis=0)
        if (out[img] >= 0).any():
            return None
        out[img] = t
    return out


def relevant_congruence(b: BinaryInstance, pair: TestPair, y, caps: AffineCaps = AffineCaps()) -> Congruence | None:
    """The congruence ``alpha_y`` on ``R+_{x,y}(A)`` (positions in sorted order), or ``None``."""
    labels = _relevant_labels(b, pair, b.index(y), caps)
    if labels is None:
        return None
    return Congruence(tuple(int(t) for t in labels[labels >= 0]))


_COMPAT_CACHE: dict[tuple, bool] = {}


def _labels_compatible(alg: FiniteAlgebra, lab: np.ndarray) -> bool:
    """Whether the partition of ``{a : lab[a] >= 0}`` by ``lab`` is a congruence of that subalgebra."""
    key = (alg.key, lab.tobytes())
    hit = _COMPAT_CACHE.get(key)
    if hit is not None:
        return hit
    elems = np.flatnonzero(lab >= 0)
    q = int(lab.max()) + 1
    ok = True
    for op in alg.ops:
        sub = op.array[np.ix_(*([elems] * op.arity))]
        out = lab[sub].ravel()
        if (out < 0).any():
            raise PreconditionError("labelled elements do not form a subuniverse")
        grids = np.indices((len(elems),) * op.arity).reshape(op.arity, -1)
        code = np.zeros(grids.shape[1], dtype=np.int64)
        for g in grids:
            code = code * q + lab[elems][g]
        seen = np.full(q**op.arity, -1, dtype=np.int64)
        seen[code] = out
        if not np.array_equal(seen[code], out):
            ok = False
            break
    _COMPAT_CACHE[key] = ok
    return ok


def _all_linked_labels(b: BinaryInstance, i: int, base: np.ndarray, q: int) -> np.ndarray:
    """Row ``j`` holds the labels induced at ``j`` through ``R_{i,j}``; rows with colliding blocks are all -1."""
    onehot = (base[:, None] == np.arange(q)[None, :]).astype(np.float32)  # (N, q)
    hits = np.einsum("at,jab->jtb", onehot, b.relations[i].astype(np.float32)) > 0  # (V, q, N)
    clean = (hits.sum(axis=1) <= 1).all(axis=1) & hits.any(axis=2).all(axis=1)
    lab = np.where(hits.any(axis=1), hits.argmax(axis=1), -1)
    lab[~clean] = -1
    return lab


def _relevant_labels(b: BinaryInstance, pair: TestPair, j: int, caps: AffineCaps,
                     base: np.ndarray | None = None) -> np.ndarray | None:
    i = b.index(pair.var)
    if i == j:
        raise PreconditionError("y must differ from the base variable")
    if base is None:
        base = pair.labels(b.size)
    lab = _linked_labels(b, i, j, base, pair.theta.block_count)
    return _accept(b, pair, j, lab, caps)


def _accept(b: BinaryInstance, pair: TestPair, j: int, lab: np.ndarray | None, caps: AffineCaps):
    q = pair.theta.block_count
    if lab is None or (lab < 0).all() or int(lab.max()) + 1 != q or len(set(lab[lab >= 0].tolist())) != q:
        return None
    # closing the linkage under the operations would merge blocks linked to distinct theta-blocks
    if not _labels_compatible(b.algebra, lab):
        return None
    if caps.check_invariants:
        elems = tuple(int(a) for a in np.flatnonzero(lab >= 0))
        sub, _ = subalgebra(b.algebra, elems)
        qy, _ = quotient(sub, Congruence(tuple(int(t) for t in lab[list(elems)])))
        if find_isomorphism(qy, pair.coordinatization.algebra) is None:
            raise InvariantError(f"quotient at {b.variables[j]!r} is not isomorphic to A/theta")
    return lab


def _verify_paths(b: BinaryInstance, pair: TestPair, labels: dict, caps: AffineCaps) -> None:
    """Re-derive every label map along length-2 and length-3 patterns through relevant variables."""
    q = pair.theta.block_count
    names = list(labels)
    for y in names[1:]:
        j = b.index(y)
        for mid in names[1:]:
            if mid == y:
                continue
            via = _linked_labels(b, b.index(mid), j, labels[mid], q)
            if via is None or not np.array_equal(via, labels[y]):
                raise InvariantError(f"linkage at {y!r} via {mid!r} differs from the direct one")
        for m1, m2 in itertools.islice(itertools.permutations(names[1:], 2), 16):
            if y in (m1, m2):
                continue
            first = _linked_labels(b, b.index(m1), b.index(m2), labels[m1], q)
            via = None if first is None else _linked_labels(b, b.index(m2), j, first, q)
            if via is None or not np.array_equal(via, labels[y]):
                raise InvariantError(f"linkage at {y!r} via {m1!r},{m2!r} differs from the direct one")


_COMPILE_CACHE: dict[tuple, LinearSystem] = {}


def _compiled(matrix: np.ndarray, coord: AffineCoordinatization) -> tuple:
    key = (matrix.tobytes(), matrix.shape, coord.p, coord.encoding)
    if key not in _COMPILE_CACHE:
        rel = [(int(s), int(t)) for s, t in zip(*np.nonzero(matrix))]
        _COMPILE_CACHE[key] = compile_binary_constraint(rel, coord, coord).rows
    return _COMPILE_CACHE[key]


def build_test_instance(b: BinaryInstance, pair: TestPair, caps: AffineCaps = AffineCaps()) -> TestInstance:
    i = b.index(pair.var)
    if not b.domains[i, list(pair.elements)].all():
        raise PreconditionError("A is not inside the current domain")
    base = pair.labels(b.size)
    q = pair.theta.block_count
    linked = _all_linked_labels(b, i, base, q)
    labels = {pair.var: base}
    for j, y in enumerate(b.variables):
        if j != i:
            lab = _accept(b, pair, j, linked[j], caps)
            if lab is not None:
                labels[y] = lab
    if caps.verify_paths:
        _verify_paths(b, pair, labels, caps)
    coord = pair.coordinatization
    d = coord.dim
    names = list(labels)
    idx = [b.index(v) for v in names]
    lab = np.stack([labels[v] for v in names])  # (r, N)
    onehot = (lab[:, :, None] == np.arange(q)[None, None, :]).astype(np.float32)  # (r, N, q)
    rel = b.relations[np.ix_(idx, idx)].astype(np.float32)  # (r, r, N, N)
    induced = np.matmul(np.matmul(onehot.transpose(0, 2, 1)[:, None], rel), onehot[None]) > 0  # (r, r, q, q)
    if not (induced.any(axis=3).all() and induced.any(axis=2).all()):
        raise InvariantError("test instance is not 1-consistent")
    rows = []
    width = d * len(names)
    tight = ~induced.reshape(len(names), len(names), -1).all(axis=2)
    for u, w in zip(*np.nonzero(np.triu(tight, 1))):
        for coeffs, const in _compiled(induced[u, w], coord):
            full = [0] * width
            full[u * d:(u + 1) * d] = coeffs[:d]
            full[w * d:(w + 1) * d] = coeffs[d:]
            rows.append((tuple(full), const))
    system = LinearSystem(coord.field, width, tuple(rows))
    return TestInstance(pair, tuple(names), labels, system)


# --------------------------------------------------------------------------- the pass


def block_domains(b: BinaryInstance, x, block: Iterable[int]) -> np.ndarray:
    """``B`` at ``x`` and ``R+_{x,y}(B)`` at every other ``y``."""
    i = b.index(x)
    mask = np.zeros(b.size, dtype=bool)
    mask[list(block)] = True
    mask &= b.domains[i]
    doms = b.relations[i][:, mask].any(axis=1)  # (V, N)
    doms[i] = mask
    return doms


def block_subinstance(b: BinaryInstance, x, block: Iterable[int]) -> BinaryInstance:
    return b.restrict(block_domains(b, x, block))


def _remove(b: BinaryInstance, i: int, elements: Iterable[int]) -> BinaryInstance:
    mask = np.ones_like(b.domains)
    mask[i, list(elements)] = False
    return b.restrict(mask)


def affine_consistency_pass(b: BinaryInstance, caps: AffineCaps = AffineCaps(), trace: Trace | None = None,
                            stats: dict | None = None,
                            report: list | None = None) -> tuple[BinaryInstance | None, list[PassiveSubinstance]]:
    """Run the test pairs in order, pruning failed blocks, until a full sweep prunes nothing.

    Returns the pruned instance (``None`` when a domain empties) and the
    passive subinstances recorded during the final, pruning-free sweep.
    """
    stats = stats if stats is not None else {}
    for key in ("test_instances", "blocks_pruned", "block_subinstances"):
        stats.setdefault(key, 0)
    cur = b
    while True:
        pruned = False
        passives: list[PassiveSubinstance] = []
        checked: dict[tuple[int, frozenset], np.ndarray | None] = {}
        sweep_report = []
        for pair in enumerate_test_pairs(cur, caps):
            i = cur.index(pair.var)
            if not cur.domains[i, list(pair.elements)].all():
                continue
            ti = build_test_instance(cur, pair, caps)
            stats["test_instances"] += 1
            space = solve_system(ti.system)
            xs = ti.unknowns(pair.var)
            coord = pair.coordinatization
            blocks = pair.blocks
            failing = [t for t in range(len(blocks))
                       if not space.admits(dict(zip(xs, coord.encode(t))))]
            entry = {"pair": pair.describe(), "relevant": list(ti.relevant),
                     "equations": len(ti.system.rows), "unknowns": ti.system.num_vars,
                     "system": space.status, "pruned": []}
            if failing:
                gone = sorted(set().union(*(blocks[t] for t in failing)))
                entry["pruned"].extend(sorted(blocks[t]) for t in failing)
                stats["blocks_pruned"] += len(failing)
                if trace is not None:
                    trace.append(f"affine {pair.describe()} system={space.status} remove {pair.var}={gone}")
                cur = enforce_23_consistency(_remove(cur, i, gone), trace)
                pruned = True
                checked.clear()
                if cur is None:
                    sweep_report.append(entry)
                    _extend(report, sweep_report)
                    return None, []
            for t, block in enumerate(blocks):
                if t in failing:
                    continue
                live = frozenset(a for a in block if cur.domains[i, a])
                if not live:
                    continue
                key = (i, live)
                if key not in checked:
                    stats["block_subinstances"] += 1
                    checked[key] = closure_domains(cur, block_domains(cur, i, live))
                doms = checked[key]
                if doms is None:
                    entry["pruned"].append(sorted(live))
                    stats["blocks_pruned"] += 1
                    if trace is not None:
                        trace.append(f"affine block {pair.describe()} remove {pair.var}={sorted(live)}")
                    cur = enforce_23_consistency(_remove(cur, i, live), trace)
                    pruned = True
                    checked.clear()
                    if cur is None:
                        sweep_report.append(entry)
                        _extend(report, sweep_report)
                        return None, []
                else:
                    passives.append(PassiveSubinstance(pair, live, doms))
            sweep_report.append(entry)
        _extend(report, sweep_report)
        if not pruned:
            return cur, passives


def _extend(report, entries):
    if report is not None:
        report.extend(entries)


def update_passive(passives: Sequence[PassiveSubinstance], reduced: BinaryInstance) -> list[PassiveSubinstance]:
    """Intersect every passive subinstance with ``reduced``; drop those that no longer meet it."""
    out = []
    for ps in passives:
        doms = ps.domains & reduced.domains
        if doms.any(axis=1).all():
            out.append(PassiveSubinstance(ps.pair, ps.block & frozenset(np.flatnonzero(doms[reduced.index(ps.var)]).tolist()),
                                          doms, ps.live))
    return out


def format_report(report: Sequence[dict]) -> str:
    lines = []
    for e in report:
        pruned = "; ".join("{" + ",".join(map(str, blk)) + "}" for blk in e["pruned"]) or "-"
        lines.append(f"{e['pair']} relevant={','.join(e['relevant'])} system={e['equations']}x{e['unknowns']} "
                     f"{e['system']} pruned={pruned}")
    return "\n".join(lines)
