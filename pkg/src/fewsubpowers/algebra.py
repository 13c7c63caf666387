"""Finite idempotent algebras given by full operation tables.

Elements of an algebra of size ``n`` are the integers ``0..n-1``.  Tables are
stored dense in row-major order, so ``table[a0*n**(r-1) + ... + a_{r-1}]`` is
the value at ``(a0, ..., a_{r-1})``.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    DegenerateAlgebraError,
    InvariantError,
    MalformedTermError,
    PreconditionError,
    ResourceLimitError,
    SignatureMismatchError,
)

DEFAULT_CONGRUENCE_CAP = 12


@dataclass(frozen=True)
class Operation:
    name: str
    arity: int
    size: int
    table: tuple[int, ...]

    def __post_init__(self):
        if self.arity < 1:
            raise PreconditionError(f"operation {self.name!r} has arity {self.arity}")
        if len(self.table) != self.size**self.arity:
            raise PreconditionError(
                f"operation {self.name!r}: expected {self.size ** self.arity} entries, "
                f"got {len(self.table)}"
            )
        if any(not 0 <= v < self.size for v in self.table):
            raise PreconditionError(f"operation {self.name!r} has a value outside the universe")

    @classmethod
    def from_array(cls, name: str, array: np.ndarray) -> Operation:
        return cls(name, array.ndim, array.shape[0], tuple(int(v) for v in array.ravel()))

    @classmethod
    def from_function(cls, name: str, arity: int, size: int, fn) -> Operation:
        table = tuple(fn(*args) for args in itertools.product(range(size), repeat=arity))
        return cls(name, arity, size, table)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.array(self.table, dtype=np.int64).reshape((self.size,) * self.arity)
        arr.flags.writeable = False
        return arr

    def __call__(self, *args: int) -> int:
        return int(self.array[args])

    def is_idempotent(self) -> bool:
        return all(self.array[(a,) * self.arity] == a for a in range(self.size))

    def to_json(self) -> dict:
        return {"name": self.name, "arity": self.arity, "table": list(self.table)}


@dataclass(frozen=True, eq=False)
class FiniteAlgebra:
    size: int
    ops: tuple[Operation, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if self.size < 1:
            raise PreconditionError("an algebra needs a nonempty universe")
        for op in self.ops:
            if op.size != self.size:
                raise PreconditionError(f"operation {op.name!r} is over a universe of size {op.size}")
            if not op.is_idempotent():
                raise PreconditionError(f"operation {op.name!r} is not idempotent")

    @cached_property
    def key(self) -> bytes:
        h = hashlib.blake2b(digest_size=16)
        h.update(self.size.to_bytes(4, "little"))
        for op in self.ops:
            h.update(op.arity.to_bytes(2, "little"))
            h.update(op.array.astype(np.int32).tobytes())
        return h.digest()

    def __eq__(self, other):
        return isinstance(other, FiniteAlgebra) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @property
    def signature(self) -> tuple[int, ...]:
        return tuple(op.arity for op in self.ops)

    def to_json(self) -> dict:
        return {"name": self.name, "size": self.size, "operations": [op.to_json() for op in self.ops]}


# --------------------------------------------------------------------------- terms


@dataclass(frozen=True)
class Var:
    index: int

    @property
    def depth(self) -> int:
        return 0


@dataclass(frozen=True)
class App:
    op: int
    args: tuple

    @cached_property
    def depth(self) -> int:
        return 1 + max(a.depth for a in self.args)


Term = Union[Var, App]


def term_variables(t: Term) -> set[int]:
    if isinstance(t, Var):
        return {t.index}
    return set().union(*(term_variables(a) for a in t.args))


def check_term(alg: FiniteAlgebra, t: Term, arity: int) -> None:
    if isinstance(t, Var):
        if not 0 <= t.index < arity:
            raise MalformedTermError(f"variable x{t.index} out of range for arity {arity}")
        return
    if not 0 <= t.op < len(alg.ops):
        raise MalformedTermError(f"no basic operation with index {t.op}")
    if len(t.args) != alg.ops[t.op].arity:
        raise MalformedTermError(
            f"{alg.ops[t.op].name} takes {alg.ops[t.op].arity} arguments, got {len(t.args)}"
        )
    for a in t.args:
        check_term(alg, a, arity)


def term_to_str(alg: FiniteAlgebra, t: Term) -> str:
    if isinstance(t, Var):
        return f"x{t.index}"
    name = alg.ops[t.op].name or f"f{t.op}"
    return f"{name}({', '.join(term_to_str(alg, a) for a in t.args)})"


def evaluate_term(alg: FiniteAlgebra, t: Term, args: Sequence[int]) -> int:
    check_term(alg, t, len(args))
    return _eval(alg, t, tuple(args))


def _eval(alg, t, args):
    if isinstance(t, Var):
        return args[t.index]
    return alg.ops[t.op](*(_eval(alg, a, args) for a in t.args))


def term_table(alg: FiniteAlgebra, t: Term, arity: int) -> np.ndarray:
    """The full table of the induced ``arity``-ary term operation."""
    check_term(alg, t, arity)
    grid = np.indices((alg.size,) * arity)
    return _table(alg, t, grid)


def _table(alg, t, grid):
    if isinstance(t, Var):
        return grid[t.index]
    return alg.ops[t.op].array[tuple(_table(alg, a, grid) for a in t.args)]


def coordinatewise_apply(alg: FiniteAlgebra, op: Operation | Term, tuples: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Apply an operation or term to ``tuples`` one coordinate at a time."""
    lengths = {len(t) for t in tuples}
    if len(lengths) > 1:
        raise PreconditionError("tuples of different lengths")
    k = lengths.pop() if lengths else 0
    if isinstance(op, Operation):
        if len(tuples) != op.arity:
            raise PreconditionError(f"{op.name} takes {op.arity} arguments, got {len(tuples)}")
        return tuple(op(*(t[j] for t in tuples)) for j in range(k))
    check_term(alg, op, len(tuples))
    return tuple(_eval(alg, op, tuple(t[j] for t in tuples)) for j in range(k))


# --------------------------------------------------------------------------- constructions


def encode_tuple(t: Sequence[int], base: int) -> int:
    code = 0
    for v in t:
        code = code * base + v
    return code


def decode_element(code: int, base: int, length: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        code, v = divmod(code, base)
        out.append(v)
    return tuple(reversed(out))


def power(alg: FiniteAlgebra, k: int) -> FiniteAlgebra:
    """The ``k``-th direct power; tuples are encoded by :func:`encode_tuple`."""
    if k == 1:
        return alg
    n = alg.size
    big = n**k
    coords = np.array([decode_element(e, n, k) for e in range(big)], dtype=np.int64)  # (big, k)
    weights = n ** np.arange(k - 1, -1, -1)
    ops = []
    for op in alg.ops:
        grid = np.indices((big,) * op.arity).reshape(op.arity, -1)
        cols = [op.array[tuple(coords[grid[i], j] for i in range(op.arity))] for j in range(k)]
        values = np.stack(cols, axis=1) @ weights
        ops.append(Operation(op.name, op.arity, big, tuple(int(v) for v in values)))
    return FiniteAlgebra(big, tuple(ops), f"{alg.name}^{k}")


def subalgebra(alg: FiniteAlgebra, elements: Iterable[int]) -> tuple[FiniteAlgebra, tuple[int, ...]]:
    """Relabel the subuniverse ``elements`` as ``0..m-1`` (in increasing order)."""
    elems = tuple(sorted(set(elements)))
    if not elems:
        raise PreconditionError("empty subuniverse")
    index = {e: i for i, e in enumerate(elems)}
    sel = np.array(elems)
    ops = []
    for op in alg.ops:
        sub = op.array[np.ix_(*([sel] * op.arity))]
        try:
            relabeled = tuple(index[int(v)] for v in sub.ravel())
        except KeyError:
            raise PreconditionError("elements do not form a subuniverse") from None
        ops.append(Operation(op.name, op.arity, len(elems), relabeled))
    return FiniteAlgebra(len(elems), tuple(ops), f"{alg.name}|{len(elems)}"), elems


@dataclass(frozen=True)
class Subuniverse:
    elements: frozenset
    parent: FiniteAlgebra = field(repr=False)

    def __len__(self):
        return len(self.elements)

    def __contains__(self, item):
        return item in self.elements


def close_elements(alg: FiniteAlgebra, generators: Iterable[int]) -> frozenset[int]:
    current = np.array(sorted(set(generators)), dtype=np.int64)
    if current.size == 0:
        raise PreconditionError("empty generator set")
    while True:
        found = [current]
        for op in alg.ops:
            found.append(op.array[np.ix_(*([current] * op.arity))].ravel())
        nxt = np.unique(np.concatenate(found))
        if nxt.size == current.size:
            return frozenset(int(v) for v in current)
        current = nxt


def _close_tuples(alg: FiniteAlgebra, generators) -> frozenset[tuple[int, ...]]:
    rows = sorted(set(tuple(g) for g in generators))
    k = len(rows[0])
    if any(len(r) != k for r in rows):
        raise PreconditionError("generators of different lengths")
    current = np.array(rows, dtype=np.int64).reshape(len(rows), k)
    while True:
        found = [current]
        for op in alg.ops:
            m = len(current)
            idx = np.indices((m,) * op.arity).reshape(op.arity, -1)
            found.append(np.stack([op.array[tuple(current[idx[i], j] for i in range(op.arity))]
                                   for j in range(k)], axis=1))
        nxt = np.unique(np.concatenate(found), axis=0)
        if len(nxt) == len(current):
            return frozenset(tuple(int(v) for v in row) for row in current)
        current = nxt


def generate_subuniverse(alg: FiniteAlgebra, generators: Iterable) -> Subuniverse:
    """Least subuniverse containing ``generators``.

    Generators are either elements of ``alg`` or equal-length tuples, in which
    case the closure is taken in the corresponding power of ``alg``.
    """
    gens = list(generators)
    if not gens:
        raise PreconditionError("empty generator set")
    if isinstance(gens[0], (tuple, list)):
        for g in gens:
            if any(not 0 <= v < alg.size for v in g):
                raise PreconditionError(f"generator {g} outside the universe")
        return Subuniverse(_close_tuples(alg, gens), alg)
    if any(not 0 <= g < alg.size for g in gens):
        raise PreconditionError("generator outside the universe")
    return Subuniverse(close_elements(alg, gens), alg)


# --------------------------------------------------------------------------- congruences


def _canonical(labels: Sequence[int]) -> tuple[int, ...]:
    seen: dict[int, int] = {}
    return tuple(seen.setdefault(v, len(seen)) for v in labels)


@dataclass(frozen=True)
class Congruence:
    """An equivalence on ``0..n-1`` given by block labels in first-occurrence order."""

    partition: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "partition", _canonical(self.partition))

    @classmethod
    def from_blocks(cls, size: int, blocks: Iterable[Iterable[int]]) -> Congruence:
        labels = list(range(size))
        for i, block in enumerate(blocks):
            for e in block:
                labels[e] = size + i
        return cls(tuple(labels))

    @classmethod
    def bottom(cls, size: int) -> Congruence:
        return cls(tuple(range(size)))

    @classmethod
    def top(cls, size: int) -> Congruence:
        return cls((0,) * size)

    @property
    def size(self) -> int:
        return len(self.partition)

    @property
    def block_count(self) -> int:
        return max(self.partition) + 1 if self.partition else 0

    def blocks(self) -> list[frozenset[int]]:
        out: list[set[int]] = [set() for _ in range(self.block_count)]
        for e, b in enumerate(self.partition):
            out[b].add(e)
        return [frozenset(b) for b in out]

    def related(self, a: int, b: int) -> bool:
        return self.partition[a] == self.partition[b]

    def __le__(self, other: Congruence) -> bool:
        return all(other.partition[a] == other.partition[b]
                   for a, b in zip(range(self.size), self._reps()))

    def _reps(self):
        first: dict[int, int] = {}
        return [first.setdefault(b, a) for a, b in enumerate(self.partition)]

    def __lt__(self, other: Congruence) -> bool:
        return self <= other and self != other

    def join(self, other: Congruence) -> Congruence:
        uf = _UnionFind(self.size)
        for labels in (self.partition, other.partition):
            first: dict[int, int] = {}
            for a, b in enumerate(labels):
                uf.union(a, first.setdefault(b, a))
        return Congruence(tuple(uf.find(a) for a in range(self.size)))


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def _translates(op: Operation, a: int, b: int):
    """All pairs (f(..a..), f(..b..)) with one varying position."""
    for i in range(op.arity):
        yield np.take(op.array, a, axis=i).ravel(), np.take(op.array, b, axis=i).ravel()


def generated_congruence(alg: FiniteAlgebra, pairs: Iterable[tuple[int, int]]) -> Congruence:
    uf = _UnionFind(alg.size)
    pending = []
    for a, b in pairs:
        if uf.union(a, b):
            pending.append((a, b))
    while pending:
        a, b = pending.pop()
        for op in alg.ops:
            for us, vs in _translates(op, a, b):
                for u, v in zip(us.tolist(), vs.tolist()):
                    if uf.union(u, v):
                        pending.append((u, v))
    return Congruence(tuple(uf.find(a) for a in range(alg.size)))


def is_compatible(alg: FiniteAlgebra, theta: Congruence) -> bool:
    labels = np.array(theta.partition)
    for a in range(alg.size):
        for b in range(a + 1, alg.size):
            if labels[a] != labels[b]:
                continue
            for op in alg.ops:
                for us, vs in _translates(op, a, b):
                    if np.any(labels[us] != labels[vs]):
                        return False
    return True


def _check_cap(alg, cap):
    if alg.size > cap:
        raise ResourceLimitError(f"algebra of size {alg.size} exceeds the congruence cap {cap}")


_CON_CACHE: dict[bytes, tuple[Congruence, ...]] = {}


def all_congruences(alg: FiniteAlgebra, cap: int = DEFAULT_CONGRUENCE_CAP) -> list[Congruence]:
    """Every congruence, as joins of principal congruences; sorted by block count descending."""
    _check_cap(alg, cap)
    cached = _CON_CACHE.get(alg.key)
    if cached is None:
        principal = {generated_congruence(alg, [(a, b)])
                     for a in range(alg.size) for b in range(a + 1, alg.size)}
        found = {Congruence.bottom(alg.size)} | principal
        frontier = set(found)
        while frontier:
            new = {c.join(p) for c in frontier for p in principal} - found
            found |= new
            frontier = new
        cached = tuple(sorted(found, key=lambda c: (-c.block_count, c.partition)))
        _CON_CACHE[alg.key] = cached
    return list(cached)


def maximal_congruences(alg: FiniteAlgebra, cap: int = DEFAULT_CONGRUENCE_CAP) -> list[Congruence]:
    top = Congruence.top(alg.size)
    proper = [c for c in all_congruences(alg, cap) if c != top]
    return [c for c in proper if not any(c < d for d in proper)]


def quotient(alg: FiniteAlgebra, theta: Congruence) -> tuple[FiniteAlgebra, tuple[int, ...]]:
    """The quotient algebra and the map element -> block index."""
    if theta.size != alg.size:
        raise PreconditionError("partition size does not match the algebra")
    if not is_compatible(alg, theta):
        raise InvariantError("partition is not compatible with the operations")
    labels = np.array(theta.partition)
    reps = np.array([min(b) for b in theta.blocks()])
    ops = []
    for op in alg.ops:
        sub = op.array[np.ix_(*([reps] * op.arity))]
        ops.append(Operation(op.name, op.arity, len(reps), tuple(int(v) for v in labels[sub].ravel())))
    return FiniteAlgebra(len(reps), tuple(ops), f"{alg.name}/~"), theta.partition


def is_simple(alg: FiniteAlgebra, cap: int = DEFAULT_CONGRUENCE_CAP) -> bool:
    if alg.size == 1:
        raise DegenerateAlgebraError("a one-element algebra is neither simple nor non-simple here")
    return len(all_congruences(alg, cap)) == 2


def linkedness_congruences(relation: Iterable[tuple[int, int]], alg_a: FiniteAlgebra,
                           alg_b: FiniteAlgebra) -> tuple[Congruence, Congruence]:
    """Linkedness congruences of a subdirect ``relation`` of ``alg_a x alg_b``.

    ``a ~ a'`` when both are related to a common ``b`` (transitively closed);
    dually on the second factor.
    """
    pairs = sorted(set(relation))
    if not pairs:
        raise PreconditionError("empty relation")
    if {a for a, _ in pairs} != set(range(alg_a.size)) or {b for _, b in pairs} != set(range(alg_b.size)):
        raise PreconditionError("relation is not subdirect")
    uf = _UnionFind(alg_a.size + alg_b.size)
    for a, b in pairs:
        uf.union(a, alg_a.size + b)
    alpha = Congruence(tuple(uf.find(a) for a in range(alg_a.size)))
    beta = Congruence(tuple(uf.find(alg_a.size + b) for b in range(alg_b.size)))
    if not (is_compatible(alg_a, alpha) and is_compatible(alg_b, beta)):
        raise InvariantError("linkedness relation is not a congruence; is the relation closed?")
    return alpha, beta


def find_isomorphism(a1: FiniteAlgebra, a2: FiniteAlgebra) -> tuple[int, ...] | None:
    """A bijection ``phi`` with ``phi[f1(x..)] == f2(phi[x]..)`` for paired operations."""
    if a1.signature != a2.signature:
        raise SignatureMismatchError(f"signatures {a1.signature} and {a2.signature} differ")
    if a1.size != a2.size:
        return None
    n = a1.size
    # each entry is checked as soon as its arguments and its value are all mapped
    checks: list[list[tuple[int, tuple[int, ...], int]]] = [[] for _ in range(n)]
    for k, op in enumerate(a1.ops):
        for args in itertools.product(range(n), repeat=op.arity):
            val = op.array[args].item()
            checks[max(max(args), val)].append((k, args, val))
    phi = [-1] * n
    used = [False] * n

    def extend(i):
        if i == n:
            return True
        for img in range(n):
            if used[img]:
                continue
            phi[i] = img
            used[img] = True
            if all(phi[val] == a2.ops[k].array[tuple(phi[a] for a in args)]
                   for k, args, val in checks[i]) and extend(i + 1):
                return True
            used[img] = False
        phi[i] = -1
        return False

    return tuple(phi) if extend(0) else None


# --------------------------------------------------------------------------- clone search


@dataclass
class CloneSlice:
    """Term operations of one arity found by breadth-first composition."""

    arity: int
    tables: list[np.ndarray]
    terms: list[Term]
    exhaustive: bool


_CLONE_CACHE: dict[tuple, CloneSlice] = {}


def clone_slice(alg: FiniteAlgebra, arity: int, depth_bound: int, budget: int = 200_000) -> CloneSlice:
    """Distinct ``arity``-ary term operations of depth at most ``depth_bound``.

    ``exhaustive`` is set when a level adds nothing new, i.e. the whole
    ``arity``-ary part of the clone was enumerated.  ``budget`` bounds the number
    of compositions tried per level.
    """
    key = (alg.key, arity, depth_bound, budget)
    if key in _CLONE_CACHE:
        return _CLONE_CACHE[key]
    grid = np.indices((alg.size,) * arity)
    tables = [grid[i] for i in range(arity)]
    terms: list[Term] = [Var(i) for i in range(arity)]
    seen = {t.tobytes() for t in tables}
    newest_start = 0
    exhaustive = False
    for _ in range(depth_bound):
        level_tables, level_terms = [], []
        old_count = len(tables)
        truncated = False
        for k, op in enumerate(alg.ops):
            combos = old_count**op.arity - newest_start**op.arity
            if combos > budget:
                truncated = True
                continue
            for idx in itertools.product(range(old_count), repeat=op.arity):
                if max(idx) < newest_start:
                    continue
                t = op.array[tuple(tables[i] for i in idx)]
                b = t.tobytes()
                if b not in seen:
                    seen.add(b)
                    level_tables.append(t)
                    level_terms.append(App(k, tuple(terms[i] for i in idx)))
        newest_start = old_count
        tables.extend(level_tables)
        terms.extend(level_terms)
        if not level_tables and not truncated:
            exhaustive = True
            break
    result = CloneSlice(arity, tables, terms, exhaustive)
    _CLONE_CACHE[key] = result
    return result
