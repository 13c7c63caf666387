"""Linear algebra over prime fields and coordinatization of simple affine modules."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .algebra import FiniteAlgebra, Term, clone_slice
from .errors import InvariantError, PreconditionError


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % d for d in range(2, int(p**0.5) + 1))


@dataclass(frozen=True)
class PrimeField:
    p: int

    def __post_init__(self):
        if not is_prime(self.p):
            raise PreconditionError(f"{self.p} is not prime")

    def inv(self, a: int) -> int:
        return pow(a, -1, self.p)


@dataclass(frozen=True)
class LinearSystem:
    field: PrimeField
    num_vars: int
    rows: tuple[tuple[tuple[int, ...], int], ...] = ()

    def __post_init__(self):
        p = self.field.p
        for coeffs, _ in self.rows:
            if len(coeffs) != self.num_vars:
                raise PreconditionError(f"row has {len(coeffs)} coefficients, expected {self.num_vars}")
        if not self.rows:
            object.__setattr__(self, "rows", ())
            return
        coeffs = (np.array([c for c, _ in self.rows], dtype=np.int64).reshape(len(self.rows), self.num_vars) % p).tolist()
        consts = (np.array([k for _, k in self.rows], dtype=np.int64) % p).tolist()
        object.__setattr__(self, "rows", tuple((tuple(c), k) for c, k in zip(coeffs, consts)))

    def with_rows(self, extra: Iterable[tuple[Sequence[int], int]]) -> LinearSystem:
        return LinearSystem(self.field, self.num_vars, self.rows + tuple((tuple(c), k) for c, k in extra))

    def satisfied_by(self, x: Sequence[int]) -> bool:
        p = self.field.p
        return all(sum(c * v for c, v in zip(coeffs, x)) % p == const for coeffs, const in self.rows)

    def dump(self) -> str:
        """One row per line: coefficients, then ``| constant``."""
        return "\n".join(" ".join(map(str, coeffs)) + f" | {const}" for coeffs, const in self.rows)


@dataclass(frozen=True)
class SolutionSpace:
    status: str  # "SAT" or "UNSAT"
    num_vars: int
    p: int
    particular: tuple[int, ...] | None
    basis: tuple[tuple[int, ...], ...]
    rank: int

    @property
    def sat(self) -> bool:
        return self.status == "SAT"

    def count(self) -> int:
        return self.p ** (self.num_vars - self.rank) if self.sat else 0

    def admits(self, fixes: Mapping[int, int]) -> bool:
        """Whether some solution has ``x_i = v`` for every ``i: v`` in ``fixes``."""
        if not self.sat:
            return False
        idx = sorted(fixes)
        if not self.basis:
            return all(self.particular[i] == fixes[i] % self.p for i in idx)
        rows = tuple((tuple(b[i] for b in self.basis), fixes[i] - self.particular[i]) for i in idx)
        return solve_system(LinearSystem(PrimeField(self.p), len(self.basis), rows)).sat

    def solutions(self) -> Iterable[tuple[int, ...]]:
        if not self.sat:
            return
        for coeffs in itertools.product(range(self.p), repeat=len(self.basis)):
            v = list(self.particular)
            for c, b in zip(coeffs, self.basis):
                for i, bi in enumerate(b):
                    v[i] = (v[i] + c * bi) % self.p
            yield tuple(v)


def _rref(field: PrimeField, rows: list[list[int]], ncols: int) -> tuple[list[list[int]], list[int]]:
    """Reduced row echelon form; pivot = first nonzero column, smallest row index."""
    p = field.p
    if not rows:
        return [], []
    m = np.array(rows, dtype=np.int64) % p
    inverse = np.array([0] + [field.inv(a) for a in range(1, p)], dtype=np.int64)
    pivots: list[int] = []
    top = 0
    for col in range(ncols):
        if top == len(m):
            break
        nz = np.flatnonzero(m[top:, col])
        if nz.size == 0:
            continue
        pick = top + int(nz[0])
        if pick != top:
            m[[top, pick]] = m[[pick, top]]
        m[top] = m[top] * inverse[m[top, col]] % p
        factors = m[:, col].copy()
        factors[top] = 0
        m = (m - np.outer(factors, m[top])) % p
        pivots.append(col)
        top += 1
    return m.tolist(), pivots


def solve_system(system: LinearSystem) -> SolutionSpace:
    p, n = system.field.p, system.num_vars
    aug = [list(coeffs) + [const] for coeffs, const in system.rows]
    red, pivots = _rref(system.field, aug, n)
    rank = len(pivots)
    if any(not any(r[:n]) and r[n] for r in red):
        return SolutionSpace("UNSAT", n, p, None, (), rank)
    particular = [0] * n
    for i, col in enumerate(pivots):
        particular[col] = red[i][n]
    free = [c for c in range(n) if c not in set(pivots)]
    basis = []
    for f in free:
        v = [0] * n
        v[f] = 1
        for i, col in enumerate(pivots):
            v[col] = -red[i][f] % p
        basis.append(tuple(v))
    return SolutionSpace("SAT", n, p, tuple(particular), tuple(basis), rank)


def fixes_in_solution(system: LinearSystem, fixes: Mapping[int, int]) -> bool:
    """Whether some solution has ``x_i = v`` for every ``i: v`` in ``fixes``."""
    extra = []
    for i, v in fixes.items():
        if not 0 <= i < system.num_vars:
            raise PreconditionError(f"unknown x{i}")
        coeffs = [0] * system.num_vars
        coeffs[i] = 1
        extra.append((coeffs, v))
    return solve_system(system.with_rows(extra)).sat


def block_in_solution(system: LinearSystem, var_index: int, value: int) -> bool:
    return fixes_in_solution(system, {var_index: value})


# --------------------------------------------------------------------------- affine modules


@dataclass(frozen=True, eq=False)
class AffineCoordinatization:
    """A bijection between an algebra and GF(p)^dim under which it is affine."""

    algebra: FiniteAlgebra
    field: PrimeField
    dim: int
    encoding: tuple[tuple[int, ...], ...]  # element -> coordinates
    zero: int
    maltsev: Term

    @property
    def p(self) -> int:
        return self.field.p

    def encode(self, a: int) -> tuple[int, ...]:
        return self.encoding[a]

    def decode(self, v: Sequence[int]) -> int:
        return self._decoding[tuple(v)]

    @property
    def _decoding(self) -> dict:
        d = self.__dict__.get("_dec")
        if d is None:
            d = {v: a for a, v in enumerate(self.encoding)}
            self.__dict__["_dec"] = d
        return d

    def transport(self, algebra: FiniteAlgebra, iso: Sequence[int]) -> AffineCoordinatization:
        """Coordinatize an algebra isomorphic to ours via ``iso`` (its element -> ours)."""
        return AffineCoordinatization(algebra, self.field, self.dim,
                                      tuple(self.encoding[iso[a]] for a in range(algebra.size)),
                                      iso.index(self.zero), self.maltsev)


@dataclass(frozen=True)
class AffineSearch:
    result: AffineCoordinatization | None
    exhaustive: bool  # a negative answer is proven, not just "not found within the bound"


def _maltsev_mask(tables: np.ndarray) -> np.ndarray:
    """Which of the stacked ternary tables satisfy m(x,y,y)=x=m(y,y,x)."""
    n = tables.shape[1]
    x, y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ok1 = (tables[:, x, y, y] == x).all(axis=(1, 2))
    ok2 = (tables[:, y, y, x] == x).all(axis=(1, 2))
    return ok1 & ok2


def _group_basis(plus: np.ndarray, zero: int, p: int) -> list[int] | None:
    """Greedy basis of the elementary abelian p-group, scanning elements in order."""
    n = plus.shape[0]
    span = {zero}
    basis = []
    for e in range(n):
        if e in span:
            continue
        basis.append(e)
        multiples = [zero]
        for _ in range(p - 1):
            multiples.append(int(plus[multiples[-1], e]))
        new = {int(plus[s, m]) for s in span for m in multiples}
        if len(new) != len(span) * p:
            return None
        span = new
    return basis if len(span) == n else None


def _coordinates(plus: np.ndarray, zero: int, p: int, basis: list[int]) -> tuple[tuple[int, ...], ...]:
    n = plus.shape[0]
    enc: list[tuple[int, ...] | None] = [None] * n
    for coeffs in itertools.product(range(p), repeat=len(basis)):
        e = zero
        for c, b in zip(coeffs, basis):
            for _ in range(c):
                e = int(plus[e, b])
        enc[e] = coeffs
    return tuple(enc)


def _central(alg: FiniteAlgebra, m: np.ndarray, plus: np.ndarray, zero: int) -> bool:
    """Every basic operation commutes with ``m``.

    With ``m(x,y,z) = x - y + z`` for an abelian group this is the same as
    each operation being affine, i.e. f(x+y) = f(x) + f(y) - f(0).
    """
    n = alg.size
    minus = np.empty_like(plus)
    minus[plus, np.arange(n)[None, :]] = np.arange(n)[:, None]  # minus[plus[a, b], b] = a
    for op in alg.ops:
        r = op.arity
        f = op.array
        f0 = f[(zero,) * r]
        g = np.indices((n,) * (2 * r))
        xs, ys = g[:r], g[r:]
        lhs = f[tuple(plus[xs[i], ys[i]] for i in range(r))]
        rhs = minus[plus[f[tuple(xs)], f[tuple(ys)]], f0]
        if not np.array_equal(lhs, rhs):
            return False
    return True


def _try_maltsev(alg: FiniteAlgebra, table: np.ndarray, term: Term) -> AffineCoordinatization | None:
    n = alg.size
    zero = 0
    plus = table[:, zero, :]  # x + y := m(x, 0, y)
    idx = np.arange(n)
    if not (np.array_equal(plus[zero], idx) and np.array_equal(plus, plus.T)):
        return None
    if not np.array_equal(plus[plus[:, :, None], idx[None, None, :]],
                          plus[idx[:, None, None], plus[None, :, :]]):
        return None
    # m must be x - y + z for this group
    minus = np.full_like(plus, -1)
    minus[plus, idx[None, :]] = idx[:, None]
    if (minus < 0).any():
        return None
    x, y, z = np.indices((n, n, n))
    if not np.array_equal(table, plus[minus[x, y], z]):
        return None
    orders = set()
    for e in range(1, n):
        k, acc = 1, e
        while acc != zero:
            acc = int(plus[acc, e])
            k += 1
        orders.add(k)
    if len(orders) != 1:
        return None
    p = orders.pop()
    if not is_prime(p):
        return None
    basis = _group_basis(plus, zero, p)
    if basis is None or not _central(alg, table, plus, zero):
        return None
    return AffineCoordinatization(alg, PrimeField(p), len(basis), _coordinates(plus, zero, p, basis), zero, term)


_AFFINE_CACHE: dict[tuple, AffineSearch] = {}


def affine_search(alg: FiniteAlgebra, term_depth_bound: int = 3) -> AffineSearch:
    """Look for a central Maltsev term making ``alg`` an affine GF(p)-space."""
    key = (alg.key, term_depth_bound)
    if key in _AFFINE_CACHE:
        return _AFFINE_CACHE[key]
    if alg.size == 1:
        result = AffineSearch(None, True)
    else:
        sl = clone_slice(alg, 3, term_depth_bound)
        result = AffineSearch(None, sl.exhaustive)
        stacked = np.stack(sl.tables)
        for i in np.flatnonzero(_maltsev_mask(stacked)):
            coord = _try_maltsev(alg, sl.tables[i], sl.terms[i])
            if coord is not None:
                result = AffineSearch(coord, True)
                break
    _AFFINE_CACHE[key] = result
    return result


def recognize_affine_module(alg: FiniteAlgebra, term_depth_bound: int = 3) -> AffineCoordinatization | None:
    return affine_search(alg, term_depth_bound).result


def compile_binary_constraint(relation: Iterable[tuple[int, int]], cx: AffineCoordinatization,
                              cy: AffineCoordinatization) -> LinearSystem:
    """Equations over ``dim(cx) + dim(cy)`` unknowns whose solutions decode to ``relation``."""
    if cx.p != cy.p:
        raise PreconditionError("coordinatizations over different fields")
    field = cx.field
    p = field.p
    n = cx.dim + cy.dim
    points = [cx.encode(a) + cy.encode(b) for a, b in sorted(set(relation))]
    if not points:
        raise PreconditionError("empty relation")
    base = points[0]
    directions = [[(v - b) % p for v, b in zip(pt, base)] for pt in points[1:]]
    red, pivots = _rref(field, directions, n) if directions else ([], [])
    direction_basis = [r for r in red if any(r)]
    if len(points) != p ** len(direction_basis):
        raise InvariantError("relation is not an affine subspace; was it closed under the Maltsev term?")
    normals = solve_system(LinearSystem(field, n, tuple((tuple(r), 0) for r in direction_basis))).basis
    rows = tuple((w, sum(wi * bi for wi, bi in zip(w, base)) % p) for w in normals)
    system = LinearSystem(field, n, rows)
    if not all(system.satisfied_by(pt) for pt in points):
        raise InvariantError("compiled equations reject a member of the relation")
    return system
