"""Relational templates, CSP instances, polymorphisms and the brute-force oracle."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .algebra import FiniteAlgebra, Operation
from .errors import PreconditionError, ResourceLimitError

Assignment = dict  # variable name -> domain element

SINGLETON_PREFIX = "const_"
RAW_ENUMERATION_LIMIT = 10**6


@dataclass(frozen=True)
class Relation:
    name: str
    arity: int
    tuples: frozenset

    def __post_init__(self):
        object.__setattr__(self, "tuples", frozenset(tuple(t) for t in self.tuples))
        if any(len(t) != self.arity for t in self.tuples):
            raise PreconditionError(f"relation {self.name!r} has a tuple of the wrong arity")

    @cached_property
    def array(self) -> np.ndarray:
        return np.array(sorted(self.tuples), dtype=np.int64).reshape(len(self.tuples), self.arity)

    def to_json(self) -> dict:
        return {"name": self.name, "arity": self.arity, "tuples": [list(t) for t in sorted(self.tuples)]}


@dataclass(frozen=True, eq=False)
class RelationalTemplate:
    domain_size: int
    relations: tuple[Relation, ...]
    polymorphisms: tuple[Operation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple(self.relations))
        object.__setattr__(self, "polymorphisms", tuple(self.polymorphisms))
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise PreconditionError("duplicate relation names")
        for r in self.relations:
            if any(not 0 <= v < self.domain_size for t in r.tuples for v in t):
                raise PreconditionError(f"relation {r.name!r} leaves the domain")
        for f in self.polymorphisms:
            if not is_polymorphism(self, f):
                raise PreconditionError(f"declared polymorphism {f.name!r} does not preserve the template")

    @classmethod
    def build(cls, domain_size: int, relations: Iterable[Relation], polymorphisms: Iterable[Operation] = (),
              singletons: bool = True) -> RelationalTemplate:
        """Template with the singleton unary relations added unless ``singletons`` is false."""
        rels = list(relations)
        if singletons:
            have = {r.name for r in rels}
            rels += [Relation(f"{SINGLETON_PREFIX}{a}", 1, {(a,)}) for a in range(domain_size)
                     if f"{SINGLETON_PREFIX}{a}" not in have]
        return cls(domain_size, tuple(rels), tuple(polymorphisms))

    def relation(self, name: str) -> Relation:
        try:
            return self._by_name[name]
        except KeyError:
            raise PreconditionError(f"unknown relation {name!r}") from None

    @cached_property
    def _by_name(self) -> dict[str, Relation]:
        return {r.name: r for r in self.relations}

    @cached_property
    def key(self) -> tuple:
        return (self.domain_size,
                tuple((r.name, r.arity, tuple(sorted(r.tuples))) for r in self.relations),
                tuple((f.name, f.table) for f in self.polymorphisms))

    def __eq__(self, other):
        return isinstance(other, RelationalTemplate) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def has_singletons(self) -> bool:
        return all(f"{SINGLETON_PREFIX}{a}" in self._by_name for a in range(self.domain_size))

    def to_json(self) -> dict:
        doc = {"domain_size": self.domain_size, "relations": [r.to_json() for r in self.relations]}
        if self.polymorphisms:
            doc["polymorphisms"] = [f.to_json() for f in self.polymorphisms]
        return doc


@dataclass(frozen=True)
class Constraint:
    relation: str
    scope: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(self.scope))


@dataclass(frozen=True, eq=False)
class CspInstance:
    variables: tuple[str, ...]
    constraints: tuple[Constraint, ...]
    template: RelationalTemplate = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if len(set(self.variables)) != len(self.variables):
            raise PreconditionError("duplicate variable names")
        known = set(self.variables)
        for c in self.constraints:
            rel = self.template.relation(c.relation)
            if rel.arity != len(c.scope):
                raise PreconditionError(f"scope {c.scope} does not match the arity of {c.relation!r}")
            if not set(c.scope) <= known:
                raise PreconditionError(f"scope {c.scope} uses an undeclared variable")

    @property
    def max_arity(self) -> int:
        return max((len(c.scope) for c in self.constraints), default=1)

    def with_constraints(self, extra: Iterable[Constraint]) -> CspInstance:
        return CspInstance(self.variables, self.constraints + tuple(extra), self.template)

    def to_json(self) -> dict:
        return {"variables": list(self.variables),
                "constraints": [{"relation": c.relation, "scope": list(c.scope)} for c in self.constraints]}


# --------------------------------------------------------------------------- polymorphisms


def _images(f: Operation, rel: Relation) -> np.ndarray:
    """Coordinatewise images of every choice of ``f.arity`` tuples from ``rel``."""
    rows = rel.array
    m, n = len(rows), f.arity
    idx = np.indices((m,) * n).reshape(n, -1)
    return np.stack([f.array[tuple(rows[idx[i], j] for i in range(n))] for j in range(rel.arity)], axis=1)


def _encode_rows(rows: np.ndarray, base: int) -> np.ndarray:
    return rows @ (base ** np.arange(rows.shape[1] - 1, -1, -1)) if rows.shape[1] else np.zeros(len(rows), int)


def is_polymorphism(template: RelationalTemplate, f: Operation) -> bool:
    if f.size != template.domain_size:
        raise PreconditionError(f"operation over {f.size} elements, template over {template.domain_size}")
    for rel in template.relations:
        if not rel.tuples:
            continue
        imgs = _encode_rows(_images(f, rel), f.size)
        if not np.isin(imgs, _encode_rows(rel.array, f.size)).all():
            return False
    return True


def projection(size: int, arity: int, index: int = 0) -> Operation:
    return Operation.from_function(f"pr{index}", arity, size, lambda *xs: xs[index])


# identities are (pattern, result) with pattern a string over {x, y}
def identities(kind: str, arity: int | None = None) -> tuple[int, list[tuple[str, str]]]:
    """Arity and identities of a named special operation.

    ``kind`` is ``maltsev``, ``majority``, ``nu`` (needs ``arity``) or
    ``edge`` (needs ``k``, passed as ``arity``; the operation is ``k+1``-ary).
    """
    if kind == "maltsev":
        return 3, [("xxy", "y"), ("yxx", "y")]
    if kind == "majority":
        return 3, [("xxy", "x"), ("xyx", "x"), ("yxx", "x")]
    if kind == "nu":
        if arity is None or arity < 3:
            raise PreconditionError("near-unanimity needs arity >= 3")
        return arity, [("y" * i + "x" + "y" * (arity - i - 1), "y") for i in range(arity)]
    if kind == "edge":
        k = arity
        if k is None or k < 2:
            raise PreconditionError("edge operations need k >= 2")
        rows = [("xx" + "y" * (k - 1), "y"), ("xyx" + "y" * (k - 2), "y")]
        rows += [("y" * i + "x" + "y" * (k - i), "y") for i in range(3, k + 1)]
        return k + 1, rows
    raise PreconditionError(f"unknown operation kind {kind!r}")


def minors(f: Operation, arity: int) -> Iterator[Operation]:
    """Operations ``g(x_0..x_{arity-1}) = f(x_{s(0)}, ..)`` for injective ``s``, in lexicographic order of ``s``."""
    if f.arity > arity:
        return
    grid = np.indices((f.size,) * arity)
    for s in itertools.permutations(range(arity), f.arity):
        table = f.array[tuple(grid[i] for i in s)]
        yield Operation(f"{f.name}[{','.join(map(str, s))}]", arity, f.size, tuple(int(v) for v in table.ravel()))


def satisfies_identities(f: Operation, ids: Sequence[tuple[str, str]]) -> bool:
    """Direct check of two-variable identities over all pairs (x, y)."""
    for x, y in itertools.product(range(f.size), repeat=2):
        env = {"x": x, "y": y}
        for pattern, result in ids:
            if f(*(env[c] for c in pattern)) != env[result]:
                return False
    return True


@dataclass(frozen=True)
class PolymorphismSearch:
    operation: Operation | None
    complete: bool  # False when a resource cap cut the search short
    strategy: str


_POLY_CACHE: dict[tuple, PolymorphismSearch] = {}


def search_special_polymorphism(template: RelationalTemplate, kind: str, arity: int | None = None,
                                max_variables: int = 4096) -> PolymorphismSearch:
    """Find an operation with the named identities that preserves every relation.

    Table entries pinned by the identities are fixed first.  When the free
    entries admit at most ``RAW_ENUMERATION_LIMIT`` tables they are enumerated
    directly; otherwise the problem is posed as an indicator CSP (one variable
    per argument tuple) and handed to :func:`oracle_solve`.
    """
    key = (template.key, kind, arity, max_variables)
    if key in _POLY_CACHE:
        return _POLY_CACHE[key]
    n, ids = identities(kind, arity)
    size = template.domain_size
    name = kind if arity is None else f"{kind}{arity}"
    weights = size ** np.arange(n - 1, -1, -1)
    fixed: dict[int, int] = {}
    conflict = False
    for x, y in itertools.product(range(size), repeat=2):
        env = {"x": x, "y": y}
        for pattern, result in ids:
            cell = int(np.dot([env[c] for c in pattern], weights))
            if fixed.setdefault(cell, env[result]) != env[result]:
                conflict = True
    total = size**n
    free = [c for c in range(total) if c not in fixed]
    if conflict:
        result = PolymorphismSearch(None, True, "identities")
    elif size**total <= RAW_ENUMERATION_LIMIT:
        # tables violating the identities are skipped by pinning those entries
        result = PolymorphismSearch(None, True, "enumeration")
        for values in itertools.product(range(size), repeat=len(free)):
            table = [0] * total
            for c, v in fixed.items():
                table[c] = v
            for c, v in zip(free, values):
                table[c] = v
            f = Operation(name, n, size, tuple(table))
            if is_polymorphism(template, f):
                result = PolymorphismSearch(f, True, "enumeration")
                break
    else:
        if total > max_variables:
            result = PolymorphismSearch(None, False, "indicator")
        else:
            result = _indicator_search(template, name, n, fixed)
    _POLY_CACHE[key] = result
    return result


def find_special_polymorphism(template: RelationalTemplate, kind: str, arity: int | None = None) -> Operation | None:
    return search_special_polymorphism(template, kind, arity).operation


def _indicator_search(template, name, n, fixed) -> PolymorphismSearch:
    size = template.domain_size
    total = size**n
    weights = size ** np.arange(n - 1, -1, -1)
    domains = [frozenset([fixed[c]]) if c in fixed else frozenset(range(size)) for c in range(total)]
    constraints: dict[tuple[int, ...], set] = {}
    for rel in template.relations:
        if not rel.tuples or rel.arity == 0:
            continue
        rows = rel.array
        m = len(rows)
        idx = np.indices((m,) * n).reshape(n, -1)
        # cells[j] = argument-tuple index fed to f in coordinate j
        cells = np.stack([rows[idx[i], :] for i in range(n)], axis=2) @ weights  # (choices, arity)
        for scope in {tuple(int(v) for v in row) for row in cells}:
            constraints.setdefault(scope, set(rel.tuples))
            if constraints[scope] is not rel.tuples:
                constraints[scope] = constraints[scope] & rel.tuples
    raw = RawCsp(domains, [(scope, frozenset(allowed)) for scope, allowed in sorted(constraints.items())])
    solution = next(raw.solutions(), None)
    if solution is None:
        return PolymorphismSearch(None, True, "indicator")
    return PolymorphismSearch(Operation(name, n, size, tuple(solution)), True, "indicator")


# --------------------------------------------------------------------------- oracle


class RawCsp:
    """Index-based CSP solved by backtracking with forward checking.

    Variables are tried in index order and values in ascending order.
    """

    def __init__(self, domains: Sequence[Iterable[int]], constraints: Sequence[tuple[tuple[int, ...], frozenset]]):
        self.domains = [sorted(set(d)) for d in domains]
        self.constraints = [(tuple(s), frozenset(a)) for s, a in constraints]
        self.watch: list[list[int]] = [[] for _ in self.domains]
        for ci, (scope, _) in enumerate(self.constraints):
            for v in set(scope):
                self.watch[v].append(ci)

    def solutions(self) -> Iterator[list[int]]:
        n = len(self.domains)
        values: list[int | None] = [None] * n
        live = [set(d) for d in self.domains]
        # constraints whose scope is a single repeated variable act as unary filters
        for scope, allowed in self.constraints:
            if len(set(scope)) == 1:
                v = scope[0]
                live[v] = {a for a in live[v] if (a,) * len(scope) in allowed}
        if any(not d for d in live):
            return
        yield from self._extend(0, values, live)

    def _extend(self, i, values, live):
        if i == len(values):
            yield list(values)
            return
        for a in sorted(live[i]):
            values[i] = a
            pruned = self._forward_check(i, values, live)
            if pruned is not None:
                yield from self._extend(i + 1, values, pruned)
        values[i] = None

    def _forward_check(self, i, values, live):
        new = None
        for ci in self.watch[i]:
            scope, allowed = self.constraints[ci]
            open_vars = {v for v in scope if values[v] is None}
            if not open_vars:
                if tuple(values[v] for v in scope) not in allowed:
                    return None
            elif len(open_vars) == 1:
                u = open_vars.pop()
                cur = new[u] if new is not None else live[u]
                keep = {b for b in cur
                        if tuple(b if v == u else values[v] for v in scope) in allowed}
                if len(keep) != len(cur):
                    if new is None:
                        new = list(live)
                    new[u] = keep
                    if not keep:
                        return None
        return new if new is not None else live


def _raw(instance: CspInstance) -> RawCsp:
    index = {v: i for i, v in enumerate(instance.variables)}
    size = instance.template.domain_size
    cons = [(tuple(index[v] for v in c.scope), instance.template.relation(c.relation).tuples)
            for c in instance.constraints]
    return RawCsp([range(size)] * len(instance.variables), cons)


def oracle_solve(instance: CspInstance, max_variables: int = 64) -> Assignment | None:
    """First solution in lexicographic order, or ``None`` when there is none."""
    if len(instance.variables) > max_variables:
        raise ResourceLimitError(f"{len(instance.variables)} variables exceed the oracle cap {max_variables}")
    sol = next(_raw(instance).solutions(), None)
    return None if sol is None else dict(zip(instance.variables, sol))


def solution_set(instance: CspInstance, cap: int = 100_000) -> set[tuple[int, ...]]:
    """All solutions as value tuples in the order of ``instance.variables``."""
    out = set()
    for sol in _raw(instance).solutions():
        out.add(tuple(sol))
        if len(out) > cap:
            raise ResourceLimitError(f"more than {cap} solutions")
    return out


def verify_solution(instance: CspInstance, assignment: Mapping[str, int]) -> bool:
    missing = [v for v in instance.variables if v not in assignment]
    if missing:
        raise PreconditionError(f"assignment is partial; missing {missing}")
    return all(tuple(assignment[v] for v in c.scope) in instance.template.relation(c.relation).tuples
               for c in instance.constraints)


def algebra_of(template: RelationalTemplate, extra: Iterable[Operation] = (), name: str = "") -> FiniteAlgebra:
    """The algebra whose basic operations are the declared and ``extra`` polymorphisms."""
    ops, seen = [], set()
    for f in list(template.polymorphisms) + list(extra):
        if f.table not in seen:
            seen.add(f.table)
            ops.append(f)
    return FiniteAlgebra(template.domain_size, tuple(ops), name)
