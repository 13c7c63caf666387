"""Seeded instance generators with known polymorphisms."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from functools import lru_cache

from .algebra import FiniteAlgebra, Operation, generate_subuniverse
from .csp import Constraint, CspInstance, Relation, RelationalTemplate
from .errors import PreconditionError
from .linear import LinearSystem, PrimeField, is_prime, solve_system

KINDS = ("linear_mod_p", "twosat", "horn3", "random_template")


@dataclass(frozen=True, eq=False)
class Benchmark:
    template: RelationalTemplate
    instance: CspInstance
    label: str | None = None  # ground truth where the generator knows it


def maltsev_mod(p: int) -> Operation:
    return Operation.from_function("m", 3, p, lambda x, y, z: (x - y + z) % p)


def majority_op(n: int) -> Operation:
    """Majority on ``n`` elements that falls back to the first argument."""
    return Operation.from_function("maj", 3, n, lambda x, y, z: y if y == z else x)


def meet_op() -> Operation:
    return Operation.from_function("and", 2, 2, lambda x, y: x & y)


def linear_relation_name(coeffs, const) -> str:
    return "lin_" + "".join(map(str, coeffs)) + f"_{const}"


@lru_cache(maxsize=None)
def linear_template(p: int, max_arity: int = 3) -> RelationalTemplate:
    """Every equation ``c1 x1 + ... + cr xr = a`` over Z_p with nonzero ``ci`` and ``r <= max_arity``."""
    if not is_prime(p):
        raise PreconditionError(f"{p} is not prime")
    rels = []
    for r in range(1, max_arity + 1):
        points = list(itertools.product(range(p), repeat=r))
        for coeffs in itertools.product(range(1, p), repeat=r):
            for const in range(p):
                tuples = {t for t in points if sum(c * v for c, v in zip(coeffs, t)) % p == const}
                rels.append(Relation(linear_relation_name(coeffs, const), r, tuples))
    return RelationalTemplate.build(p, rels, [maltsev_mod(p)])


@lru_cache(maxsize=None)
def twosat_template() -> RelationalTemplate:
    rels = [
        Relation("or", 2, {(0, 1), (1, 0), (1, 1)}),
        Relation("imp", 2, {(0, 0), (0, 1), (1, 1)}),
        Relation("nand", 2, {(0, 0), (0, 1), (1, 0)}),
    ]
    return RelationalTemplate.build(2, rels, [majority_op(2)])


@lru_cache(maxsize=None)
def horn3_template() -> RelationalTemplate:
    cube = list(itertools.product((0, 1), repeat=3))
    rels = [
        Relation("horn", 3, {t for t in cube if t != (1, 1, 0)}),
        Relation("nand3", 3, {t for t in cube if t != (1, 1, 1)}),
        Relation("imp", 2, {(0, 0), (0, 1), (1, 1)}),
    ]
    return RelationalTemplate.build(2, rels, [meet_op()])


def _algebra(kind: str, size: int) -> FiniteAlgebra:
    if kind == "affine":
        if is_prime(size):
            return FiniteAlgebra(size, (maltsev_mod(size),), f"Z{size}")
        if size == 4:
            # Z2 x Z2 with elements encoded as 2*a + b
            return FiniteAlgebra(4, (Operation.from_function("m", 3, 4, lambda x, y, z: x ^ y ^ z),), "Z2^2")
        raise PreconditionError("affine templates need a prime size or 4")
    if kind == "majority":
        return FiniteAlgebra(size, (majority_op(size),), f"maj{size}")
    raise PreconditionError(f"unknown algebra kind {kind!r}")


def random_template(rng: random.Random, algebra: str, size: int, relations: int, arity: int) -> RelationalTemplate:
    """Subpowers of a fixed algebra, each generated by a few random tuples."""
    alg = _algebra(algebra, size)
    rels = []
    for r in range(relations):
        gens = [tuple(rng.randrange(size) for _ in range(arity)) for _ in range(rng.randint(1, 3))]
        rels.append(Relation(f"r{r}", arity, generate_subuniverse(alg, gens).elements))
    return RelationalTemplate.build(size, rels, alg.ops)


def _scope(rng: random.Random, variables: list[str], r: int) -> tuple[str, ...]:
    return tuple(rng.sample(variables, r))


def generate_benchmark(kind: str, params: dict | None = None, seed: int = 0) -> Benchmark:
    """Reproducible instance of the given ``kind``; ``params`` override the defaults."""
    params = dict(params or {})
    rng = random.Random(seed)
    n = int(params.get("vars", 5))
    if n < 1:
        raise PreconditionError("vars must be positive")
    variables = [f"x{i}" for i in range(n)]
    if kind == "linear_mod_p":
        p = int(params.get("p", 2))
        max_arity = int(params.get("max_arity", 3))
        t = linear_template(p, max_arity)
        cons, rows = [], []
        for _ in range(int(params.get("eqs", 6))):
            r = rng.randint(1, min(max_arity, n))
            scope = _scope(rng, variables, r)
            coeffs = tuple(rng.randint(1, p - 1) for _ in range(r))
            const = rng.randrange(p)
            cons.append(Constraint(linear_relation_name(coeffs, const), scope))
            row = [0] * n
            for c, v in zip(coeffs, scope):
                row[variables.index(v)] = c
            rows.append((tuple(row), const))
        label = solve_system(LinearSystem(PrimeField(p), n, tuple(rows))).status
        return Benchmark(t, CspInstance(variables, cons, t), label)
    if kind == "twosat":
        t = twosat_template()
        names = ["or", "imp", "nand"]
        cons = []
        for _ in range(int(params.get("clauses", 6))):
            if n == 1:
                cons.append(Constraint(f"const_{rng.randrange(2)}", (variables[0],)))
            else:
                cons.append(Constraint(rng.choice(names), _scope(rng, variables, 2)))
        return Benchmark(t, CspInstance(variables, cons, t))
    if kind == "horn3":
        t = horn3_template()
        cons = []
        for _ in range(int(params.get("clauses", 5))):
            roll = rng.random()
            if roll < 0.15 or n < 2:
                cons.append(Constraint(f"const_{rng.randrange(2)}", (rng.choice(variables),)))
            elif roll < 0.4 or n < 3:
                cons.append(Constraint("imp", _scope(rng, variables, 2)))
            else:
                cons.append(Constraint(rng.choice(["horn", "horn", "nand3"]), _scope(rng, variables, 3)))
        return Benchmark(t, CspInstance(variables, cons, t))
    if kind == "random_template":
        size = int(params.get("size", 3))
        arity = int(params.get("arity", 2))
        t = random_template(rng, params.get("algebra", "affine"), size, int(params.get("relations", 3)), arity)
        names = [r.name for r in t.relations if r.arity == arity]
        cons = [Constraint(rng.choice(names), _scope(rng, variables, min(arity, n)))
                for _ in range(int(params.get("constraints", 5)))] if n >= arity else []
        return Benchmark(t, CspInstance(variables, cons, t))
    raise PreconditionError(f"unknown benchmark kind {kind!r}")
