import itertools

import numpy as np
import pytest
from hypothesis import settings

from fewsubpowers.algebra import FiniteAlgebra, power
from fewsubpowers.benchmarks import linear_template, majority_op, maltsev_mod, meet_op
from fewsubpowers.consistency import BinaryInstance
from fewsubpowers.csp import Constraint, CspInstance, Relation, RelationalTemplate

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


def z2() -> FiniteAlgebra:
    return FiniteAlgebra(2, (maltsev_mod(2),), "Z2")


def z3() -> FiniteAlgebra:
    return FiniteAlgebra(3, (maltsev_mod(3),), "Z3")


def z2sq() -> FiniteAlgebra:
    return power(z2(), 2)


def semilattice() -> FiniteAlgebra:
    return FiniteAlgebra(2, (meet_op(),), "SL")


def majority(n: int = 2) -> FiniteAlgebra:
    return FiniteAlgebra(n, (majority_op(n),), f"maj{n}")


NEQ2 = {(0, 1), (1, 0)}
EQ2 = {(0, 0), (1, 1)}


def binary(alg, n_vars, constraints, domains=None) -> BinaryInstance:
    names = [f"v{i}" for i in range(n_vars)]
    doms = domains or [range(alg.size)] * n_vars
    return BinaryInstance.build(alg, names, doms, constraints)


def z2_linear(constraints, names=("x", "y", "z")):
    """Instance over the Z2 linear template; ``constraints`` are (relation name, scope) pairs."""
    t = linear_template(2)
    return t, CspInstance(list(names), [Constraint(r, s) for r, s in constraints], t)


def neq_template(colors: int) -> RelationalTemplate:
    rel = Relation("neq", 2, {(a, b) for a, b in itertools.product(range(colors), repeat=2) if a != b})
    return RelationalTemplate.build(colors, [rel])


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_binary(rnd, alg, n_vars, density=0.6, gens=(1, 3)) -> BinaryInstance:
    """Binary instance whose constraints are subpowers of ``alg`` generated by a few random pairs."""
    from fewsubpowers.algebra import generate_subuniverse

    cons = {}
    for i, j in itertools.combinations(range(n_vars), 2):
        if rnd.random() < density:
            pairs = [(rnd.randrange(alg.size), rnd.randrange(alg.size)) for _ in range(rnd.randint(*gens))]
            cons[(i, j)] = generate_subuniverse(alg, pairs).elements
    return binary(alg, n_vars, cons)


ALGEBRAS = {"Z2": z2, "Z3": z3, "Z2^2": z2sq, "maj3": lambda: majority(3), "SL": semilattice}


settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")


def _invertible(rnd, p, d):
    while True:
        m = [[rnd.randrange(p) for _ in range(d)] for _ in range(d)]
        det = m[0][0] if d == 1 else m[0][0] * m[1][1] - m[0][1] * m[1][0]
        if det % p:
            return m


def affine_binary(rnd, alg, n_vars, density=0.5) -> BinaryInstance:
    """Binary instance over a simple affine algebra whose constraints read ``y in M x + c + K``.

    ``M`` is invertible and ``K`` is zero or a line, so every constraint is subdirect.
    """
    from fewsubpowers.linear import recognize_affine_module

    co = recognize_affine_module(alg)
    p, d = co.p, co.dim
    cons = {}
    for i, j in itertools.combinations(range(n_vars), 2):
        if rnd.random() >= density:
            continue
        m = _invertible(rnd, p, d)
        shift = [rnd.randrange(p) for _ in range(d)]
        slack = [rnd.randrange(p) for _ in range(d)] if rnd.random() < 0.2 else [0] * d
        rel = set()
        for a in range(alg.size):
            ea = co.encode(a)
            img = [(sum(m[r][k] * ea[k] for k in range(d)) + shift[r]) % p for r in range(d)]
            for t in range(p):
                rel.add((a, co.decode(tuple((img[r] + t * slack[r]) % p for r in range(d)))))
        cons[(i, j)] = rel
    return binary(alg, n_vars, cons)
