import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import ALGEBRAS, EQ2, NEQ2, binary, random_binary, semilattice, z2, z2_linear
from fewsubpowers.algebra import FiniteAlgebra, close_elements
from fewsubpowers.benchmarks import linear_template
from fewsubpowers.consistency import (
    PathPattern,
    binarize,
    binary_solution_set,
    enforce_1_consistency,
    enforce_23_consistency,
    group_size,
    pattern_image,
    run_lac,
    run_slac,
    unbinarize,
)
from fewsubpowers.csp import Constraint, CspInstance, oracle_solve, solution_set
from fewsubpowers.errors import PreconditionError


def triangle(alg, rel):
    return binary(alg, 3, {(0, 1): rel, (1, 2): rel, (0, 2): rel})


def neq3():
    from fewsubpowers.benchmarks import majority_op
    return FiniteAlgebra(3, (majority_op(3),))


NEQ3 = {(a, b) for a in range(3) for b in range(3) if a != b}


# --------------------------------------------------------------------------- the instance type


def test_build_is_symmetric_and_diagonal():
    b = binary(z2(), 2, {(0, 1): {(0, 1)}})
    assert b.relation(1, 0) == {(1, 0)}
    assert b.relation(0, 0) == {(0, 0), (1, 1)}
    assert b.relation("v0", "v1") == {(0, 1)}
    with pytest.raises(PreconditionError):
        b.index("nope")


def test_restrict_intersects():
    b = binary(z2(), 2, {(0, 1): EQ2})
    r = b.with_domain("v0", [1])
    assert r.domain("v0") == {1} and r.relation(0, 1) == {(1, 1)}
    assert r.domain("v1") == {0, 1}


# --------------------------------------------------------------------------- binarization


def test_group_size_rule():
    t, inst = z2_linear([("lin_111_0", ("x", "y", "z"))])
    assert group_size(inst, 2) == 2
    _, binst = z2_linear([("lin_11_1", ("x", "y"))])
    assert group_size(binst, 2) == 1 and group_size(binst, 3) == 1 and group_size(binst, 6) == 3


def test_binarize_binary_unchanged():
    t, inst = z2_linear([("lin_11_1", ("x", "y")), ("lin_11_1", ("y", "z"))])
    b = binarize(inst, z2(), 2)
    assert b.variables == ("x", "y", "z")
    assert b.relation("x", "y") == NEQ2 and b.relation("y", "x") == NEQ2
    assert b.relation("x", "z") == {(a, c) for a in (0, 1) for c in (0, 1)}


def test_binarize_ternary_preserves_count():
    t, inst = z2_linear([("lin_111_0", ("x", "y", "z"))])
    b = binarize(inst, z2(), 2)
    assert b.variables == ("x|y", "x|z", "y|z")
    sols = binary_solution_set(b)
    assert len(sols) == 4 == len(solution_set(inst))
    assert {tuple(unbinarize(b, s, 2)[v] for v in "xyz") for s in sols} == solution_set(inst)


def test_binarize_unsat_ternary():
    t, inst = z2_linear([("lin_111_0", ("x", "y", "z")), ("lin_111_1", ("x", "y", "z"))])
    b = binarize(inst, z2(), 2)
    assert binary_solution_set(b) == set()
    assert enforce_23_consistency(b) is None


def test_binarize_pads_short_instances():
    t = linear_template(2)
    inst = CspInstance(["x"], [Constraint("const_1", ("x",))], t)
    b = binarize(inst, z2(), 6)
    assert b.groups == (("x", "x", "x"),)
    assert [unbinarize(b, s, 2) for s in binary_solution_set(b)] == [{"x": 1}]


# --------------------------------------------------------------------------- (2,3)-consistency


def test_pc23_triangle_two_colors():
    assert enforce_23_consistency(triangle(semilattice(), NEQ2)) is None


def test_pc23_triangle_three_colors():
    b = triangle(neq3(), NEQ3)
    out = enforce_23_consistency(b)
    assert out is not None and out.same_as(b)


def test_pc23_constraint_free():
    b = binary(z2(), 3, {})
    assert enforce_23_consistency(b).same_as(b)


def test_pc23_trace_lines():
    b = binary(z2(), 3, {(0, 1): {(0, 0)}, (1, 2): EQ2})
    trace = []
    out = enforce_23_consistency(b, trace)
    assert trace == ["pc23 remove v0=1", "pc23 remove v1=1", "pc23 remove v2=1"]
    assert out.domain("v2") == {0}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(sorted(ALGEBRAS)), st.integers(2, 5))
def test_pc23_sound_consistent_idempotent(seed, name, n):
    b = random_binary(random.Random(seed), ALGEBRAS[name](), n)
    before = binary_solution_set(b)
    out = enforce_23_consistency(b)
    if out is None:
        assert before == set()
        return
    assert binary_solution_set(out) == before
    assert out.is_23_consistent()
    assert enforce_23_consistency(out).same_as(out)


# --------------------------------------------------------------------------- 1-consistency


def test_one_consistency_examples():
    b = binary(z2(), 2, {(0, 1): NEQ2})
    assert enforce_1_consistency(b).same_as(b)
    r = enforce_1_consistency(binary(z2(), 2, {(0, 1): {(0, 0)}}))
    assert r.domain("v0") == r.domain("v1") == {0}
    assert enforce_1_consistency(binary(z2(), 2, {(0, 1): set()})) is None


# --------------------------------------------------------------------------- patterns and LAC


def test_pattern_image_examples():
    b = binary(z2(), 2, {(0, 1): EQ2})
    assert pattern_image(b, {0}, PathPattern((("v0", "v1"),))) == {0}
    c = binary(z2(), 2, {(0, 1): NEQ2})
    step = PathPattern((("v0", "v1"),))
    assert pattern_image(c, {0}, step) == {1}
    assert pattern_image(c, set(), step) == frozenset()
    assert pattern_image(c, {1}, step.inverse()) == {0}
    with pytest.raises(PreconditionError):
        PathPattern((("v0", "v1"), ("v0", "v1")))


def test_lac_examples():
    single = binary(z2(), 1, {})
    assert run_lac(single, {"v0": {0}})
    chain = binary(z2(), 3, {(0, 1): EQ2, (1, 2): NEQ2})
    assert run_lac(chain, {"v0": {0}})
    assert pattern_image(chain, {0}, PathPattern((("v0", "v1"), ("v1", "v2")))) == {1}
    dead = binary(z2(), 2, {(0, 1): {(1, 0)}})
    assert not run_lac(dead, {"v0": {0}})


def test_slac_examples():
    free = binary(z2(), 3, {})
    assert run_slac(free, shortcut=False) == {v: {0, 1} for v in free.variables}
    assert run_slac(triangle(semilattice(), NEQ2), shortcut=False) is None
    square = binary(z2(), 4, {(0, 1): NEQ2, (1, 2): NEQ2, (2, 3): NEQ2, (0, 3): NEQ2})
    assert run_slac(square, shortcut=False) == {v: {0, 1} for v in square.variables}


def test_slac_trace():
    trace = []
    run_slac(triangle(semilattice(), NEQ2), trace, shortcut=False)
    assert trace[0] == "slac remove v0=0" and trace[-1] == "slac UNSAT"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(sorted(ALGEBRAS)), st.integers(2, 5))
def test_slac_sound_and_closed(seed, name, n):
    alg = ALGEBRAS[name]()
    b = random_binary(random.Random(seed), alg, n)
    before = binary_solution_set(b)
    store = run_slac(b, shortcut=False)
    if store is None:
        assert before == set()
        return
    for i, x in enumerate(b.variables):
        assert close_elements(alg, store[x]) == store[x]
        assert {s[i] for s in before} <= store[x]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(sorted(ALGEBRAS)), st.integers(2, 5))
def test_slac_shortcut_agrees_on_pc23_instances(seed, name, n):
    b = enforce_23_consistency(random_binary(random.Random(seed), ALGEBRAS[name](), n))
    if b is None:
        return
    assert run_slac(b) == run_slac(b, shortcut=False)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 4), st.integers(0, 5))
def test_binarize_equisatisfiable(seed, n, m):
    rnd = random.Random(seed)
    t = linear_template(2)
    names = [f"x{i}" for i in range(n)]
    cons = []
    for _ in range(m):
        r = rnd.randint(1, min(3, n))
        cons.append(Constraint(f"lin_{'1' * r}_{rnd.randrange(2)}", tuple(rnd.sample(names, r))))
    inst = CspInstance(names, cons, t)
    for k in (2, 3):
        b = binarize(inst, z2(), k)
        sols = binary_solution_set(b)
        assert bool(sols) == (oracle_solve(inst) is not None)
        if b.groups and all(len(set(g)) == len(g) for g in b.groups):
            assert {tuple(unbinarize(b, s, 2)[v] for v in names) for s in sols} == solution_set(inst)
