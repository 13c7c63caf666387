"""The decision procedure: binarize, propagate, then reduce until the endgame."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .absorption import absorption_reduce, domain_algebra, minimal_absorbing
from .affine import AffineCaps, PassiveSubinstance, affine_consistency_pass, update_passive
from .algebra import Operation
from .consistency import (
    BinaryInstance,
    binarize,
    enforce_1_consistency,
    enforce_23_consistency,
    group_size,
    slac_instance,
)
from .csp import (
    Constraint,
    CspInstance,
    RelationalTemplate,
    SINGLETON_PREFIX,
    algebra_of,
    identities,
    minors,
    satisfies_identities,
    search_special_polymorphism,
    verify_solution,
)
from .errors import InvariantError, NotApplicableError, PreconditionError

SAT, UNSAT = "SAT", "UNSAT"


@dataclass(frozen=True)
class SolverConfig:
    k_edge_arity: int | None = None
    max_k: int = 3
    term_depth_bound: int = 3
    subuniverse_generator_cap: int = 2
    congruence_cap: int = 12
    verify_paths: bool = False
    check_invariants: bool = False
    seed: int = 0
    jobs: int = 1
    witness: bool = False

    def __post_init__(self):
        for name in ("max_k", "term_depth_bound", "subuniverse_generator_cap", "congruence_cap", "jobs"):
            if getattr(self, name) < 1:
                raise PreconditionError(f"{name} must be positive")
        if self.k_edge_arity is not None and self.k_edge_arity < 2:
            raise PreconditionError("k_edge_arity must be at least 2")

    def affine_caps(self) -> AffineCaps:
        return AffineCaps(generator_cap=self.subuniverse_generator_cap, term_depth_bound=self.term_depth_bound,
                          congruence_cap=self.congruence_cap, verify_paths=self.verify_paths,
                          check_invariants=self.check_invariants)


@dataclass
class SolverReport:
    decision: str
    witness: dict | None = None
    trace: list[str] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def sat(self) -> bool:
        return self.decision == SAT

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["witness"] = None if self.witness is None else dict(sorted(self.witness.items()))
        return doc


# --------------------------------------------------------------------------- edge operations


_EDGE_CACHE: dict[tuple, tuple[int, Operation]] = {}


def detect_edge(template: RelationalTemplate, cfg: SolverConfig = SolverConfig()) -> tuple[int, Operation]:
    """The configured or smallest ``k`` with a ``k``-edge polymorphism, and that operation.

    Minors of declared polymorphisms (which are polymorphisms too) are tried
    first; otherwise the template is searched.
    """
    ks = [cfg.k_edge_arity] if cfg.k_edge_arity is not None else list(range(2, cfg.max_k + 1))
    key = (template.key, tuple(ks))
    if key in _EDGE_CACHE:
        return _EDGE_CACHE[key]
    for k in ks:
        arity, ids = identities("edge", k)
        for f in template.polymorphisms:
            for g in minors(f, arity):
                if satisfies_identities(g, ids):
                    _EDGE_CACHE[key] = (k, g)
                    return k, g
        found = search_special_polymorphism(template, "edge", k).operation
        if found is not None:
            _EDGE_CACHE[key] = (k, found)
            return k, found
    raise NotApplicableError(f"no k-edge polymorphism for k in {ks}")


# --------------------------------------------------------------------------- driver


def _sizes(b: BinaryInstance) -> tuple[int, ...]:
    return b.domain_sizes()


def _stabilize(b: BinaryInstance, cfg: SolverConfig, trace: list, stats: dict, report: list | None = None):
    """(2,3)-consistency, 1-consistency, SLAC and the affine pass, in that order."""
    b = enforce_23_consistency(b, trace)
    if b is not None:
        b = enforce_1_consistency(b, trace)
    if b is not None:
        b = slac_instance(b, trace)
    if b is None:
        return None, []
    return affine_consistency_pass(b, cfg.affine_caps(), trace, stats, report)


def _find_absorption(b: BinaryInstance, cfg: SolverConfig):
    for i, x in enumerate(b.variables):
        if b.domains[i].sum() < 2:
            continue
        alg, elems = domain_algebra(b, x)
        found = minimal_absorbing(alg, cfg.term_depth_bound)
        if found is not None:
            sub, witness = found
            return x, frozenset(elems[a] for a in sub.elements), witness
    return None


def _first_passive(b: BinaryInstance, passives: list[PassiveSubinstance]) -> PassiveSubinstance | None:
    for ps in passives:
        i = b.index(ps.var)
        if ps.live and ps.block and len(ps.block) < int(b.domains[i].sum()):
            return ps
    return None


def decide_binary(b: BinaryInstance, cfg: SolverConfig = SolverConfig(), trace: list | None = None,
                  stats: dict | None = None, report: list | None = None) -> str:
    """Run the reduction loop on a syntactically simple instance."""
    trace = trace if trace is not None else []
    stats = stats if stats is not None else {}
    for key in ("test_instances", "blocks_pruned", "block_subinstances", "absorption_steps",
                "affine_reductions", "iterations"):
        stats.setdefault(key, 0)
    if not b.variables:
        return SAT
    cur, passives = _stabilize(b, cfg, trace, stats, report)
    while True:
        if cur is None:
            trace.append("decision UNSAT")
            return UNSAT
        stats["iterations"] += 1
        before = _sizes(cur)
        found = _find_absorption(cur, cfg)
        if found is not None:
            x, block, witness = found
            stats["absorption_steps"] += 1
            reduced, passives = absorption_reduce(cur, x, block, passives, witness, cfg.term_depth_bound, trace,
                                                  cfg.check_invariants)
            if reduced is None:
                cur = None
                continue
            cur, passives = _stabilize(reduced, cfg, trace, stats, report)
        else:
            ps = _first_passive(cur, passives)
            if ps is None:
                # absorption-free and affine-free: SLAC has the final word
                decision = SAT if not cur.is_empty() else UNSAT
                trace.append(f"decision {decision}")
                return decision
            stats["affine_reductions"] += 1
            trace.append(f"passive {ps.describe(cur)}")
            reduced = cur.restrict(ps.domains)
            passives = update_passive(passives, reduced)
            cur, passives = _stabilize(reduced, cfg, trace, stats, report)
        if cur is not None:
            after = _sizes(cur)
            if not (all(a <= b for a, b in zip(after, before)) and sum(after) < sum(before)):
                raise InvariantError("a reduction step did not shrink the instance")


def solve(template: RelationalTemplate, instance: CspInstance, cfg: SolverConfig = SolverConfig()) -> SolverReport:
    if instance.template is not template and instance.template != template:
        raise PreconditionError("instance refers to a different template")
    k, edge = detect_edge(template, cfg)
    alg = algebra_of(template, [edge])
    trace: list[str] = []
    stats: dict = {"k": k, "group_size": group_size(instance, k)}
    b = binarize(instance, alg, k)
    stats["binary_variables"] = len(b.variables)
    trace.append(f"binarize k={k} c={stats['group_size']} variables={len(b.variables)} universe={b.size}")
    decision = decide_binary(b, cfg, trace, stats)
    report = SolverReport(decision, None, trace, stats)
    if decision == SAT and cfg.witness:
        report.witness = extract_witness(template, instance, cfg, first=report)
    return report


def _with_singletons(template: RelationalTemplate) -> RelationalTemplate:
    if template.has_singletons():
        return template
    return RelationalTemplate.build(template.domain_size, template.relations, template.polymorphisms)


def extract_witness(template: RelationalTemplate, instance: CspInstance, cfg: SolverConfig = SolverConfig(),
                    first: SolverReport | None = None) -> dict[str, int]:
    """Fix variables one by one to the least value that keeps the answer SAT."""
    quiet = SolverConfig(**{**asdict(cfg), "witness": False})
    if first is None:
        first = solve(template, instance, quiet)
    if not first.sat:
        raise PreconditionError("the instance is not satisfiable")
    full = _with_singletons(template)
    base = CspInstance(instance.variables, instance.constraints, full)
    fixed: list[Constraint] = []
    assignment: dict[str, int] = {}
    for x in instance.variables:
        for a in range(template.domain_size):
            trial = base.with_constraints(fixed + [Constraint(f"{SINGLETON_PREFIX}{a}", (x,))])
            if solve(full, trial, quiet).sat:
                fixed.append(Constraint(f"{SINGLETON_PREFIX}{a}", (x,)))
                assignment[x] = a
                break
        else:
            raise InvariantError(f"no value for {x!r} keeps the instance satisfiable")
    if not verify_solution(instance, assignment):
        raise InvariantError("self-reduction produced a non-solution")
    return assignment


def describe_edge(template: RelationalTemplate, cfg: SolverConfig = SolverConfig()) -> str:
    k, f = detect_edge(template, cfg)
    return f"k={k} {f.name} table={''.join(map(str, f.table))}"

