"""Decision procedure for CSPs over finite templates with few subpowers."""

from .absorption import absorption_reduce, check_witness, find_absorbing, minimal_absorbing, search_absorbing
from .affine import (
    AffineCaps,
    PassiveSubinstance,
    TestInstance,
    TestPair,
    affine_consistency_pass,
    build_test_instance,
    enumerate_test_pairs,
    r_plus,
    relevant_congruence,
)
from .algebra import (
    App,
    Congruence,
    FiniteAlgebra,
    Operation,
    Subuniverse,
    Var,
    generate_subuniverse,
    maximal_congruences,
    quotient,
)
from .benchmarks import generate_benchmark
from .consistency import (
    BinaryInstance,
    binary_oracle,
    binary_solution_set,
    PathPattern,
    binarize,
    enforce_1_consistency,
    enforce_23_consistency,
    pattern_image,
    run_lac,
    run_slac,
)
from .csp import (
    Constraint,
    CspInstance,
    Relation,
    RelationalTemplate,
    find_special_polymorphism,
    is_polymorphism,
    oracle_solve,
    solution_set,
    verify_solution,
)
from .errors import (
    FewSubpowersError,
    InvariantError,
    NotApplicableError,
    PreconditionError,
    ResourceLimitError,
)
from .linear import (
    LinearSystem,
    PrimeField,
    SolutionSpace,
    compile_binary_constraint,
    recognize_affine_module,
    solve_system,
)
from .solver import SolverConfig, SolverReport, extract_witness, solve

__version__ = "0.1.0"

__all__ = [
    "AffineCaps",
    "App",
    "BinaryInstance",
    "Congruence",
    "Constraint",
    "CspInstance",
    "FewSubpowersError",
    "FiniteAlgebra",
    "InvariantError",
    "LinearSystem",
    "NotApplicableError",
    "Operation",
    "PassiveSubinstance",
    "PathPattern",
    "PreconditionError",
    "PrimeField",
    "Relation",
    "RelationalTemplate",
    "ResourceLimitError",
    "SolutionSpace",
    "SolverConfig",
    "SolverReport",
    "Subuniverse",
    "TestInstance",
    "TestPair",
    "Var",
    "absorption_reduce",
    "affine_consistency_pass",
    "binarize",
    "binary_oracle",
    "binary_solution_set",
    "build_test_instance",
    "check_witness",
    "compile_binary_constraint",
    "enforce_1_consistency",
    "enforce_23_consistency",
    "enumerate_test_pairs",
    "extract_witness",
    "find_absorbing",
    "find_special_polymorphism",
    "generate_benchmark",
    "generate_subuniverse",
    "is_polymorphism",
    "maximal_congruences",
    "minimal_absorbing",
    "oracle_solve",
    "pattern_image",
    "quotient",
    "r_plus",
    "recognize_affine_module",
    "relevant_congruence",
    "run_lac",
    "run_slac",
    "search_absorbing",
    "solution_set",
    "solve",
    "solve_system",
    "verify_solution",
]
