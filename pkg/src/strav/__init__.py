"""String-averaging Halpern solvers for the best approximation problem.

Given firmly nonexpansive operators T_1, ..., T_m (or a countable family)
with common fixed-point set F and an anchor u, the solvers iterate

    x^{k+1} = lambda_k * u + (1 - lambda_k) * S(x^k)

for a string-averaged inner map S and a steering sequence (lambda_k), and
converge strongly to P_F(u).  See the README for the algorithm catalogue,
the config schema, and the CLI.
"""

from .operators import (
    AffineSubspace,
    Ball,
    Box,
    DimensionMismatch,
    Halfspace,
    Hyperplane,
    Identity,
    Operator,
    RelaxedProjection,
    apply,
    as_point,
    fixed_point_residual,
    fne_residual,
    qne_residual,
)
from .oracle import (
    EnumerationLimit,
    InfeasibleSpec,
    PolyhedralSpec,
    box_inequalities,
    grid_project,
    kkt_project,
    polyhedral_from_operators,
    sample_feasible,
)
from .problems import (
    ShippedProblem,
    get_problem,
    make_shrinking_halfspaces,
    problem_p1,
    problem_p2,
    problem_p3,
    problem_p4,
    shipped_problems,
)
from .solvers import (
    AlgorithmVariant,
    CombettesSimultaneous,
    FullySimultaneous,
    HalpernWittman,
    InfiniteStaticSA,
    ProblemSpec,
    QuasiDynamicSA,
    SimultaneousSA,
    SolverError,
    SolverRun,
    StaticProjectionSA,
    StaticSA,
    UnfitFamily,
    cyclic_index,
    halpern_step,
    run,
    step_combettes,
    step_fully_simultaneous,
    step_halpern_wittman,
    step_infinite_static,
    step_quasi_dynamic,
    step_simultaneous,
    step_static,
)
from .steering import (
    HarmonicShifted,
    PowerLaw,
    PrefixReport,
    SteeringSequence,
    UserTable,
    lambda_value,
    validate_prefix,
)
from .strings import (
    BoundsReport,
    BoundsViolation,
    CountableFamily,
    FamilyBounds,
    IndexOutOfRange,
    StringFamily,
    Truncation,
    apply_string,
    check_bounds,
    string_average,
    truncate,
    truncated_average,
    validate_fit,
)
from .trace import Trace, compare_traces, load_trace, read_csv, read_json, write_csv, write_json

__version__ = "0.1.0"
