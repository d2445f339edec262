"""Constrained online convex optimization with a doubly-bounded virtual queue.

The package bundles the online learner, its expert-tracking variant, the
benchmark problem generators, regret/violation metrics with hindsight
comparator oracles, and a harness that checks the method's per-round
certificates numerically on every run.
"""

from .bench import GeneratorConfig, ProblemStream, make_stream
from .core import (
    AffineConstraints,
    Box,
    CapacityConstraint,
    ConfigurationError,
    ContractViolationError,
    DimensionMismatchError,
    ProblemSpec,
    RoundFunctions,
    hinge,
    project,
)
from .experts import ExpertBank, bank_size, expert_init, expert_step, run_expert
from .learner import (
    ColdqState,
    ParamSchedule,
    coldq_init,
    coldq_step,
    convex_schedule,
    run,
    strongly_convex_schedule,
)
from .metrics import (
    BenchmarkSet,
    RunTrace,
    compute_benchmarks,
    constraint_variation,
    dynamic_regret,
    hard_violation,
    path_length,
    soft_violation,
    static_regret,
)
from .queues import (
    DoublyBoundedQueue,
    DriftRecord,
    drift,
    drift_bound_rhs,
    init_queue,
    update_queue,
)
from .solvers import (
    InfeasibleInstanceError,
    InnerSolverConfig,
    SolverError,
    argmin_gradient_step,
    solve_constrained,
    solve_pt,
)

__version__ = "0.1.0"
