"""Run traces, regret/violation measures, and the comparator oracles.

Cumulative columns are running sums of per-round quantities with a fixed
summation order (ascending round, ascending constraint), so they can be
recomputed from the per-round columns with zero drift.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bench import ProblemStream
from .core import ContractViolationError, DimensionMismatchError, Vector, positive_part
from .learner import RoundRecord
from .solvers import InfeasibleInstanceError, InnerSolverConfig, solve_constrained


@dataclass
class TraceMeta:
    """Provenance and constants a trace carries for offline checks."""

    generator_id: str
    seed: int
    horizon: int
    algorithm: str
    schedule: dict
    grad_bound: float
    constraint_bound: float
    diameter: float
    queue_floor: float
    queue_decay: float
    strong_convexity: float = 0.0
    config_hash: str = ""
    assumption_breaches: int = 0

    def to_dict(self) -> dict:
        return {
            "generator_id": self.generator_id,
            "seed": self.seed,
            "horizon": self.horizon,
            "algorithm": self.algorithm,
            "schedule": self.schedule,
            "grad_bound": self.grad_bound,
            "constraint_bound": self.constraint_bound,
            "diameter": self.diameter,
            "queue_floor": self.queue_floor,
            "queue_decay": self.queue_decay,
            "strong_convexity": self.strong_convexity,
            "config_hash": self.config_hash,
            "assumption_breaches": self.assumption_breaches,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceMeta":
        return cls(**d)


@dataclass
class ExpertTraceData:
    """Per-round expert internals kept alongside an aggregated trace."""

    weights: np.ndarray  # (T, M), the weights used at each round
    decisions: np.ndarray  # (T, M, p)
    violation_totals: np.ndarray  # (T, M) running hinge mass per expert
    surrogate_losses: np.ndarray  # (T, M)
    hedge_lr: float
    initial_weights: np.ndarray  # (M,)


@dataclass
class RunTrace:
    """Per-round record arrays for one run, plus optional comparator losses."""

    meta: TraceMeta
    decisions: np.ndarray  # (T, p)
    losses: np.ndarray  # (T,)
    constraint_values: np.ndarray  # (T, N)
    queue_values: np.ndarray  # (T, N)
    bench_dynamic: Optional[np.ndarray] = None  # (T,) comparator losses per round
    bench_static: Optional[np.ndarray] = None  # (T,) fixed-comparator losses
    expert: Optional[ExpertTraceData] = None

    @property
    def horizon(self) -> int:
        return self.losses.shape[0]

    @property
    def dimension(self) -> int:
        return self.decisions.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.constraint_values.shape[1]

    def round_violations(self) -> np.ndarray:
        """Per-round hinge mass: sum over constraints of [g]_+."""
        return positive_part(self.constraint_values).sum(axis=1)

    def cum_loss(self) -> np.ndarray:
        return np.cumsum(self.losses)

    def hard_violation_column(self) -> np.ndarray:
        return np.cumsum(self.round_violations())

    def soft_violation_column(self) -> np.ndarray:
        running = np.cumsum(self.constraint_values, axis=0)
        return positive_part(running).sum(axis=1)

    def static_regret_column(self) -> Optional[np.ndarray]:
        if self.bench_static is None:
            return None
        return np.cumsum(self.losses - self.bench_static)

    def dynamic_regret_column(self) -> Optional[np.ndarray]:
        if self.bench_dynamic is None:
            return None
        return np.cumsum(self.losses - self.bench_dynamic)


def from_records(
    records: list[RoundRecord],
    meta: TraceMeta,
    expert: Optional[ExpertTraceData] = None,
) -> RunTrace:
    decisions = np.stack([r.decision for r in records])
    losses = np.array([r.loss for r in records])
    constraints = np.stack([r.constraint_values for r in records])
    queues = np.stack([r.queue_values for r in records])
    return RunTrace(
        meta=meta,
        decisions=decisions,
        losses=losses,
        constraint_values=constraints,
        queue_values=queues,
        expert=expert,
    )


@dataclass
class BenchmarkSet:
    """Hindsight comparators for one stream.

    ``x_star_t`` are per-round constrained minimizers; ``x_star`` minimizes the
    summed loss under every round's constraints simultaneously, when that
    intersection is feasible.
    """

    x_star_t: Optional[np.ndarray]  # (T, p)
    f_dynamic: Optional[np.ndarray]  # (T,)
    x_star: Optional[Vector]
    f_static: Optional[np.ndarray]  # (T,)
    path_length: Optional[float]
    constraint_variation: float
    variation_exact: bool
    static_feasible: bool

    def prefix(self, horizon: int, stream: ProblemStream) -> "BenchmarkSet":
        """Dynamic comparators for a shorter horizon of the same stream.

        The fixed comparator is horizon-specific and must be recomputed, so it
        is dropped here.
        """
        if self.x_star_t is None or horizon > self.x_star_t.shape[0]:
            raise ContractViolationError("prefix longer than the computed benchmark")
        xs = self.x_star_t[:horizon]
        fd = self.f_dynamic[:horizon]
        pl = _path_length_of(xs)
        cv, exact = _variation_sum(stream, horizon)
        return BenchmarkSet(
            x_star_t=np.array(xs),
            f_dynamic=np.array(fd),
            x_star=None,
            f_static=None,
            path_length=pl,
            constraint_variation=cv,
            variation_exact=exact,
            static_feasible=False,
        )


def _path_length_of(points: np.ndarray) -> float:
    if points.shape[0] < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def _variation_sum(stream: ProblemStream, horizon: int) -> tuple[float, bool]:
    total = 0.0
    exact = True
    for t in range(2, horizon + 1):
        value, is_exact = stream.variation_bound(t)
        total += value
        exact = exact and is_exact
    return total, exact


def compute_benchmarks(
    stream: ProblemStream,
    solver_cfg: InnerSolverConfig,
    need_dynamic: bool = True,
    need_static: bool = True,
    dynamic_cache: Optional[dict] = None,
) -> BenchmarkSet:
    """Solve the hindsight comparator problems for a stream.

    ``dynamic_cache`` maps round index to a previously solved (x, loss) pair
    for the same (generator, seed); rounds are horizon-independent, so sweeps
    over horizons can share it.
    """
    T = stream.horizon
    box = stream.spec.feasible

    x_star_t = None
    f_dynamic = None
    path = None
    if need_dynamic:
        x_star_t = np.empty((T, stream.spec.dimension))
        f_dynamic = np.empty(T)
        for t in range(1, T + 1):
            hit = dynamic_cache.get(t) if dynamic_cache is not None else None
            if hit is None:
                rf = stream.round(t)
                x = solve_constrained(rf, box, solver_cfg, anchor=rf.feasible_anchor)
                hit = (x, float(rf.loss_value(x)))
                if dynamic_cache is not None:
                    dynamic_cache[t] = hit
            x_star_t[t - 1] = hit[0]
            f_dynamic[t - 1] = hit[1]
        path = _path_length_of(x_star_t)

    x_star = None
    f_static = None
    static_feasible = False
    if need_static:
        merged, anchor = stream.static_functions()
        try:
            x_star = solve_constrained(merged, box, solver_cfg, anchor=anchor)
            static_feasible = True
            f_static = np.array(
                [float(stream.round(t).loss_value(x_star)) for t in range(1, T + 1)]
            )
        except InfeasibleInstanceError:
            x_star = None
            f_static = None
            static_feasible = False

    variation, exact = _variation_sum(stream, T)
    return BenchmarkSet(
        x_star_t=x_star_t,
        f_dynamic=f_dynamic,
        x_star=x_star,
        f_static=f_static,
        path_length=path,
        constraint_variation=variation,
        variation_exact=exact,
        static_feasible=static_feasible,
    )


def attach_benchmarks(trace: RunTrace, bench: BenchmarkSet) -> RunTrace:
    if bench.f_dynamic is not None:
        if bench.f_dynamic.shape[0] != trace.horizon:
            raise DimensionMismatchError("benchmark horizon disagrees with trace")
        trace.bench_dynamic = np.array(bench.f_dynamic)
    if bench.f_static is not None:
        trace.bench_static = np.array(bench.f_static)
    return trace


def static_regret(trace: RunTrace, bench: BenchmarkSet) -> float:
    """Cumulative loss gap versus the fixed hindsight comparator."""
    if not bench.static_feasible or bench.f_static is None:
        raise ContractViolationError(
            "static regret is undefined: no point is feasible for every round"
        )
    return float(np.cumsum(trace.losses - bench.f_static)[-1])


def dynamic_regret(trace: RunTrace, bench: BenchmarkSet) -> float:
    """Cumulative loss gap versus the per-round constrained minimizers."""
    if bench.f_dynamic is None:
        raise ContractViolationError("dynamic comparators were not computed")
    return float(np.cumsum(trace.losses - bench.f_dynamic)[-1])


def hard_violation(trace: RunTrace) -> float:
    """Sum over rounds and constraints of the positive parts: no compensation.

    Evaluated in the same ascending-round order as the cumulative column so
    the two agree bit for bit.
    """
    return float(trace.hard_violation_column()[-1])


def soft_violation(trace: RunTrace) -> float:
    """Positive parts of the per-constraint totals: compensation allowed."""
    return float(trace.soft_violation_column()[-1])


def path_length(bench: BenchmarkSet) -> float:
    """Total movement of the per-round comparator sequence (from round 2 on)."""
    if bench.path_length is None:
        raise ContractViolationError("dynamic comparators were not computed")
    return bench.path_length


def constraint_variation(stream: ProblemStream) -> float:
    """Summed worst-case constraint movement between consecutive rounds."""
    total, _ = _variation_sum(stream, stream.horizon)
    return total
