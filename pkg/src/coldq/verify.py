"""Runtime certificate checks over serialized runs.

Every check is a pure function of a trace, its stream config, and (where
needed) the benchmark cache: re-running a check never re-runs the learner.
Failing checks record the first violating round together with both sides of
the inequality. Scaling checks are one-sided: the claims are upper bounds, so
an empirically smaller growth exponent passes.
"""

from __future__ import annotations

import json

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bench import ProblemStream
from .core import ConfigurationError, ContractViolationError, positive_part
from .learner import ParamSchedule
from .metrics import BenchmarkSet, RunTrace
from .queues import DoublyBoundedQueue, drift_record

EXACT_TOLERANCE = 0.0
DRIFT_TOLERANCE = 1e-9
SIMPLEX_TOLERANCE = 1e-12
CONVEXITY_TOLERANCE = 1e-10
SLOPE_TOLERANCE = 0.15


@dataclass
class CheckReport:
    check_id: str
    rounds_checked: int
    max_slack: float
    tolerance: float
    passed: bool
    first_violation: Optional[int] = None
    violation_lhs: Optional[float] = None
    violation_rhs: Optional[float] = None
    advisory: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "rounds_checked": self.rounds_checked,
            "max_slack": self.max_slack,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "first_violation": self.first_violation,
            "violation_lhs": self.violation_lhs,
            "violation_rhs": self.violation_rhs,
            "advisory": self.advisory,
            "note": self.note,
        }


def _report(check_id, slacks, tolerance, rounds, advisory=False, note="", lhs=None, rhs=None):
    """Assemble a report from per-round slack values (lhs - rhs)."""
    slacks = np.asarray(slacks, dtype=np.float64)
    if slacks.size == 0:
        return CheckReport(check_id, 0, 0.0, tolerance, True, advisory=advisory, note=note)
    max_slack = float(np.max(slacks))
    bad = np.nonzero(slacks > tolerance)[0]
    first = int(rounds[bad[0]]) if bad.size else None
    return CheckReport(
        check_id=check_id,
        rounds_checked=int(slacks.size),
        max_slack=max_slack,
        tolerance=tolerance,
        passed=bad.size == 0,
        first_violation=first,
        violation_lhs=None if first is None else float(lhs[bad[0]]),
        violation_rhs=None if first is None else float(rhs[bad[0]]),
        advisory=advisory,
        note=note,
    )


def check_queue_bounds(trace: RunTrace, tolerance: float = EXACT_TOLERANCE) -> CheckReport:
    """Queue values stay within [floor, bound/decay] at every round.

    Learner queues satisfy this exactly (tolerance 0); traces whose queue
    column is a derived convex combination (expert aggregates) need an
    ulp-scale tolerance from the caller.
    """
    floor = trace.meta.queue_floor
    ceiling = trace.meta.constraint_bound / trace.meta.queue_decay
    q = trace.queue_values
    below = floor - q  # > 0 when under the floor
    above = q - ceiling  # > 0 when over the ceiling
    slack = np.maximum(below, above).max(axis=1)
    rounds = np.arange(1, trace.horizon + 1)
    lhs = q.min(axis=1)
    rhs = np.full(trace.horizon, ceiling)
    return _report("queue_bounds", slack, tolerance, rounds, lhs=lhs, rhs=rhs)


def check_drift_bound(
    trace: RunTrace, stream: ProblemStream, tolerance: float = DRIFT_TOLERANCE
) -> CheckReport:
    """Realized potential drift never exceeds its certified per-round bound.

    Advisory when the constraint-movement term is only a sampled lower
    estimate (non-affine, unstructured constraints).
    """
    meta = trace.meta
    T = trace.horizon
    slacks, lhs_list, rhs_list = [], [], []
    advisory = False
    for t in range(2, T + 1):
        q_prev = DoublyBoundedQueue(
            trace.queue_values[t - 2], meta.queue_floor, meta.queue_decay, meta.constraint_bound
        )
        q_next = DoublyBoundedQueue(
            trace.queue_values[t - 1], meta.queue_floor, meta.queue_decay, meta.constraint_bound
        )
        variation, exact = stream.variation_bound(t)
        advisory = advisory or not exact
        record = drift_record(
            q_prev,
            q_next,
            trace.decisions[t - 1],
            stream.round(t - 1),
            stream.round(t),
            stream.spec,
            variation,
        )
        slacks.append(record.slack)
        lhs_list.append(record.drift_value)
        rhs_list.append(record.rhs_bound)
    note = "variation term is a sampled lower estimate" if advisory else ""
    return _report(
        "drift_bound",
        slacks,
        tolerance,
        np.arange(2, T + 1),
        advisory=advisory,
        note=note,
        lhs=np.array(lhs_list),
        rhs=np.array(rhs_list),
    )


def check_per_slot_bound(
    trace: RunTrace,
    stream: ProblemStream,
    bench: BenchmarkSet,
    sched: ParamSchedule,
    slack: float,
) -> CheckReport:
    """Per-round optimality inequality linking loss gap, queue-weighted hinge
    mass, comparator movement, and the proximal telescoping terms.

    ``slack`` absorbs inner-solver and comparator-oracle inexactness.
    """
    if bench.x_star_t is None or bench.f_dynamic is None:
        raise ContractViolationError("per-slot check needs dynamic comparators")
    T = trace.horizon
    # Surface schedule violations before checking the inequality itself.
    alphas = np.array([sched.prox_weight(t) for t in range(1, T + 1)])
    if np.any(np.diff(alphas) < 0):
        raise ConfigurationError("prox_weight schedule is not non-decreasing")

    R = trace.meta.diameter
    D = trace.meta.grad_bound
    slacks, lhs_list, rhs_list = [], [], []
    for t in range(2, T + 1):
        g_prev = stream.round(t - 1)
        x_t = trace.decisions[t - 1]
        x_prev = trace.decisions[t - 2]
        q_prev = trace.queue_values[t - 2]
        hinge_mass = float(
            q_prev @ positive_part(np.asarray(g_prev.constraint_values(x_t), dtype=np.float64))
        )
        lhs = (trace.losses[t - 2] - bench.f_dynamic[t - 2]) + hinge_mass

        a_prev, a_curr = alphas[t - 2], alphas[t - 1]
        star_prev, star_curr = bench.x_star_t[t - 2], bench.x_star_t[t - 1]
        move = float(np.linalg.norm(star_curr - star_prev))
        rhs = (
            2.0 * R * a_prev * move
            + R * R * (a_curr - a_prev)
            + D * D / (4.0 * a_prev)
            + (
                a_prev * float(np.sum((star_prev - x_prev) ** 2))
                - a_curr * float(np.sum((star_curr - x_t) ** 2))
            )
        )
        slacks.append(lhs - rhs)
        lhs_list.append(lhs)
        rhs_list.append(rhs)
    return _report(
        "per_slot_bound",
        slacks,
        slack,
        np.arange(2, T + 1),
        lhs=np.array(lhs_list),
        rhs=np.array(rhs_list),
    )


def check_weight_simplex(trace: RunTrace) -> CheckReport:
    """Expert weights stay strictly positive and sum to one each round."""
    if trace.expert is None:
        raise ContractViolationError("trace has no expert data")
    w = trace.expert.weights
    sums = np.abs(w.sum(axis=1) - 1.0)
    positive_gap = np.where(w.min(axis=1) > 0.0, 0.0, np.inf)
    slack = np.maximum(sums, positive_gap)
    rounds = np.arange(1, w.shape[0] + 1)
    return _report(
        "weight_simplex", slack, SIMPLEX_TOLERANCE, rounds, lhs=sums, rhs=np.zeros_like(sums)
    )


def check_hedge_bound(trace: RunTrace) -> CheckReport:
    """Aggregated surrogate loss beats the best prior-penalized expert total.

    The bound constant uses the certified loss-gradient and diameter bounds;
    the aggregate's own surrogate losses vanish identically by construction.
    """
    if trace.expert is None:
        raise ContractViolationError("trace has no expert data")
    ex = trace.expert
    T = ex.surrogate_losses.shape[0]
    kappa = ex.hedge_lr
    if not np.isfinite(kappa):
        raise ContractViolationError("expert trace does not carry the hedge step size")
    F = trace.meta.grad_bound * trace.meta.diameter
    totals = ex.surrogate_losses.sum(axis=0) + np.log(1.0 / ex.initial_weights) / kappa
    lhs = 0.0 - float(np.min(totals))
    rhs = kappa * F * F * T / 2.0
    return CheckReport(
        check_id="hedge_bound",
        rounds_checked=T,
        max_slack=lhs - rhs,
        tolerance=1e-9,
        passed=lhs <= rhs + 1e-9,
        first_violation=None if lhs <= rhs + 1e-9 else T,
        violation_lhs=lhs,
        violation_rhs=rhs,
    )


def check_aggregate_violation(trace: RunTrace, stream: ProblemStream) -> CheckReport:
    """Aggregate per-round hinge mass is dominated by the weighted expert mass."""
    if trace.expert is None:
        raise ContractViolationError("trace has no expert data")
    ex = trace.expert
    T = trace.horizon
    slacks, lhs_list, rhs_list = [], [], []
    for t in range(1, T + 1):
        rf = stream.round(t)
        agg = float(np.sum(positive_part(trace.constraint_values[t - 1])))
        weighted = 0.0
        for m in range(ex.weights.shape[1]):
            g_m = np.asarray(rf.constraint_values(ex.decisions[t - 1, m]), dtype=np.float64)
            weighted += ex.weights[t - 1, m] * float(np.sum(positive_part(g_m)))
        slacks.append(agg - weighted)
        lhs_list.append(agg)
        rhs_list.append(weighted)
    return _report(
        "aggregate_violation_convexity",
        slacks,
        CONVEXITY_TOLERANCE,
        np.arange(1, T + 1),
        lhs=np.array(lhs_list),
        rhs=np.array(rhs_list),
    )


def hard_violation_budget(
    trace: RunTrace, stream: ProblemStream, bench: BenchmarkSet, sched: ParamSchedule
) -> float:
    """Evaluate the theoretical ceiling on cumulative hard violation.

    Combines the summed constraint movement, the comparator path length, the
    inverse proximal-weight series, and the constant per-round terms, all
    scaled by the queue floor; one extra per-constraint bound covers round 1.
    """
    if bench.x_star_t is None:
        raise ContractViolationError("budget needs dynamic comparators")
    T = trace.horizon
    meta = trace.meta
    R, D, G = meta.diameter, meta.grad_bound, meta.constraint_bound
    N = trace.n_constraints
    gamma = meta.queue_floor
    eta = meta.queue_decay
    alphas = np.array([sched.prox_weight(t) for t in range(1, T + 1)])

    variation_sum = 0.0
    for t in range(2, T + 1):
        variation_sum += stream.variation_bound(t)[0]
    moves = np.linalg.norm(np.diff(bench.x_star_t, axis=0), axis=1)
    weighted_path = float(np.sum(alphas[:-1] * moves))
    inv_alpha_sum = float(np.sum(1.0 / alphas))

    return (
        (G * np.sqrt(N) / (eta * gamma)) * variation_sum
        + (2.0 * R / gamma) * weighted_path
        + (D * D / (4.0 * gamma)) * inv_alpha_sum
        + (D * R + 2.0 * N * G * G) * T / gamma
        + R * R * alphas[-1] / gamma
        + N * G
    )


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    points_used: int
    excluded: int


def fit_scaling(
    results: Sequence[tuple[float, float]], mode: str = "loglog"
) -> ScalingFit:
    """Least-squares fit of metric growth against the horizon.

    ``loglog`` fits log(metric) on log(T); ``semilogx`` fits metric on log(T).
    Nonpositive metric values cannot enter a log fit and are excluded.
    """
    pts = [(float(T), float(v)) for T, v in results]
    if mode == "loglog":
        usable = [(t, v) for t, v in pts if v > 0]
    else:
        usable = pts
    excluded = len(pts) - len(usable)
    if len(usable) < 2:
        return ScalingFit(0.0, 0.0, 1.0, len(usable), excluded)
    x = np.log(np.array([t for t, _ in usable]))
    y = np.array([v for _, v in usable])
    if mode == "loglog":
        y = np.log(y)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return ScalingFit(float(slope), float(intercept), r2, len(usable), excluded)


def check_scaling(
    results: Sequence[tuple[float, float]],
    exponent_claim: float,
    tolerance: float = SLOPE_TOLERANCE,
    mode: str = "loglog",
    min_r_squared: Optional[float] = None,
) -> CheckReport:
    """One-sided growth check: fitted slope must not exceed claim + tolerance."""
    if len(results) < 4:
        raise ContractViolationError("scaling check needs at least 4 horizons")
    fit = fit_scaling(results, mode=mode)
    passed = fit.slope <= exponent_claim + tolerance
    note = f"slope={fit.slope:.4f} intercept={fit.intercept:.4f} r2={fit.r_squared:.4f}"
    if fit.excluded:
        note += f" excluded={fit.excluded} nonpositive"
    if min_r_squared is not None:
        passed = passed and fit.r_squared >= min_r_squared
        note += f" r2_min={min_r_squared}"
    return CheckReport(
        check_id=f"scaling_{mode}",
        rounds_checked=fit.points_used,
        max_slack=fit.slope - exponent_claim,
        tolerance=tolerance,
        passed=bool(passed),
        violation_lhs=fit.slope,
        violation_rhs=exponent_claim + tolerance,
        note=note,
    )


def reports_to_json(reports: Sequence[CheckReport], meta: dict) -> str:
    payload = {"meta": meta, "checks": [r.to_dict() for r in reports]}
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def all_passed(reports: Sequence[CheckReport]) -> bool:
    return all(r.passed or r.advisory for r in reports)
