"""Doubly-bounded virtual queue and its drift certificate.

The queue tracks per-constraint violation pressure with a decayed update that
is clamped at a floor. The clamp gives the lower bound directly; the decay
gives an upper bound of ``bound / decay`` whenever per-round violations never
exceed ``bound``. The drift of the floor-penalized quadratic potential admits
a per-round upper bound that the verification harness checks numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Box,
    ConfigurationError,
    ContractViolationError,
    DimensionMismatchError,
    ProblemSpec,
    RoundFunctions,
    Vector,
    positive_part,
)


@dataclass(frozen=True)
class DoublyBoundedQueue:
    """Virtual queue state: per-constraint lengths with floor and decay.

    ``bound`` is the certified cap on |g| over the feasible set; the implied
    ceiling is ``bound / decay``.
    """

    values: Vector
    floor: float
    decay: float
    bound: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise DimensionMismatchError("queue values must be a vector")
        object.__setattr__(self, "values", v)
        if not 0.0 < self.decay < 1.0:
            raise ConfigurationError(
                f"queue decay must lie in (0, 1); got decay={self.decay}"
            )
        if not 0.0 < self.floor < self.ceiling:
            raise ConfigurationError(
                "queue floor must satisfy 0 < floor < bound/decay; "
                f"got floor={self.floor}, bound/decay={self.ceiling}"
            )

    @property
    def ceiling(self) -> float:
        return self.bound / self.decay

    @property
    def n_constraints(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DriftRecord:
    """One round's realized potential drift and its certified upper bound."""

    drift_value: float
    rhs_bound: float

    @property
    def slack(self) -> float:
        return self.drift_value - self.rhs_bound


def init_queue(spec: ProblemSpec, floor: float, decay: float) -> DoublyBoundedQueue:
    """Fresh queue with every component pinned at the floor."""
    return DoublyBoundedQueue(
        values=np.full(spec.n_constraints, float(floor)),
        floor=float(floor),
        decay=float(decay),
        bound=spec.constraint_bound,
    )


def update_queue(q: DoublyBoundedQueue, violations: Vector) -> DoublyBoundedQueue:
    """Decay, add this round's violations, clamp at the floor.

    ``violations`` must already be positive parts; passing raw constraint
    values is a contract error because negative entries would let violations
    compensate each other across rounds.
    """
    v = np.asarray(violations, dtype=np.float64)
    if v.shape != q.values.shape:
        raise DimensionMismatchError(
            f"violations shape {v.shape} does not match queue shape {q.values.shape}"
        )
    if np.any(v < 0.0):
        raise ContractViolationError(
            "violations must be nonnegative; apply the positive part first"
        )
    new_values = np.maximum((1.0 - q.decay) * q.values + v, q.floor)
    return DoublyBoundedQueue(new_values, q.floor, q.decay, q.bound)


def drift(q_prev: DoublyBoundedQueue, q_next: DoublyBoundedQueue) -> float:
    """Change of the floor-penalized quadratic potential between two states."""
    if q_prev.values.shape != q_next.values.shape:
        raise DimensionMismatchError("queue states have different lengths")
    if q_prev.floor != q_next.floor:
        raise ContractViolationError("queue states have different floors")
    d_next = q_next.values - q_next.floor
    d_prev = q_prev.values - q_prev.floor
    return 0.5 * float(d_next @ d_next) - 0.5 * float(d_prev @ d_prev)


def drift_record(
    q_prev: DoublyBoundedQueue,
    q_next: DoublyBoundedQueue,
    x_t: Vector,
    g_prev: RoundFunctions,
    g_curr: RoundFunctions,
    spec: ProblemSpec,
    variation_term: float,
) -> DriftRecord:
    """Pair one round's realized drift with its certified upper bound."""
    return DriftRecord(
        drift_value=drift(q_prev, q_next),
        rhs_bound=drift_bound_rhs(q_prev, x_t, g_prev, g_curr, spec, variation_term),
    )


def drift_bound_rhs(
    q_prev: DoublyBoundedQueue,
    x_t: Vector,
    g_prev: RoundFunctions,
    g_curr: RoundFunctions,
    spec: ProblemSpec,
    variation_term: float,
) -> float:
    """Certified upper bound on the drift after updating with round-t violations.

    ``variation_term`` must dominate the worst-case constraint movement
    ``max_x ||g_curr(x) - g_prev(x)||`` over the feasible set (see
    :func:`affine_variation_bound` for the exact affine case).
    """
    pos_prev = positive_part(np.asarray(g_prev.constraint_values(x_t), dtype=np.float64))
    pos_curr = positive_part(np.asarray(g_curr.constraint_values(x_t), dtype=np.float64))
    if pos_prev.shape != q_prev.values.shape or pos_curr.shape != q_prev.values.shape:
        raise DimensionMismatchError("constraint outputs do not match queue length")
    n = q_prev.n_constraints
    g_bound = spec.constraint_bound
    return (
        float(q_prev.values @ pos_prev)
        - q_prev.floor * float(np.sum(pos_curr))
        + (g_bound * np.sqrt(n) / q_prev.decay) * variation_term
        + 2.0 * n * g_bound * g_bound
    )


def affine_variation_bound(
    prev_matrix: np.ndarray,
    prev_offset: np.ndarray,
    curr_matrix: np.ndarray,
    curr_offset: np.ndarray,
    box: Box,
) -> float:
    """Worst-case movement of an affine constraint block over a box.

    Each component's extreme values of ``(dA x - db)`` over the box are
    attained at a corner determined by the signs of ``dA``; combining the
    per-component maxima gives a bound that is exact for a single constraint
    and dominates the joint norm maximum otherwise, which is the safe side
    for every certificate that consumes it.
    """
    d_mat = np.asarray(curr_matrix, dtype=np.float64) - np.asarray(prev_matrix, dtype=np.float64)
    d_off = np.asarray(curr_offset, dtype=np.float64) - np.asarray(prev_offset, dtype=np.float64)
    pos = np.clip(d_mat, 0.0, None)
    neg = np.clip(d_mat, None, 0.0)
    hi = pos @ box.upper + neg @ box.lower - d_off
    lo = pos @ box.lower + neg @ box.upper - d_off
    component_max = np.maximum(np.abs(hi), np.abs(lo))
    return float(np.linalg.norm(component_max))


def sampled_variation_bound(
    g_prev: RoundFunctions,
    g_curr: RoundFunctions,
    box: Box,
    n_points: int = 1024,
) -> float:
    """Lower estimate of the constraint movement from a quasi-random sweep.

    Only a lower estimate: checks relying on it are advisory, not certified.
    """
    from scipy.stats import qmc

    sampler = qmc.Sobol(d=box.dimension, scramble=False)
    unit = sampler.random(n_points)
    points = box.lower + unit * (box.upper - box.lower)
    best = 0.0
    for row in points:
        diff = np.asarray(g_curr.constraint_values(row)) - np.asarray(
            g_prev.constraint_values(row)
        )
        best = max(best, float(np.linalg.norm(diff)))
    return best
