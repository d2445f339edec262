"""The constrained online learner: decision loop and parameter schedules.

Each round the learner minimizes the previous round's linearized loss plus a
proximal term and the queue-weighted constraint hinges, then observes the new
round and feeds the positive parts of its constraint values into the virtual
queue. Decisions at round t therefore depend only on information revealed
through round t-1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import rng
from .bench import ProblemStream
from .core import (
    Box,
    ConfigurationError,
    ContractViolationError,
    ProblemSpec,
    RoundFunctions,
    Vector,
    as_vector,
    positive_part,
)
from .queues import DoublyBoundedQueue, init_queue, update_queue
from .solvers import InnerSolverConfig, solve_pt


@dataclass(frozen=True)
class ParamSchedule:
    """Learner parameters: proximal weights, queue decay and queue floor.

    ``prox_weight`` must be non-decreasing in t; this is asserted along any
    run. ``floor_rate`` records the per-round floor coefficient the derived
    modes use, for provenance only.
    """

    prox_weight: Callable[[int], float]
    queue_decay: float
    queue_floor: float
    mode: str = "custom"
    floor_rate: Optional[float] = None
    v_x: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.queue_decay < 1.0:
            raise ConfigurationError("queue_decay must lie in (0, 1)")
        if not self.queue_floor > 0.0:
            raise ConfigurationError("queue_floor must be positive")
        a1, a2 = self.prox_weight(1), self.prox_weight(2)
        if not (a1 > 0 and a2 >= a1):
            raise ConfigurationError("prox_weight must be positive and non-decreasing")

    def describe(self) -> dict:
        out = {
            "mode": self.mode,
            "queue_decay": self.queue_decay,
            "queue_floor": self.queue_floor,
        }
        if self.floor_rate is not None:
            out["floor_rate"] = self.floor_rate
        if self.v_x is not None:
            out["v_x"] = self.v_x
        return out


def convex_schedule(
    spec: ProblemSpec, horizon: int, floor_rate: float, v_x: float = 0.0
) -> ParamSchedule:
    """Sublinear-regret schedule for convex losses.

    Proximal weight t^((1 - v)/2), decay 1/T, floor ``floor_rate * T`` with
    the floor rate restricted to (0, constraint bound) so the floor stays
    below the queue ceiling.
    """
    if horizon < 2:
        raise ConfigurationError("convex schedule needs horizon >= 2")
    if not 0.0 < floor_rate < spec.constraint_bound:
        raise ConfigurationError(
            f"floor_rate must lie in (0, {spec.constraint_bound}); got {floor_rate}"
        )
    if not 0.0 <= v_x <= 1.0:
        raise ConfigurationError("v_x must lie in [0, 1]")
    exponent = 0.5 * (1.0 - v_x)
    return ParamSchedule(
        prox_weight=lambda t, _e=exponent: float(t) ** _e,
        queue_decay=1.0 / horizon,
        queue_floor=floor_rate * horizon,
        mode="convex_dynamic",
        floor_rate=floor_rate,
        v_x=v_x,
    )


def strongly_convex_schedule(
    spec: ProblemSpec, horizon: int, floor_rate: float, curvature: Optional[float] = None
) -> ParamSchedule:
    """Logarithmic-regret schedule: proximal weight mu * t."""
    if horizon < 2:
        raise ConfigurationError("strongly convex schedule needs horizon >= 2")
    mu = spec.strong_convexity if curvature is None else curvature
    if not mu > 0:
        raise ConfigurationError("strongly convex schedule needs positive curvature")
    if not 0.0 < floor_rate < spec.constraint_bound:
        raise ConfigurationError(
            f"floor_rate must lie in (0, {spec.constraint_bound}); got {floor_rate}"
        )
    return ParamSchedule(
        prox_weight=lambda t, _m=mu: _m * float(t),
        queue_decay=1.0 / horizon,
        queue_floor=floor_rate * horizon,
        mode="strongly_convex",
        floor_rate=floor_rate,
    )


@dataclass
class ColdqState:
    """Learner state carried between rounds."""

    round_t: int
    x_current: Vector
    queue: DoublyBoundedQueue
    feasible: Box
    grad_cache: Optional[Vector] = None
    g_prev: Optional[RoundFunctions] = None


@dataclass
class RoundRecord:
    t: int
    decision: Vector
    loss: float
    constraint_values: Vector
    queue_values: Vector


def coldq_init(
    spec: ProblemSpec, sched: ParamSchedule, x1: Union[Vector, str] = "center"
) -> ColdqState:
    """Round-0 state: arbitrary feasible start, queue pinned at the floor."""
    if isinstance(x1, str):
        if x1 != "center":
            raise ConfigurationError(f"unknown start spec {x1!r}")
        x_start = spec.feasible.center
    else:
        x_start = as_vector(x1, spec.dimension)
        if not spec.feasible.contains(x_start):
            raise ContractViolationError("x1 lies outside the feasible set")
    queue = init_queue(spec, sched.queue_floor, sched.queue_decay)
    return ColdqState(round_t=0, x_current=x_start, queue=queue, feasible=spec.feasible)


def observe_first_round(
    state: ColdqState, revealed: RoundFunctions
) -> tuple[ColdqState, RoundRecord]:
    """Record round 1 at the starting decision; queue updates begin at t = 2."""
    if state.round_t != 0:
        raise ContractViolationError("first-round observation on a non-fresh state")
    x1 = state.x_current
    record = RoundRecord(
        t=1,
        decision=x1,
        loss=float(revealed.loss_value(x1)),
        constraint_values=np.asarray(revealed.constraint_values(x1), dtype=np.float64),
        queue_values=np.array(state.queue.values),
    )
    new_state = ColdqState(
        round_t=1,
        x_current=x1,
        queue=state.queue,
        feasible=state.feasible,
        grad_cache=np.asarray(revealed.loss_gradient(x1), dtype=np.float64),
        g_prev=revealed,
    )
    return new_state, record


def coldq_step(
    state: ColdqState,
    revealed: RoundFunctions,
    sched: ParamSchedule,
    solver_cfg: InnerSolverConfig,
    solver_rng: Optional[np.random.Generator] = None,
) -> tuple[ColdqState, RoundRecord]:
    """One round: decide from last round's information, then observe and update.

    ``revealed`` is round t's functions; they are consulted only after the new
    decision is fixed, preserving causality.
    """
    if state.round_t < 1 or state.grad_cache is None or state.g_prev is None:
        raise ContractViolationError("step requires a state that has observed round 1")
    t = state.round_t + 1
    alpha_prev = sched.prox_weight(t - 1)
    alpha_curr = sched.prox_weight(t)
    if alpha_curr < alpha_prev:
        raise ConfigurationError(
            f"prox_weight must be non-decreasing; got {alpha_prev} -> {alpha_curr} at t={t}"
        )
    x_t = solve_pt(
        state.x_current,
        state.grad_cache,
        alpha_prev,
        state.queue,
        state.g_prev,
        state.feasible,
        solver_cfg,
        rng=solver_rng,
    )
    g_t = np.asarray(revealed.constraint_values(x_t), dtype=np.float64)
    queue = update_queue(state.queue, positive_part(g_t))
    record = RoundRecord(
        t=t,
        decision=x_t,
        loss=float(revealed.loss_value(x_t)),
        constraint_values=g_t,
        queue_values=np.array(queue.values),
    )
    new_state = ColdqState(
        round_t=t,
        x_current=x_t,
        queue=queue,
        feasible=state.feasible,
        grad_cache=np.asarray(revealed.loss_gradient(x_t), dtype=np.float64),
        g_prev=revealed,
    )
    return new_state, record


def run(
    stream: ProblemStream,
    sched: ParamSchedule,
    solver_cfg: InnerSolverConfig,
    seed: int = 0,
    x1: Union[Vector, str] = "center",
) -> tuple[list[RoundRecord], int]:
    """Play the full stream and collect per-round records.

    Returns the records plus the count of rounds whose constraint values
    exceeded the certified bound (reported via a warning, never an abort).
    The records are raw; wrap them with :mod:`coldq.metrics` to get a trace
    with cumulative columns.
    """
    spec = stream.spec
    state = coldq_init(spec, sched, x1)
    records: list[RoundRecord] = []
    breaches = 0

    state, record = observe_first_round(state, stream.round(1))
    records.append(record)
    if np.any(np.abs(record.constraint_values) > spec.constraint_bound):
        breaches += 1

    for t in range(2, stream.horizon + 1):
        solver_rng = (
            rng.substream(seed, t, rng.ROLE_SOLVER) if solver_cfg.restarts > 0 else None
        )
        state, record = coldq_step(state, stream.round(t), sched, solver_cfg, solver_rng)
        records.append(record)
        if np.any(np.abs(record.constraint_values) > spec.constraint_bound):
            breaches += 1

    if breaches:
        warnings.warn(
            f"{breaches} rounds exceeded the certified constraint bound",
            RuntimeWarning,
        )
    return records, breaches
