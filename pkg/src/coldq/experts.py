"""Expert tracking: parallel learners aggregated by multiplicative weights.

A bank of learners runs the base algorithm in parallel, each with its own
proximal-weight schedule and its own virtual queue; the played decision is the
weight-averaged expert decision. Weights update multiplicatively against the
linearized surrogate loss evaluated with the aggregate's gradient, so no
knowledge of the comparator path length is needed to pick a schedule.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import rng
from .bench import ProblemStream
from .core import (
    ConfigurationError,
    ProblemSpec,
    RoundFunctions,
    Vector,
    positive_part,
)
from .learner import ColdqState, ParamSchedule, RoundRecord, coldq_init, observe_first_round
from .queues import update_queue
from .solvers import InnerSolverConfig, solve_pt


def bank_size(horizon: int) -> int:
    """Number of experts: floor(log2(1 + T) / 2) + 1."""
    return int(math.floor(0.5 * math.log2(1.0 + horizon))) + 1


def initial_weights(m_experts: int) -> np.ndarray:
    """Prior weights (M+1) / (m (m+1) M); they telescope to an exact simplex."""
    m = np.arange(1, m_experts + 1, dtype=np.float64)
    return (m_experts + 1.0) / (m * (m + 1.0) * m_experts)


@dataclass
class ExpertBank:
    """Parallel learner states plus hedge weights in log space."""

    experts: list[ColdqState]
    schedules: list[ParamSchedule]
    log_weights: np.ndarray
    hedge_lr: float
    spec: ProblemSpec
    horizon: int
    round_t: int = 0
    x_current: Optional[Vector] = None

    @property
    def n_experts(self) -> int:
        return len(self.experts)

    @property
    def weights(self) -> np.ndarray:
        shifted = self.log_weights - np.max(self.log_weights)
        w = np.exp(shifted)
        return w / np.sum(w)


@dataclass
class ExpertRoundRecord:
    aggregate: RoundRecord
    weights: np.ndarray
    expert_decisions: np.ndarray  # (M, p)
    expert_violation_totals: np.ndarray  # (M,) running sums of hinge mass
    surrogate_losses: np.ndarray  # (M,)


def expert_init(
    spec: ProblemSpec,
    horizon: int,
    floor_rate: float,
    hedge_lr: Optional[float] = None,
    n_experts: Optional[int] = None,
    x1: Union[Vector, str] = "center",
) -> ExpertBank:
    """Bank with geometrically spaced proximal schedules and shared queue params.

    The shared decay is T^(-3/2) and the shared floor is ``floor_rate``
    times T^(3/2); requiring the floor rate below the constraint bound keeps
    the floor under the queue ceiling. Expert m uses proximal weight
    sqrt(t) / 2^(m-1).
    """
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    if not 0.0 < floor_rate < spec.constraint_bound:
        raise ConfigurationError(
            f"floor_rate must lie in (0, {spec.constraint_bound}); got {floor_rate}"
        )
    m_experts = bank_size(horizon) if n_experts is None else int(n_experts)
    if m_experts < 1:
        raise ConfigurationError("need at least one expert")
    kappa = horizon ** -0.5 if hedge_lr is None else float(hedge_lr)
    if not kappa > 0:
        raise ConfigurationError("hedge_lr must be positive")
    # Horizon 1 never updates the queue; any valid decay works there.
    decay = horizon ** -1.5 if horizon >= 2 else 0.5
    floor = floor_rate * horizon ** 1.5

    schedules = []
    experts = []
    for m in range(1, m_experts + 1):
        scale = 1.0 / (2.0 ** (m - 1))
        sched = ParamSchedule(
            prox_weight=lambda t, _s=scale: _s * math.sqrt(float(t)),
            queue_decay=decay,
            queue_floor=floor,
            mode="expert_member",
        )
        schedules.append(sched)
        experts.append(coldq_init(spec, sched, x1))
    return ExpertBank(
        experts=experts,
        schedules=schedules,
        log_weights=np.log(initial_weights(m_experts)),
        hedge_lr=kappa,
        spec=spec,
        horizon=horizon,
    )


def observe_first_round_bank(
    bank: ExpertBank, revealed: RoundFunctions
) -> tuple[ExpertBank, ExpertRoundRecord]:
    """Round 1: aggregate the starting decisions and prime every expert."""
    w = bank.weights
    decisions = np.stack([e.x_current for e in bank.experts])
    x1 = bank.spec.feasible.project(w @ decisions)
    new_experts = []
    for state in bank.experts:
        new_state, _ = observe_first_round(state, revealed)
        new_experts.append(new_state)
    record = RoundRecord(
        t=1,
        decision=x1,
        loss=float(revealed.loss_value(x1)),
        constraint_values=np.asarray(revealed.constraint_values(x1), dtype=np.float64),
        queue_values=w @ np.stack([e.queue.values for e in new_experts]),
    )
    bank.experts = new_experts
    bank.round_t = 1
    bank.x_current = x1
    viol = np.array([
        float(np.sum(positive_part(np.asarray(revealed.constraint_values(d)))))
        for d in decisions
    ])
    detail = ExpertRoundRecord(
        aggregate=record,
        weights=w,
        expert_decisions=decisions,
        expert_violation_totals=viol,
        surrogate_losses=np.zeros(bank.n_experts),
    )
    return bank, detail


def expert_step(
    bank: ExpertBank,
    revealed: RoundFunctions,
    solver_cfg: InnerSolverConfig,
    solver_rng: Optional[np.random.Generator] = None,
    prev_violation_totals: Optional[np.ndarray] = None,
) -> tuple[ExpertBank, ExpertRoundRecord]:
    """One aggregated round.

    Every expert solves its own per-round problem from its own state; the
    bank plays the weighted average; each expert's queue absorbs the positive
    parts of the constraints at that expert's own decision; weights then move
    multiplicatively against the shared surrogate loss. The weight update runs
    in log space with max subtraction, so long horizons cannot underflow it.
    """
    if bank.round_t < 1:
        raise ConfigurationError("bank must observe round 1 first")
    t = bank.round_t + 1
    m_experts = bank.n_experts
    p = bank.spec.dimension

    decisions = np.empty((m_experts, p))
    for i, (state, sched) in enumerate(zip(bank.experts, bank.schedules)):
        alpha_prev = sched.prox_weight(t - 1)
        decisions[i] = solve_pt(
            state.x_current,
            state.grad_cache,
            alpha_prev,
            state.queue,
            state.g_prev,
            state.feasible,
            solver_cfg,
            rng=solver_rng,
        )
    w = bank.weights
    x_t = bank.spec.feasible.project(w @ decisions)

    grad_agg = np.asarray(revealed.loss_gradient(x_t), dtype=np.float64)
    surrogate = decisions @ grad_agg - float(grad_agg @ x_t)

    viol_totals = np.zeros(m_experts) if prev_violation_totals is None else np.array(
        prev_violation_totals
    )
    new_experts = []
    for i, state in enumerate(bank.experts):
        g_i = np.asarray(revealed.constraint_values(decisions[i]), dtype=np.float64)
        queue = update_queue(state.queue, positive_part(g_i))
        viol_totals[i] += float(np.sum(positive_part(g_i)))
        new_experts.append(
            ColdqState(
                round_t=t,
                x_current=decisions[i],
                queue=queue,
                feasible=state.feasible,
                grad_cache=np.asarray(revealed.loss_gradient(decisions[i]), dtype=np.float64),
                g_prev=revealed,
            )
        )

    record = RoundRecord(
        t=t,
        decision=x_t,
        loss=float(revealed.loss_value(x_t)),
        constraint_values=np.asarray(revealed.constraint_values(x_t), dtype=np.float64),
        queue_values=w @ np.stack([e.queue.values for e in new_experts]),
    )

    bank.experts = new_experts
    bank.log_weights = bank.log_weights - bank.hedge_lr * surrogate
    bank.log_weights -= np.max(bank.log_weights)
    bank.round_t = t
    bank.x_current = x_t
    detail = ExpertRoundRecord(
        aggregate=record,
        weights=w,
        expert_decisions=decisions,
        expert_violation_totals=np.array(viol_totals),
        surrogate_losses=surrogate,
    )
    return bank, detail


def run_expert(
    stream: ProblemStream,
    floor_rate: float,
    solver_cfg: InnerSolverConfig,
    seed: int = 0,
    hedge_lr: Optional[float] = None,
    n_experts: Optional[int] = None,
    x1: Union[Vector, str] = "center",
) -> tuple[list[RoundRecord], list[ExpertRoundRecord], int]:
    """Play the full stream with a freshly initialized bank."""
    spec = stream.spec
    bank = expert_init(spec, stream.horizon, floor_rate, hedge_lr, n_experts, x1)
    records: list[RoundRecord] = []
    details: list[ExpertRoundRecord] = []
    breaches = 0

    bank, detail = observe_first_round_bank(bank, stream.round(1))
    records.append(detail.aggregate)
    details.append(detail)
    if np.any(np.abs(detail.aggregate.constraint_values) > spec.constraint_bound):
        breaches += 1

    for t in range(2, stream.horizon + 1):
        solver_rng = (
            rng.substream(seed, t, rng.ROLE_SOLVER) if solver_cfg.restarts > 0 else None
        )
        bank, detail = expert_step(
            bank,
            stream.round(t),
            solver_cfg,
            solver_rng,
            prev_violation_totals=details[-1].expert_violation_totals,
        )
        records.append(detail.aggregate)
        details.append(detail)
        if np.any(np.abs(detail.aggregate.constraint_values) > spec.constraint_bound):
            breaches += 1

    if breaches:
        warnings.warn(
            f"{breaches} rounds exceeded the certified constraint bound",
            RuntimeWarning,
        )
    return records, details, breaches
