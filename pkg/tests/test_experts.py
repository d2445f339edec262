import math

import numpy as np
import pytest

from coldq.bench import GeneratorConfig, make_stream
from coldq.core import ConfigurationError
from coldq.experts import (
    ExpertBank,
    bank_size,
    expert_init,
    expert_step,
    initial_weights,
    observe_first_round_bank,
    run_expert,
)
from coldq.learner import ParamSchedule, coldq_init, run
from coldq.solvers import InnerSolverConfig

CFG = InnerSolverConfig(max_iters=60)


def test_bank_size_formula():
    assert bank_size(3) == 2  # floor(0.5 * log2(4)) + 1
    assert bank_size(1023) == 6  # floor(0.5 * 10) + 1
    assert bank_size(1) == 1


def test_initial_weights_examples():
    w = initial_weights(2)
    assert np.allclose(w, [0.75, 0.25])
    assert w.sum() == pytest.approx(1.0, abs=1e-15)


def test_initial_weights_telescope_to_one():
    for m in range(1, 41):
        assert initial_weights(m).sum() == pytest.approx(1.0, abs=1e-12)


def test_expert_init_validates_floor_rate():
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=8, seed=0))
    with pytest.raises(ConfigurationError):
        expert_init(stream.spec, 8, floor_rate=stream.spec.constraint_bound * 2)


def test_expert_schedules_are_geometric():
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=100, seed=0))
    bank = expert_init(stream.spec, 100, floor_rate=0.5)
    assert bank.n_experts == bank_size(100)
    for m, sched in enumerate(bank.schedules, start=1):
        assert sched.prox_weight(4) == pytest.approx(2.0 / 2 ** (m - 1))
    assert bank.schedules[0].queue_decay == pytest.approx(100 ** -1.5)
    assert bank.schedules[0].queue_floor == pytest.approx(0.5 * 100 ** 1.5)


def test_single_expert_bank_reproduces_plain_learner_bitwise():
    horizon = 80
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=horizon, seed=0))
    records, details, _ = run_expert(stream, 0.5, CFG, n_experts=1)

    sched = ParamSchedule(
        prox_weight=lambda t: math.sqrt(float(t)),
        queue_decay=horizon ** -1.5,
        queue_floor=0.5 * horizon ** 1.5,
    )
    plain, _ = run(stream, sched, CFG)
    for r_bank, r_plain in zip(records, plain):
        assert np.array_equal(r_bank.decision, r_plain.decision)
        assert np.array_equal(r_bank.queue_values, r_plain.queue_values)
        assert r_bank.loss == r_plain.loss


def test_identical_experts_keep_weights_constant():
    horizon = 25
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=horizon, seed=0))
    spec = stream.spec
    sched = ParamSchedule(
        prox_weight=lambda t: math.sqrt(float(t)),
        queue_decay=horizon ** -1.5,
        queue_floor=0.5 * horizon ** 1.5,
    )
    experts = [coldq_init(spec, sched) for _ in range(3)]
    bank = ExpertBank(
        experts=experts,
        schedules=[sched] * 3,
        log_weights=np.log(initial_weights(3)),
        hedge_lr=horizon ** -0.5,
        spec=spec,
        horizon=horizon,
    )
    w1 = initial_weights(3)
    bank, detail = observe_first_round_bank(bank, stream.round(1))
    for t in range(2, horizon + 1):
        bank, detail = expert_step(
            bank, stream.round(t), CFG, prev_violation_totals=detail.expert_violation_totals
        )
        assert np.allclose(detail.weights, w1, atol=1e-14)
        for m in range(3):
            assert np.array_equal(detail.expert_decisions[m], detail.expert_decisions[0])
        # The convex combination of identical points agrees to rounding error.
        assert np.allclose(
            detail.aggregate.decision, detail.expert_decisions[0], rtol=0, atol=1e-15
        )


def test_weights_stay_on_simplex():
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=120, seed=1))
    _, details, _ = run_expert(stream, 0.5, CFG)
    for d in details:
        assert d.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(d.weights > 0.0)


def test_aggregate_stays_inside_box():
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=60, seed=2))
    records, _, _ = run_expert(stream, 0.5, CFG)
    box = stream.spec.feasible
    for r in records:
        assert box.contains(r.decision)


def test_aggregate_violation_dominated_by_weighted_expert_mass():
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=120, seed=3))
    records, details, _ = run_expert(stream, 0.5, CFG)
    for t, (record, d) in enumerate(zip(records, details), start=1):
        rf = stream.round(t)
        agg = float(np.sum(np.maximum(record.constraint_values, 0.0)))
        weighted = sum(
            d.weights[m]
            * float(np.sum(np.maximum(rf.constraint_values(d.expert_decisions[m]), 0.0)))
            for m in range(d.weights.shape[0])
        )
        assert agg <= weighted + 1e-10


def test_expert_members_match_standalone_runs():
    # Each expert's state evolves independently of the aggregation, so member
    # m must replay exactly as a standalone run with its schedule.
    horizon = 50
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=horizon, seed=4))
    _, details, _ = run_expert(stream, 0.5, CFG)
    m_experts = details[0].weights.shape[0]
    for m in range(m_experts):
        sched = ParamSchedule(
            prox_weight=lambda t, _m=m: math.sqrt(float(t)) / 2 ** _m,
            queue_decay=horizon ** -1.5,
            queue_floor=0.5 * horizon ** 1.5,
        )
        plain, _ = run(stream, sched, CFG)
        for t in range(horizon):
            assert np.array_equal(details[t].expert_decisions[m], plain[t].decision)


def test_hedge_recursion_matches_definition():
    # w_{t+1} proportional to w_t * exp(-kappa * surrogate loss).
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=30, seed=5))
    _, details, _ = run_expert(stream, 0.5, CFG)
    kappa = stream.horizon ** -0.5
    for d_prev, d_curr in zip(details, details[1:]):
        unnorm = d_prev.weights * np.exp(-kappa * d_prev.surrogate_losses)
        assert np.allclose(d_curr.weights, unnorm / unnorm.sum(), atol=1e-12)
