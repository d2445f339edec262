import numpy as np
import pytest

from coldq.bench import GeneratorConfig, ProblemStream, make_stream
from coldq.core import (
    AffineConstraints,
    Box,
    ConfigurationError,
    ContractViolationError,
    ProblemSpec,
    RoundFunctions,
)
from coldq.learner import (
    ParamSchedule,
    coldq_init,
    coldq_step,
    convex_schedule,
    observe_first_round,
    run,
)
from coldq.solvers import InnerSolverConfig

CFG = InnerSolverConfig(max_iters=60)


def test_init_center_start():
    stream = make_stream(GeneratorConfig("tv_least_squares", horizon=2, seed=0))
    sched = convex_schedule(stream.spec, 2, 0.5)
    state = coldq_init(stream.spec, sched, "center")
    assert np.array_equal(state.x_current, np.full(10, 2.5))
    assert np.array_equal(state.queue.values, np.full(2, sched.queue_floor))


def test_init_accepts_boundary_point():
    stream = make_stream(GeneratorConfig("tv_least_squares", horizon=2, seed=0))
    sched = convex_schedule(stream.spec, 2, 0.5)
    x1 = np.zeros(10)
    state = coldq_init(stream.spec, sched, x1)
    assert np.array_equal(state.x_current, x1)


def test_init_rejects_point_outside_box():
    stream = make_stream(GeneratorConfig("tv_least_squares", horizon=2, seed=0))
    sched = convex_schedule(stream.spec, 2, 0.5)
    with pytest.raises(ContractViolationError):
        coldq_init(stream.spec, sched, np.full(10, 6.0))


def test_schedule_validation():
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=4, seed=0))
    with pytest.raises(ConfigurationError):
        convex_schedule(stream.spec, 4, floor_rate=stream.spec.constraint_bound + 1.0)
    with pytest.raises(ConfigurationError):
        ParamSchedule(prox_weight=lambda t: -1.0, queue_decay=0.5, queue_floor=1.0)


def test_step_is_stationary_when_gradient_zero_and_feasible():
    box = Box.cube(0.0, 4.0, 2)
    spec = ProblemSpec(2, 1, 5, box, grad_bound=1.0, constraint_bound=10.0)
    sched = ParamSchedule(lambda t: 1.0, queue_decay=0.5, queue_floor=1.0)
    a_mat, a_off = np.array([[1.0, 0.0]]), np.array([9.0])

    def round_fn():
        return RoundFunctions(
            loss_value=lambda x: 1.0,
            loss_gradient=lambda x: np.zeros(2),
            constraint_values=lambda x: a_mat @ x - a_off,
            constraint_subgradient=lambda x, i: a_mat[i],
            n_constraints=1,
            affine=AffineConstraints(a_mat, a_off),
        )

    state = coldq_init(spec, sched, np.array([2.0, 1.0]))
    state, _ = observe_first_round(state, round_fn())
    state, record = coldq_step(state, round_fn(), sched, CFG)
    assert np.array_equal(record.decision, [2.0, 1.0])


def test_step_rejects_decreasing_prox_weights():
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=4, seed=0))
    # Passes the constructor spot check (t=1,2) but dips at t=3.
    bad = ParamSchedule(lambda t: 1.0 if t <= 2 else 0.5, 0.25, 1.0)
    state = coldq_init(stream.spec, bad)
    state, _ = observe_first_round(state, stream.round(1))
    state, _ = coldq_step(state, stream.round(2), bad, CFG)
    with pytest.raises(ConfigurationError, match="non-decreasing"):
        coldq_step(state, stream.round(3), bad, CFG)


def test_decisions_stay_inside_box():
    stream = make_stream(GeneratorConfig("tv_least_squares", horizon=40, seed=4))
    sched = convex_schedule(stream.spec, 40, 0.5)
    records, _ = run(stream, sched, CFG)
    box = stream.spec.feasible
    for r in records:
        assert box.contains(r.decision)


def test_fixed_feasible_problem_violation_stays_bounded(cache):
    # Fixed constraints: the cumulative hard violation does not grow with the
    # horizon (it is dominated by the pre-adaptation rounds).
    totals = {}
    for horizon in (200, 400, 800):
        trace, _, _ = cache.trace("quadratic_prog", horizon, seed=0)
        totals[horizon] = float(np.sum(np.maximum(trace.constraint_values, 0.0)))
    assert totals[800] <= totals[200] + 0.25 * (1.0 + totals[200])


def test_causality_future_rounds_do_not_affect_prefix():
    import warnings

    base = make_stream(GeneratorConfig("quadratic_prog", horizon=30, seed=0))
    other = make_stream(GeneratorConfig("quadratic_prog", horizon=30, seed=99))
    k = 12

    # Same rounds through k-1, divergent afterwards.
    spliced = ProblemStream(
        spec=base.spec,
        config=base.config,
        build_round=lambda t: base.round(t) if t < k else other.round(t),
        variation_fn=lambda t: (0.0, True),
        static_fn=base.static_functions,
    )
    sched = convex_schedule(base.spec, 30, 0.5)
    rec_a, _ = run(base, sched, CFG)
    with warnings.catch_warnings():
        # Spliced-in rounds may exceed the base stream's certified bound;
        # the breach flag is exactly the intended behavior here.
        warnings.simplefilter("ignore", RuntimeWarning)
        rec_b, _ = run(spliced, sched, CFG)
    for t in range(k):
        assert np.array_equal(rec_a[t].decision, rec_b[t].decision)
    assert not np.array_equal(rec_a[k + 2].decision, rec_b[k + 2].decision)


def test_single_round_horizon():
    stream = make_stream(GeneratorConfig("quadratic_prog", horizon=1, seed=0))
    sched = ParamSchedule(lambda t: float(t), queue_decay=0.5, queue_floor=0.2)
    records, breaches = run(stream, sched, CFG)
    assert len(records) == 1
    assert records[0].t == 1
    assert breaches == 0


def test_queue_snapshots_follow_update_rule():
    stream = make_stream(GeneratorConfig("tv_least_squares", horizon=30, seed=5))
    sched = convex_schedule(stream.spec, 30, 0.5)
    records, _ = run(stream, sched, CFG)
    eta, gamma = sched.queue_decay, sched.queue_floor
    for prev, curr in zip(records, records[1:]):
        viol = np.maximum(curr.constraint_values, 0.0)
        expected = np.maximum((1.0 - eta) * prev.queue_values + viol, gamma)
        assert np.array_equal(curr.queue_values, expected)


def test_assumption_breach_is_warned_not_fatal():
    # A spec with an understated constraint bound must flag, not abort.
    stream = make_stream(GeneratorConfig("tv_least_squares", horizon=10, seed=0))
    weak_spec = ProblemSpec(
        dimension=10,
        n_constraints=2,
        horizon=10,
        feasible=stream.spec.feasible,
        grad_bound=stream.spec.grad_bound,
        constraint_bound=0.05,
        strong_convexity=0.0,
    )
    shadow = ProblemStream(
        spec=weak_spec,
        config=stream.config,
        build_round=stream.round,
        variation_fn=stream.variation_bound,
        static_fn=stream.static_functions,
    )
    sched = ParamSchedule(lambda t: np.sqrt(t), queue_decay=0.1, queue_floor=0.01)
    with pytest.warns(RuntimeWarning, match="exceeded"):
        records, breaches = run(shadow, sched, CFG)
    assert breaches > 0
    assert len(records) == 10
