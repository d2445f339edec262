import copy

import numpy as np
import pytest

from coldq.bench import ProblemStream
from coldq.core import ConfigurationError
from coldq.learner import ParamSchedule
from coldq.verify import (
    check_aggregate_violation,
    check_drift_bound,
    check_hedge_bound,
    check_per_slot_bound,
    check_queue_bounds,
    check_scaling,
    check_weight_simplex,
    fit_scaling,
    hard_violation_budget,
)


def test_queue_bounds_pass_on_real_runs(cache):
    for gid in ("tv_least_squares", "quadratic_prog", "job_scheduling"):
        trace, _, _ = cache.trace(gid, 120, seed=0)
        report = check_queue_bounds(trace)
        assert report.passed
        assert report.tolerance == 0.0
        assert report.rounds_checked == 120


def test_queue_bounds_negative_control():
    trace, _, _ = _fresh("quadratic_prog", 50)
    bad = copy.deepcopy(trace)
    bad.queue_values[20, 0] = bad.meta.constraint_bound / bad.meta.queue_decay + 1.0
    report = check_queue_bounds(bad)
    assert not report.passed
    assert report.first_violation == 21


def test_queue_bounds_pinned_at_floor_passes():
    trace, _, _ = _fresh("quadratic_prog", 30)
    pinned = copy.deepcopy(trace)
    pinned.queue_values[:] = pinned.meta.queue_floor
    assert check_queue_bounds(pinned).passed


def _fresh(gid, horizon, seed=0):
    from conftest import build_trace

    return build_trace(gid, horizon, seed)


def test_drift_bound_passes_on_time_varying_run(cache):
    trace, stream, _ = cache.trace("tv_least_squares", 120, seed=0)
    report = check_drift_bound(trace, stream)
    assert report.passed and not report.advisory
    assert report.max_slack <= 1e-9


def test_drift_bound_passes_on_fixed_run(cache):
    trace, stream, _ = cache.trace("quadratic_prog", 120, seed=0)
    report = check_drift_bound(trace, stream)
    assert report.passed and not report.advisory


def test_drift_bound_negative_control_fixed_constraints():
    # With fixed constraints the certificate is tight: a 10% queue inflation
    # breaks it at the first corrupted round.
    trace, stream, _ = _fresh("quadratic_prog", 60)
    bad = copy.deepcopy(trace)
    bad.queue_values[30:] *= 1.10
    report = check_drift_bound(bad, stream)
    assert not report.passed
    assert report.first_violation is not None
    assert report.violation_lhs > report.violation_rhs


def test_drift_bound_negative_control_time_varying():
    # The movement slack on redrawn constraints is large, so the corruption
    # must be commensurate: pump one round's queue toward the ceiling.
    trace, stream, _ = _fresh("tv_least_squares", 60)
    bad = copy.deepcopy(trace)
    bad.queue_values[30] = 0.9 * trace.meta.constraint_bound / trace.meta.queue_decay
    report = check_drift_bound(bad, stream)
    assert not report.passed


def test_drift_bound_advisory_without_exact_variation():
    trace, stream, _ = _fresh("tv_least_squares", 25)
    # Hide the structure: force the sampled, lower-estimate variation path.
    blurred = ProblemStream(
        spec=stream.spec,
        config=stream.config,
        build_round=stream.round,
        variation_fn=lambda t: (stream.variation_bound(t)[0], False),
        static_fn=stream.static_functions,
    )
    report = check_drift_bound(trace, blurred)
    assert report.advisory
    assert "lower estimate" in report.note


def test_per_slot_bound_passes(cache):
    trace, stream, sched = cache.trace("quadratic_prog", 150, seed=0)
    bench = cache.benchmarks("quadratic_prog", 150, 0)
    report = check_per_slot_bound(trace, stream, bench, sched, slack=1e-8 + 1e-4)
    assert report.passed


def test_per_slot_bound_rejects_decreasing_schedule(cache):
    trace, stream, _ = cache.trace("quadratic_prog", 150, seed=0)
    bench = cache.benchmarks("quadratic_prog", 150, 0)
    bad = ParamSchedule(lambda t: 1.0 if t <= 2 else 0.5, 0.25, 1.0)
    with pytest.raises(ConfigurationError):
        check_per_slot_bound(trace, stream, bench, bad, slack=1e-4)


def test_per_slot_bound_negative_control(cache):
    trace, stream, sched = _fresh("quadratic_prog", 100)
    bench = cache.benchmarks("quadratic_prog", 100, 0)
    bad = copy.deepcopy(trace)
    bad.losses += 1000.0  # break the loss-gap side
    report = check_per_slot_bound(bad, stream, bench, sched, slack=1e-4)
    assert not report.passed


def test_expert_checks_pass(cache):
    from coldq.cli import execute_run

    config = _expert_config(horizon=100)
    trace, stream, sched, bench = execute_run(config, seed=0, horizon=100)
    assert check_weight_simplex(trace).passed
    assert check_hedge_bound(trace).passed
    assert check_aggregate_violation(trace, stream).passed


def _expert_config(horizon):
    from coldq.cli import resolve_config

    return resolve_config(
        {
            "generator": {"id": "quadratic_prog"},
            "algorithm": "coldq_expert",
            "schedule": {"floor_rate": 0.5},
            "seeds": [0],
            "horizons": [horizon],
            "flags": {"benchmarks": False, "trace_experts": True},
        }
    )


def test_weight_simplex_negative_control(cache):
    from coldq.cli import execute_run

    config = _expert_config(horizon=40)
    trace, _, _, _ = execute_run(config, seed=0, horizon=40)
    bad = copy.deepcopy(trace)
    bad.expert.weights[10] *= 1.5
    assert not check_weight_simplex(bad).passed


def test_violation_budget_dominates_observed(cache):
    trace, stream, sched = cache.trace("tv_least_squares", 120, seed=0)
    bench = cache.benchmarks("tv_least_squares", 120, 0)
    from coldq.metrics import hard_violation

    budget = hard_violation_budget(trace, stream, bench, sched)
    assert hard_violation(trace) <= budget


def test_scaling_fit_recovers_power_law():
    results = [(T, 3.0 * T**0.5) for T in (500, 1000, 2000, 4000)]
    fit = fit_scaling(results)
    assert fit.slope == pytest.approx(0.5, abs=1e-9)
    report = check_scaling(results, exponent_claim=0.5, tolerance=0.1)
    assert report.passed
    report2 = check_scaling(results, exponent_claim=0.3, tolerance=0.1)
    assert not report2.passed


def test_scaling_excludes_nonpositive_values():
    results = [(500, 0.0), (1000, 2.0), (2000, 2.8), (4000, 4.0)]
    report = check_scaling(results, exponent_claim=0.5, tolerance=0.1)
    assert "excluded=1" in report.note


def test_scaling_semilog_mode():
    results = [(T, 10.0 * np.log(T) + 5.0) for T in (500, 1000, 2000, 4000, 8000)]
    report = check_scaling(
        results, exponent_claim=np.inf, tolerance=0.0, mode="semilogx", min_r_squared=0.9
    )
    assert report.passed
    fit = fit_scaling(results, mode="semilogx")
    assert fit.slope == pytest.approx(10.0, abs=1e-9)
    assert fit.r_squared > 0.999


def test_scaling_requires_enough_points():
    from coldq.core import ContractViolationError

    with pytest.raises(ContractViolationError):
        check_scaling([(500, 1.0), (1000, 2.0)], exponent_claim=1.0)
