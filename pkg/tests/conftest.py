import pytest

from coldq.bench import GeneratorConfig, make_stream
from coldq.learner import convex_schedule, run, strongly_convex_schedule
from coldq.metrics import TraceMeta, compute_benchmarks, from_records
from coldq.solvers import InnerSolverConfig

SOLVER = InnerSolverConfig(max_iters=60, tolerance=1e-8)


def build_trace(generator_id, horizon, seed, schedule="convex", floor_rate=0.5, v_x=0.0):
    """Run one stream and wrap the records in a trace with full metadata."""
    stream = make_stream(GeneratorConfig(generator_id, horizon=horizon, seed=seed))
    if schedule == "convex":
        sched = convex_schedule(stream.spec, horizon, floor_rate, v_x)
    elif schedule == "strongly_convex":
        sched = strongly_convex_schedule(stream.spec, horizon, floor_rate)
    else:
        raise ValueError(schedule)
    records, breaches = run(stream, sched, SOLVER, seed=seed)
    meta = TraceMeta(
        generator_id=generator_id,
        seed=seed,
        horizon=horizon,
        algorithm="coldq",
        schedule=sched.describe(),
        grad_bound=stream.spec.grad_bound,
        constraint_bound=stream.spec.constraint_bound,
        diameter=stream.spec.diameter,
        queue_floor=sched.queue_floor,
        queue_decay=sched.queue_decay,
        strong_convexity=stream.spec.strong_convexity,
        assumption_breaches=breaches,
    )
    return from_records(records, meta), stream, sched


class RunCache:
    """Session-wide cache so acceptance criteria can share identical runs."""

    def __init__(self):
        self._traces = {}
        self._benchmarks = {}
        self._dyn = {}

    def trace(self, generator_id, horizon, seed, schedule="convex", floor_rate=0.5, v_x=0.0):
        key = (generator_id, horizon, seed, schedule, floor_rate, v_x)
        if key not in self._traces:
            self._traces[key] = build_trace(
                generator_id, horizon, seed, schedule, floor_rate, v_x
            )
        return self._traces[key]

    def benchmarks(self, generator_id, horizon, seed, need_dynamic=True, need_static=True):
        key = (generator_id, horizon, seed, need_dynamic, need_static)
        if key not in self._benchmarks:
            stream = make_stream(GeneratorConfig(generator_id, horizon=horizon, seed=seed))
            dyn_key = (generator_id, seed)
            cache = self._dyn.setdefault(dyn_key, {})
            self._benchmarks[key] = compute_benchmarks(
                stream,
                InnerSolverConfig(),
                need_dynamic=need_dynamic,
                need_static=need_static,
                dynamic_cache=cache,
            )
        return self._benchmarks[key]


@pytest.fixture(scope="session")
def cache():
    return RunCache()
