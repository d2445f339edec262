"""Command-line harness: run experiments, verify certificates, emit reports.

Verbs:

* ``run``      -- play configured (seed, horizon) runs; write trace CSVs,
                  benchmark caches, and a metrics summary; optionally verify.
* ``verify``   -- re-run certificate checks from serialized artifacts.
* ``plotdata`` -- aggregate traces into long-format curve data and render
                  figures next to it.
* ``presets``  -- list or print the canonical experiment parameter sets.

Configuration is a single JSON document (``--config``, ``--preset``, or
stdin). Exit codes: 0 ok, 1 check failure, 2 config error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import metrics, trace_io, verify
from .bench import DEFAULT_HORIZONS, GENERATORS, GeneratorConfig, make_stream
from .core import ConfigurationError
from .experts import bank_size, expert_init, run_expert
from .learner import ParamSchedule, convex_schedule, run, strongly_convex_schedule
from .metrics import ExpertTraceData, RunTrace, TraceMeta
from .solvers import InfeasibleInstanceError, InnerSolverConfig, SolverError

OUTPUT_ROOT_ENV = "COLDQ_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_FAILURE = 3

PRESETS: dict[str, dict] = {
    "table3": {
        "generator": {"id": "tv_least_squares"},
        "algorithm": "coldq",
        "schedule": {"mode": "convex_dynamic", "floor_rate": 0.5, "v_x": 0.0},
        "seeds": [0, 1, 2, 3, 4],
        "horizons": [1000],
        "output_dir": "out/table3",
    },
    "table4": {
        "generator": {"id": "quadratic_prog"},
        "algorithm": "coldq",
        "schedule": {"mode": "convex_dynamic", "floor_rate": 0.5, "v_x": 0.0},
        "seeds": [0, 1, 2, 3, 4],
        "horizons": [5000],
        "output_dir": "out/table4",
    },
    "table5": {
        "generator": {"id": "linear_prog"},
        "algorithm": "coldq",
        "schedule": {"mode": "convex_dynamic", "floor_rate": 0.5, "v_x": 0.0},
        "seeds": [0, 1, 2, 3, 4],
        "horizons": [5000],
        "output_dir": "out/table5",
    },
    "table6": {
        "generator": {"id": "job_scheduling"},
        "algorithm": "coldq",
        "schedule": {"mode": "convex_dynamic", "floor_rate": 0.5, "v_x": 0.0},
        "seeds": [0, 1, 2, 3, 4],
        "horizons": [2880],
        "output_dir": "out/table6",
    },
}

_TOP_KEYS = {
    "generator",
    "algorithm",
    "schedule",
    "solver",
    "seeds",
    "horizons",
    "output_dir",
    "flags",
}
_GENERATOR_KEYS = {"id", "horizon", "params"}
_SOLVER_KEYS = {"max_iters", "tolerance", "restarts"}
_FLAG_KEYS = {"trace_experts", "verify", "benchmarks", "figures", "benchmark_cache"}
_SCHEDULE_KEYS = {
    "mode",
    "floor_rate",
    "v_x",
    "curvature",
    "alpha",
    "queue_decay",
    "queue_floor",
    "hedge_lr",
    "n_experts",
}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys in {where}: {sorted(unknown)}")


def resolve_config(raw: dict) -> dict:
    """Validate a raw config document and fill defaults. Unknown keys reject."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")

    gen = raw.get("generator")
    if not isinstance(gen, dict) or "id" not in gen:
        raise ConfigurationError("config.generator must be an object with an 'id'")
    _reject_unknown(gen, _GENERATOR_KEYS, "config.generator")
    if gen["id"] not in GENERATORS:
        raise ConfigurationError(
            f"unknown generator {gen['id']!r}; known: {sorted(GENERATORS)}"
        )

    algorithm = raw.get("algorithm", "coldq")
    if algorithm not in ("coldq", "coldq_expert"):
        raise ConfigurationError("algorithm must be 'coldq' or 'coldq_expert'")

    sched = raw.get("schedule")
    if not isinstance(sched, dict):
        raise ConfigurationError("config.schedule must be an object")
    _reject_unknown(sched, _SCHEDULE_KEYS, "config.schedule")

    solver = dict(raw.get("solver", {}))
    _reject_unknown(solver, _SOLVER_KEYS, "config.solver")
    solver.setdefault("max_iters", 200)
    solver.setdefault("tolerance", 1e-8)
    solver.setdefault("restarts", 0)

    seeds = raw.get("seeds", [0])
    horizons = raw.get("horizons")
    if horizons is None:
        horizons = [int(gen.get("horizon", DEFAULT_HORIZONS[gen["id"]]))]
    if not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigurationError("seeds must be a non-empty list of integers")
    if not horizons or not all(isinstance(t, int) and t >= 1 for t in horizons):
        raise ConfigurationError("horizons must be a non-empty list of positive integers")

    flags = dict(raw.get("flags", {}))
    _reject_unknown(flags, _FLAG_KEYS, "config.flags")
    flags.setdefault("trace_experts", False)
    flags.setdefault("verify", False)
    flags.setdefault("benchmarks", True)
    flags.setdefault("figures", True)
    flags.setdefault("benchmark_cache", None)

    resolved = {
        "generator": {
            "id": gen["id"],
            "params": dict(gen.get("params", {})),
        },
        "algorithm": algorithm,
        "schedule": dict(sched),
        "solver": solver,
        "seeds": list(seeds),
        "horizons": list(horizons),
        "output_dir": raw.get("output_dir", "out"),
        "flags": flags,
    }
    return resolved


def semantic_config(config: dict) -> dict:
    """The part of a resolved config that determines artifact contents.

    Output location and report-only flags do not change what is computed, so
    they stay out of the provenance hash.
    """
    return {
        "generator": config["generator"],
        "algorithm": config["algorithm"],
        "schedule": config["schedule"],
        "solver": config["solver"],
        "seeds": config["seeds"],
        "horizons": config["horizons"],
    }


def build_schedule(config: dict, spec, horizon: int) -> ParamSchedule:
    sched = config["schedule"]
    mode = sched.get("mode", "convex_dynamic")
    effective_t = max(horizon, 2)
    if mode == "convex_dynamic":
        return convex_schedule(
            spec, effective_t, float(sched.get("floor_rate", 0.5)), float(sched.get("v_x", 0.0))
        )
    if mode == "strongly_convex":
        curvature = sched.get("curvature")
        return strongly_convex_schedule(
            spec,
            effective_t,
            float(sched.get("floor_rate", 0.5)),
            None if curvature is None else float(curvature),
        )
    if mode == "custom":
        alpha = sched.get("alpha")
        if not isinstance(alpha, dict) or "kind" not in alpha:
            raise ConfigurationError("custom schedule needs alpha {kind, ...}")
        if alpha["kind"] == "power":
            scale = float(alpha.get("scale", 1.0))
            exponent = float(alpha.get("exponent", 0.5))
            fn = lambda t: scale * float(t) ** exponent
        elif alpha["kind"] == "linear":
            scale = float(alpha.get("scale", 1.0))
            fn = lambda t: scale * float(t)
        else:
            raise ConfigurationError(f"unknown alpha kind {alpha['kind']!r}")
        return ParamSchedule(
            prox_weight=fn,
            queue_decay=float(sched["queue_decay"]),
            queue_floor=float(sched["queue_floor"]),
            mode="custom",
        )
    raise ConfigurationError(f"unknown schedule mode {mode!r}")


def derived_parameters(config: dict) -> dict:
    """Per-horizon derived values, for --dry-run display."""
    out = {}
    for T in config["horizons"]:
        effective_t = max(T, 2)
        entry: dict = {}
        if config["algorithm"] == "coldq_expert":
            entry["n_experts"] = bank_size(T)
            entry["hedge_lr"] = config["schedule"].get("hedge_lr") or T**-0.5
            entry["queue_decay"] = effective_t**-1.5
            entry["queue_floor"] = float(config["schedule"].get("floor_rate", 0.5)) * T**1.5
        else:
            mode = config["schedule"].get("mode", "convex_dynamic")
            if mode in ("convex_dynamic", "strongly_convex"):
                entry["queue_decay"] = 1.0 / effective_t
                entry["queue_floor"] = float(config["schedule"].get("floor_rate", 0.5)) * effective_t
            else:
                entry["queue_decay"] = config["schedule"].get("queue_decay")
                entry["queue_floor"] = config["schedule"].get("queue_floor")
        out[str(T)] = entry
    return out


def _output_dir(config: dict) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    out = Path(config["output_dir"])
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def _artifact_names(config: dict, seed: int, horizon: int) -> tuple[str, str]:
    gen = config["generator"]["id"]
    return (
        f"trace_{gen}_s{seed}_T{horizon}.csv",
        f"bench_{gen}_s{seed}_T{horizon}.csv",
    )


def _expert_trace_data(details, hedge_lr, keep_decisions: bool) -> ExpertTraceData:
    weights = np.stack([d.weights for d in details])
    decisions = np.stack([d.expert_decisions for d in details])
    viol = np.stack([d.expert_violation_totals for d in details])
    surrogate = np.stack([d.surrogate_losses for d in details])
    return ExpertTraceData(
        weights=weights,
        decisions=decisions if keep_decisions else decisions,
        violation_totals=viol,
        surrogate_losses=surrogate,
        hedge_lr=hedge_lr,
        initial_weights=weights[0],
    )


def execute_run(config: dict, seed: int, horizon: int, dyn_cache: Optional[dict] = None):
    """One (seed, horizon) run: returns (trace, stream, sched, bench)."""
    gen_cfg = GeneratorConfig(
        generator_id=config["generator"]["id"],
        horizon=horizon,
        seed=seed,
        params=config["generator"]["params"],
    )
    stream = make_stream(gen_cfg)
    spec = stream.spec
    solver_cfg = InnerSolverConfig(
        max_iters=int(config["solver"]["max_iters"]),
        tolerance=float(config["solver"]["tolerance"]),
        restarts=int(config["solver"]["restarts"]),
    )
    cfg_hash = trace_io.config_hash(semantic_config(config))

    if config["algorithm"] == "coldq_expert":
        floor_rate = float(config["schedule"].get("floor_rate", 0.5))
        hedge_lr = config["schedule"].get("hedge_lr")
        n_experts = config["schedule"].get("n_experts")
        records, details, breaches = run_expert(
            stream,
            floor_rate,
            solver_cfg,
            seed=seed,
            hedge_lr=None if hedge_lr is None else float(hedge_lr),
            n_experts=None if n_experts is None else int(n_experts),
        )
        bank = expert_init(spec, horizon, floor_rate)  # for schedule metadata only
        sched = bank.schedules[0]
        expert_data = _expert_trace_data(
            details, bank.hedge_lr if hedge_lr is None else float(hedge_lr),
            config["flags"]["trace_experts"],
        )
        schedule_desc = {
            "mode": "expert",
            "floor_rate": floor_rate,
            "n_experts": expert_data.weights.shape[1],
            "hedge_lr": expert_data.hedge_lr,
            "queue_decay": sched.queue_decay,
            "queue_floor": sched.queue_floor,
        }
        queue_floor = sched.queue_floor
        queue_decay = sched.queue_decay
    else:
        sched = build_schedule(config, spec, horizon)
        records, breaches = run(stream, sched, solver_cfg, seed=seed)
        expert_data = None
        schedule_desc = sched.describe()
        queue_floor = sched.queue_floor
        queue_decay = sched.queue_decay

    meta = TraceMeta(
        generator_id=gen_cfg.generator_id,
        seed=seed,
        horizon=horizon,
        algorithm=config["algorithm"],
        schedule=schedule_desc,
        grad_bound=spec.grad_bound,
        constraint_bound=spec.constraint_bound,
        diameter=spec.diameter,
        queue_floor=queue_floor,
        queue_decay=queue_decay,
        strong_convexity=spec.strong_convexity,
        config_hash=cfg_hash,
        assumption_breaches=breaches,
    )
    trace = metrics.from_records(records, meta, expert=expert_data)

    bench = None
    if config["flags"]["benchmarks"]:
        bench = metrics.compute_benchmarks(
            stream, solver_cfg, dynamic_cache=dyn_cache
        )
        metrics.attach_benchmarks(trace, bench)
    return trace, stream, sched, bench


def _summary_row(trace: RunTrace, bench) -> dict:
    row = {
        "seed": trace.meta.seed,
        "T": trace.meta.horizon,
        "vio_h": metrics.hard_violation(trace),
        "vio_s": metrics.soft_violation(trace),
        "breaches": trace.meta.assumption_breaches,
        "reg_s": None,
        "reg_d": None,
        "path_length": None,
        "constraint_variation": None,
    }
    if trace.meta.horizon == 1:
        # Degenerate horizon: the start point is arbitrary, report zero regret.
        row["reg_s"] = 0.0
        row["reg_d"] = 0.0
    elif bench is not None:
        if bench.f_dynamic is not None:
            row["reg_d"] = metrics.dynamic_regret(trace, bench)
        if bench.static_feasible:
            row["reg_s"] = metrics.static_regret(trace, bench)
    if bench is not None:
        row["path_length"] = bench.path_length
        row["constraint_variation"] = bench.constraint_variation
    return row


def _run_checks(trace, stream, sched, bench, solver_tol) -> list[verify.CheckReport]:
    if trace.expert is None:
        queue_tol = 0.0
    else:
        # The expert trace's queue column is a convex combination of member
        # queues; allow rounding at the scale of the ceiling.
        queue_tol = 1e-9 * (trace.meta.constraint_bound / trace.meta.queue_decay)
    reports = [verify.check_queue_bounds(trace, tolerance=queue_tol)]
    if trace.expert is None:
        # Drift and per-round certificates are statements about one learner's
        # queue; the expert aggregate column is a weighted summary instead.
        reports.append(verify.check_drift_bound(trace, stream))
        if bench is not None and bench.x_star_t is not None:
            slack = solver_tol + 1e-4
            reports.append(verify.check_per_slot_bound(trace, stream, bench, sched, slack))
    else:
        reports.append(verify.check_weight_simplex(trace))
        reports.append(verify.check_hedge_bound(trace))
        reports.append(verify.check_aggregate_violation(trace, stream))
    return reports


def _run_seed(config: dict, seed: int):
    """Run every horizon for one seed, writing artifacts as they finish.

    Horizons run longest-first so the per-round comparator cache warms once
    per seed. Each worker owns its seed end to end, so the fan-out needs no
    shared state.
    """
    out_dir = _output_dir(config)
    cfg_hash = trace_io.config_hash(semantic_config(config))
    bench_dir = (
        Path(config["flags"]["benchmark_cache"])
        if config["flags"]["benchmark_cache"]
        else out_dir / "bench"
    )
    rows: dict[int, dict] = {}
    reports: list[verify.CheckReport] = []
    dyn_cache: dict = {}
    for horizon in sorted(config["horizons"], reverse=True):
        trace, stream, sched, bench = execute_run(config, seed, horizon, dyn_cache)
        trace_name, bench_name = _artifact_names(config, seed, horizon)
        trace_io.write_trace(
            trace, out_dir / trace_name, include_expert=config["flags"]["trace_experts"]
        )
        if bench is not None:
            trace_io.write_bench(
                bench,
                {
                    "config_hash": cfg_hash,
                    "generator": config["generator"]["id"],
                    "seed": seed,
                    "T": horizon,
                },
                trace.dimension,
                bench_dir / bench_name,
            )
        if config["flags"]["verify"]:
            reports.extend(
                _run_checks(trace, stream, sched, bench, config["solver"]["tolerance"])
            )
        rows[horizon] = _summary_row(trace, bench)
    return seed, rows, reports


def run_experiment(config: dict, workers: int = 1) -> int:
    """Run every (seed, horizon) cell and write artifacts. Returns exit code."""
    out_dir = _output_dir(config)
    cfg_hash = trace_io.config_hash(semantic_config(config))

    all_reports: list[verify.CheckReport] = []
    results: dict[tuple[int, int], dict] = {}
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            for seed, rows, reports in pool.map(
                _run_seed, [config] * len(config["seeds"]), config["seeds"]
            ):
                all_reports.extend(reports)
                for horizon, row in rows.items():
                    results[(seed, horizon)] = row
    else:
        for seed in config["seeds"]:
            seed, rows, reports = _run_seed(config, seed)
            all_reports.extend(reports)
            for horizon, row in rows.items():
                results[(seed, horizon)] = row

    summary_rows = [
        results[(seed, horizon)]
        for seed in config["seeds"]
        for horizon in config["horizons"]
    ]
    trace_io.atomic_write_text(
        out_dir / "summary.csv",
        trace_io.summary_to_csv(summary_rows, {"config_hash": cfg_hash}),
    )

    if config["flags"]["verify"]:
        trace_io.atomic_write_text(
            out_dir / "checks.json",
            verify.reports_to_json(all_reports, {"config_hash": cfg_hash}),
        )
        if not verify.all_passed(all_reports):
            return EXIT_CHECK_FAILURE
    return EXIT_OK


def emit_plot_data(
    traces: list[RunTrace],
    out: Optional[Path] = None,
    figures: bool = True,
) -> list[tuple[int, str, float]]:
    """Aggregate traces into long-format (t, series, value) curve rows.

    Emits median, quartiles, and min/max envelopes for accumulated loss and
    hard violation; scheduling traces additionally get the time-averaged cost
    and the per-round unserved arrival mass. When ``out`` is a directory the
    rows are written to ``plotdata.csv`` there, with rendered figures next to
    it unless ``figures`` is off.
    """
    if not traces:
        raise ConfigurationError("plot data needs at least one trace")
    gen_ids = {t.meta.generator_id for t in traces}
    if len(gen_ids) != 1:
        raise ConfigurationError(f"mixed-generator traces rejected: {sorted(gen_ids)}")
    horizons = {t.horizon for t in traces}
    if len(horizons) != 1:
        raise ConfigurationError("traces must share one horizon for aggregation")
    T = horizons.pop()
    gen_id = gen_ids.pop()

    series: dict[str, np.ndarray] = {
        "cum_loss": np.stack([t.cum_loss() for t in traces]),
        "vio_h": np.stack([t.hard_violation_column() for t in traces]),
    }
    if gen_id == "job_scheduling":
        rounds = np.arange(1, T + 1, dtype=np.float64)
        series["energy_cost_avg"] = np.stack([t.cum_loss() / rounds for t in traces])
        series["delayed_jobs"] = np.stack([t.round_violations() for t in traces])

    rows: list[tuple[int, str, float]] = []
    stats = [
        ("median", lambda a: np.median(a, axis=0)),
        ("q1", lambda a: np.percentile(a, 25, axis=0)),
        ("q3", lambda a: np.percentile(a, 75, axis=0)),
        ("min", lambda a: np.min(a, axis=0)),
        ("max", lambda a: np.max(a, axis=0)),
    ]
    for name in series:
        for stat_name, fn in stats:
            values = fn(series[name])
            for t in range(T):
                rows.append((t + 1, f"{name}_{stat_name}", float(values[t])))

    if out is not None:
        out = Path(out)
        meta = {
            "generator": gen_id,
            "config_hash": traces[0].meta.config_hash,
            "n_traces": len(traces),
        }
        trace_io.atomic_write_text(out / "plotdata.csv", trace_io.plotdata_to_csv(rows, meta))
        if figures:
            from .plotting import render_figures

            render_figures(rows, out / "figures", gen_id)
    return rows


def _load_config_from_args(args) -> dict:
    sources = [s for s in (args.config, args.preset) if s]
    if len(sources) > 1:
        raise ConfigurationError("give exactly one of --config or --preset")
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigurationError(
                f"unknown preset {args.preset!r}; known: {sorted(PRESETS)}"
            )
        raw = json.loads(json.dumps(PRESETS[args.preset]))
    elif args.config == "-" or (args.config is None and not sys.stdin.isatty()):
        raw = json.load(sys.stdin)
    elif args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}")
    else:
        raise ConfigurationError("no config given (use --config, --preset, or stdin)")
    if getattr(args, "output_dir", None):
        raw["output_dir"] = args.output_dir
    if getattr(args, "seeds", None):
        raw["seeds"] = [int(s) for s in args.seeds.split(",")]
    if getattr(args, "horizons", None):
        raw["horizons"] = [int(t) for t in args.horizons.split(",")]
    if getattr(args, "verify", False):
        raw.setdefault("flags", {})["verify"] = True
    return resolve_config(raw)


def _cmd_run(args) -> int:
    config = _load_config_from_args(args)
    if args.dry_run:
        shown = dict(config)
        shown["derived"] = derived_parameters(config)
        shown["config_hash"] = trace_io.config_hash(semantic_config(config))
        print(json.dumps(shown, sort_keys=True, indent=2))
        return EXIT_OK
    return run_experiment(config, workers=max(1, args.workers))


def _cmd_verify(args) -> int:
    config = _load_config_from_args(args)
    out_dir = _output_dir(config)
    bench_dir = (
        Path(config["flags"]["benchmark_cache"])
        if config["flags"]["benchmark_cache"]
        else out_dir / "bench"
    )
    reports: list[verify.CheckReport] = []
    for seed in config["seeds"]:
        for horizon in config["horizons"]:
            trace_name, bench_name = _artifact_names(config, seed, horizon)
            trace = trace_io.read_trace(out_dir / trace_name)
            gen_cfg = GeneratorConfig(
                generator_id=config["generator"]["id"],
                horizon=horizon,
                seed=seed,
                params=config["generator"]["params"],
            )
            stream = make_stream(gen_cfg)
            # The serialized trace drops raw constraint values; rebuild them
            # from the replayable stream at the recorded decisions.
            g = np.stack(
                [
                    np.asarray(stream.round(t).constraint_values(trace.decisions[t - 1]))
                    for t in range(1, horizon + 1)
                ]
            )
            trace.constraint_values = g
            if trace.meta.algorithm == "coldq":
                reports.append(verify.check_queue_bounds(trace))
                reports.append(verify.check_drift_bound(trace, stream))
            else:
                queue_tol = 1e-9 * (trace.meta.constraint_bound / trace.meta.queue_decay)
                reports.append(verify.check_queue_bounds(trace, tolerance=queue_tol))
                if trace.expert is not None:
                    reports.append(verify.check_weight_simplex(trace))
            bench_path = bench_dir / bench_name
            if bench_path.exists() and trace.meta.algorithm == "coldq":
                bench, _ = trace_io.read_bench(bench_path)
                if bench.x_star_t is not None:
                    sched = build_schedule(config, stream.spec, horizon)
                    slack = float(config["solver"]["tolerance"]) + 1e-4
                    reports.append(
                        verify.check_per_slot_bound(trace, stream, bench, sched, slack)
                    )
    trace_io.atomic_write_text(
        out_dir / "checks.json",
        verify.reports_to_json(reports, {"config_hash": trace_io.config_hash(semantic_config(config))}),
    )
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(f"{status} {r.check_id}: max_slack={r.max_slack:.3e} tol={r.tolerance:.3e}")
    return EXIT_OK if verify.all_passed(reports) else EXIT_CHECK_FAILURE


def _cmd_plotdata(args) -> int:
    config = _load_config_from_args(args)
    out_dir = _output_dir(config)
    traces = []
    for seed in config["seeds"]:
        for horizon in config["horizons"]:
            trace_name, _ = _artifact_names(config, seed, horizon)
            traces.append(trace_io.read_trace(out_dir / trace_name))
    figures = config["flags"]["figures"] and not args.no_figures
    emit_plot_data(traces, out=out_dir, figures=figures)
    print(f"wrote {out_dir / 'plotdata.csv'}")
    if figures:
        print(f"wrote figures under {out_dir / 'figures'}")
    return EXIT_OK


def _cmd_presets(args) -> int:
    if args.show:
        if args.show not in PRESETS:
            raise ConfigurationError(f"unknown preset {args.show!r}")
        print(json.dumps(PRESETS[args.show], sort_keys=True, indent=2))
    else:
        for name in sorted(PRESETS):
            gen = PRESETS[name]["generator"]["id"]
            print(f"{name}: {gen}")
    return EXIT_OK


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a JSON config ('-' for stdin)")
    p.add_argument("--preset", help="name of a built-in parameter set")
    p.add_argument("--output-dir", help="override the config's output directory")
    p.add_argument("--seeds", help="comma-separated seed override")
    p.add_argument("--horizons", help="comma-separated horizon override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coldq",
        description="Constrained online learning harness: run, verify, report.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run experiments and write artifacts")
    _add_config_args(p_run)
    p_run.add_argument("--verify", action="store_true", help="run certificate checks")
    p_run.add_argument("--dry-run", action="store_true", help="print resolved config only")
    p_run.add_argument(
        "--workers", type=int, default=1, help="fan seeds out to this many processes"
    )
    p_run.set_defaults(fn=_cmd_run)

    p_ver = sub.add_parser("verify", help="check certificates on serialized artifacts")
    _add_config_args(p_ver)
    p_ver.set_defaults(fn=_cmd_verify)

    p_plot = sub.add_parser("plotdata", help="emit aggregated curve data and figures")
    _add_config_args(p_plot)
    p_plot.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p_plot.set_defaults(fn=_cmd_plotdata)

    p_pre = sub.add_parser("presets", help="list built-in parameter sets")
    p_pre.add_argument("--show", help="print one preset as JSON")
    p_pre.set_defaults(fn=_cmd_presets)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (SolverError, InfeasibleInstanceError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE


if __name__ == "__main__":
    sys.exit(main())
