"""Stable CSV serialization for traces, benchmark caches, and summaries.

Files are UTF-8 with LF endings; floats are written as Python's shortest
round-trip decimal so identical runs serialize to identical bytes. Every file
starts with a single comment line embedding its format version and a JSON
metadata blob (including the config hash) for provenance.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
import numpy as np

from .core import ConfigurationError
from .metrics import BenchmarkSet, ExpertTraceData, RunTrace, TraceMeta

TRACE_MAGIC = "# coldq-trace v1 "
BENCH_MAGIC = "# coldq-bench v1 "
SUMMARY_MAGIC = "# coldq-summary v1 "
PLOTDATA_MAGIC = "# coldq-plotdata v1 "


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def fmt(value) -> str:
    """Shortest round-trip decimal for a finite float; empty cell for None."""
    if value is None:
        return ""
    v = float(value)
    if np.isnan(v):
        return ""
    return repr(v)


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _meta_line(magic: str, meta: dict) -> str:
    return magic + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n"


def trace_to_csv(trace: RunTrace, include_expert: bool = True) -> str:
    T, p = trace.decisions.shape
    n = trace.n_constraints
    header = ["t", "loss", "cum_loss", "reg_s", "reg_d", "vio_h", "vio_s"]
    header += [f"q_{i+1}" for i in range(n)]
    header += [f"x_{i+1}" for i in range(p)]
    with_expert = trace.expert is not None and include_expert
    m = trace.expert.weights.shape[1] if with_expert else 0
    if with_expert:
        header += [f"w_{i+1}" for i in range(m)]
        header += [f"expert_vio_{i+1}" for i in range(m)]

    cum_loss = trace.cum_loss()
    reg_s = trace.static_regret_column()
    reg_d = trace.dynamic_regret_column()
    vio_h = trace.hard_violation_column()
    vio_s = trace.soft_violation_column()

    lines = [_meta_line(TRACE_MAGIC, trace.meta.to_dict()), ",".join(header) + "\n"]
    for i in range(T):
        row = [
            str(i + 1),
            fmt(trace.losses[i]),
            fmt(cum_loss[i]),
            fmt(reg_s[i]) if reg_s is not None else "",
            fmt(reg_d[i]) if reg_d is not None else "",
            fmt(vio_h[i]),
            fmt(vio_s[i]),
        ]
        row += [fmt(v) for v in trace.queue_values[i]]
        row += [fmt(v) for v in trace.decisions[i]]
        if with_expert:
            row += [fmt(v) for v in trace.expert.weights[i]]
            row += [fmt(v) for v in trace.expert.violation_totals[i]]
        lines.append(",".join(row) + "\n")
    return "".join(lines)


def write_trace(trace: RunTrace, path: Path, include_expert: bool = True) -> None:
    atomic_write_text(Path(path), trace_to_csv(trace, include_expert=include_expert))


def read_trace(path: Path) -> RunTrace:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith(TRACE_MAGIC):
        raise ConfigurationError(f"{path}: not a trace file")
    meta = TraceMeta.from_dict(json.loads(lines[0][len(TRACE_MAGIC):]))
    header = lines[1].split(",")
    q_cols = [i for i, h in enumerate(header) if h.startswith("q_")]
    x_cols = [i for i, h in enumerate(header) if h.startswith("x_")]
    w_cols = [i for i, h in enumerate(header) if h.startswith("w_")]
    ev_cols = [i for i, h in enumerate(header) if h.startswith("expert_vio_")]
    loss_col = header.index("loss")

    rows = [line.split(",") for line in lines[2:] if line]
    T = len(rows)
    losses = np.array([float(r[loss_col]) for r in rows])
    queues = np.array([[float(r[i]) for i in q_cols] for r in rows])
    decisions = np.array([[float(r[i]) for i in x_cols] for r in rows])
    # Constraint values are not serialized directly; checks that need them
    # re-evaluate the stream, which is reproducible from the config.
    constraints = np.full((T, len(q_cols)), np.nan)
    expert = None
    if w_cols:
        weights = np.array([[float(r[i]) for i in w_cols] for r in rows])
        viol = np.array([[float(r[i]) for i in ev_cols] for r in rows])
        expert = ExpertTraceData(
            weights=weights,
            decisions=np.zeros((T, len(w_cols), decisions.shape[1])),
            violation_totals=viol,
            surrogate_losses=np.zeros_like(weights),
            hedge_lr=float("nan"),
            initial_weights=weights[0],
        )
    return RunTrace(
        meta=meta,
        decisions=decisions,
        losses=losses,
        constraint_values=constraints,
        queue_values=queues,
        expert=expert,
    )


def bench_to_csv(bench: BenchmarkSet, meta: dict, dimension: int) -> str:
    info = dict(meta)
    info.update(
        {
            "path_length": bench.path_length,
            "constraint_variation": bench.constraint_variation,
            "variation_exact": bench.variation_exact,
            "static_feasible": bench.static_feasible,
        }
    )
    header = ["kind", "t", "f_dyn", "f_stat"] + [f"x_{i+1}" for i in range(dimension)]
    lines = [_meta_line(BENCH_MAGIC, info), ",".join(header) + "\n"]
    if bench.static_feasible and bench.x_star is not None:
        row = ["static", "0", "", ""] + [fmt(v) for v in bench.x_star]
        lines.append(",".join(row) + "\n")
    if bench.x_star_t is not None:
        for i in range(bench.x_star_t.shape[0]):
            f_stat = bench.f_static[i] if bench.f_static is not None else None
            row = ["dynamic", str(i + 1), fmt(bench.f_dynamic[i]), fmt(f_stat)]
            row += [fmt(v) for v in bench.x_star_t[i]]
            lines.append(",".join(row) + "\n")
    return "".join(lines)


def write_bench(bench: BenchmarkSet, meta: dict, dimension: int, path: Path) -> None:
    atomic_write_text(Path(path), bench_to_csv(bench, meta, dimension))


def read_bench(path: Path) -> tuple[BenchmarkSet, dict]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith(BENCH_MAGIC):
        raise ConfigurationError(f"{path}: not a benchmark cache file")
    info = json.loads(lines[0][len(BENCH_MAGIC):])
    header = lines[1].split(",")
    x_cols = [i for i, h in enumerate(header) if h.startswith("x_")]
    x_star = None
    dyn_rows = []
    for line in lines[2:]:
        if not line:
            continue
        parts = line.split(",")
        if parts[0] == "static":
            x_star = np.array([float(parts[i]) for i in x_cols])
        else:
            f_dyn = float(parts[2])
            f_stat = float(parts[3]) if parts[3] else None
            x = np.array([float(parts[i]) for i in x_cols])
            dyn_rows.append((f_dyn, f_stat, x))
    if dyn_rows:
        f_dynamic = np.array([r[0] for r in dyn_rows])
        f_static = (
            np.array([r[1] for r in dyn_rows]) if dyn_rows[0][1] is not None else None
        )
        x_star_t = np.stack([r[2] for r in dyn_rows])
    else:
        f_dynamic = None
        f_static = None
        x_star_t = None
    bench = BenchmarkSet(
        x_star_t=x_star_t,
        f_dynamic=f_dynamic,
        x_star=x_star,
        f_static=f_static,
        path_length=info.get("path_length"),
        constraint_variation=info.get("constraint_variation", 0.0),
        variation_exact=info.get("variation_exact", False),
        static_feasible=info.get("static_feasible", False),
    )
    return bench, info


def summary_to_csv(rows: list[dict], meta: dict) -> str:
    cols = [
        "seed",
        "T",
        "reg_s",
        "reg_d",
        "vio_h",
        "vio_s",
        "path_length",
        "constraint_variation",
        "breaches",
    ]
    lines = [_meta_line(SUMMARY_MAGIC, meta), ",".join(cols) + "\n"]
    for row in rows:
        out = []
        for c in cols:
            v = row.get(c)
            if c in ("seed", "T", "breaches"):
                out.append("" if v is None else str(int(v)))
            else:
                out.append(fmt(v))
        lines.append(",".join(out) + "\n")
    return "".join(lines)


def plotdata_to_csv(rows: list[tuple[int, str, float]], meta: dict) -> str:
    lines = [_meta_line(PLOTDATA_MAGIC, meta), "t,series,value\n"]
    for t, series, value in rows:
        lines.append(f"{t},{series},{fmt(value)}\n")
    return "".join(lines)
