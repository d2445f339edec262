"""Figure rendering for experiment reports.

Renders the aggregated curve data emitted alongside the long-format CSV:
median lines with interquartile bands for accumulated loss and hard
violation, plus the scheduling-specific cost/backlog views when present.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams.update(
    {
        "figure.figsize": (6.0, 3.8),
        "figure.dpi": 130,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 10,
    }
)

# Base series name -> (y label, file suffix)
_FIGURES = {
    "cum_loss": ("accumulated loss", "loss"),
    "vio_h": ("accumulated hard violation", "violation"),
    "energy_cost_avg": ("time-averaged cost", "energy_cost"),
    "delayed_jobs": ("unserved arrival mass", "delayed_jobs"),
}


def _collect(rows):
    """Group long-format (t, series, value) rows into series -> arrays."""
    table: dict[str, tuple[list[int], list[float]]] = {}
    for t, series, value in rows:
        ts, vs = table.setdefault(series, ([], []))
        ts.append(t)
        vs.append(value)
    return table


def render_figures(rows, out_dir: Path, prefix: str) -> list[Path]:
    """Render one PNG per known base series; returns the written paths."""
    table = _collect(rows)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for base, (ylabel, suffix) in _FIGURES.items():
        med = table.get(f"{base}_median")
        if med is None:
            continue
        fig, ax = plt.subplots()
        ax.plot(med[0], med[1], label="median", color="tab:blue")
        q1 = table.get(f"{base}_q1")
        q3 = table.get(f"{base}_q3")
        if q1 is not None and q3 is not None:
            ax.fill_between(
                med[0], q1[1], q3[1], alpha=0.25, color="tab:blue", label="interquartile"
            )
        ax.set_xlabel("round")
        ax.set_ylabel(ylabel)
        ax.legend(loc="best")
        fig.tight_layout()
        path = out_dir / f"{prefix}_{suffix}.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written
