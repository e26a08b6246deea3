"""Figure rendering for experiment tables (Agg backend, file output only)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import Table  # noqa: E402

_LOG2_X = {"size", "banks_per_pseudo_channel"}


def xy_series(table: Table) -> dict:
    """{series label: [(x, y), ...]} in row order."""
    x, y, series = table.xy
    xi, yi = table.columns.index(x), table.columns.index(y)
    si = table.columns.index(series) if series else None
    out: dict = {}
    for r in table.rows:
        label = str(r[si]) if si is not None else y
        out.setdefault(label, []).append((r[xi], r[yi]))
    return out


def render(table: Table, path: Path, title: str | None = None) -> Path:
    x, y, _ = table.xy
    fig, ax = plt.subplots(figsize=(6.0, 3.6), dpi=100)
    for label, pts in xy_series(table).items():
        xs = [math.log2(p[0]) if x in _LOG2_X else p[0] for p in pts]
        ax.plot(xs, [p[1] for p in pts], marker="o", ms=3, lw=1.2, label=label)
    if y == "speedup":
        ax.axhline(1.0, color="0.5", lw=0.8, ls="--")
    ax.set_xlabel(f"log2({x})" if x in _LOG2_X else x)
    ax.set_ylabel(y)
    ax.set_title(title or table.name, fontsize=10)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path
