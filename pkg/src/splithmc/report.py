"""Rendering of benchmark tables and analysis figures.

Tables are plain aligned text with the best value per cost-normalised
column starred within each block.  Figures are written straight to PNG
files next to the delimited output (the Agg backend, no display needed).
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .integrators import Scheme

__all__ = [
    "BENCH_COLUMNS",
    "format_block_table",
    "render_efficiency_figures",
    "render_bench_figure",
]

BENCH_COLUMNS = [
    "scheme",
    "cpu_time",
    "step_size",
    "min_ess",
    "med_ess",
    "max_ess",
    "min_ess_per_time",
    "med_ess_per_time",
    "min_ess_per_grad",
]

# columns where the block-best value gets a star (larger is better)
_MARKED = ("min_ess_per_time", "med_ess_per_time", "min_ess_per_grad")

_SCHEME_STYLE = {
    Scheme.LEAPFROG: ("tab:blue", "o"),
    Scheme.TWO_STAGE: ("tab:orange", "s"),
    Scheme.NEW_TWO_STAGE: ("tab:green", "^"),
    Scheme.THREE_STAGE: ("tab:red", "d"),
}


def _cell(value, column: str) -> str:
    if isinstance(value, str):
        return value
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    if column in ("min_ess", "med_ess", "max_ess"):
        return f"{value:.1f}"
    if column == "step_size":
        return f"{value:.4f}"
    if column == "cpu_time":
        return f"{value:.2f}"
    return f"{value:.4g}"


def format_block_table(
    title: str,
    rows: List[Dict],
    columns: Sequence[str] = BENCH_COLUMNS,
    marked_columns: Sequence[str] = _MARKED,
) -> str:
    """One titled block of aligned rows; block-best marked values get '*'."""
    best: Dict[str, float] = {}
    for column in marked_columns:
        values = [r[column] for r in rows if isinstance(r.get(column), (int, float))]
        finite = [v for v in values if math.isfinite(v)]
        if finite:
            best[column] = max(finite)

    table: List[List[str]] = [list(columns)]
    for row in rows:
        cells = []
        for column in columns:
            text = _cell(row.get(column), column)
            if column in best and row.get(column) == best[column]:
                text = "*" + text
            cells.append(text)
        table.append(cells)

    widths = [max(len(line[i]) for line in table) for i in range(len(columns))]
    lines = [title]
    for index, line in enumerate(table):
        rendered = "  ".join(
            cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i])
            for i, cell in enumerate(line)
        )
        lines.append(rendered)
        if index == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_efficiency_figures(curves: Dict, out_dir) -> List[Path]:
    """Plot best efficiency and its ratio to leapfrog against log10(d).

    Returns the paths of the two PNG files written into ``out_dir``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(7, 5))
    for kind in Scheme:
        points = curves.get(kind, {})
        dims = sorted(d for d, point in points.items() if point is not None)
        if not dims:
            continue
        color, marker = _SCHEME_STYLE[kind]
        ax.plot(
            np.log10(dims),
            [math.log10(points[d].efficiency) for d in dims],
            color=color,
            marker=marker,
            markersize=3,
            label=kind.value,
        )
    ax.set_xlabel("log10 dimension")
    ax.set_ylabel("log10 max accepted moves per gradient")
    ax.set_title("Best efficiency on the standard Gaussian")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "efficiency_vs_dimension.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(7, 5))
    reference = curves.get(Scheme.LEAPFROG, {})
    for kind in Scheme:
        if kind is Scheme.LEAPFROG:
            continue
        points = curves.get(kind, {})
        dims = sorted(
            d
            for d, point in points.items()
            if point is not None and reference.get(d) is not None
        )
        if not dims:
            continue
        color, marker = _SCHEME_STYLE[kind]
        ax.plot(
            np.log10(dims),
            [points[d].efficiency / reference[d].efficiency for d in dims],
            color=color,
            marker=marker,
            markersize=3,
            label=f"{kind.value} / leapfrog",
        )
    ax.axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
    ax.set_xlabel("log10 dimension")
    ax.set_ylabel("efficiency ratio vs leapfrog")
    ax.set_title("Efficiency relative to leapfrog")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "efficiency_ratio_vs_dimension.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)
    return paths


def render_bench_figure(
    blocks: List[Tuple[str, List[Dict]]], out_path, title: Optional[str] = None
) -> Path:
    """Grouped bars of the cost-normalised ESS rates, one panel per block."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    n = max(len(blocks), 1)
    fig, axes = plt.subplots(2, n, figsize=(4.0 * n, 7), squeeze=False)
    metrics = [("min_ess_per_time", "min ESS / second"), ("min_ess_per_grad", "min ESS / gradient")]
    for column_index, (block_title, rows) in enumerate(blocks):
        for metric_index, (metric, label) in enumerate(metrics):
            ax = axes[metric_index][column_index]
            names = [r["scheme"] for r in rows]
            values = [r.get(metric, float("nan")) for r in rows]
            colors = [
                _SCHEME_STYLE.get(Scheme.from_name(name), ("gray", "o"))[0] for name in names
            ]
            ax.bar(range(len(rows)), values, color=colors)
            ax.set_xticks(range(len(rows)))
            ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
            ax.set_ylabel(label)
            if metric_index == 0:
                ax.set_title(block_title, fontsize=10)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
