"""Optional matplotlib rendering of evaluation figures to files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .data import FEATURE_NAMES, PollutionLevel
from .evaluation import ConfusionMatrix

LEVEL_COLORS = {
    PollutionLevel.GREEN: "#2e8b57",
    PollutionLevel.YELLOW: "#d4a017",
    PollutionLevel.ORANGE: "#e8750a",
    PollutionLevel.RED: "#c0392b",
}

PARAMETER_LABELS = {
    "do_mg_l": "Dissolved oxygen (mg/l)",
    "ph": "pH",
    "bod_mg_l": "Biochemical oxygen demand (mg/l)",
    "tss_mg_l": "Total suspended solids (mg/l)",
}

plt.rcParams.update({"figure.dpi": 120, "axes.grid": True, "grid.alpha": 0.3})


def _scatter_panel(ax, indices, values, levels, title):
    for level in PollutionLevel:
        xs = [i for i, lvl in zip(indices, levels) if lvl is level]
        ys = [v for v, lvl in zip(values, levels) if lvl is level]
        if xs:
            ax.scatter(xs, ys, s=14, color=LEVEL_COLORS[level], label=level.label)
    ax.set_title(title)
    ax.set_xlabel("sample index")


def save_scatter_pairs(
    rows: Sequence[tuple[int, tuple[float, float, float, float], PollutionLevel, PollutionLevel]],
    out_dir: Path,
) -> list[Path]:
    """One figure per parameter: observed-label panel beside predicted-label panel.

    Each row is (index, feature values, true level, predicted level).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    indices = [row[0] for row in rows]
    written = []
    for j, name in enumerate(FEATURE_NAMES):
        values = [row[1][j] for row in rows]
        fig, (ax_obs, ax_pred) = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
        _scatter_panel(ax_obs, indices, values, [row[2] for row in rows], "Observed levels")
        _scatter_panel(ax_pred, indices, values, [row[3] for row in rows], "Predicted levels")
        ax_obs.set_ylabel(PARAMETER_LABELS[name])
        handles, labels = ax_obs.get_legend_handles_labels()
        if not handles:
            handles, labels = ax_pred.get_legend_handles_labels()
        fig.legend(handles, labels, loc="lower center", ncol=4, frameon=False)
        fig.suptitle(PARAMETER_LABELS[name])
        fig.tight_layout(rect=(0, 0.08, 1, 1))
        path = out_dir / f"scatter_{name}.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def save_confusion_heatmap(matrix: ConfusionMatrix, out_path: Path) -> Path:
    """Annotated heatmap of the confusion counts."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    names = [level.label for level in matrix.classes]
    grid = [list(row) for row in matrix.counts]

    fig, ax = plt.subplots(figsize=(5, 4.2))
    image = ax.imshow(grid, cmap="Blues")
    ax.set_xticks(range(len(names)), names)
    ax.set_yticks(range(len(names)), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("observed")
    ax.grid(False)
    peak = max(max(row) for row in grid)
    for i, row in enumerate(grid):
        for j, value in enumerate(row):
            color = "white" if peak and value > peak / 2 else "black"
            ax.text(j, i, str(value), ha="center", va="center", color=color)
    fig.colorbar(image, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
