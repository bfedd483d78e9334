"""Per-input-length metric curves, one panel per task.

Each panel plots one curve per (variant, attention) combination over the
input lengths present in the CSV, with the y-axis fixed to [0, 1] and a
dashed vertical separator wherever the data leaves the in-distribution
length range (the lengths covered by non-``gen`` splits). When a CSV
holds several runs of the same condition, curves show the mean across
runs at each length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .csvdata import METRICS, SchemaError, read_rows

_VARIANT_ORDER = ("srnn", "gru", "lstm")

_METRIC_LABELS = {
    "full_seq": "full-sequence accuracy",
    "first_n": "first-n symbol accuracy",
    "overlap": "overlap rate",
}


@dataclass(frozen=True)
class PlotSpec:
    """What to draw and where to put it.

    ``tasks``/``splits`` of None mean "everything in the file"; the
    image format defaults to the output path's extension, else SVG.
    """

    out_path: str
    metric: str = "full_seq"
    tasks: tuple[str, ...] | None = None
    splits: tuple[str, ...] | None = None
    image_format: str | None = None

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}, "
                             f"expected one of {', '.join(METRICS)}")

    def resolved_format(self) -> str:
        if self.image_format:
            return self.image_format
        suffix = Path(self.out_path).suffix.lstrip(".")
        return suffix.lower() if suffix else "svg"


@dataclass
class RenderSummary:
    """Structural description of a rendered figure, for checks and logs."""

    out_path: Path
    metric: str
    tasks: list[str] = field(default_factory=list)
    points: dict[str, dict[str, int]] = field(default_factory=dict)
    separators: dict[str, tuple[float, ...]] = field(default_factory=dict)


def _series_label(variant: str, attention: bool) -> str:
    return f"{variant.upper()} {'attn' if attention else 'no-attn'}"


def _series_order(keys) -> list[tuple[str, bool]]:
    def sort_key(key):
        variant, attention = key
        rank = (_VARIANT_ORDER.index(variant) if variant in _VARIANT_ORDER
                else len(_VARIANT_ORDER))
        return (not attention, rank, variant)

    return sorted(keys, key=sort_key)


def _separator_positions(task_rows) -> tuple[float, ...]:
    in_dist = {r.length for r in task_rows if r.split != "gen"}
    out_dist = {r.length for r in task_rows if r.split == "gen"} - in_dist
    if not in_dist or not out_dist:
        return ()
    lo, hi = min(in_dist), max(in_dist)
    positions = []
    if any(length < lo for length in out_dist):
        positions.append(lo - 0.5)
    if any(length > hi for length in out_dist):
        positions.append(hi + 0.5)
    return tuple(positions)


def render_per_length(csv_path, spec: PlotSpec) -> RenderSummary:
    """Draw the per-length figure described by ``spec`` and save it.

    Returns a summary with, per task panel, the number of plotted points
    for each series and the separator x-positions.
    """
    rows = [r for r in read_rows(csv_path)
            if r.length is not None and r.metric == spec.metric]
    if spec.tasks is not None:
        rows = [r for r in rows if r.task in spec.tasks]
    if spec.splits is not None:
        rows = [r for r in rows if r.split in spec.splits]
    if not rows:
        raise SchemaError(f"{csv_path}: no per-length {spec.metric} rows "
                          "to plot after filtering")

    tasks = sorted({r.task for r in rows})
    summary = RenderSummary(out_path=Path(spec.out_path), metric=spec.metric,
                            tasks=tasks)

    ncols = 2 if len(tasks) > 1 else 1
    nrows = math.ceil(len(tasks) / ncols)
    fig, axes = plt.subplots(nrows, ncols, squeeze=False,
                             figsize=(5.5 * ncols, 3.5 * nrows))
    legend_handles: dict[str, object] = {}
    for index, task in enumerate(tasks):
        ax = axes[index // ncols][index % ncols]
        task_rows = [r for r in rows if r.task == task]

        by_series: dict[tuple[str, bool], dict[int, list[float]]] = {}
        for row in task_rows:
            per_length = by_series.setdefault((row.variant, row.attention), {})
            per_length.setdefault(row.length, []).append(row.value)

        summary.points[task] = {}
        for variant, attention in _series_order(by_series):
            per_length = by_series[(variant, attention)]
            lengths = sorted(per_length)
            means = [sum(per_length[n]) / len(per_length[n]) for n in lengths]
            label = _series_label(variant, attention)
            line, = ax.plot(lengths, means, marker="o", markersize=3,
                            linestyle="-" if attention else "--", label=label)
            legend_handles.setdefault(label, line)
            summary.points[task][label] = len(lengths)

        separators = _separator_positions(task_rows)
        summary.separators[task] = separators
        for x in separators:
            ax.axvline(x, color="0.4", linestyle=":", linewidth=1.2)

        ax.set_title(task)
        ax.set_xlabel("input length")
        ax.set_ylabel(_METRIC_LABELS[spec.metric])
        ax.set_ylim(0.0, 1.0)

    for index in range(len(tasks), nrows * ncols):
        fig.delaxes(axes[index // ncols][index % ncols])

    if legend_handles:
        fig.legend(legend_handles.values(), legend_handles.keys(),
                   loc="lower center", ncol=min(len(legend_handles), 6),
                   frameon=False)
    fig.tight_layout(rect=(0, 0.06, 1, 1))
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format=spec.resolved_format())
    plt.close(fig)
    return summary
