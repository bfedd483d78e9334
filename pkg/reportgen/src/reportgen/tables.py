"""Aggregate full-sequence accuracy rendered as a fixed-width text table.

Rows are task x split (train, test, gen where present); columns are the
three cell variants under an "Attentional" group followed by an
"Attention-less" group. Cells show percentages to two decimals, or "-"
when a condition/split was not measured. When a CSV holds several runs
of a condition, the run with the highest 0.4*test + 0.6*gen aggregate
score represents it (ties go to the lowest run index).
"""

from __future__ import annotations

from pathlib import Path

from .csvdata import SchemaError, read_rows

_VARIANT_COLUMNS = ("srnn", "gru", "lstm")
_SPLIT_ROWS = ("train", "test", "gen")


def _representative_run(per_run: dict[int, dict[str, float]]) -> dict[str, float]:
    def score(run: int) -> tuple[float, int]:
        values = per_run[run]
        weighted = 0.4 * values.get("test", 0.0) + 0.6 * values.get("gen", 0.0)
        return (-weighted, run)

    return per_run[min(per_run, key=score)]


def render_aggregate_table(csv_path, out_path=None) -> str:
    """Build the table text; also write it to ``out_path`` when given."""
    rows = [r for r in read_rows(csv_path)
            if r.length is None and r.metric == "full_seq"]
    if not rows:
        raise SchemaError(f"{csv_path}: no aggregate full_seq rows to tabulate")

    table: dict[tuple[str, str, bool], dict[int, dict[str, float]]] = {}
    for row in rows:
        condition = table.setdefault((row.task, row.variant, row.attention), {})
        condition.setdefault(row.run, {})[row.split] = row.value
    chosen = {key: _representative_run(per_run) for key, per_run in table.items()}

    tasks = sorted({key[0] for key in chosen})
    groups = "".join(f"{label:<30}" for label in ("Attentional", "Attention-less"))
    columns = "".join(f"{v.upper():<10}" for v in _VARIANT_COLUMNS)
    lines = ["Aggregate full-sequence accuracy (%), best run per condition", ""]
    lines.append(f"{'':<30}{groups}".rstrip())
    lines.append(f"{'Task':<20}{'Split':<10}{columns}{columns}".rstrip())
    for task in tasks:
        splits_present = [
            s for s in _SPLIT_ROWS
            if any(s in chosen.get((task, v, a), {})
                   for v in _VARIANT_COLUMNS for a in (True, False))]
        for i, split in enumerate(splits_present):
            cells = []
            for attention in (True, False):
                for variant in _VARIANT_COLUMNS:
                    values = chosen.get((task, variant, attention), {})
                    cells.append(f"{100.0 * values[split]:.2f}"
                                 if split in values else "-")
            label = task if i == 0 else ""
            body = "".join(f"{c:<10}" for c in cells)
            lines.append(f"{label:<20}{split:<10}{body}".rstrip())
    text = "\n".join(lines) + "\n"
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    return text
