"""Reader for the benchmark results CSV format.

One row per measurement:

    task,variant,attention,run,split,length,metric,value

where ``attention`` is ``true``/``false``, ``length`` is a positive
integer for per-length rows or the literal ``aggregate`` for pooled
rows, ``metric`` is one of ``full_seq``/``first_n``/``overlap``, and
``value`` is a float in [0, 1].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

METRICS = ("full_seq", "first_n", "overlap")

AGGREGATE_LABEL = "aggregate"

EXPECTED_HEADER = ("task", "variant", "attention", "run", "split",
                   "length", "metric", "value")

_FLAGS = {"true": True, "false": False}


class SchemaError(Exception):
    """The CSV is missing, empty, or does not match the results schema."""


@dataclass(frozen=True)
class ResultRow:
    """One parsed measurement; ``length`` is None for aggregate rows."""

    task: str
    variant: str
    attention: bool
    run: int
    split: str
    length: int | None
    metric: str
    value: float


def read_rows(csv_path) -> list[ResultRow]:
    """Parse a results CSV, validating header and every field."""
    path = Path(csv_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise SchemaError(f"{path}:1: empty file, expected header "
                          f"{','.join(EXPECTED_HEADER)}") from None
    if header != EXPECTED_HEADER:
        raise SchemaError(f"{path}:1: bad header {','.join(header)!r}, "
                          f"expected {','.join(EXPECTED_HEADER)}")
    rows = []
    for lineno, fields in enumerate(reader, start=2):
        if not fields:
            continue
        if len(fields) != len(EXPECTED_HEADER):
            raise SchemaError(f"{path}:{lineno}: expected "
                              f"{len(EXPECTED_HEADER)} fields, got {len(fields)}")
        task, variant, attention, run, split, length, metric, value = fields
        if attention not in _FLAGS:
            raise SchemaError(f"{path}:{lineno}: attention must be "
                              f"true/false, got {attention!r}")
        try:
            run_index = int(run)
        except ValueError:
            raise SchemaError(f"{path}:{lineno}: bad run index {run!r}") from None
        if length == AGGREGATE_LABEL:
            parsed_length = None
        else:
            try:
                parsed_length = int(length)
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: bad length {length!r}") from None
            if parsed_length < 1:
                raise SchemaError(f"{path}:{lineno}: bad length {length!r}")
        if metric not in METRICS:
            raise SchemaError(f"{path}:{lineno}: unknown metric {metric!r}")
        try:
            parsed_value = float(value)
        except ValueError:
            raise SchemaError(f"{path}:{lineno}: bad value {value!r}") from None
        if not 0.0 <= parsed_value <= 1.0:
            raise SchemaError(f"{path}:{lineno}: value {value!r} outside [0, 1]")
        rows.append(ResultRow(task=task, variant=variant,
                              attention=_FLAGS[attention], run=run_index,
                              split=split, length=parsed_length,
                              metric=metric, value=parsed_value))
    return rows
