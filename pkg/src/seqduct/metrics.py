"""Alignment metrics over fixed-length decoded outputs.

An :class:`EvalOutcome` pairs a target index sequence (content through
the end symbol) with an output of exactly the same length, since decoding
always runs for the reference length. The three metrics differ in how
much of the sequence must line up:

- full_seq: output equals target everywhere (all-or-nothing per pair);
- first_n: length of the longest common prefix over the target length;
- overlap: count of positionwise matches over the target length.

An exact match is a full prefix and a full prefix matches positionwise,
so full_seq <= first_n <= overlap always holds. The end symbol counts
as an ordinary position in all three.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ContractError, DataError

METRIC_NAMES = ("full_seq", "first_n", "overlap")

AGGREGATE = "aggregate"

CSV_HEADER = ("task", "variant", "attention", "run", "split", "length", "metric", "value")


@dataclass(frozen=True)
class EvalOutcome:
    """One decoded pair: target and same-length output, as index tuples."""

    target: tuple[int, ...]
    output: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.target) != len(self.output):
            raise ContractError(f"output length {len(self.output)} != "
                                f"target length {len(self.target)}")
        if not self.target:
            raise ContractError("empty outcome")


def outcome(target, output) -> EvalOutcome:
    return EvalOutcome(tuple(int(i) for i in target), tuple(int(i) for i in output))


def _require_nonempty(outcomes) -> list[EvalOutcome]:
    outcomes = list(outcomes)
    if not outcomes:
        raise ContractError("metric over an empty outcome list")
    return outcomes


def full_sequence_accuracy(outcomes) -> float:
    outcomes = _require_nonempty(outcomes)
    hits = sum(1 for o in outcomes if o.output == o.target)
    return hits / len(outcomes)


def first_n_symbol_accuracy(outcomes) -> float:
    outcomes = _require_nonempty(outcomes)
    total = 0.0
    for o in outcomes:
        prefix = 0
        for a, b in zip(o.output, o.target):
            if a != b:
                break
            prefix += 1
        total += prefix / len(o.target)
    return total / len(outcomes)


def overlap_rate(outcomes) -> float:
    outcomes = _require_nonempty(outcomes)
    total = 0.0
    for o in outcomes:
        matches = sum(1 for a, b in zip(o.output, o.target) if a == b)
        total += matches / len(o.target)
    return total / len(outcomes)


_METRIC_FUNCS = {
    "full_seq": full_sequence_accuracy,
    "first_n": first_n_symbol_accuracy,
    "overlap": overlap_rate,
}


def compute_metric(name: str, outcomes) -> float:
    try:
        fn = _METRIC_FUNCS[name]
    except KeyError:
        raise ContractError(f"unknown metric {name!r}") from None
    return fn(outcomes)


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsRecord:
    task: str
    variant: str
    attention: bool
    run: int
    split: str
    length: int | str  # an input length or the literal "aggregate"
    metric: str
    value: float

    def __post_init__(self) -> None:
        if self.metric not in METRIC_NAMES:
            raise ContractError(f"unknown metric {self.metric!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ContractError(f"metric value {self.value} outside [0, 1]")


def per_length_breakdown(outcomes_by_length: dict[int, list[EvalOutcome]],
                         *, task: str, variant: str, attention: bool,
                         run: int, split: str) -> list[MetricsRecord]:
    """All three metrics for each input length, plus the pooled aggregate."""
    if not outcomes_by_length or not any(outcomes_by_length.values()):
        raise ContractError("per_length_breakdown needs at least one outcome")
    records: list[MetricsRecord] = []
    pooled: list[EvalOutcome] = []
    for length in sorted(outcomes_by_length):
        group = outcomes_by_length[length]
        pooled.extend(group)
        for metric in METRIC_NAMES:
            records.append(MetricsRecord(task, variant, attention, run, split,
                                         length, metric, compute_metric(metric, group)))
    for metric in METRIC_NAMES:
        records.append(MetricsRecord(task, variant, attention, run, split,
                                     AGGREGATE, metric, compute_metric(metric, pooled)))
    return records


def rank_correlation(xs, ys, method: str) -> float:
    """Kendall tau (tie-corrected) or Spearman rho of two paired lists."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ContractError(f"rank_correlation: mismatched inputs {xs.shape} vs {ys.shape}")
    if xs.size < 2:
        raise ContractError("rank_correlation needs at least 2 points")
    if method == "kendall":
        return float(stats.kendalltau(xs, ys).statistic)
    if method == "spearman":
        return float(stats.spearmanr(xs, ys).statistic)
    raise ContractError(f"unknown correlation method {method!r}")


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------


def _format_value(v: float) -> str:
    return f"{v:.12g}"


def records_to_csv(records) -> str:
    """Serialize records with stable 12-significant-digit values."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([r.task, r.variant, "true" if r.attention else "false",
                         r.run, r.split, r.length, r.metric, _format_value(r.value)])
    return buf.getvalue()


def write_records_csv(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(records_to_csv(records))


def parse_records_csv(text: str, source: str = "<csv>") -> list[MetricsRecord]:
    """Parse a records CSV, reporting the line number of any bad row."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{source}: empty CSV") from None
    if tuple(header) != CSV_HEADER:
        raise DataError(f"{source}:1: bad header {header!r}")
    records: list[MetricsRecord] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise DataError(f"{source}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        task, variant, attention, run, split, length, metric, value = row
        if attention not in ("true", "false"):
            raise DataError(f"{source}:{lineno}: attention must be true/false, got {attention!r}")
        try:
            parsed_length: int | str = length if length == AGGREGATE else int(length)
            record = MetricsRecord(task, variant, attention == "true", int(run),
                                   split, parsed_length, metric, float(value))
        except (ValueError, ContractError) as exc:
            raise DataError(f"{source}:{lineno}: {exc}") from None
        records.append(record)
    return records


def read_records_csv(path) -> list[MetricsRecord]:
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise DataError(f"{path}: cannot read CSV ({exc})") from None
    return parse_records_csv(text, source=str(path))
