"""Shared fixtures: synthetic result CSVs with known values."""

from dataclasses import dataclass, field

import pytest

TASKS = ("identity", "quadratic_copy", "reversal", "total_reduplication")
VARIANTS = ("srnn", "gru", "lstm")
TEST_LENGTHS = (6, 7, 8)
GEN_LENGTHS = (4, 5, 9, 10)
METRICS = ("full_seq", "first_n", "overlap")


@dataclass
class Corpus:
    """A results CSV on disk plus the values that were written into it."""

    path: object
    per_length: dict = field(default_factory=dict)   # (task,var,attn,split,metric,length) -> float
    aggregates: dict = field(default_factory=dict)   # (task,var,attn,split,metric) -> float


def _base_value(ti: int, vi: int, attention: bool, length: int) -> float:
    return ((7 * ti + 13 * vi + 29 * int(attention) + 3 * length) % 83) / 100.0


def build_corpus(tmp_path, value_fn=_base_value) -> Corpus:
    corpus = Corpus(path=tmp_path / "results.csv")
    lines = ["task,variant,attention,run,split,length,metric,value"]
    for ti, task in enumerate(TASKS):
        for vi, variant in enumerate(VARIANTS):
            for attention in (True, False):
                flag = "true" if attention else "false"
                for split, lengths in (("test", TEST_LENGTHS), ("gen", GEN_LENGTHS)):
                    for metric_index, metric in enumerate(METRICS):
                        values = []
                        for length in lengths:
                            value = min(1.0, value_fn(ti, vi, attention, length)
                                        + 0.07 * metric_index)
                            value = round(value, 4)
                            key = (task, variant, attention, split, metric, length)
                            corpus.per_length[key] = value
                            values.append(value)
                            lines.append(f"{task},{variant},{flag},0,{split},"
                                         f"{length},{metric},{value:.12g}")
                        aggregate = round(sum(values) / len(values), 6)
                        corpus.aggregates[(task, variant, attention, split, metric)] = aggregate
                        lines.append(f"{task},{variant},{flag},0,{split},"
                                     f"aggregate,{metric},{aggregate:.12g}")
    corpus.path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return corpus


@pytest.fixture
def golden(tmp_path) -> Corpus:
    return build_corpus(tmp_path)


@pytest.fixture
def perfect(tmp_path) -> Corpus:
    return build_corpus(tmp_path, value_fn=lambda *args: 1.0)
