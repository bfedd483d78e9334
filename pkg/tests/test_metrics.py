"""Alignment metrics, per-length breakdowns, correlations, CSV format."""

import math

import pytest

from seqduct.autodiff import Rng
from seqduct.errors import ContractError, DataError
from seqduct.metrics import (AGGREGATE, CSV_HEADER, METRIC_NAMES, EvalOutcome,
                             MetricsRecord, compute_metric,
                             first_n_symbol_accuracy, full_sequence_accuracy,
                             outcome, overlap_rate, parse_records_csv,
                             per_length_breakdown, rank_correlation,
                             read_records_csv, records_to_csv,
                             write_records_csv)

END = 27  # index of the end symbol; metrics treat it as an ordinary position


def sym(ch: str) -> int:
    return ord(ch) - ord("a")


def fixed(target: str, output: str) -> EvalOutcome:
    return outcome([sym(c) for c in target] + [END],
                   [sym(c) for c in output] + [END])


def random_outcomes(rng: Rng, count: int, length: int) -> list[EvalOutcome]:
    outs = []
    for _ in range(count):
        target = tuple(int(i) for i in rng.integers(0, 6, size=length)) + (END,)
        if float(rng.uniform(0.0, 1.0, ())) < 0.3:
            output = target
        else:
            output = tuple(int(i) for i in rng.integers(0, 6, size=length)) + (END,)
        outs.append(EvalOutcome(target=target, output=output))
    return outs


# ---------------------------------------------------------------------------
# The three metrics
# ---------------------------------------------------------------------------


def test_exact_match_scores_one_everywhere():
    outs = [fixed("abc", "abc")]
    assert full_sequence_accuracy(outs) == 1.0
    assert first_n_symbol_accuracy(outs) == 1.0
    assert overlap_rate(outs) == 1.0


def test_single_substitution_hand_case():
    # target abcd</s> vs output abxd</s>: prefix 2/5, positionwise 4/5.
    outs = [fixed("abcd", "abxd")]
    assert full_sequence_accuracy(outs) == 0.0
    assert first_n_symbol_accuracy(outs) == pytest.approx(0.4, abs=1e-15)
    assert overlap_rate(outs) == pytest.approx(0.8, abs=1e-15)


def test_first_symbol_wrong_gives_zero_prefix():
    outs = [fixed("abc", "xbc")]
    assert first_n_symbol_accuracy(outs) == 0.0
    assert overlap_rate(outs) == pytest.approx(3 / 4)


def test_disjoint_sequences_score_zero():
    outs = [EvalOutcome(target=(0, 1), output=(1, 0))]
    assert overlap_rate(outs) == 0.0
    assert full_sequence_accuracy(outs) == 0.0


def test_one_in_four_exact():
    outs = [fixed("ab", "ab"), fixed("ab", "ba"), fixed("ab", "aa"), fixed("ab", "bb")]
    assert full_sequence_accuracy(outs) == 0.25


def test_metrics_are_means_over_outcomes():
    outs = [fixed("abcd", "abxd"), fixed("abcd", "abcd")]
    assert first_n_symbol_accuracy(outs) == pytest.approx((0.4 + 1.0) / 2)
    assert overlap_rate(outs) == pytest.approx((0.8 + 1.0) / 2)


def test_empty_outcome_list_rejected():
    for fn in (full_sequence_accuracy, first_n_symbol_accuracy, overlap_rate):
        with pytest.raises(ContractError):
            fn([])


def test_outcome_shape_contracts():
    with pytest.raises(ContractError):
        EvalOutcome(target=(0, 1), output=(0,))
    with pytest.raises(ContractError):
        EvalOutcome(target=(), output=())


def test_compute_metric_dispatch():
    outs = [fixed("abcd", "abxd")]
    assert compute_metric("full_seq", outs) == 0.0
    assert compute_metric("first_n", outs) == pytest.approx(0.4)
    assert compute_metric("overlap", outs) == pytest.approx(0.8)
    with pytest.raises(ContractError):
        compute_metric("bleu", outs)


def test_metric_ordering_property():
    rng = Rng(5)
    for trial in range(200):
        outs = random_outcomes(rng, 20, int(rng.integers(1, 9)))
        full = full_sequence_accuracy(outs)
        prefix = first_n_symbol_accuracy(outs)
        over = overlap_rate(outs)
        assert full <= prefix + 1e-12 and prefix <= over + 1e-12


def test_metrics_invariant_under_relabeling():
    rng = Rng(6)
    table = {0: 19, 1: 4, 2: 23, 3: 0, 4: 7, 5: 12, END: 9}
    for _ in range(50):
        outs = random_outcomes(rng, 10, 5)
        relabeled = [EvalOutcome(target=tuple(table[s] for s in o.target),
                                 output=tuple(table[s] for s in o.output))
                     for o in outs]
        for name in METRIC_NAMES:
            assert compute_metric(name, outs) == compute_metric(name, relabeled)


# ---------------------------------------------------------------------------
# Per-length breakdown
# ---------------------------------------------------------------------------


def make_records(by_length):
    return per_length_breakdown(by_length, task="identity", variant="gru",
                                attention=True, run=0, split="test")


def test_breakdown_perfect_outcomes():
    by_length = {2: [fixed("ab", "ab")], 3: [fixed("abc", "abc")]}
    records = make_records(by_length)
    assert len(records) == 3 * (2 + 1)
    assert all(r.value == 1.0 for r in records)


def test_breakdown_labels_and_lengths():
    by_length = {4: [fixed("abcd", "abxd")]}
    records = make_records(by_length)
    assert {r.length for r in records} == {4, AGGREGATE}
    assert {r.metric for r in records} == set(METRIC_NAMES)
    assert all(r.task == "identity" and r.variant == "gru" and r.attention
               and r.run == 0 and r.split == "test" for r in records)


def test_aggregate_is_pair_weighted():
    rng = Rng(7)
    by_length = {l: random_outcomes(rng, int(rng.integers(5, 30)), l)
                 for l in (2, 3, 5, 8)}
    records = make_records(by_length)
    pooled = [o for group in by_length.values() for o in group]
    for name in METRIC_NAMES:
        agg = next(r for r in records if r.metric == name and r.length == AGGREGATE)
        assert agg.value == pytest.approx(compute_metric(name, pooled), abs=1e-12)


def test_breakdown_rejects_empty_group():
    with pytest.raises(ContractError):
        make_records({3: []})


def test_record_validation():
    with pytest.raises(ContractError):
        MetricsRecord(task="t", variant="gru", attention=True, run=0,
                      split="test", length=3, metric="full_seq", value=1.5)
    with pytest.raises(ContractError):
        MetricsRecord(task="t", variant="gru", attention=True, run=0,
                      split="test", length=3, metric="edit", value=0.5)


# ---------------------------------------------------------------------------
# Rank correlations
# ---------------------------------------------------------------------------


def test_concordant_and_reversed_lists():
    xs = [1.0, 2.0, 3.0, 4.0]
    assert rank_correlation(xs, [10, 20, 30, 40], "kendall") == pytest.approx(1.0)
    assert rank_correlation(xs, [40, 30, 20, 10], "kendall") == pytest.approx(-1.0)
    assert rank_correlation(xs, [10, 20, 30, 40], "spearman") == pytest.approx(1.0)
    assert rank_correlation(xs, [40, 30, 20, 10], "spearman") == pytest.approx(-1.0)


def test_single_swap_hand_values():
    # Pairs (1,2),(1,3),(2,3): concordant, concordant, discordant
    # → (2-1)/3. Ranks differ by (0,1,1) → rho = 1 - 6*2/(3*8) = 0.5.
    assert rank_correlation([1, 2, 3], [1, 3, 2], "kendall") == pytest.approx(1 / 3)
    assert rank_correlation([1, 2, 3], [1, 3, 2], "spearman") == pytest.approx(0.5)


def test_correlation_contracts():
    with pytest.raises(ContractError):
        rank_correlation([1, 2], [1], "kendall")
    with pytest.raises(ContractError):
        rank_correlation([1], [1], "spearman")
    with pytest.raises(ContractError):
        rank_correlation([1, 2], [1, 2], "pearson")


def test_correlation_range():
    rng = Rng(8)
    for _ in range(20):
        xs = [float(v) for v in rng.uniform(0.0, 1.0, 6)]
        ys = [float(v) for v in rng.uniform(0.0, 1.0, 6)]
        for method in ("kendall", "spearman"):
            v = rank_correlation(xs, ys, method)
            assert -1.0 <= v <= 1.0


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------


def sample_records():
    rng = Rng(9)
    by_length = {l: random_outcomes(rng, 10, l) for l in (2, 4)}
    recs = make_records(by_length)
    recs += per_length_breakdown({3: random_outcomes(rng, 10, 3)},
                                 task="kcopy:3", variant="srnn",
                                 attention=False, run=2, split="gen")
    return recs


def test_csv_header_and_flags():
    text = records_to_csv(sample_records())
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert any(",true," in line for line in lines[1:])
    assert any(",false," in line for line in lines[1:])
    assert any(f",{AGGREGATE}," in line for line in lines[1:])


def test_csv_round_trip(tmp_path):
    records = sample_records()
    path = tmp_path / "m.csv"
    write_records_csv(path, records)
    again = read_records_csv(path)
    assert len(again) == len(records)
    for a, b in zip(again, records):
        # Values carry 12 significant digits; everything else is exact.
        assert a.value == pytest.approx(b.value, rel=1e-11, abs=1e-12)
        assert (a.task, a.variant, a.attention, a.run, a.split, a.length,
                a.metric) == (b.task, b.variant, b.attention, b.run, b.split,
                              b.length, b.metric)
    # One serialization pass reaches a byte-stable fixed point.
    assert records_to_csv(again) == path.read_text()


def test_csv_parse_errors_carry_line_numbers():
    good = records_to_csv(sample_records())
    with pytest.raises(DataError, match=":3:"):
        parse_records_csv("\n".join(
            line if i != 2 else line.rsplit(",", 1)[0] + ",1.5"
            for i, line in enumerate(good.splitlines())))
    with pytest.raises(DataError, match="header"):
        parse_records_csv("a,b,c\n")
