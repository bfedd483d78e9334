"""Task functions, length splits, presets, generation, and dataset files."""

import itertools
import json

import numpy as np
import pytest

from seqduct import tasks
from seqduct.autodiff import Rng
from seqduct.errors import ConfigError, ContractError, DataError
from seqduct.tasks import (ALPHABET, Task, apply_task, generate_splits,
                           is_in_distribution, load_dataset, parse_task,
                           scaled_config, write_dataset)


def random_word(rng: Rng, length: int) -> str:
    return "".join(ALPHABET[i] for i in rng.integers(0, 26, size=length))


# ---------------------------------------------------------------------------
# Task functions
# ---------------------------------------------------------------------------


def test_the_four_core_functions_on_abc():
    assert apply_task(Task("identity"), "abc") == "abc"
    assert apply_task(Task("reversal"), "abc") == "cba"
    assert apply_task(Task("total_reduplication"), "abc") == "abcabc"
    assert apply_task(Task("quadratic_copy"), "abc") == "abcabcabc"


def test_sorting_functions():
    assert apply_task(Task("sort_ascending"), "bca") == "abc"
    assert apply_task(Task("sort_descending"), "bca") == "cba"


def test_empty_string_inputs():
    assert apply_task(Task("quadratic_copy"), "") == ""
    assert apply_task(Task("reversal"), "") == ""


def test_kcopy():
    assert apply_task(Task("kcopy", 3), "ab") == "ababab"
    assert apply_task(Task("kcopy", 1), "xyz") == "xyz"
    with pytest.raises(ContractError):
        Task("kcopy")
    with pytest.raises(ContractError):
        Task("identity", 2)


def test_rejects_symbols_outside_alphabet():
    with pytest.raises(DataError):
        apply_task(Task("identity"), "aBc")


def test_quadratic_output_length_is_squared():
    rng = Rng(0)
    for _ in range(50):
        w = random_word(rng, int(rng.integers(1, 31)))
        assert len(apply_task(Task("quadratic_copy"), w)) == len(w) ** 2


def test_output_length_laws_and_algebra():
    rng = Rng(1)
    rev, asc, desc = Task("reversal"), Task("sort_ascending"), Task("sort_descending")
    for _ in range(100):
        w = random_word(rng, int(rng.integers(1, 20)))
        assert len(apply_task(Task("identity"), w)) == len(w)
        assert len(apply_task(rev, w)) == len(w)
        assert len(apply_task(Task("total_reduplication"), w)) == 2 * len(w)
        assert len(apply_task(Task("kcopy", 5), w)) == 5 * len(w)
        assert apply_task(rev, apply_task(rev, w)) == w
        s = apply_task(asc, w)
        assert sorted(s) == list(s) and sorted(s) == sorted(w)
        assert apply_task(desc, w) == s[::-1]


def test_task_names_round_trip():
    for name in ("identity", "reversal", "total_reduplication", "quadratic_copy",
                 "sort_ascending", "sort_descending", "kcopy:4"):
        assert parse_task(name).name == name
    with pytest.raises(ConfigError):
        parse_task("kcopy:0")
    with pytest.raises(ConfigError):
        parse_task("palindrome")


# ---------------------------------------------------------------------------
# Distribution membership
# ---------------------------------------------------------------------------


def test_is_in_distribution():
    train = range(6, 16)
    assert is_in_distribution(10, train)
    assert not is_in_distribution(16, train)
    assert not is_in_distribution(5, train)
    assert is_in_distribution(6, [6])


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


def test_main_preset_matches_protocol():
    cfg = scaled_config("main")
    assert cfg.hidden == 512 and cfg.embed == 128
    assert cfg.train_lengths == tuple(range(6, 16))
    assert cfg.gen_lengths == tuple(range(1, 6)) + tuple(range(16, 31))
    assert cfg.counts == {"train": 1000, "dev": 1000, "test": 5000, "gen": 5000}
    assert cfg.max_epochs == 500 and cfg.batch_size == 1000
    assert cfg.learning_rate == 5e-4 and cfg.l2_decay == 1e-5 and cfg.clip_norm == 1.0
    assert cfg.eval_interval == 10 and cfg.runs == 3


def test_main_preset_split_totals():
    cfg = scaled_config("main")
    totals = {name: len(cfg.split_lengths(name)) * cfg.counts[name]
              for name in tasks.SPLIT_ORDER}
    assert totals == {"train": 10_000, "dev": 10_000, "test": 50_000, "gen": 100_000}


def test_followup_presets():
    small = scaled_config("followup_attn_small")
    assert small.hidden == 128 and small.counts["train"] == 250
    big = scaled_config("followup_attnless_3x")
    assert big.counts["train"] == 3000 and big.max_epochs == 1500
    for d in (16, 32, 64):
        cfg = scaled_config(f"hidden{d}")
        assert cfg.hidden == d and cfg.embed == 128


def test_desk_preset_shape():
    cfg = scaled_config("desk_scale")
    assert cfg.train_lengths == tuple(range(2, 9))
    assert cfg.gen_lengths == tuple(range(9, 13))
    assert cfg.hidden == 64 and cfg.embed == 32
    assert cfg.max_epochs <= 150 and cfg.runs == 1


def test_unknown_preset():
    with pytest.raises(ConfigError):
        scaled_config("galaxy_scale")


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def desk_splits():
    return generate_splits(Task("reversal"), 7, scaled_config("desk_scale"))


def test_generated_counts_and_lengths(desk_splits):
    cfg = scaled_config("desk_scale")
    for name, split in desk_splits.items():
        assert split.lengths() == tuple(sorted(cfg.split_lengths(name)))
        for pairs in split.pairs.values():
            assert len(pairs) == cfg.counts[name]


def test_generated_pairs_satisfy_task(desk_splits):
    rev = Task("reversal")
    for split in desk_splits.values():
        for pairs in split.pairs.values():
            for w, t in pairs:
                assert t == apply_task(rev, w)


def test_generation_is_deterministic():
    cfg = scaled_config("desk_scale")
    again = generate_splits(Task("reversal"), 7, cfg)
    fresh = generate_splits(Task("reversal"), 7, cfg)
    for name in tasks.SPLIT_ORDER:
        assert again[name].pairs == fresh[name].pairs
    other = generate_splits(Task("reversal"), 8, cfg)
    assert other["train"].pairs != again["train"].pairs


def test_splits_disjoint_for_lengths_three_and_up(desk_splits):
    per_split = {}
    for name, split in desk_splits.items():
        per_split[name] = {w for length, pairs in split.pairs.items()
                           if length >= 3 for w, _ in pairs}
    names = list(per_split)
    for i, a in enumerate(names):
        assert len(per_split[a]) == sum(
            len(ps) for l, ps in desk_splits[a].pairs.items() if l >= 3)
        for b in names[i + 1:]:
            assert not (per_split[a] & per_split[b])


def test_short_length_pool_rule():
    # Request above the distinct-string count: duplicates appear, and every
    # string occurs at most ceil(request / distinct) times.
    rng = Rng(3)
    strings = tasks._sample_short_strings(1, 60, rng)
    assert len(strings) == 60
    counts = {s: strings.count(s) for s in set(strings)}
    assert max(counts.values()) <= 3  # pool multiplier for 60 of 26
    assert set(counts) <= set(ALPHABET)
    # Request below the distinct count: no duplicates possible.
    assert len(set(tasks._sample_short_strings(2, 200, rng))) == 200


def test_infeasible_request_is_a_capacity_error():
    cfg = scaled_config("desk_scale")
    bad = tasks.PresetConfig(
        name="bad", train_lengths=(3,), gen_lengths=(4,),
        counts={"train": 9000, "dev": 9000, "test": 0, "gen": 0},
        hidden=cfg.hidden, embed=cfg.embed, max_epochs=1)
    with pytest.raises(DataError):
        generate_splits(Task("identity"), 0, bad)


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------


def test_dataset_files_round_trip(tmp_path, desk_splits):
    cfg = scaled_config("desk_scale")
    task = Task("reversal")
    written = write_dataset(tmp_path, task, 7, cfg, desk_splits)
    assert sorted(p.name for p in written) == [
        "dataset.json", "dev.tsv", "gen.tsv", "test.tsv", "train.tsv"]
    loaded, meta = load_dataset(tmp_path)
    assert meta["task"] == "reversal" and meta["seed"] == 7
    for name in tasks.SPLIT_ORDER:
        assert loaded[name].pairs == desk_splits[name].pairs


def test_dataset_files_byte_reproducible(tmp_path, desk_splits):
    cfg = scaled_config("desk_scale")
    task = Task("reversal")
    a, b = tmp_path / "a", tmp_path / "b"
    write_dataset(a, task, 7, cfg, desk_splits)
    write_dataset(b, task, 7, cfg, generate_splits(task, 7, cfg))
    for name in ("train.tsv", "dev.tsv", "test.tsv", "gen.tsv", "dataset.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_load_rejects_corrupted_pair(tmp_path, desk_splits):
    cfg = scaled_config("desk_scale")
    write_dataset(tmp_path, Task("reversal"), 7, cfg, desk_splits)
    path = tmp_path / "dev.tsv"
    lines = path.read_text().splitlines()
    lines[0] = "abcd\tabcd"  # not a reversal
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError):
        load_dataset(tmp_path)


def test_load_rejects_missing_sidecar(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path)


def test_sidecar_contents(tmp_path, desk_splits):
    cfg = scaled_config("desk_scale")
    write_dataset(tmp_path, Task("reversal"), 7, cfg, desk_splits)
    meta = json.loads((tmp_path / "dataset.json").read_text())
    assert meta["generator_version"] == tasks.GENERATOR_VERSION
    assert meta["counts"]["gen"] == cfg.counts["gen"]
    assert meta["lengths"]["train"] == list(cfg.train_lengths)
