"""Deterministic string transduction tasks and dataset generation.

Tasks map a lowercase-letter string to a target string over the same
alphabet (copying, reversing, duplicating, sorting). Datasets are split
by input length: train/dev/test share one length range and gen covers
lengths outside it, so gen measures extrapolation to unseen lengths.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

from .autodiff import Rng
from .errors import ConfigError, ContractError, DataError

ALPHABET = "abcdefghijklmnopqrstuvwxyz"
_LETTER_SET = frozenset(ALPHABET)

GENERATOR_VERSION = 1

SPLIT_ORDER = ("train", "dev", "test", "gen")

TASK_KINDS = (
    "identity",
    "reversal",
    "total_reduplication",
    "quadratic_copy",
    "kcopy",
    "sort_ascending",
    "sort_descending",
)


@dataclass(frozen=True)
class Task:
    """A named string function; ``k`` is the copy count for kcopy only."""

    kind: str
    k: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in TASK_KINDS:
            raise ContractError(f"unknown task kind {self.kind!r}")
        if self.kind == "kcopy":
            if self.k is None or self.k < 1:
                raise ContractError("kcopy needs k >= 1")
        elif self.k is not None:
            raise ContractError(f"task {self.kind!r} takes no k")

    @property
    def name(self) -> str:
        return f"kcopy:{self.k}" if self.kind == "kcopy" else self.kind


def parse_task(name: str) -> Task:
    """Inverse of Task.name, e.g. 'reversal' or 'kcopy:3'."""
    if name.startswith("kcopy:"):
        suffix = name[len("kcopy:"):]
        if not suffix.isdigit() or int(suffix) < 1:
            raise ConfigError(f"bad kcopy count in task name {name!r}")
        return Task("kcopy", int(suffix))
    if name in TASK_KINDS and name != "kcopy":
        return Task(name)
    raise ConfigError(f"unknown task name {name!r}")


def apply_task(task: Task, w: str) -> str:
    """Evaluate the task function on a letter string."""
    if not _LETTER_SET.issuperset(w):
        bad = next(ch for ch in w if ch not in _LETTER_SET)
        raise DataError(f"symbol {bad!r} is outside the alphabet")
    if task.kind == "identity":
        return w
    if task.kind == "reversal":
        return w[::-1]
    if task.kind == "total_reduplication":
        return w + w
    if task.kind == "quadratic_copy":
        return w * len(w)
    if task.kind == "kcopy":
        return w * task.k
    if task.kind == "sort_ascending":
        return "".join(sorted(w))
    if task.kind == "sort_descending":
        return "".join(sorted(w, reverse=True))
    raise ContractError(f"unhandled task kind {task.kind!r}")


def is_in_distribution(length: int, train_lengths) -> bool:
    """Whether an input length falls inside the training length set."""
    return length in set(train_lengths)


# ---------------------------------------------------------------------------
# Experiment presets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PresetConfig:
    """Length ranges, per-length counts, model sizes, and training budget."""

    name: str
    train_lengths: tuple[int, ...]
    gen_lengths: tuple[int, ...]
    counts: dict[str, int]
    hidden: int
    embed: int
    max_epochs: int
    eval_interval: int = 10
    batch_size: int = 1000
    learning_rate: float = 5e-4
    l2_decay: float = 1e-5
    clip_norm: float = 1.0
    runs: int = 3

    def split_lengths(self, split: str) -> tuple[int, ...]:
        if split not in SPLIT_ORDER:
            raise ContractError(f"unknown split {split!r}")
        return self.gen_lengths if split == "gen" else self.train_lengths


_MAIN_TRAIN_LENGTHS = tuple(range(6, 16))
_MAIN_GEN_LENGTHS = tuple(range(1, 6)) + tuple(range(16, 31))
_MAIN_COUNTS = {"train": 1000, "dev": 1000, "test": 5000, "gen": 5000}


def _main_preset(name: str, **overrides) -> PresetConfig:
    base = dict(
        name=name,
        train_lengths=_MAIN_TRAIN_LENGTHS,
        gen_lengths=_MAIN_GEN_LENGTHS,
        counts=dict(_MAIN_COUNTS),
        hidden=512,
        embed=128,
        max_epochs=500,
    )
    base.update(overrides)
    return PresetConfig(**base)


_PRESETS = {
    "main": _main_preset("main"),
    # Quarter data / quarter hidden size for the attentional side of the
    # efficiency comparison; evaluation splits keep their full size.
    "followup_attn_small": _main_preset(
        "followup_attn_small",
        hidden=128,
        counts={"train": 250, "dev": 250, "test": 5000, "gen": 5000},
    ),
    # Triple data and triple epoch budget for the attention-less side.
    "followup_attnless_3x": _main_preset(
        "followup_attnless_3x",
        counts={"train": 3000, "dev": 3000, "test": 5000, "gen": 5000},
        max_epochs=1500,
    ),
    "hidden16": _main_preset("hidden16", hidden=16),
    "hidden32": _main_preset("hidden32", hidden=32),
    "hidden64": _main_preset("hidden64", hidden=64),
    # Small enough to train on a laptop CPU in minutes while keeping the
    # in/out-of-distribution length split. Learning rate and batch size
    # are retuned for the small scale.
    "desk_scale": PresetConfig(
        name="desk_scale",
        train_lengths=tuple(range(2, 9)),
        gen_lengths=tuple(range(9, 13)),
        counts={"train": 200, "dev": 200, "test": 200, "gen": 200},
        hidden=64,
        embed=32,
        max_epochs=150,
        eval_interval=5,
        batch_size=50,
        learning_rate=2e-3,
        runs=1,
    ),
}


def scaled_config(preset: str) -> PresetConfig:
    try:
        return _PRESETS[preset]
    except KeyError:
        raise ConfigError(f"unknown preset {preset!r}; "
                          f"choose from {', '.join(sorted(_PRESETS))}") from None


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESETS))


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------


@dataclass
class DatasetSplit:
    """Input/target pairs grouped by input length, plus the generation seed."""

    name: str
    pairs: dict[int, list[tuple[str, str]]] = field(default_factory=dict)
    seed: int = 0

    def total_pairs(self) -> int:
        return sum(len(v) for v in self.pairs.values())

    def lengths(self) -> tuple[int, ...]:
        return tuple(sorted(self.pairs))


def _sample_short_strings(length: int, count: int, rng: Rng) -> list[str]:
    """Lengths 1-2: sample without replacement from the repeated full pool.

    The pool is every string of that length, in lexicographic order,
    repeated by the smallest multiplier that makes the pool strictly
    larger than the request. Duplicates therefore appear only when the
    request exceeds the number of distinct strings.
    """
    base = ["".join(p) for p in itertools.product(ALPHABET, repeat=length)]
    multiplier = count // len(base) + 1
    pool = base * multiplier
    picks = rng.choice_without_replacement(len(pool), count)
    return [pool[i] for i in picks]


def _sample_unique_strings(length: int, count: int, rng: Rng, seen: set[str]) -> list[str]:
    """Lengths >= 3: i.i.d. uniform symbol draws, rejecting any repeat.

    The seen set is shared across splits so the splits stay disjoint.
    """
    out: list[str] = []
    attempts = 0
    limit = 50 * count + 1000
    while len(out) < count:
        attempts += 1
        if attempts > limit:
            raise DataError(f"rejection sampling stalled at length {length}; "
                            f"requested {count} with {len(seen)} strings already taken")
        w = "".join(ALPHABET[i] for i in rng.integers(0, len(ALPHABET), size=length))
        if w in seen:
            continue
        seen.add(w)
        out.append(w)
    return out


def generate_splits(task: Task, seed: int, config: PresetConfig) -> dict[str, DatasetSplit]:
    """Generate the four splits for one task, deterministically from the seed.

    Splits are produced in the order train, dev, test, gen with one shared
    seen-set, so cross-split duplicates are impossible for lengths >= 3.
    Lengths 1-2 instead follow the repeated-pool rule and may repeat
    across (but not within) splits.
    """
    demand: dict[int, int] = {}
    for name in SPLIT_ORDER:
        for length in config.split_lengths(name):
            demand[length] = demand.get(length, 0) + config.counts[name]
    for length, need in sorted(demand.items()):
        if length >= 3 and need > len(ALPHABET) ** length:
            raise DataError(f"cannot draw {need} distinct strings of length {length}")

    root = Rng(seed)
    seen: set[str] = set()
    splits: dict[str, DatasetSplit] = {}
    for index, name in enumerate(SPLIT_ORDER):
        rng = root.child(index)
        split = DatasetSplit(name=name, seed=seed)
        for length in sorted(config.split_lengths(name)):
            count = config.counts[name]
            if length <= 2:
                strings = _sample_short_strings(length, count, rng)
            else:
                strings = _sample_unique_strings(length, count, rng, seen)
            split.pairs[length] = [(w, apply_task(task, w)) for w in strings]
        splits[name] = split
    return splits


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------


def write_dataset(out_dir, task: Task, seed: int, config: PresetConfig,
                  splits: dict[str, DatasetSplit]) -> list[Path]:
    """Write one TSV per split plus a JSON sidecar; byte-reproducible."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for name in SPLIT_ORDER:
        split = splits[name]
        path = out / f"{name}.tsv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for length in sorted(split.pairs):
                for inp, tgt in split.pairs[length]:
                    fh.write(f"{inp}\t{tgt}\n")
        written.append(path)
    sidecar = {
        "generator_version": GENERATOR_VERSION,
        "task": task.name,
        "seed": seed,
        "preset": config.name,
        "lengths": {name: list(config.split_lengths(name)) for name in SPLIT_ORDER},
        "counts": {name: config.counts[name] for name in SPLIT_ORDER},
    }
    meta_path = out / "dataset.json"
    with open(meta_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(meta_path)
    return written


def load_dataset(data_dir) -> tuple[dict[str, DatasetSplit], dict]:
    """Read the four split TSVs back, validating against the sidecar.

    Every pair is re-checked against the task function, so a corrupted
    or hand-edited file fails loudly.
    """
    root = Path(data_dir)
    meta_path = root / "dataset.json"
    if not meta_path.exists():
        raise DataError(f"{meta_path}: dataset sidecar not found")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{meta_path}: invalid JSON ({exc})") from None
    try:
        task = parse_task(meta["task"])
        lengths = {name: tuple(meta["lengths"][name]) for name in SPLIT_ORDER}
        counts = {name: int(meta["counts"][name]) for name in SPLIT_ORDER}
    except (KeyError, TypeError, ConfigError) as exc:
        raise DataError(f"{meta_path}: bad sidecar contents ({exc})") from None

    splits: dict[str, DatasetSplit] = {}
    for name in SPLIT_ORDER:
        path = root / f"{name}.tsv"
        if not path.exists():
            raise DataError(f"{path}: split file not found")
        split = DatasetSplit(name=name, seed=int(meta["seed"]))
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    inp, tgt = line.split("\t")
                except ValueError:
                    raise DataError(f"{path}:{lineno}: expected input<TAB>target") from None
                if apply_task(task, inp) != tgt:
                    raise DataError(f"{path}:{lineno}: target does not match task "
                                    f"{task.name} on {inp!r}")
                split.pairs.setdefault(len(inp), []).append((inp, tgt))
        if split.lengths() != tuple(sorted(lengths[name])):
            raise DataError(f"{path}: lengths {split.lengths()} do not match sidecar")
        for length, pairs in split.pairs.items():
            if len(pairs) != counts[name]:
                raise DataError(f"{path}: {len(pairs)} pairs at length {length}, "
                                f"sidecar says {counts[name]}")
        splits[name] = split
    return splits, meta
