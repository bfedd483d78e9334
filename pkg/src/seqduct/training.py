"""Optimization protocol: init, Adam with L2, clipping, batching, stopping.

One training run is fully determined by (config, datasets, run index):
initialization and shuffling draw from separate seeded streams, batches
always hold sequences of a single input length (no padding anywhere),
and evaluation happens on a fixed epoch interval with greedy decoding.

Stopping rules, checked at each evaluation epoch:
  1. the epoch cap is reached;
  2. dev full-sequence accuracy is exactly 100%;
  3. train accuracy exceeds 99.99% and dev exceeds 99.50% together.
The returned model is the snapshot with the highest dev full-sequence
accuracy, earliest epoch winning ties.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from . import model as model_lib
from .autodiff import Rng, Tape, Tensor
from .cells import VARIANTS
from .errors import ConfigError, ContractError, DivergenceError
from .evaluation import ModelDecoder, split_full_sequence_accuracy
from .model import Seq2SeqModel, TaggerModel, Vocabulary
from .tasks import (DatasetSplit, PresetConfig, _sample_unique_strings,
                    parse_task)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def xavier_init(shape, rng: Rng) -> Tensor:
    """Uniform draws within ±sqrt(6 / (fan_in + fan_out)); matrices only."""
    if len(shape) != 2:
        raise ContractError(f"xavier_init needs a 2-D shape, got {shape}")
    fan_out, fan_in = shape
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, shape))


def make_initializer(rng: Rng):
    """Array-valued init function for the model builders."""
    def init(shape) -> np.ndarray:
        return xavier_init(shape, rng).data
    return init


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


def clip_global_norm(grads: list[np.ndarray], max_norm: float = 1.0) -> float:
    """Scale all gradients in place so their joint L2 norm is <= max_norm.

    Returns the pre-clip norm. Non-finite gradients abort the step.
    """
    total = 0.0
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient")
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


class AdamState:
    """First/second moment accumulators aligned with a parameter list."""

    def __init__(self, tensors: list[Tensor]) -> None:
        self.m = [np.zeros_like(t.data) for t in tensors]
        self.v = [np.zeros_like(t.data) for t in tensors]
        self.t = 0


def adam_step(tensors: list[Tensor], grads: list[np.ndarray], state: AdamState,
              lr: float, l2: float) -> None:
    """One coupled-L2 Adam update (decay added to the gradient, then Adam)."""
    if len(tensors) != len(grads) or len(tensors) != len(state.m):
        raise ContractError("adam_step: parameter/gradient/state lengths differ")
    state.t += 1
    bias1 = 1.0 - ADAM_BETA1 ** state.t
    bias2 = 1.0 - ADAM_BETA2 ** state.t
    for tensor, grad, m, v in zip(tensors, grads, state.m, state.v):
        if grad.shape != tensor.data.shape:
            raise ContractError(f"adam_step: grad shape {grad.shape} != "
                                f"param shape {tensor.data.shape}")
        g = grad + l2 * tensor.data
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        tensor.data -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


# ---------------------------------------------------------------------------
# Batching and loss
# ---------------------------------------------------------------------------


def make_batches(split: DatasetSplit, batch_size: int, rng: Rng) -> list[tuple[int, list]]:
    """Single-length batches in shuffled order (pairs reshuffled per call)."""
    batches: list[tuple[int, list]] = []
    for length in sorted(split.pairs):
        pairs = list(split.pairs[length])
        rng.shuffle(pairs)
        for start in range(0, len(pairs), batch_size):
            batches.append((length, pairs[start:start + batch_size]))
    rng.shuffle(batches)
    return batches


def encode_training_batch(pairs, vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    """(B, T+2) delimited inputs and (B, T'+1) targets ending in </s>."""
    pairs = list(pairs)
    if len({len(inp) for inp, _ in pairs}) > 1 or len({len(t) for _, t in pairs}) > 1:
        raise ContractError("mixed-length batch")
    inputs = np.stack([vocab.encode_delimited(inp) for inp, _ in pairs])
    targets = np.stack([np.concatenate((vocab.encode(tgt), [vocab.end_index]))
                        for _, tgt in pairs])
    return inputs, targets


def teacher_forced_loss(model: Seq2SeqModel, inputs: np.ndarray,
                        targets: np.ndarray) -> Tensor:
    """Mean cross-entropy per target position over the batch."""
    enc_out = model_lib.encode(model, inputs)
    logits = model_lib.decode_teacher_forced(model, enc_out, targets)
    total = None
    for t, step_logits in enumerate(logits):
        ce = ad.softmax_cross_entropy(step_logits, targets[:, t])
        total = ce if total is None else ad.add(total, ce)
    return ad.scale_shift(total, 1.0 / targets.size)


# ---------------------------------------------------------------------------
# Configs and logs
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    task: str
    variant: str
    attention: bool
    hidden: int
    embed: int
    learning_rate: float = 5e-4
    l2_decay: float = 1e-5
    clip_norm: float = 1.0
    max_epochs: int = 500
    eval_interval: int = 10
    batch_size: int = 1000
    seed: int = 0
    runs: int = 3

    def validate(self) -> None:
        parse_task(self.task)
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        for name in ("hidden", "embed", "max_epochs", "eval_interval",
                     "batch_size", "runs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("learning_rate", "clip_norm"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.l2_decay < 0:
            raise ConfigError("l2_decay must be nonnegative")


def config_from_preset(task: str, variant: str, attention: bool,
                       preset: PresetConfig, seed: int) -> TrainConfig:
    config = TrainConfig(
        task=task,
        variant=variant,
        attention=attention,
        hidden=preset.hidden,
        embed=preset.embed,
        learning_rate=preset.learning_rate,
        l2_decay=preset.l2_decay,
        clip_norm=preset.clip_norm,
        max_epochs=preset.max_epochs,
        eval_interval=preset.eval_interval,
        batch_size=preset.batch_size,
        seed=seed,
        runs=preset.runs,
    )
    config.validate()
    return config


@dataclass
class EvalPoint:
    epoch: int
    train_loss: float
    train_full_seq: float
    dev_full_seq: float


@dataclass
class RunLog:
    """Per-evaluation history and the outcome of one training run."""

    run: int
    evaluations: list[EvalPoint] = field(default_factory=list)
    stopping_reason: str = ""
    best_epoch: int = 0
    epochs_used: int = 0
    wall_time_s: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunLog":
        raw = json.loads(text)
        raw["evaluations"] = [EvalPoint(**e) for e in raw["evaluations"]]
        return cls(**raw)


@dataclass
class TrainResult:
    model: Seq2SeqModel | TaggerModel
    log: RunLog


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------


def _snapshot(model) -> dict[str, np.ndarray]:
    return {name: t.data.copy() for name, t in model.parameters()}


def _restore(model, snapshot: dict[str, np.ndarray]) -> None:
    for name, t in model.parameters():
        t.data = snapshot[name].copy()


def _train_loop(model, train: DatasetSplit, dev: DatasetSplit, config: TrainConfig,
                shuffle_rng: Rng, loss_fn, accuracy_fn, run_index: int) -> TrainResult:
    """Shared epoch loop for both model kinds.

    loss_fn(model, pairs) -> scalar loss tensor for one batch;
    accuracy_fn(model, split) -> full-sequence accuracy.
    """
    start_time = time.perf_counter()
    tensors = [t for _, t in model.parameters()]
    adam = AdamState(tensors)
    log = RunLog(run=run_index)
    best: tuple[float, int, dict] | None = None
    reason = "epoch_cap"
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        loss_sum = 0.0
        batch_count = 0
        for _, pairs in make_batches(train, config.batch_size, shuffle_rng):
            with Tape() as tape:
                loss = loss_fn(model, pairs)
            if not np.isfinite(loss.data):
                raise DivergenceError(f"non-finite loss at epoch {epoch} "
                                      f"(run {run_index}, task {config.task})")
            ad.zero_grads(tensors)
            ad.backward(tape, loss)
            grads = [t.grad if t.grad is not None else np.zeros_like(t.data)
                     for t in tensors]
            clip_global_norm(grads, config.clip_norm)
            adam_step(tensors, grads, adam, config.learning_rate, config.l2_decay)
            loss_sum += float(loss.data)
            batch_count += 1
        if epoch % config.eval_interval != 0:
            continue
        train_acc = accuracy_fn(model, train)
        dev_acc = accuracy_fn(model, dev)
        log.evaluations.append(EvalPoint(epoch, loss_sum / batch_count,
                                         train_acc, dev_acc))
        if best is None or dev_acc > best[0]:
            best = (dev_acc, epoch, _snapshot(model))
        if dev_acc == 1.0:
            reason = "dev_full_seq_100"
            break
        if train_acc > 0.9999 and dev_acc > 0.995:
            reason = "train_dev_threshold"
            break
    if best is None:
        best = (0.0, epoch, _snapshot(model))
    _restore(model, best[2])
    log.stopping_reason = reason
    log.best_epoch = best[1]
    log.epochs_used = epoch
    log.wall_time_s = time.perf_counter() - start_time
    return TrainResult(model=model, log=log)


def train_model(config: TrainConfig, splits: dict[str, DatasetSplit],
                run_index: int = 0) -> TrainResult:
    """One teacher-forced training run; returns the best-dev model."""
    config.validate()
    for name in ("train", "dev"):
        if name not in splits:
            raise ContractError(f"missing split {name!r}")
    rng = Rng(config.seed, (run_index,))
    model = model_lib.build_model(config.variant, config.attention, config.hidden,
                                  config.embed, make_initializer(rng.child(0)))
    shuffle_rng = rng.child(1)
    vocab = model.vocab

    def loss_fn(m, pairs):
        inputs, targets = encode_training_batch(pairs, vocab)
        return teacher_forced_loss(m, inputs, targets)

    def accuracy_fn(m, split):
        return split_full_sequence_accuracy(ModelDecoder(m), split, vocab)

    return _train_loop(model, splits["train"], splits["dev"], config,
                       shuffle_rng, loss_fn, accuracy_fn, run_index)


def select_best_run(results: list[tuple[float, float]]) -> int:
    """Index of the run maximizing 0.4*test + 0.6*gen; ties take the lowest."""
    if not results:
        raise ContractError("select_best_run needs at least one run")
    best_index = 0
    best_score = -1.0
    for i, (test_acc, gen_acc) in enumerate(results):
        score = 0.4 * test_acc + 0.6 * gen_acc
        if score > best_score:
            best_score = score
            best_index = i
    return best_index


# ---------------------------------------------------------------------------
# Tagger mode
# ---------------------------------------------------------------------------


@dataclass
class TaggerConfig:
    """Tiny per-symbol echo model; sized and tuned for that regime.

    Dev strings run far longer than training strings so the dev-100%
    stopping rule only fires once the recurrent state has settled into a
    length-stable regime, and the stronger L2 default pushes the tiny
    cells toward input-dominated solutions that survive arbitrary
    lengths rather than slowly drifting.
    """

    variant: str
    hidden: int = 4
    embed: int = 3
    learning_rate: float = 1e-2
    l2_decay: float = 1e-3
    clip_norm: float = 1.0
    max_epochs: int = 200
    eval_interval: int = 1
    batch_size: int = 100
    seed: int = 0
    train_lengths: tuple[int, ...] = tuple(range(6, 16))
    pairs_per_length: int = 100
    dev_lengths: tuple[int, ...] = (20, 50, 100, 200)
    dev_pairs_per_length: int = 25


def identity_tagger_splits(config: TaggerConfig) -> dict[str, DatasetSplit]:
    """Disjoint train/dev identity pairs over the configured lengths."""
    root = Rng(config.seed)
    seen: set[str] = set()
    splits: dict[str, DatasetSplit] = {}
    plans = (("train", config.train_lengths, config.pairs_per_length),
             ("dev", config.dev_lengths, config.dev_pairs_per_length))
    for index, (name, lengths, count) in enumerate(plans):
        rng = root.child(index)
        split = DatasetSplit(name=name, seed=config.seed)
        for length in lengths:
            strings = _sample_unique_strings(length, count, rng, seen)
            split.pairs[length] = [(w, w) for w in strings]
        splits[name] = split
    return splits


def tagger_loss(model: TaggerModel, idx: np.ndarray) -> Tensor:
    """Mean per-position cross-entropy of tagging each symbol as itself."""
    logits = model_lib.tagger_logits(model, idx)
    total = None
    for t, step_logits in enumerate(logits):
        ce = ad.softmax_cross_entropy(step_logits, idx[:, t])
        total = ce if total is None else ad.add(total, ce)
    return ad.scale_shift(total, 1.0 / idx.size)


def tagger_full_sequence_accuracy(model: TaggerModel, split: DatasetSplit,
                                  batch_size: int = 500) -> float:
    hits = 0
    total = 0
    vocab = model.vocab
    for length in sorted(split.pairs):
        pairs = split.pairs[length]
        for start in range(0, len(pairs), batch_size):
            chunk = pairs[start:start + batch_size]
            idx = np.stack([vocab.encode(inp) for inp, _ in chunk])
            out = model_lib.tagger_forward(model, idx)
            hits += int(np.sum(np.all(out == idx, axis=1)))
            total += len(chunk)
    return hits / total


def train_tagger_identity(config: TaggerConfig,
                          splits: dict[str, DatasetSplit] | None = None) -> TrainResult:
    """Train the per-symbol echo model on identity with the usual protocol."""
    if config.variant not in VARIANTS:
        raise ConfigError(f"unknown variant {config.variant!r}")
    splits = splits or identity_tagger_splits(config)
    rng = Rng(config.seed, (0,))
    model = model_lib.build_tagger(config.variant, config.hidden, config.embed,
                                   make_initializer(rng.child(0)))
    shuffle_rng = rng.child(1)
    vocab = model.vocab
    train_config = TrainConfig(
        task="identity", variant=config.variant, attention=False,
        hidden=config.hidden, embed=config.embed,
        learning_rate=config.learning_rate, l2_decay=config.l2_decay,
        clip_norm=config.clip_norm, max_epochs=config.max_epochs,
        eval_interval=config.eval_interval, batch_size=config.batch_size,
        seed=config.seed, runs=1,
    )

    def loss_fn(m, pairs):
        idx = np.stack([vocab.encode(inp) for inp, _ in pairs])
        return tagger_loss(m, idx)

    def accuracy_fn(m, split):
        return tagger_full_sequence_accuracy(m, split)

    return _train_loop(model, splits["train"], splits["dev"], train_config,
                       shuffle_rng, loss_fn, accuracy_fn, run_index=0)
