"""Fixed-length greedy evaluation of decoders against task targets.

Every decoder exposes one method: given a batch of delimited input index
rows and a step count, produce exactly that many output symbols per row.
The trained model is one such decoder; the others are stubs (exact
oracle, input echoer, constant emitter) used to validate the evaluation
plumbing itself.

Targets are the task output plus the end symbol, and decoding runs for
exactly that length, so outputs and targets always align positionwise.
A probe task may replace the stored targets: the split's inputs are kept
and the targets are recomputed under the probe function instead.
"""

from __future__ import annotations

import numpy as np

from . import model as model_lib
from .errors import ContractError
from .metrics import EvalOutcome, MetricsRecord, outcome, per_length_breakdown
from .model import Seq2SeqModel, Vocabulary
from .tasks import DatasetSplit, Task, apply_task

DEFAULT_EVAL_BATCH = 500


class ModelDecoder:
    """Greedy decoding with a trained encoder-decoder model."""

    def __init__(self, model: Seq2SeqModel) -> None:
        self.model = model

    def decode_batch(self, inputs: np.ndarray, steps: int) -> np.ndarray:
        enc_out = model_lib.encode(self.model, inputs)
        return model_lib.decode_fixed_length(self.model, enc_out, steps)


class OracleDecoder:
    """Emits the exact task output for each input; the perfect reference.

    ``compute`` defaults to the task function itself but accepts any
    string-to-string callable, so an independently built transducer can
    stand in as the implementation.
    """

    def __init__(self, task: Task, vocab: Vocabulary | None = None, compute=None) -> None:
        self.task = task
        self.vocab = vocab or model_lib.DEFAULT_VOCAB
        self.compute = compute or (lambda w: apply_task(task, w))

    def decode_batch(self, inputs: np.ndarray, steps: int) -> np.ndarray:
        out = np.full((inputs.shape[0], steps), self.vocab.end_index, dtype=np.int64)
        for row in range(inputs.shape[0]):
            w = self.vocab.decode(inputs[row, 1:-1])
            produced = self.vocab.encode(self.compute(w))
            emitted = np.concatenate((produced, [self.vocab.end_index]))[:steps]
            out[row, :len(emitted)] = emitted
        return out


class EchoDecoder:
    """Repeats the input content cyclically and never emits the end symbol."""

    def __init__(self, vocab: Vocabulary | None = None) -> None:
        self.vocab = vocab or model_lib.DEFAULT_VOCAB

    def decode_batch(self, inputs: np.ndarray, steps: int) -> np.ndarray:
        content = inputs[:, 1:-1]
        if content.shape[1] == 0:
            raise ContractError("echo decoder needs nonempty input content")
        reps = -(-steps // content.shape[1])
        return np.tile(content, (1, reps))[:, :steps]


class ConstantDecoder:
    """Emits one fixed symbol at every step."""

    def __init__(self, symbol_index: int) -> None:
        self.symbol_index = int(symbol_index)

    def decode_batch(self, inputs: np.ndarray, steps: int) -> np.ndarray:
        return np.full((inputs.shape[0], steps), self.symbol_index, dtype=np.int64)


# ---------------------------------------------------------------------------
# Split evaluation
# ---------------------------------------------------------------------------


def _encode_input_batch(pairs, vocab: Vocabulary) -> np.ndarray:
    return np.stack([vocab.encode_delimited(inp) for inp, _ in pairs])


def split_outcomes(decoder, split: DatasetSplit, vocab: Vocabulary | None = None,
                   *, probe_task: Task | None = None,
                   batch_size: int = DEFAULT_EVAL_BATCH) -> dict[int, list[EvalOutcome]]:
    """Decode a whole split, grouped by input length.

    Reference length per pair is the target length plus one for the end
    symbol; all pairs of one input length share it because every task
    maps length to output length deterministically.
    """
    vocab = vocab or model_lib.DEFAULT_VOCAB
    by_length: dict[int, list[EvalOutcome]] = {}
    for length in sorted(split.pairs):
        group = split.pairs[length]
        results: list[EvalOutcome] = []
        for start in range(0, len(group), batch_size):
            chunk = group[start:start + batch_size]
            targets = []
            for inp, stored in chunk:
                text = apply_task(probe_task, inp) if probe_task is not None else stored
                targets.append(np.concatenate((vocab.encode(text), [vocab.end_index])))
            steps = len(targets[0])
            inputs = _encode_input_batch(chunk, vocab)
            outputs = decoder.decode_batch(inputs, steps)
            if outputs.shape != (len(chunk), steps):
                raise ContractError(f"decoder returned shape {outputs.shape}, "
                                    f"expected {(len(chunk), steps)}")
            for row in range(len(chunk)):
                results.append(outcome(targets[row], outputs[row]))
        by_length[length] = results
    return by_length


def split_full_sequence_accuracy(decoder, split: DatasetSplit,
                                 vocab: Vocabulary | None = None,
                                 batch_size: int = DEFAULT_EVAL_BATCH) -> float:
    """Pooled exact-match rate over every pair in the split."""
    by_length = split_outcomes(decoder, split, vocab, batch_size=batch_size)
    hits = 0
    total = 0
    for group in by_length.values():
        hits += sum(1 for o in group if o.output == o.target)
        total += len(group)
    return hits / total


def evaluate_splits(decoder, splits: dict[str, DatasetSplit], *, task: str,
                    variant: str, attention: bool, run: int,
                    split_names=("test", "gen"), probe_task: Task | None = None,
                    vocab: Vocabulary | None = None,
                    batch_size: int = DEFAULT_EVAL_BATCH) -> list[MetricsRecord]:
    """Per-length and aggregate records for the requested splits."""
    records: list[MetricsRecord] = []
    for name in split_names:
        if name not in splits:
            raise ContractError(f"split {name!r} not present in dataset")
        by_length = split_outcomes(decoder, splits[name], vocab,
                                   probe_task=probe_task, batch_size=batch_size)
        records.extend(per_length_breakdown(by_length, task=task, variant=variant,
                                            attention=attention, run=run, split=name))
    return records
