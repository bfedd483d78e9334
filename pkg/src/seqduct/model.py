"""Encoder-decoder sequence models over a fixed letter vocabulary.

A :class:`Seq2SeqModel` pairs two same-variant recurrent cells: the
encoder consumes the delimited input string and its final state becomes
the decoder's initial state. Decoding is autoregressive from the start
symbol; the optional global attention path re-reads the encoder states
at every decoder step and feeds a convex combination of them, joined to
the input embedding, into the decoder cell.

All sequence APIs are batched: index arrays are (B, T) and hidden states
are (B, D) rows, with every sequence in a batch sharing one length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import cells
from .autodiff import Tensor
from .cells import CellParams, CellState
from .errors import ContractError, DataError

ALPHABET = "abcdefghijklmnopqrstuvwxyz"

CHECKPOINT_FORMAT_VERSION = 1


class Vocabulary:
    """Letters a-z plus the start and end delimiters, densely indexed.

    Letters take indices 0..25 in alphabet order; the start symbol and
    end symbol take the last two slots, for 28 symbols total.
    """

    def __init__(self, letters: str = ALPHABET) -> None:
        if len(set(letters)) != len(letters):
            raise ContractError("vocabulary letters must be unique")
        self.letters = letters
        self.start_index = len(letters)
        self.end_index = len(letters) + 1
        self.size = len(letters) + 2
        self._index = {ch: i for i, ch in enumerate(letters)}

    def encode(self, s: str) -> np.ndarray:
        """Letter string to index vector (no delimiters added)."""
        try:
            return np.array([self._index[ch] for ch in s], dtype=np.int64)
        except KeyError as bad:
            raise DataError(f"symbol {bad.args[0]!r} is not in the vocabulary") from None

    def encode_delimited(self, s: str) -> np.ndarray:
        """Letter string to <s> + body + </s> index vector."""
        return np.concatenate((
            [self.start_index], self.encode(s), [self.end_index],
        )).astype(np.int64)

    def decode(self, indices) -> str:
        """Index vector back to text; delimiters render as <s> and </s>."""
        parts = []
        for i in np.asarray(indices):
            i = int(i)
            if i == self.start_index:
                parts.append("<s>")
            elif i == self.end_index:
                parts.append("</s>")
            elif 0 <= i < len(self.letters):
                parts.append(self.letters[i])
            else:
                raise DataError(f"index {i} is outside the vocabulary")
        return "".join(parts)


DEFAULT_VOCAB = Vocabulary()


@dataclass
class Seq2SeqModel:
    variant: str
    attention: bool
    hidden: int
    embed: int
    vocab: Vocabulary
    enc_embed: Tensor
    dec_embed: Tensor
    encoder: CellParams
    decoder: CellParams
    out_w: Tensor
    out_b: Tensor
    attn_w: Tensor | None = None
    attn_v: Tensor | None = None

    def parameters(self) -> list[tuple[str, Tensor]]:
        named = [("enc_embed", self.enc_embed), ("dec_embed", self.dec_embed)]
        named += cells.named_param_tensors("encoder", self.encoder)
        named += cells.named_param_tensors("decoder", self.decoder)
        named += [("out_w", self.out_w), ("out_b", self.out_b)]
        if self.attention:
            named += [("attn_w", self.attn_w), ("attn_v", self.attn_v)]
        return named


@dataclass
class EncoderOutput:
    """Per-position encoder hidden states plus the full final state."""

    states: list[Tensor]
    final: CellState


def build_model(variant: str, attention: bool, hidden: int, embed: int,
                init, vocab: Vocabulary | None = None) -> Seq2SeqModel:
    """Assemble a model with weight matrices drawn from ``init(shape)``.

    Biases start at zero. The attentional decoder consumes [embedding;
    context], so its input width is E + D rather than E.
    """
    if variant not in cells.VARIANTS:
        raise ContractError(f"unknown cell variant {variant!r}")
    vocab = vocab or DEFAULT_VOCAB
    v = vocab.size
    dec_in = embed + hidden if attention else embed
    model = Seq2SeqModel(
        variant=variant,
        attention=attention,
        hidden=hidden,
        embed=embed,
        vocab=vocab,
        enc_embed=Tensor(init((v, embed))),
        dec_embed=Tensor(init((v, embed))),
        encoder=cells.make_params(variant, hidden, embed, init),
        decoder=cells.make_params(variant, hidden, dec_in, init),
        out_w=Tensor(init((v, hidden))),
        out_b=ad.zeros(v),
    )
    if attention:
        model.attn_w = Tensor(init((hidden, 2 * hidden)))
        model.attn_v = Tensor(init((1, hidden)))
    return model


def count_parameters(model) -> int:
    return sum(t.size for _, t in model.parameters())


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------


def encode(model: Seq2SeqModel, input_indices: np.ndarray) -> EncoderOutput:
    """Run the encoder over a (B, T) batch of delimited index rows."""
    idx = np.asarray(input_indices, dtype=np.int64)
    if idx.ndim != 2 or idx.shape[1] == 0:
        raise ContractError(f"encode needs a nonempty (B, T) index array, got {idx.shape}")
    embeddings = [ad.embedding_lookup(model.enc_embed, idx[:, t])
                  for t in range(idx.shape[1])]
    states = cells.run_sequence(model.variant, model.encoder, embeddings)
    return EncoderOutput(states=[s.h for s in states], final=states[-1])


# ---------------------------------------------------------------------------
# Attention
# ---------------------------------------------------------------------------


def _attention_scores(model: Seq2SeqModel, h_dec: Tensor,
                      enc_states: list[Tensor]) -> Tensor:
    """Score each encoder position against the decoder state: (B, T)."""
    columns = []
    for h_enc in enc_states:
        joint = ad.concat(h_dec, h_enc, axis=1)
        columns.append(ad.linear(ad.tanh(ad.linear(joint, model.attn_w)), model.attn_v))
    out = columns[0]
    for col in columns[1:]:
        out = ad.concat(out, col, axis=1)
    return out


def _attend(model: Seq2SeqModel, h_dec: Tensor, enc_states: list[Tensor]) -> Tensor:
    """Softmax the scores and mix the encoder states: context rows (B, D)."""
    weights = ad.softmax_rows(_attention_scores(model, h_dec, enc_states))
    context = None
    for i, h_enc in enumerate(enc_states):
        piece = ad.row_scale(h_enc, ad.slice_cols(weights, i, i + 1))
        context = piece if context is None else ad.add(context, piece)
    return context


def score(model: Seq2SeqModel, h_dec, h_enc_i) -> float:
    """Alignment score for one decoder/encoder state pair (single sequence)."""
    if not model.attention:
        raise ContractError("score requires an attentional model")
    hd = Tensor(np.asarray(h_dec, dtype=np.float64).reshape(1, -1))
    he = Tensor(np.asarray(h_enc_i, dtype=np.float64).reshape(1, -1))
    joint = ad.concat(hd, he, axis=1)
    out = ad.linear(ad.tanh(ad.linear(joint, model.attn_w)), model.attn_v)
    return float(out.data[0, 0])


def attention_weights(model: Seq2SeqModel, h_dec, h_enc) -> Tensor:
    """Normalized weights over encoder positions for one decoder state.

    ``h_dec`` is a length-D vector, ``h_enc`` a (T, D) stack; the result
    is a length-T vector that is nonnegative and sums to 1.
    """
    if not model.attention:
        raise ContractError("attention_weights requires an attentional model")
    hd = Tensor(np.asarray(h_dec, dtype=np.float64).reshape(1, -1))
    stack = np.asarray(h_enc.data if isinstance(h_enc, Tensor) else h_enc, dtype=np.float64)
    enc_states = [Tensor(stack[i:i + 1]) for i in range(stack.shape[0])]
    weights = ad.softmax_rows(_attention_scores(model, hd, enc_states))
    return Tensor(weights.data[0])


def context_vector(a_t, h_enc) -> Tensor:
    """Convex combination of encoder states under the given weights."""
    w = np.asarray(a_t.data if isinstance(a_t, Tensor) else a_t, dtype=np.float64)
    stack = np.asarray(h_enc.data if isinstance(h_enc, Tensor) else h_enc, dtype=np.float64)
    if w.ndim != 1 or stack.ndim != 2 or w.shape[0] != stack.shape[0]:
        raise ContractError(f"context_vector: weights {w.shape} vs states {stack.shape}")
    return Tensor(w @ stack)


# ---------------------------------------------------------------------------
# Decoder
# ---------------------------------------------------------------------------


def _decoder_step(model: Seq2SeqModel, state: CellState, symbols: np.ndarray,
                  enc_states: list[Tensor]) -> tuple[CellState, Tensor]:
    """Advance the decoder one step; returns the new state and (B, V) logits.

    With attention the context is formed from the incoming hidden state,
    before the recurrence consumes the joined input.
    """
    e = ad.embedding_lookup(model.dec_embed, symbols)
    if model.attention:
        context = _attend(model, state.h, enc_states)
        e = ad.concat(e, context, axis=1)
    state = cells.step(model.variant, model.decoder, state, e)
    logits = ad.linear(state.h, model.out_w, model.out_b)
    return state, logits


def decode_teacher_forced(model: Seq2SeqModel, enc_out: EncoderOutput,
                          target_indices: np.ndarray) -> list[Tensor]:
    """Teacher-forced decoder pass; one (B, V) logit tensor per target step.

    Step t consumes the true target symbol t-1 (the start symbol at t=0)
    and its logits predict target symbol t. The target rows must end with
    the end symbol.
    """
    targets = np.asarray(target_indices, dtype=np.int64)
    if targets.ndim != 2 or targets.shape[1] == 0:
        raise ContractError(f"decoder needs a nonempty (B, T') target array, got {targets.shape}")
    batch = targets.shape[0]
    start = np.full(batch, model.vocab.start_index, dtype=np.int64)
    state = enc_out.final
    logits: list[Tensor] = []
    for t in range(targets.shape[1]):
        symbols = start if t == 0 else targets[:, t - 1]
        state, step_logits = _decoder_step(model, state, symbols, enc_out.states)
        logits.append(step_logits)
    return logits


def decode_fixed_length(model: Seq2SeqModel, enc_out: EncoderOutput,
                        steps: int) -> np.ndarray:
    """Greedy decoding for exactly ``steps`` symbols; returns (B, steps) indices.

    Each argmax prediction is fed back as the next input. Evaluation calls
    this with steps equal to the reference length including the end symbol.
    """
    if steps < 1:
        raise ContractError("decode_fixed_length needs steps >= 1")
    batch = enc_out.final.h.shape[0]
    symbols = np.full(batch, model.vocab.start_index, dtype=np.int64)
    state = enc_out.final
    out = np.empty((batch, steps), dtype=np.int64)
    for t in range(steps):
        state, logits = _decoder_step(model, state, symbols, enc_out.states)
        symbols = logits.data.argmax(axis=1)
        out[:, t] = symbols
    return out


# ---------------------------------------------------------------------------
# Tagger mode (plain RNN, one output per input position)
# ---------------------------------------------------------------------------


@dataclass
class TaggerModel:
    variant: str
    hidden: int
    embed: int
    vocab: Vocabulary
    embed_table: Tensor
    cell: CellParams
    out_w: Tensor
    out_b: Tensor

    def parameters(self) -> list[tuple[str, Tensor]]:
        named = [("embed_table", self.embed_table)]
        named += cells.named_param_tensors("cell", self.cell)
        named += [("out_w", self.out_w), ("out_b", self.out_b)]
        return named


def build_tagger(variant: str, hidden: int, embed: int, init,
                 vocab: Vocabulary | None = None) -> TaggerModel:
    vocab = vocab or DEFAULT_VOCAB
    return TaggerModel(
        variant=variant,
        hidden=hidden,
        embed=embed,
        vocab=vocab,
        embed_table=Tensor(init((vocab.size, embed))),
        cell=cells.make_params(variant, hidden, embed, init),
        out_w=Tensor(init((vocab.size, hidden))),
        out_b=ad.zeros(vocab.size),
    )


def tagger_logits(model: TaggerModel, input_indices: np.ndarray) -> list[Tensor]:
    """One (B, V) logit tensor per input position (no delimiters involved)."""
    idx = np.asarray(input_indices, dtype=np.int64)
    if idx.ndim != 2 or idx.shape[1] == 0:
        raise ContractError(f"tagger needs a nonempty (B, T) index array, got {idx.shape}")
    embeddings = [ad.embedding_lookup(model.embed_table, idx[:, t])
                  for t in range(idx.shape[1])]
    states = cells.run_sequence(model.variant, model.cell, embeddings)
    return [ad.linear(s.h, model.out_w, model.out_b) for s in states]


def tagger_forward(model: TaggerModel, input_indices: np.ndarray) -> np.ndarray:
    """Greedy per-position outputs: (B, T) argmax indices.

    Steps are evaluated one at a time and discarded, so this stays
    memory-flat even on inputs thousands of symbols long.
    """
    idx = np.asarray(input_indices, dtype=np.int64)
    if idx.ndim != 2 or idx.shape[1] == 0:
        raise ContractError(f"tagger needs a nonempty (B, T) index array, got {idx.shape}")
    state = cells.zero_state(model.variant, idx.shape[0], model.hidden)
    out = np.empty_like(idx)
    for t in range(idx.shape[1]):
        e = ad.embedding_lookup(model.embed_table, idx[:, t])
        state = cells.step(model.variant, model.cell, state, e)
        logits = ad.linear(state.h, model.out_w, model.out_b)
        out[:, t] = logits.data.argmax(axis=1)
    return out


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, model, seed: int, metadata: dict | None = None) -> None:
    """Write a versioned binary checkpoint (exact float64 round-trip).

    Works for both model kinds; the container stores a JSON header plus
    one named array per parameter tensor.
    """
    kind = "seq2seq" if isinstance(model, Seq2SeqModel) else "tagger"
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": kind,
        "variant": model.variant,
        "attention": bool(model.attention) if kind == "seq2seq" else False,
        "hidden": model.hidden,
        "embed": model.embed,
        "vocab_size": model.vocab.size,
        "seed": int(seed),
        "metadata": metadata or {},
    }
    arrays = {name: t.data for name, t in model.parameters()}
    np.savez(path, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path):
    """Rebuild a model from a checkpoint; returns (model, seed, metadata)."""
    try:
        with np.load(path, allow_pickle=False) as bundle:
            if "__meta__" not in bundle:
                raise DataError(f"{path}: not a model checkpoint (missing header)")
            meta = json.loads(str(bundle["__meta__"]))
            arrays = {k: bundle[k] for k in bundle.files if k != "__meta__"}
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: unreadable checkpoint ({exc})") from None
    version = meta.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint format version {version!r}")
    if meta.get("vocab_size") != DEFAULT_VOCAB.size:
        raise DataError(f"{path}: checkpoint vocabulary size {meta.get('vocab_size')} "
                        f"does not match {DEFAULT_VOCAB.size}")

    def zeros_init(shape):
        return np.zeros(shape, dtype=np.float64)

    if meta["kind"] == "seq2seq":
        model = build_model(meta["variant"], meta["attention"], meta["hidden"],
                            meta["embed"], zeros_init)
    elif meta["kind"] == "tagger":
        model = build_tagger(meta["variant"], meta["hidden"], meta["embed"], zeros_init)
    else:
        raise DataError(f"{path}: unknown model kind {meta['kind']!r}")
    expected = dict(model.parameters())
    if set(expected) != set(arrays):
        raise DataError(f"{path}: parameter names do not match the declared architecture")
    for name, tensor in expected.items():
        if arrays[name].shape != tensor.data.shape:
            raise DataError(f"{path}: array {name} has shape {arrays[name].shape}, "
                            f"expected {tensor.data.shape}")
        tensor.data = arrays[name].astype(np.float64, copy=True)
    return model, meta["seed"], meta["metadata"]
