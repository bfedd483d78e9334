"""Recurrent state-transition cells: simple RNN, LSTM, and GRU.

Each cell is a pure single-step function from (params, state, input
embedding) to the next state, built entirely from autodiff ops so that
unrolled sequences backpropagate through time. States are row batches:
h has shape (B, D) and, for the LSTM, c has shape (B, D) as well.

Weight layout: every recurrence matrix multiplies the concatenation
[h; e] with the hidden block first, so W has shape (D, D+E). Biases are
single vectors of length D, one per gate.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError

VARIANTS = ("srnn", "lstm", "gru")


@dataclass
class SrnnParams:
    """tanh recurrence: h' = tanh(W [h; e] + b)."""

    w: Tensor
    b: Tensor


@dataclass
class LstmParams:
    """Gated recurrence with a cell state.

    o, f, i = sigmoid(W_g [h; e] + b_g) for the output, forget, and input
    gates; candidate = tanh(W_c [h; e] + b_c); c' = f*c + i*candidate;
    h' = o * tanh(c').
    """

    w_c: Tensor
    w_o: Tensor
    w_f: Tensor
    w_i: Tensor
    b_c: Tensor
    b_o: Tensor
    b_f: Tensor
    b_i: Tensor


@dataclass
class GruParams:
    """Gated recurrence without a separate cell state.

    z, r = sigmoid(W_g [h; e] + b_g); candidate = tanh(W_h [r*h; e] + b_h);
    h' = z*h + (1 - z)*candidate.
    """

    w_h: Tensor
    w_z: Tensor
    w_r: Tensor
    b_h: Tensor
    b_z: Tensor
    b_r: Tensor


CellParams = SrnnParams | LstmParams | GruParams


@dataclass
class CellState:
    """Hidden state h (B, D); LSTMs also carry the cell state c (B, D)."""

    h: Tensor
    c: Tensor | None = None


def param_tensors(params) -> list[Tensor]:
    """All trainable tensors of a params dataclass, in field order."""
    return [getattr(params, f.name) for f in fields(params)]


def zero_state(variant: str, batch: int, hidden: int) -> CellState:
    """Fresh all-zero state; LSTM gets a zero cell state mirroring h."""
    h = ad.zeros((batch, hidden))
    if variant == "lstm":
        return CellState(h=h, c=ad.zeros((batch, hidden)))
    return CellState(h=h)


def srnn_step(p: SrnnParams, state: CellState, e: Tensor) -> CellState:
    x = ad.concat(state.h, e, axis=1)
    return CellState(h=ad.tanh(ad.linear(x, p.w, p.b)))


def lstm_step(p: LstmParams, state: CellState, e: Tensor) -> CellState:
    if state.c is None:
        raise ContractError("lstm_step needs a state with a cell vector")
    x = ad.concat(state.h, e, axis=1)
    o = ad.sigmoid(ad.linear(x, p.w_o, p.b_o))
    f = ad.sigmoid(ad.linear(x, p.w_f, p.b_f))
    i = ad.sigmoid(ad.linear(x, p.w_i, p.b_i))
    candidate = ad.tanh(ad.linear(x, p.w_c, p.b_c))
    c_next = ad.add(ad.mul(f, state.c), ad.mul(i, candidate))
    h_next = ad.mul(o, ad.tanh(c_next))
    return CellState(h=h_next, c=c_next)


def gru_step(p: GruParams, state: CellState, e: Tensor) -> CellState:
    x = ad.concat(state.h, e, axis=1)
    z = ad.sigmoid(ad.linear(x, p.w_z, p.b_z))
    r = ad.sigmoid(ad.linear(x, p.w_r, p.b_r))
    x_reset = ad.concat(ad.mul(r, state.h), e, axis=1)
    candidate = ad.tanh(ad.linear(x_reset, p.w_h, p.b_h))
    keep = ad.mul(z, state.h)
    blend = ad.mul(ad.scale_shift(z, -1.0, 1.0), candidate)
    return CellState(h=ad.add(keep, blend))


_STEP = {"srnn": srnn_step, "lstm": lstm_step, "gru": gru_step}


def step(variant: str, params: CellParams, state: CellState, e: Tensor) -> CellState:
    try:
        fn = _STEP[variant]
    except KeyError:
        raise ContractError(f"unknown cell variant {variant!r}") from None
    return fn(params, state, e)


def run_sequence(variant: str, params: CellParams, embeddings: list[Tensor]) -> list[CellState]:
    """Unroll a cell over a sequence of input embeddings.

    Starts from the zero state and returns one state per input position.
    Embeddings are (B, E) rows; the whole unroll lands on the active tape.
    """
    if not embeddings:
        raise ContractError("run_sequence needs a nonempty sequence")
    batch = embeddings[0].shape[0]
    hidden = _hidden_size(params)
    state = zero_state(variant, batch, hidden)
    states: list[CellState] = []
    for e in embeddings:
        state = step(variant, params, state, e)
        states.append(state)
    return states


def _hidden_size(params: CellParams) -> int:
    if isinstance(params, SrnnParams):
        return params.w.shape[0]
    if isinstance(params, LstmParams):
        return params.w_c.shape[0]
    if isinstance(params, GruParams):
        return params.w_h.shape[0]
    raise ContractError(f"unknown params type {type(params).__name__}")


def make_params(variant: str, hidden: int, embed: int, init) -> CellParams:
    """Build a params dataclass with matrices from ``init(shape)`` and zero biases."""
    d, e = hidden, embed

    def w():
        return Tensor(init((d, d + e)))

    def b():
        return ad.zeros(d)

    if variant == "srnn":
        return SrnnParams(w=w(), b=b())
    if variant == "lstm":
        return LstmParams(w_c=w(), w_o=w(), w_f=w(), w_i=w(),
                          b_c=b(), b_o=b(), b_f=b(), b_i=b())
    if variant == "gru":
        return GruParams(w_h=w(), w_z=w(), w_r=w(), b_h=b(), b_z=b(), b_r=b())
    raise ContractError(f"unknown cell variant {variant!r}")


def named_param_tensors(prefix: str, params: CellParams) -> list[tuple[str, Tensor]]:
    """(name, tensor) pairs like 'encoder.w_c' for checkpoints and optimizers."""
    return [(f"{prefix}.{f.name}", getattr(params, f.name)) for f in fields(params)]
