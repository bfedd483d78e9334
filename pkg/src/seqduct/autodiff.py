"""Dense float64 tensors with tape-based reverse-mode differentiation.

The op set is deliberately small: exactly what backpropagation through
time over recurrent cells, global attention, and softmax cross-entropy
needs. Every op validates shapes eagerly and, while a :class:`Tape` is
active, records one node so that :func:`backward` can replay the run in
reverse and accumulate gradients into the participating tensors.

With no active tape the same ops run as plain forward numerics, which is
what greedy decoding and finite-difference checks use.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, ShapeError

Array = np.ndarray

_DEFAULT_DTYPE = np.dtype(np.float64)


def set_default_dtype(dtype) -> None:
    """Switch new tensors to float32 or (the default) float64.

    Single precision is a speed escape hatch only: the gradient-check and
    reproducibility guarantees are stated for float64.
    """
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ContractError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype


def default_dtype() -> np.dtype:
    return _DEFAULT_DTYPE


class Tensor:
    """A dense floating-point array plus a gradient slot."""

    __slots__ = ("data", "grad")

    def __init__(self, data) -> None:
        self.data: Array = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.grad: Array | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"


def tensor(data) -> Tensor:
    return Tensor(data)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=_DEFAULT_DTYPE))


class _Node:
    """One recorded op: kind, input tensors, output, saved intermediates."""

    __slots__ = ("kind", "inputs", "out", "saved")

    def __init__(self, kind: str, inputs: tuple[Tensor, ...], out: Tensor, saved) -> None:
        self.kind = kind
        self.inputs = inputs
        self.out = out
        self.saved = saved


_ACTIVE_TAPE: "Tape | None" = None


class Tape:
    """Ordered op record for one forward pass.

    Nodes are appended in execution order, so the list itself is a valid
    topological order and the backward sweep is a single reverse pass.
    Use as a context manager::

        with Tape() as tape:
            loss = ...
        backward(tape, loss)
    """

    def __init__(self) -> None:
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise ContractError("a tape is already recording; tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None


def _record(kind: str, inputs: tuple[Tensor, ...], out: Tensor, saved=None) -> Tensor:
    if _ACTIVE_TAPE is not None:
        _ACTIVE_TAPE.nodes.append(_Node(kind, inputs, out, saved))
    return out


def _accumulate(t: Tensor, g: Array) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype)
    else:
        t.grad += g


# ---------------------------------------------------------------------------
# Ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes differ {a.shape} vs {b.shape}")
    return _record("add", (a, b), Tensor(a.data + b.data))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product of same-shaped tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes differ {a.shape} vs {b.shape}")
    return _record("mul", (a, b), Tensor(a.data * b.data))


def scale_shift(x: Tensor, scale: float, shift: float = 0.0) -> Tensor:
    """scale * x + shift with scalar constants (covers negation and 1 - x)."""
    return _record("scale_shift", (x,), Tensor(scale * x.data + shift), float(scale))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul: need 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ {a.shape} vs {b.shape}")
    return _record("matmul", (a, b), Tensor(a.data @ b.data))


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Row-vector affine map: x @ w.T (+ b broadcast over rows).

    ``w`` is stored (out, in) so the math matches applying a column-vector
    weight matrix to each example.
    """
    if x.data.ndim != 2 or w.data.ndim != 2:
        raise ShapeError(f"linear: need 2-D x and w, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"linear: input width {x.shape[1]} != w in-dim {w.shape[1]}")
    y = x.data @ w.data.T
    if b is not None:
        if b.shape != (w.shape[0],):
            raise ShapeError(f"linear: bias shape {b.shape} != ({w.shape[0]},)")
        y = y + b.data
        return _record("linear", (x, w, b), Tensor(y))
    return _record("linear", (x, w), Tensor(y))


def concat(a: Tensor, b: Tensor, axis: int = 0) -> Tensor:
    if a.data.ndim != b.data.ndim:
        raise ShapeError(f"concat: rank mismatch {a.shape} vs {b.shape}")
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ShapeError(f"concat: axis {axis} out of range for rank {a.data.ndim}")
    ax = axis % a.data.ndim if a.data.ndim else 0
    for d in range(a.data.ndim):
        if d != ax and a.shape[d] != b.shape[d]:
            raise ShapeError(f"concat: shapes {a.shape} and {b.shape} differ off axis {axis}")
    out = Tensor(np.concatenate([a.data, b.data], axis=ax))
    return _record("concat", (a, b), out, (ax, a.shape[ax]))


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    if x.data.ndim != 2:
        raise ShapeError(f"slice_cols: need 2-D input, got {x.shape}")
    if not 0 <= start < stop <= x.shape[1]:
        raise ShapeError(f"slice_cols: [{start}:{stop}] out of range for width {x.shape[1]}")
    return _record("slice_cols", (x,), Tensor(x.data[:, start:stop]), (start, stop))


def row_scale(x: Tensor, s: Tensor) -> Tensor:
    """Scale each row of x (B, D) by the matching scalar in s (B, 1)."""
    if x.data.ndim != 2 or s.shape != (x.shape[0], 1):
        raise ShapeError(f"row_scale: got x {x.shape}, s {s.shape}")
    return _record("row_scale", (x, s), Tensor(x.data * s.data))


def tanh(x: Tensor) -> Tensor:
    out = Tensor(np.tanh(x.data))
    return _record("tanh", (x,), out)


def sigmoid(x: Tensor) -> Tensor:
    # Split by sign so exp never overflows.
    out = Tensor(np.where(x.data >= 0,
                          1.0 / (1.0 + np.exp(-np.abs(x.data))),
                          np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data)))))
    return _record("sigmoid", (x,), out)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax with max-shift stabilization."""
    if x.data.ndim != 2:
        raise ShapeError(f"softmax_rows: need 2-D input, got {x.shape}")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = Tensor(e / e.sum(axis=1, keepdims=True))
    return _record("softmax_rows", (x,), out)


def embedding_lookup(table: Tensor, indices: Array) -> Tensor:
    """Gather rows of an embedding table for a vector of symbol indices."""
    idx = np.asarray(indices)
    if table.data.ndim != 2 or idx.ndim != 1:
        raise ShapeError(f"embedding_lookup: table {table.shape}, indices {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(f"embedding_lookup: index out of range for table of {table.shape[0]} rows")
    return _record("embed", (table,), Tensor(table.data[idx]), idx)


def reduce_sum(x: Tensor) -> Tensor:
    return _record("reduce_sum", (x,), Tensor(x.data.sum()))


def softmax_cross_entropy(logits: Tensor, target_index) -> Tensor:
    """Negative log softmax probability of the target class.

    1-D logits take a single integer target. 2-D logits take one integer
    per row and the per-row losses are summed, so the result is always a
    scalar that can serve as a backward root (scale afterwards to average).
    """
    if logits.data.ndim == 1:
        n = logits.shape[0]
        t = int(target_index)
        if not 0 <= t < n:
            raise IndexError(f"target index {t} out of range for {n} classes")
        z = logits.data - logits.data.max()
        probs = np.exp(z)
        probs /= probs.sum()
        loss = -np.log(probs[t])
        return _record("softmax_ce", (logits,), Tensor(loss), (probs, t))
    if logits.data.ndim == 2:
        targets = np.asarray(target_index)
        if targets.shape != (logits.shape[0],):
            raise ShapeError(f"targets shape {targets.shape} != ({logits.shape[0]},)")
        if targets.size and (targets.min() < 0 or targets.max() >= logits.shape[1]):
            raise IndexError(f"target index out of range for {logits.shape[1]} classes")
        z = logits.data - logits.data.max(axis=1, keepdims=True)
        probs = np.exp(z)
        probs /= probs.sum(axis=1, keepdims=True)
        rows = np.arange(logits.shape[0])
        loss = -np.log(probs[rows, targets]).sum()
        return _record("softmax_ce", (logits,), Tensor(loss), (probs, targets))
    raise ShapeError(f"softmax_cross_entropy: need 1-D or 2-D logits, got {logits.shape}")


# ---------------------------------------------------------------------------
# Backward rules
# ---------------------------------------------------------------------------


def _back_add(node: _Node, g: Array) -> None:
    _accumulate(node.inputs[0], g)
    _accumulate(node.inputs[1], g)


def _back_mul(node: _Node, g: Array) -> None:
    a, b = node.inputs
    _accumulate(a, g * b.data)
    _accumulate(b, g * a.data)


def _back_scale_shift(node: _Node, g: Array) -> None:
    _accumulate(node.inputs[0], node.saved * g)


def _back_matmul(node: _Node, g: Array) -> None:
    a, b = node.inputs
    _accumulate(a, g @ b.data.T)
    _accumulate(b, a.data.T @ g)


def _back_linear(node: _Node, g: Array) -> None:
    x, w = node.inputs[0], node.inputs[1]
    _accumulate(x, g @ w.data)
    _accumulate(w, g.T @ x.data)
    if len(node.inputs) == 3:
        _accumulate(node.inputs[2], g.sum(axis=0))


def _back_concat(node: _Node, g: Array) -> None:
    axis, split = node.saved
    a, b = node.inputs
    sl_a = [slice(None)] * g.ndim
    sl_b = [slice(None)] * g.ndim
    sl_a[axis] = slice(0, split)
    sl_b[axis] = slice(split, None)
    _accumulate(a, g[tuple(sl_a)])
    _accumulate(b, g[tuple(sl_b)])


def _back_slice_cols(node: _Node, g: Array) -> None:
    start, stop = node.saved
    x = node.inputs[0]
    full = np.zeros_like(x.data)
    full[:, start:stop] = g
    _accumulate(x, full)


def _back_row_scale(node: _Node, g: Array) -> None:
    x, s = node.inputs
    _accumulate(x, g * s.data)
    _accumulate(s, (g * x.data).sum(axis=1, keepdims=True))


def _back_tanh(node: _Node, g: Array) -> None:
    y = node.out.data
    _accumulate(node.inputs[0], g * (1.0 - y * y))


def _back_sigmoid(node: _Node, g: Array) -> None:
    y = node.out.data
    _accumulate(node.inputs[0], g * y * (1.0 - y))


def _back_softmax_rows(node: _Node, g: Array) -> None:
    p = node.out.data
    gp = g * p
    _accumulate(node.inputs[0], gp - p * gp.sum(axis=1, keepdims=True))


def _back_embed(node: _Node, g: Array) -> None:
    table = node.inputs[0]
    if table.grad is None:
        table.grad = np.zeros_like(table.data)
    np.add.at(table.grad, node.saved, g)


def _back_reduce_sum(node: _Node, g: Array) -> None:
    _accumulate(node.inputs[0], np.full_like(node.inputs[0].data, float(g)))


def _back_softmax_ce(node: _Node, g: Array) -> None:
    probs, targets = node.saved
    delta = probs.copy()
    if delta.ndim == 1:
        delta[targets] -= 1.0
    else:
        delta[np.arange(delta.shape[0]), targets] -= 1.0
    _accumulate(node.inputs[0], float(g) * delta)


_BACKWARD = {
    "add": _back_add,
    "mul": _back_mul,
    "scale_shift": _back_scale_shift,
    "matmul": _back_matmul,
    "linear": _back_linear,
    "concat": _back_concat,
    "slice_cols": _back_slice_cols,
    "row_scale": _back_row_scale,
    "tanh": _back_tanh,
    "sigmoid": _back_sigmoid,
    "softmax_rows": _back_softmax_rows,
    "embed": _back_embed,
    "reduce_sum": _back_reduce_sum,
    "softmax_ce": _back_softmax_ce,
}


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(tensor) into .grad for every tensor on the tape.

    Gradients add up, so parameters shared across time steps end up with
    the full summed gradient. Callers zero parameter grads between steps.
    """
    if loss.data.ndim != 0:
        raise ContractError(f"backward root must be a scalar, got shape {loss.shape}")
    loss.grad = np.ones((), dtype=loss.data.dtype)
    for node in reversed(tape.nodes):
        g = node.out.grad
        if g is None:
            continue
        _BACKWARD[node.kind](node, g)


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# Seeded randomness
# ---------------------------------------------------------------------------


class Rng:
    """Deterministic random stream: PCG64 keyed by a 64-bit seed.

    The same (algorithm, seed, spawn key) produces the same draws on every
    platform. Named child streams keep independent uses (init, shuffling,
    data) from perturbing one another.
    """

    algorithm = "pcg64"

    def __init__(self, seed: int, spawn_key: tuple[int, ...] = ()) -> None:
        self.seed = int(seed)
        self.spawn_key = tuple(spawn_key)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.spawn_key))
        )

    def child(self, key: int) -> "Rng":
        return Rng(self.seed, self.spawn_key + (int(key),))

    def uniform(self, low: float, high: float, shape) -> Array:
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low: int, high: int, size=None) -> Array:
        return self._gen.integers(low, high, size=size)

    def shuffle(self, items: list) -> None:
        self._gen.shuffle(items)

    def permutation(self, n: int) -> Array:
        return self._gen.permutation(n)

    def choice_without_replacement(self, n: int, k: int) -> Array:
        return self._gen.choice(n, size=k, replace=False)
