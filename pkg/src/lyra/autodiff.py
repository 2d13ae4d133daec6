"""Reverse-mode automatic differentiation over dense float64 arrays.

A dynamic tape built as the forward pass runs: every op returns a Tensor
that remembers its parents and a backward closure. `backward(loss)` walks
the graph once in reverse topological order and accumulates gradients into
every tensor with requires_grad set. The op set is exactly what the models
in this repository need (LSTMs, small CNNs, embeddings, the VAE loss), and
every registered op is covered by the finite-difference checker below.

All training math is 64-bit; checkpoints quantize to 32-bit on disk.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

Array = np.ndarray

# Ops covered by the gradient-check suite (tests enumerate this tuple).
REGISTERED_OPS = (
    "add",
    "sub",
    "mul",
    "matmul",
    "concat",
    "slice_last",
    "reshape",
    "sigmoid",
    "tanh",
    "relu",
    "exp",
    "mean",
    "sum",
    "reduce_max",
    "embedding_lookup",
    "dropout",
    "conv2d",
    "max_pool2d",
    "softmax_cross_entropy",
)

class _GradMode(threading.local):
    """Per-thread recording flag so concurrent inference never interferes."""

    def __init__(self):
        self.enabled = True


_MODE = _GradMode()

# exp() is clamped here so finite inputs can never produce inf.
_EXP_MAX = 700.0


@contextlib.contextmanager
def no_grad():
    """Temporarily disable tape recording (inference, finite differences)."""
    prev = _MODE.enabled
    _MODE.enabled = False
    try:
        yield
    finally:
        _MODE.enabled = prev


class Tensor:
    """A dense float64 array plus its place on the tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[Array], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return tensor_sum(self)

    def mean(self):
        return tensor_mean(self)

    def reshape(self, shape):
        return reshape(self, shape)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: Array, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _MODE.enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _accum(t: Tensor, g: Array) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum a gradient over the axes numpy broadcast during the forward op."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def backward(g: Array) -> None:
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _make(data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data - b.data

    def backward(g: Array) -> None:
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _make(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def backward(g: Array) -> None:
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward)


def sigmoid(t: Tensor) -> Tensor:
    x = t.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g: Array) -> None:
        _accum(t, g * out * (1.0 - out))

    return _make(out, (t,), backward)


def tanh(t: Tensor) -> Tensor:
    out = np.tanh(t.data)

    def backward(g: Array) -> None:
        _accum(t, g * (1.0 - out * out))

    return _make(out, (t,), backward)


def relu(t: Tensor) -> Tensor:
    mask = t.data > 0

    def backward(g: Array) -> None:
        _accum(t, g * mask)

    return _make(np.where(mask, t.data, 0.0), (t,), backward)


def exp(t: Tensor) -> Tensor:
    inside = t.data <= _EXP_MAX
    out = np.exp(np.minimum(t.data, _EXP_MAX))

    def backward(g: Array) -> None:
        _accum(t, g * out * inside)

    return _make(out, (t,), backward)


# ---------------------------------------------------------------------------
# shape / structure
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    data = a.data @ b.data

    def backward(g: Array) -> None:
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(data, (a, b), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = tuple(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def backward(g: Array) -> None:
        for t, piece in zip(tensors, np.split(g, offsets, axis=axis)):
            _accum(t, piece)

    return _make(data, tensors, backward)


def slice_last(t: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice along the last axis."""
    data = np.ascontiguousarray(t.data[..., start:stop])

    def backward(g: Array) -> None:
        z = np.zeros_like(t.data)
        z[..., start:stop] = g
        _accum(t, z)

    return _make(data, (t,), backward)


def reshape(t: Tensor, shape) -> Tensor:
    data = t.data.reshape(shape)

    def backward(g: Array) -> None:
        _accum(t, g.reshape(t.shape))

    return _make(data, (t,), backward)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def tensor_sum(t: Tensor) -> Tensor:
    def backward(g: Array) -> None:
        _accum(t, np.full(t.shape, float(g)))

    return _make(np.sum(t.data), (t,), backward)


def tensor_mean(t: Tensor) -> Tensor:
    n = t.size

    def backward(g: Array) -> None:
        _accum(t, np.full(t.shape, float(g) / n))

    return _make(np.mean(t.data), (t,), backward)


def reduce_max(t: Tensor, axis: int) -> Tensor:
    """Max along one axis; the gradient flows to the first argmax."""
    idx = np.expand_dims(t.data.argmax(axis=axis), axis)
    data = np.take_along_axis(t.data, idx, axis=axis).squeeze(axis)

    def backward(g: Array) -> None:
        z = np.zeros_like(t.data)
        np.put_along_axis(z, idx, np.expand_dims(g, axis), axis=axis)
        _accum(t, z)

    return _make(data, (t,), backward)


# ---------------------------------------------------------------------------
# neural-net ops
# ---------------------------------------------------------------------------


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of a (V, D) table; ids may have any shape."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ValueError(f"embedding id out of range for table {table.shape}")
    data = table.data[ids]

    def backward(g: Array) -> None:
        if not table.requires_grad:
            return
        z = np.zeros_like(table.data)
        np.add.at(z, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        _accum(table, z)

    return _make(data, (table,), backward)


def dropout(t: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with an explicit seeded generator; p in [0, 1)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0,1), got {p}")
    if p == 0.0:
        return t
    mask = (rng.random(t.shape) >= p) / (1.0 - p)

    def backward(g: Array) -> None:
        _accum(t, g * mask)

    return _make(t.data * mask, (t,), backward)


def _im2col(x: Array, kh: int, kw: int) -> Array:
    b, c, h, w = x.shape
    oh, ow = h - kh + 1, w - kw + 1
    cols = np.empty((b, c, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = x[:, :, i : i + oh, j : j + ow]
    return cols.reshape(b, c * kh * kw, oh * ow)


def _col2im(cols: Array, x_shape, kh: int, kw: int) -> Array:
    b, c, h, w = x_shape
    oh, ow = h - kh + 1, w - kw + 1
    cols = cols.reshape(b, c, kh, kw, oh, ow)
    x = np.zeros(x_shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            x[:, :, i : i + oh, j : j + ow] += cols[:, :, i, j]
    return x


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Valid-padding stride-1 convolution: (B,C,H,W) * (O,C,kh,kw)."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ValueError(f"conv2d shape mismatch: {x.shape} * {w.shape}")
    bsz, _, h, width = x.shape
    o, _, kh, kw = w.shape
    if h < kh or width < kw:
        raise ValueError(f"conv2d input {x.shape} smaller than kernel {w.shape}")
    oh, ow = h - kh + 1, width - kw + 1
    cols = _im2col(x.data, kh, kw)
    wmat = w.data.reshape(o, -1)
    out = np.einsum("ij,bjl->bil", wmat, cols).reshape(bsz, o, oh, ow)
    if b is not None:
        out = out + b.data[:, None, None]

    def backward(g: Array) -> None:
        gm = g.reshape(bsz, o, oh * ow)
        if w.requires_grad:
            _accum(w, np.einsum("bil,bjl->ij", gm, cols).reshape(w.shape))
        if b is not None and b.requires_grad:
            _accum(b, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            dcols = np.einsum("ij,bil->bjl", wmat, gm)
            _accum(x, _col2im(dcols, x.shape, kh, kw))

    parents = (x, w) if b is None else (x, w, b)
    return _make(out, parents, backward)


def max_pool2d(x: Tensor) -> Tensor:
    """2x2 max pooling, stride 2; trailing odd rows/columns are dropped."""
    bsz, c, h, w = x.shape
    oh, ow = h // 2, w // 2
    if oh == 0 or ow == 0:
        raise ValueError(f"max_pool2d input too small: {x.shape}")
    win = (
        x.data[:, :, : oh * 2, : ow * 2]
        .reshape(bsz, c, oh, 2, ow, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(bsz, c, oh, ow, 4)
    )
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1).squeeze(-1)

    def backward(g: Array) -> None:
        zwin = np.zeros_like(win)
        np.put_along_axis(zwin, idx[..., None], g[..., None], axis=-1)
        z = np.zeros_like(x.data)
        z[:, :, : oh * 2, : ow * 2] = (
            zwin.reshape(bsz, c, oh, ow, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(bsz, c, oh * 2, ow * 2)
        )
        _accum(x, z)

    return _make(out, (x,), backward)


def softmax_cross_entropy(
    logits: Tensor, labels, weights: Array | None = None
) -> Tensor:
    """Mean (or weighted-sum) cross-entropy between logits rows and class ids.

    Without weights this is the mean over rows, and the gradient is
    (softmax - onehot) / n. With a weights vector the result is
    sum_i w_i * ce_i, which lets sequence losses sum over tokens while
    averaging over lines.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match logits {logits.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"label out of range [0,{k})")
    x = logits.data
    m = x.max(axis=1, keepdims=True)
    shifted = x - m
    lse = m[:, 0] + np.log(np.exp(shifted).sum(axis=1))
    ce = lse - x[np.arange(n), labels]
    softmax = np.exp(shifted)
    softmax /= softmax.sum(axis=1, keepdims=True)
    if weights is None:
        loss = ce.mean()
    else:
        weights = np.asarray(weights, dtype=np.float64)
        loss = float((ce * weights).sum())

    def backward(g: Array) -> None:
        d = softmax.copy()
        d[np.arange(n), labels] -= 1.0
        if weights is None:
            d /= n
        else:
            d *= weights[:, None]
        _accum(logits, d * float(g))

    return _make(np.asarray(loss), (logits,), backward)


# ---------------------------------------------------------------------------
# backward pass and gradient checking
# ---------------------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into every reachable parameter."""
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


def _relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(1e-8, abs(a) + abs(b))


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Tensor],
    h: float = 1e-5,
) -> float:
    """Max relative error between tape gradients and central differences.

    loss_fn must rebuild the scalar loss from the params' current values on
    every call (and be deterministic, so any rng it uses must be re-seeded
    inside loss_fn).
    """
    params = [p for p in params if p.requires_grad]
    for p in params:
        p.grad = None
    loss = loss_fn()
    backward(loss)
    analytic = [
        (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for p in params
    ]
    worst = 0.0
    with no_grad():
        for p, ga in zip(params, analytic):
            flat = p.data.reshape(-1)
            gflat = ga.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = float(loss_fn().data)
                flat[i] = orig - h
                down = float(loss_fn().data)
                flat[i] = orig
                numeric = (up - down) / (2.0 * h)
                worst = max(worst, _relative_error(gflat[i], numeric))
    for p in params:
        p.grad = None
    return worst


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """Check df/dx for a tensor-to-scalar function at the point x."""
    x.requires_grad = True
    return grad_check_params(lambda: f(x), [x], h=h)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


class Adam:
    """Standard Adam with bias correction; deterministic given gradients."""

    def __init__(
        self,
        params: Iterable[Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = [p for p in params if p.requires_grad]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape {g.shape} != param shape {p.data.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
