"""Parameter initializers and the LSTM cell shared by the models."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, add, concat, matmul, mul, sigmoid, slice_last, tanh

Array = np.ndarray


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> Array:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def dense_params(rng: np.random.Generator, n_in: int, n_out: int) -> tuple[Tensor, Tensor]:
    w = Tensor(glorot(rng, n_in, n_out), requires_grad=True)
    b = Tensor(np.zeros(n_out), requires_grad=True)
    return w, b


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


class LstmCell:
    """Single LSTM cell: one fused weight matrix over [x, h] -> 4 gates (i,f,g,o)."""

    def __init__(self, rng: np.random.Generator, n_in: int, n_hidden: int):
        self.n_in = n_in
        self.n_hidden = n_hidden
        self.w = Tensor(
            glorot(rng, n_in + n_hidden, 4 * n_hidden), requires_grad=True
        )
        bias = np.zeros(4 * n_hidden)
        bias[n_hidden : 2 * n_hidden] = 1.0  # forget-gate bias keeps early memory open
        self.b = Tensor(bias, requires_grad=True)

    def params(self) -> list[Tensor]:
        return [self.w, self.b]

    def step(self, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        """One time step; x is (B, n_in), h and c are (B, n_hidden)."""
        nh = self.n_hidden
        gates = add(matmul(concat([x, h]), self.w), self.b)
        i = sigmoid(slice_last(gates, 0, nh))
        f = sigmoid(slice_last(gates, nh, 2 * nh))
        g = tanh(slice_last(gates, 2 * nh, 3 * nh))
        o = sigmoid(slice_last(gates, 3 * nh, 4 * nh))
        c_next = add(mul(f, c), mul(i, g))
        h_next = mul(o, tanh(c_next))
        return h_next, c_next

    def zeros_state(self, batch: int) -> tuple[Tensor, Tensor]:
        return (
            Tensor(np.zeros((batch, self.n_hidden))),
            Tensor(np.zeros((batch, self.n_hidden))),
        )
