"""Minimal reverse-mode autodiff over numpy arrays.

Graphs are built define-by-run: every op returns a new Tensor holding the
forward value plus a closure that routes the output gradient into the
parents. Tensors are double precision throughout; the desk-scale models in
this package are small enough that float64 costs nothing and it keeps the
finite-difference checks honest.

Recurrent sequence passes (`lstm_sequence`) are fused into a single graph
node with a hand-derived backward so that per-utterance graphs stay at a
few dozen nodes instead of thousands.
"""

from __future__ import annotations

import math

import numpy as np


class Tensor:
    """A numpy array with a gradient slot and a backward closure."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def _accum(self, g) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Accumulate gradients of this (scalar) tensor into the graph."""
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar, got shape {self.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Operator sugar for the handful of places infix reads better.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, parents=(a, b))

    def bw(g):
        a._accum(_unbroadcast(g, a.data.shape))
        b._accum(_unbroadcast(g, b.data.shape))

    out._backward = bw
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data - b.data, parents=(a, b))

    def bw(g):
        a._accum(_unbroadcast(g, a.data.shape))
        b._accum(-_unbroadcast(g, b.data.shape))

    out._backward = bw
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data, parents=(a, b))

    def bw(g):
        a._accum(_unbroadcast(g * b.data, a.data.shape))
        b._accum(_unbroadcast(g * a.data, b.data.shape))

    out._backward = bw
    return out


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data / b.data, parents=(a, b))

    def bw(g):
        a._accum(_unbroadcast(g / b.data, a.data.shape))
        b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    out._backward = bw
    return out


def scale(a, k: float) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data * k, parents=(a,))
    out._backward = lambda g: a._accum(g * k)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[-1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, parents=(a, b))

    def bw(g):
        a._accum(g @ b.data.T)
        b._accum(a.data.T @ g)

    out._backward = bw
    return out


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), parents=tuple(parts))
    sizes = [p.data.shape[axis] for p in parts]

    def bw(g):
        offs = np.cumsum([0] + sizes)
        for p, lo, hi in zip(parts, offs[:-1], offs[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            p._accum(g[tuple(idx)])

    out._backward = bw
    return out


def cols(a: Tensor, lo: int, hi: int) -> Tensor:
    """Column slice a[:, lo:hi] of a 2-D tensor."""
    out = Tensor(a.data[:, lo:hi], parents=(a,))

    def bw(g):
        full = np.zeros_like(a.data)
        full[:, lo:hi] = g
        a._accum(full)

    out._backward = bw
    return out


def rows(table: Tensor, idx) -> Tensor:
    """Embedding lookup: gather rows of `table` at integer indices."""
    idx = np.asarray(idx, dtype=np.intp)
    out = Tensor(table.data[idx], parents=(table,))

    def bw(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    out._backward = bw
    return out


def flip(a: Tensor) -> Tensor:
    """Reverse a sequence tensor along axis 0."""
    out = Tensor(a.data[::-1].copy(), parents=(a,))
    out._backward = lambda g: a._accum(g[::-1])
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, parents=(a,))
    out._backward = lambda g: a._accum(g * (1.0 - y * y))
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = _sigmoid(a.data)
    out = Tensor(y, parents=(a,))
    out._backward = lambda g: a._accum(g * y * (1.0 - y))
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus(x: np.ndarray) -> np.ndarray:
    # x + log1p(exp(-x)) for large x avoids overflow in exp.
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x > 20.0, x, 0.0)
    small = x <= 20.0
    out = out + np.where(small, np.log1p(np.exp(np.where(small, x, 0.0))), 0.0)
    return out


def softplus(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = Tensor(_softplus(a.data), parents=(a,))
    out._backward = lambda g: a._accum(g * _sigmoid(a.data))
    return out


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = Tensor(y, parents=(a,))
    out._backward = lambda g: a._accum(g * y)
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), parents=(a,))
    out._backward = lambda g: a._accum(g / a.data)
    return out


def square(a: Tensor) -> Tensor:
    out = Tensor(a.data * a.data, parents=(a,))
    out._backward = lambda g: a._accum(g * 2.0 * a.data)
    return out


def sqrt(a: Tensor) -> Tensor:
    y = np.sqrt(a.data)
    out = Tensor(y, parents=(a,))
    out._backward = lambda g: a._accum(g * 0.5 / y)
    return out


def tsum(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(), parents=(a,))
    out._backward = lambda g: a._accum(np.full_like(a.data, float(g)))
    return out


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor(a.data.mean(), parents=(a,))
    out._backward = lambda g: a._accum(np.full_like(a.data, float(g) / n))
    return out


def dropout(a: Tensor, p: float, rng: np.random.Generator, train: bool) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    if not train or p <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= p) / (1.0 - p)
    out = Tensor(a.data * keep, parents=(a,))
    out._backward = lambda g: a._accum(g * keep)
    return out


def gaussian_nll(x, mu: Tensor, var: Tensor) -> Tensor:
    """Elementwise Gaussian negative log-likelihood, summed.

    x is observed (constant); mu and var are predicted tensors of the same
    shape. var must be positive; the softplus heads that feed this in
    practice guarantee it, and the explicit check catches misuse.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(var.data <= 0.0):
        raise ValueError("gaussian_nll requires positive variance")
    resid = sub(Tensor(x), mu)
    nll = add(
        scale(log(scale(var, 2.0 * math.pi)), 0.5),
        div(square(resid), scale(var, 2.0)),
    )
    return tsum(nll)


def lstm_sequence(x: Tensor, w: Tensor, u: Tensor, b: Tensor) -> Tensor:
    """Run an LSTM over a (T, D) input; returns the (T, H) hidden states.

    Fused op: the whole pass is one graph node with a hand-written BPTT
    backward. Gate layout in the 4H axis is [input, forget, cell, output].
    """
    T, d_in = x.data.shape
    four_h = w.data.shape[1]
    if w.data.shape[0] != d_in or u.data.shape[1] != four_h or b.data.shape[0] != four_h:
        raise ValueError(
            f"lstm shape mismatch: x {x.data.shape}, w {w.data.shape}, "
            f"u {u.data.shape}, b {b.data.shape}"
        )
    hdim = four_h // 4

    x_proj = x.data @ w.data + b.data
    gates = np.empty((T, four_h))
    cells = np.empty((T, hdim))
    tanh_c = np.empty((T, hdim))
    hidden = np.empty((T, hdim))
    h_prev = np.zeros(hdim)
    c_prev = np.zeros(hdim)
    for t in range(T):
        z = x_proj[t] + h_prev @ u.data
        i = _sigmoid(z[:hdim])
        f = _sigmoid(z[hdim : 2 * hdim])
        g = np.tanh(z[2 * hdim : 3 * hdim])
        o = _sigmoid(z[3 * hdim :])
        c_prev = f * c_prev + i * g
        tc = np.tanh(c_prev)
        h_prev = o * tc
        gates[t, :hdim] = i
        gates[t, hdim : 2 * hdim] = f
        gates[t, 2 * hdim : 3 * hdim] = g
        gates[t, 3 * hdim :] = o
        cells[t] = c_prev
        tanh_c[t] = tc
        hidden[t] = h_prev

    out = Tensor(hidden, parents=(x, w, u, b))

    def bw(g_out):
        dw = np.zeros_like(w.data)
        du = np.zeros_like(u.data)
        db = np.zeros_like(b.data)
        dx = np.zeros_like(x.data)
        dh_next = np.zeros(hdim)
        dc_next = np.zeros(hdim)
        for t in range(T - 1, -1, -1):
            i = gates[t, :hdim]
            f = gates[t, hdim : 2 * hdim]
            gg = gates[t, 2 * hdim : 3 * hdim]
            o = gates[t, 3 * hdim :]
            c_before = cells[t - 1] if t > 0 else np.zeros(hdim)
            h_before = hidden[t - 1] if t > 0 else np.zeros(hdim)
            dh = g_out[t] + dh_next
            dc = dh * o * (1.0 - tanh_c[t] * tanh_c[t]) + dc_next
            dz = np.empty(four_h)
            dz[:hdim] = dc * gg * i * (1.0 - i)
            dz[hdim : 2 * hdim] = dc * c_before * f * (1.0 - f)
            dz[2 * hdim : 3 * hdim] = dc * i * (1.0 - gg * gg)
            dz[3 * hdim :] = dh * tanh_c[t] * o * (1.0 - o)
            dc_next = dc * f
            dh_next = dz @ u.data.T
            dw += np.outer(x.data[t], dz)
            du += np.outer(h_before, dz)
            db += dz
            dx[t] = dz @ w.data.T
        x._accum(dx)
        w._accum(dw)
        u._accum(du)
        b._accum(db)

    out._backward = bw
    return out


def bilstm(x: Tensor, params: dict[str, Tensor], prefix: str) -> Tensor:
    """Bidirectional LSTM; returns (T, 2H) forward/backward states.

    Expects parameters `{prefix}.fw.{w,u,b}` and `{prefix}.bw.{w,u,b}`.
    """
    fwd = lstm_sequence(x, params[f"{prefix}.fw.w"], params[f"{prefix}.fw.u"], params[f"{prefix}.fw.b"])
    bwd = flip(lstm_sequence(flip(x), params[f"{prefix}.bw.w"], params[f"{prefix}.bw.u"], params[f"{prefix}.bw.b"]))
    return concat([fwd, bwd], axis=1)
