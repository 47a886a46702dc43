"""Minimal reverse-mode differentiation over numpy arrays.

Every operation on a :class:`Tensor` records its parents and a closure that
pushes the output adjoint back to them.  ``Tensor.backward`` walks the
recorded graph in reverse topological order.
"""
from __future__ import annotations

import numpy as np

from .errors import NumericsError


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_ufunc__ = None  # make numpy defer to our reflected operators

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    # -- bookkeeping ---------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accum(grad)
        for node in reversed(order):
            if node.grad is None:
                continue
            if not np.all(np.isfinite(node.grad)):
                raise NumericsError("non-finite gradient encountered in backward pass")
            if node._backward is not None:
                node._backward(node.grad)

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bw(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g, b.shape))

        return Tensor(a.data + b.data, _parents=(a, b), _backward=bw)

    __radd__ = __add__

    def __neg__(self):
        a = self
        return Tensor(-a.data, _parents=(a,), _backward=lambda g: a._accum(-g))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bw(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g * a.data, b.shape))

        return Tensor(a.data * b.data, _parents=(a, b), _backward=bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self, other
        out = a.data / b.data

        def bw(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g / b.data, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(-g * out / b.data, b.shape))

        return Tensor(out, _parents=(a, b), _backward=bw)

    def __pow__(self, k: float):
        a = self
        return Tensor(a.data**k, _parents=(a,),
                      _backward=lambda g: a._accum(g * k * a.data ** (k - 1)))

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bw(g):
            if a.requires_grad:
                if b.ndim == 1:
                    ga = np.multiply.outer(g, b.data)
                else:
                    ga = g @ np.swapaxes(b.data, -1, -2)
                a._accum(_unbroadcast(ga, a.shape))
            if b.requires_grad:
                if a.ndim == 1:
                    gb = np.multiply.outer(a.data, g)
                else:
                    gb = np.swapaxes(a.data, -1, -2) @ g
                b._accum(_unbroadcast(gb, b.shape))

        return Tensor(a.data @ b.data, _parents=(a, b), _backward=bw)

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    # -- shape ops -----------------------------------------------------
    def reshape(self, *shape):
        a = self
        return Tensor(a.data.reshape(*shape), _parents=(a,),
                      _backward=lambda g: a._accum(g.reshape(a.shape)))

    def transpose(self, *axes):
        a = self
        axes = axes or tuple(reversed(range(a.ndim)))
        inv = np.argsort(axes)
        return Tensor(a.data.transpose(axes), _parents=(a,),
                      _backward=lambda g: a._accum(g.transpose(inv)))

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, idx):
        a = self

        def bw(g):
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            a._accum(full)

        return Tensor(a.data[idx], _parents=(a,), _backward=bw)

    def sum(self, axis=None, keepdims=False):
        a = self

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accum(np.broadcast_to(g, a.shape))

        return Tensor(a.data.sum(axis=axis, keepdims=keepdims), _parents=(a,), _backward=bw)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def value(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


# -- elementwise functions (accept ndarray or Tensor) ---------------------

def sin(x):
    if not isinstance(x, Tensor):
        return np.sin(x)
    return Tensor(np.sin(x.data), _parents=(x,), _backward=lambda g: x._accum(g * np.cos(x.data)))


def relu(x):
    if not isinstance(x, Tensor):
        return np.maximum(x, 0.0)
    pos = x.data > 0
    return Tensor(np.where(pos, x.data, 0.0), _parents=(x,), _backward=lambda g: x._accum(g * pos))


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x):
    """tanh-approximated GELU."""
    xd = value(x)
    inner = _GELU_C * (xd + 0.044715 * xd**3)
    th = np.tanh(inner)
    out = 0.5 * xd * (1.0 + th)
    if not isinstance(x, Tensor):
        return out

    def bw(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * xd**2)
        x._accum(g * (0.5 * (1.0 + th) + 0.5 * xd * (1.0 - th**2) * dinner))

    return Tensor(out, _parents=(x,), _backward=bw)


def softmax(x, axis: int = -1):
    xd = value(x)
    e = np.exp(xd - xd.max(axis=axis, keepdims=True))
    p = e / e.sum(axis=axis, keepdims=True)
    if not isinstance(x, Tensor):
        return p

    def bw(g):
        x._accum(p * (g - (g * p).sum(axis=axis, keepdims=True)))

    return Tensor(p, _parents=(x,), _backward=bw)


def layer_norm(x, gain, bias, eps: float = 1e-5):
    """Normalize over the last axis, then scale and shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc**2).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    d = x.shape[-1]

    def bw(g):
        if gain.requires_grad:
            gain._accum(_unbroadcast(g * xhat, gain.shape))
        if bias.requires_grad:
            bias._accum(_unbroadcast(g, bias.shape))
        if x.requires_grad:
            gx = g * gain.data
            x._accum(rstd / d * (d * gx - gx.sum(-1, keepdims=True)
                                 - xhat * (gx * xhat).sum(-1, keepdims=True)))

    return Tensor(xhat * gain.data + bias.data, _parents=(x, gain, bias), _backward=bw)


def concat(items, axis: int = 0):
    items = [as_tensor(t) for t in items]
    sizes = [t.shape[axis] for t in items]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(items, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accum(g[tuple(sl)])

    return Tensor(np.concatenate([t.data for t in items], axis=axis),
                  _parents=tuple(items), _backward=bw)


def conv1d_same(x, weight, bias):
    """Cross-correlation with zero 'same' padding and stride 1.

    x: (C_in, T); weight: (C_out, C_in, k) with odd k; bias: (C_out,).
    Returns (C_out, T).
    """
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    c_out, c_in, k = weight.shape
    if x.shape[0] != c_in or k % 2 == 0:
        raise ValueError(f"conv weight {weight.shape} incompatible with input {x.shape}")
    p = (k - 1) // 2
    T = x.shape[1]
    xp = np.pad(x.data, ((0, 0), (p, p)))
    # cols[c, j, t] = xp[c, t + j]
    cols = np.lib.stride_tricks.sliding_window_view(xp, T, axis=1)  # (C_in, k, T)
    out = np.einsum("oij,ijt->ot", weight.data, cols) + bias.data[:, None]

    def bw(g):
        if bias.requires_grad:
            bias._accum(g.sum(axis=1))
        if weight.requires_grad:
            weight._accum(np.einsum("ot,ijt->oij", g, cols))
        if x.requires_grad:
            gcols = np.einsum("ot,oij->ijt", g, weight.data)
            gxp = np.zeros_like(xp)
            for j in range(k):
                gxp[:, j:j + T] += gcols[:, j, :]
            x._accum(gxp[:, p:p + T])

    return Tensor(out, _parents=(x, weight, bias), _backward=bw)


def check_finite(t, what: str = "activation"):
    if not np.all(np.isfinite(value(t))):
        raise NumericsError(f"non-finite {what}")
    return t
