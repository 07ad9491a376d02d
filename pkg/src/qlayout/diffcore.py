"""Minimal reverse-mode autodiff on float64 numpy arrays.

Just enough machinery for the policy network: tensors carry their value,
an optional gradient, and a backward closure; ``Tape`` linearizes the op
graph so backward visits every node once in reverse topological order.
No ML framework is involved and everything runs in float64 so gradient
checks can be tight.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bwd")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._bwd = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad = self.grad + g

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward without a seed needs a scalar", self.shape)
            grad = np.ones_like(self.data)
        self.grad = np.asarray(grad, dtype=np.float64)
        Tape(self).run()

    # operator sugar -------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    @property
    def T(self):
        return transpose(self)


class Tape:
    """Reverse-topological schedule of the ops reachable from a root."""

    def __init__(self, root):
        order = []
        seen = set()
        stack = [(root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.order = order  # topological; run() walks it in reverse

    def run(self):
        for node in reversed(self.order):
            if node._bwd is not None:
                node._bwd(node.grad)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, bwd):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._bwd = bwd
    return out


def _unbroadcast(g, shape):
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# --- elementwise ----------------------------------------------------

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError("add operands do not broadcast", a.shape, b.shape)

    def bwd(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), bwd)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError("sub operands do not broadcast", a.shape, b.shape)

    def bwd(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), bwd)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError("mul operands do not broadcast", a.shape, b.shape)

    def bwd(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), bwd)


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data / b.data

    def bwd(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(data, (a, b), bwd)


def powi(a, exponent):
    """Elementwise power with a constant real exponent."""
    a = _as_tensor(a)
    data = np.power(a.data, exponent)

    def bwd(g):
        a._accum(g * exponent * np.power(a.data, exponent - 1))

    return _make(data, (a,), bwd)


def exp(a):
    a = _as_tensor(a)
    data = np.exp(a.data)

    def bwd(g):
        a._accum(g * data)

    return _make(data, (a,), bwd)


def log(a):
    a = _as_tensor(a)
    data = np.log(a.data)

    def bwd(g):
        a._accum(g / a.data)

    return _make(data, (a,), bwd)


def tanh(a):
    a = _as_tensor(a)
    data = np.tanh(a.data)

    def bwd(g):
        a._accum(g * (1.0 - data * data))

    return _make(data, (a,), bwd)


def leaky_relu(a, slope=0.2):
    a = _as_tensor(a)
    mask = a.data >= 0
    data = np.where(mask, a.data, slope * a.data)

    def bwd(g):
        a._accum(g * np.where(mask, 1.0, slope))

    return _make(data, (a,), bwd)


def elu(a, alpha=1.0):
    a = _as_tensor(a)
    mask = a.data >= 0
    data = np.where(mask, a.data, alpha * np.expm1(a.data))

    def bwd(g):
        a._accum(g * np.where(mask, 1.0, data + alpha))

    return _make(data, (a,), bwd)


# --- structural -----------------------------------------------------

def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim > 2 or b.ndim > 2:
        raise ShapeError("matmul supports at most 2-D operands", a.shape, b.shape)
    try:
        data = a.data @ b.data
    except ValueError:
        raise ShapeError("matmul shape mismatch", a.shape, b.shape)

    def bwd(g):
        ad, bd = a.data, b.data
        ga = gb = None
        if a.ndim == 1 and b.ndim == 1:  # dot product, g scalar
            ga, gb = g * bd, g * ad
        elif a.ndim == 2 and b.ndim == 2:
            ga, gb = g @ bd.T, ad.T @ g
        elif a.ndim == 2 and b.ndim == 1:  # (m,k)@(k,) -> (m,)
            ga, gb = np.outer(g, bd), ad.T @ g
        else:  # (k,)@(k,n) -> (n,)
            ga, gb = bd @ g, np.outer(ad, g)
        if a.requires_grad:
            a._accum(ga)
        if b.requires_grad:
            b._accum(gb)

    return _make(data, (a, b), bwd)


def reshape(a, shape):
    a = _as_tensor(a)
    data = a.data.reshape(shape)

    def bwd(g):
        a._accum(g.reshape(a.data.shape))

    return _make(data, (a,), bwd)


def transpose(a):
    a = _as_tensor(a)

    def bwd(g):
        a._accum(g.T)

    return _make(a.data.T, (a,), bwd)


def concat(parts, axis=0):
    parts = [_as_tensor(p) for p in parts]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p._accum(g[tuple(idx)])

    return _make(data, tuple(parts), bwd)


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        gg = np.asarray(g)
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        a._accum(np.broadcast_to(gg, a.data.shape))

    return _make(data, (a,), bwd)


def tmean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), Tensor(1.0 / count))


def gather(a, index):
    """Select along axis 0 by integer or integer-array index."""
    a = _as_tensor(a)
    data = np.take(a.data, index, axis=0)

    def bwd(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, index, g)
        a._accum(acc)

    return _make(data, (a,), bwd)


def masked_fill(a, mask, value):
    """Where ``mask`` is true, replace entries by ``value`` (no gradient
    flows into filled positions)."""
    a = _as_tensor(a)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.data.shape)
    data = np.where(mask, value, a.data)

    def bwd(g):
        a._accum(np.where(mask, 0.0, g))

    return _make(data, (a,), bwd)


def softmax(a, axis=-1):
    a = _as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        a._accum(data * (g - dot))

    return _make(data, (a,), bwd)


# --- optimizer ------------------------------------------------------

def adam_init(params):
    return {
        "t": 0,
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }


def adam_step(params, grads, state, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """Standard Adam update with bias correction; mutates params in place."""
    state["t"] += 1
    t = state["t"]
    for name in sorted(params):
        g = grads.get(name)
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for '{name}'")
        m = state["m"][name]
        v = state["v"][name]
        m += (1 - beta1) * (g - m)
        v += (1 - beta2) * (g * g - v)
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        params[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state
