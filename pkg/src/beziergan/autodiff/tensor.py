"""Tensor type and differentiable primitives.

Each primitive computes its forward value with numpy and records a closure
that maps the output gradient to one gradient per parent.  ``backward`` walks
the graph in reverse topological order.
"""
from __future__ import annotations

import contextlib

import numpy as np

from .. import _kernels

_default_dtype = np.float32


def default_dtype():
    return _default_dtype


def set_default_dtype(dtype):
    global _default_dtype
    _default_dtype = np.dtype(dtype).type


@contextlib.contextmanager
def precision(dtype):
    """Temporarily change the dtype given to new tensors and parameters."""
    old = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(old)


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "_grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        self.data = np.asarray(data, dtype=_default_dtype if dtype is None else dtype)
        self._grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    # gradient storage is allocated lazily but always matches data's shape
    @property
    def grad(self):
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value):
        value = np.asarray(value, dtype=self.data.dtype)
        if value.shape != self.data.shape:
            raise ShapeError(f"grad shape {value.shape} != data shape {self.data.shape}")
        self._grad = value

    def zero_grad(self):
        self._grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data, dtype=self.data.dtype)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def backward(self):
        if self.data.size != 1:
            raise ShapeError(f"backward needs a scalar root, got shape {self.shape}")
        order = []
        seen = set()
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
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._grad = g if node._grad is None else node._grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, k):
        return power(self, k)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)


def as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if isinstance(like, Tensor) else None
    return Tensor(x, dtype=dtype)


def _make(data, parents, backward):
    out = Tensor(data, dtype=data.dtype)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- arithmetic

def add(a, b):
    a, b = as_tensor(a, b), as_tensor(b, a)
    _check_broadcast(a, b, "add")
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a, b), as_tensor(b, a)
    _check_broadcast(a, b, "sub")
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a, b), as_tensor(b, a)
    _check_broadcast(a, b, "mul")
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b):
    a, b = as_tensor(a, b), as_tensor(b, a)
    _check_broadcast(a, b, "div")
    out = a.data / b.data

    def back(g):
        ga = g / b.data
        return _unbroadcast(ga, a.shape), _unbroadcast(-ga * out, b.shape)

    return _make(out, (a, b), back)


def power(a, k):
    k = float(k)
    return _make(a.data ** k, (a,), lambda g: (g * k * a.data ** (k - 1.0),))


def matmul(a, b):
    a, b = as_tensor(a, b), as_tensor(b, a)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def back(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(a.data @ b.data, (a, b), back)


# ---------------------------------------------------------------- elementwise

def exp(a):
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a):
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a):
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (0.5 * g / out,))


def tanh(a):
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype)


def sigmoid(a):
    out = _sigmoid(a.data)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a):
    """log(1 + exp(a)), overflow-safe."""
    x = a.data
    out = np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))
    return _make(out.astype(x.dtype), (a,), lambda g: (g * _sigmoid(x),))


def leaky_relu(a, slope=0.2):
    mask = a.data > 0
    scale = np.where(mask, 1.0, slope).astype(a.data.dtype)
    return _make(a.data * scale, (a,), lambda g: (g * scale,))


def relu(a):
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0).astype(a.data.dtype), (a,), lambda g: (g * mask,))


def absolute(a):
    return _make(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def clip(a, lo, hi):
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


# ---------------------------------------------------------------- reductions and shape

def tsum(a, axis=None, keepdims=False):
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(np.asarray(out), (a,), back)


def mean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return mul(tsum(a, axis, keepdims), 1.0 / float(n))


def tmax(a, axis=-1):
    """Maximum along ``axis``; the gradient goes to the first maximal entry."""
    idx = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def back(g):
        ga = np.zeros_like(a.data)
        np.put_along_axis(ga, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return (ga,)

    return _make(out, (a,), back)


def reshape(a, shape):
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} to {shape}") from None
    return _make(out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None):
    axes = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
    inv = np.argsort(axes)
    return _make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def getitem(a, idx):
    def back(g):
        ga = np.zeros_like(a.data)
        if _is_fancy(idx):
            np.add.at(ga, idx, g)
        else:
            ga[idx] = g
        return (ga,)

    return _make(np.asarray(a.data[idx]), (a,), back)


def _is_fancy(idx):
    items = idx if isinstance(idx, tuple) else (idx,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(s != r for k, (s, r) in enumerate(zip(t.shape, ref)) if k != ax):
            raise ShapeError(f"concat: incompatible shapes {ref} and {t.shape} on axis {axis}")
    sizes = np.cumsum([t.shape[ax] for t in tensors])[:-1]
    out = np.concatenate([t.data for t in tensors], axis=ax)
    return _make(out, tensors, lambda g: tuple(np.split(g, sizes, axis=ax)))


# ---------------------------------------------------------------- structured ops

def softmax(a, axis=-1):
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)
    return _make(out, (a,), lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def cumsum(a, axis=-1):
    """Inclusive cumulative sum."""
    def back(g):
        return (np.flip(np.cumsum(np.flip(g, axis), axis=axis), axis),)

    return _make(np.cumsum(a.data, axis=axis), (a,), back)


def l2norm(a, axis=-1):
    """Euclidean norm along ``axis``; the (sub)gradient at a zero vector is zero."""
    n = np.sqrt(np.sum(a.data * a.data, axis=axis))

    def back(g):
        safe = np.where(n > 0, n, 1.0)
        scale = np.where(n > 0, g / safe, 0.0)
        return (a.data * np.expand_dims(scale, axis),)

    return _make(n, (a,), back)


def bernstein(t, n):
    """Degree-``n`` Bernstein basis at every entry of ``t``; adds a trailing axis of size n+1."""
    flat = t.data.reshape(-1).astype(np.float64)
    basis = _kernels.bernstein_basis(flat, n)
    out = basis.reshape(t.shape + (n + 1,)).astype(t.data.dtype)

    def back(g):
        if n == 0:
            return (np.zeros_like(t.data),)
        lower = _kernels.bernstein_basis(flat, n - 1)
        dB = np.zeros((flat.shape[0], n + 1))
        dB[:, 1:] += lower
        dB[:, :-1] -= lower
        dB *= n
        return ((g.reshape(-1, n + 1) * dB).sum(axis=1).reshape(t.shape).astype(t.data.dtype),)

    return _make(out, (t,), back)


def batch_norm(x, gamma, beta, running_mean, running_var, training, momentum=0.1, eps=1e-5):
    """Normalise over every axis except axis 1 (features/channels).

    In training mode the batch statistics are used and the running buffers
    (plain arrays) are updated in place.
    """
    if x.ndim < 2 or x.shape[1] != gamma.shape[0]:
        raise ShapeError(f"batch_norm: input {x.shape} does not match {gamma.shape[0]} features")
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, -1) + (1,) * (x.ndim - 2)
    g_ = gamma.data.reshape(bshape)
    b_ = beta.data.reshape(bshape)
    if training:
        mu = x.data.mean(axis=axes, keepdims=True)
        var = x.data.var(axis=axes, keepdims=True)
        count = x.data.size // x.shape[1]
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu.reshape(-1)
        running_var *= 1.0 - momentum
        running_var += momentum * var.reshape(-1) * (count / max(count - 1, 1))
    else:
        mu = running_mean.reshape(bshape)
        var = running_var.reshape(bshape)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = (g_ * xhat + b_).astype(x.data.dtype)

    def back(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * g_
        if training:
            m = x.data.size // x.shape[1]
            dx = inv / m * (m * dxhat - dxhat.sum(axis=axes, keepdims=True)
                            - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))
        else:
            dx = dxhat * inv
        return dx.astype(x.data.dtype), dgamma, dbeta

    return _make(out, (x, gamma, beta), back)


def _window_index(length_out, kernel, stride):
    return np.arange(length_out)[:, None] * stride + np.arange(kernel)[None, :]


def conv1d(x, weight, bias=None, stride=1, padding=0):
    """x: (B, Cin, L); weight: (Cout, Cin, K) -> (B, Cout, Lout)."""
    if x.ndim != 3 or weight.ndim != 3 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv1d: input {x.shape} incompatible with weight {weight.shape}")
    K = weight.shape[2]
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding)))
    Lout = (xp.shape[2] - K) // stride + 1
    if Lout < 1:
        raise ShapeError(f"conv1d: input {x.shape} too short for kernel {K}")
    idx = _window_index(Lout, K, stride)
    B, Cin = x.shape[0], x.shape[1]
    Cout = weight.shape[0]
    # rows are (batch, output position), columns (channel, tap)
    cols = xp[:, :, idx].transpose(0, 2, 1, 3).reshape(B * Lout, Cin * K)
    w2 = weight.data.reshape(Cout, Cin * K)
    out = (cols @ w2.T).reshape(B, Lout, Cout).transpose(0, 2, 1)
    parents = [x, weight]
    if bias is not None:
        out = out + bias.data[None, :, None]
        parents.append(bias)

    def back(g):
        g2 = g.transpose(0, 2, 1).reshape(B * Lout, Cout)
        gw = (g2.T @ cols).reshape(weight.shape)
        gcols = (g2 @ w2).reshape(B, Lout, Cin, K)
        gxp = np.zeros_like(xp)
        for k in range(K):
            gxp[:, :, idx[:, k]] += gcols[:, :, :, k].transpose(0, 2, 1)
        gx = gxp[:, :, padding: xp.shape[2] - padding] if padding else gxp
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    return _make(out.astype(x.data.dtype), parents, back)


def conv1d_transpose(x, weight, bias=None, stride=1, padding=0):
    """x: (B, Cin, L); weight: (Cin, Cout, K) -> (B, Cout, (L-1)*stride + K - 2*padding)."""
    if x.ndim != 3 or weight.ndim != 3 or x.shape[1] != weight.shape[0]:
        raise ShapeError(f"conv1d_transpose: input {x.shape} incompatible with weight {weight.shape}")
    B, _, L = x.shape
    Cout, K = weight.shape[1], weight.shape[2]
    full = (L - 1) * stride + K
    Lout = full - 2 * padding
    if Lout < 1:
        raise ShapeError(f"conv1d_transpose: padding {padding} too large for input {x.shape}")
    pos = np.arange(L) * stride
    Cin = x.shape[1]
    w2 = weight.data.reshape(Cin, Cout * K)
    xt = x.data.transpose(0, 2, 1).reshape(B * L, Cin)
    taps = (xt @ w2).reshape(B, L, Cout, K)
    y = np.zeros((B, Cout, full), dtype=x.data.dtype)
    for k in range(K):
        y[:, :, pos + k] += taps[:, :, :, k].transpose(0, 2, 1)
    out = y[:, :, padding: padding + Lout]
    parents = [x, weight]
    if bias is not None:
        out = out + bias.data[None, :, None]
        parents.append(bias)
    gather = pos[:, None] + np.arange(K)[None, :]   # (L, K)

    def back(g):
        gfull = np.zeros((B, Cout, full), dtype=g.dtype)
        gfull[:, :, padding: padding + Lout] = g
        g2 = gfull[:, :, gather].transpose(0, 2, 1, 3).reshape(B * L, Cout * K)
        gx = (g2 @ w2.T).reshape(B, L, Cin).transpose(0, 2, 1)
        gw = (xt.T @ g2).reshape(weight.shape)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    return _make(np.ascontiguousarray(out), parents, back)
