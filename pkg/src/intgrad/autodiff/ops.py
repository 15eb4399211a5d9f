"""Primitive op catalog.

Each op is a pair of pure functions over float64 numpy arrays:

* ``forward(*values, **attrs) -> ndarray``
* ``vjp(g, values, out, **attrs) -> tuple`` with one cotangent per input
  (``None`` for inputs that carry no gradient, e.g. index arrays).

The ``kind`` tag tells the rival back-propagation rules how an op behaves:
``linear`` (affine in its variable inputs), ``routing`` (pure data movement),
``elementwise`` (single-input pointwise nonlinearity), ``bilinear``
(product of two operands) or ``other``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DomainError, ShapeError


@dataclass(frozen=True)
class OpDef:
    name: str
    forward: Callable
    vjp: Callable
    arity: int | None
    kind: str
    doc: str = ""


@dataclass(frozen=True)
class CompositeDef:
    """An op expressed as a fixed pattern of primitives (see ``NetworkBuilder``)."""

    name: str
    primitives: tuple[str, ...]
    doc: str = ""
    kind: str = field(default="composite")


OPS: dict[str, OpDef] = {}


def _register(name, arity, kind, doc=""):
    def deco(pair):
        fwd, vjp = pair()
        OPS[name] = OpDef(name, fwd, vjp, arity, kind, doc)
        return pair

    return deco


def _check_same_or_scalar(a, b, op):
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ (only scalar broadcasting)")


def _reduce_to(g, shape):
    return np.asarray(g.sum()) if shape == () and g.shape != () else g


# -- arithmetic --------------------------------------------------------------


@_register("add", 2, "linear", "a + b (equal shapes or one scalar)")
def _add():
    def fwd(a, b):
        _check_same_or_scalar(a, b, "add")
        return a + b

    def vjp(g, vals, out):
        a, b = vals
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return fwd, vjp


@_register("subtract", 2, "linear", "a - b (equal shapes or one scalar)")
def _subtract():
    def fwd(a, b):
        _check_same_or_scalar(a, b, "subtract")
        return a - b

    def vjp(g, vals, out):
        a, b = vals
        return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)

    return fwd, vjp


@_register("multiply", 2, "bilinear", "elementwise a * b (equal shapes or one scalar)")
def _multiply():
    def fwd(a, b):
        _check_same_or_scalar(a, b, "multiply")
        return a * b

    def vjp(g, vals, out):
        a, b = vals
        return _reduce_to(g * b, a.shape), _reduce_to(g * a, b.shape)

    return fwd, vjp


@_register("scale", 1, "linear", "factor * x for a constant factor")
def _scale():
    def fwd(x, factor):
        return float(factor) * x

    def vjp(g, vals, out, factor):
        return (float(factor) * g,)

    return fwd, vjp


@_register("matmul", 2, "bilinear", "matrix product of 1-D/2-D operands")
def _matmul():
    def fwd(a, b):
        if a.ndim not in (1, 2) or b.ndim not in (1, 2):
            raise ShapeError(f"matmul: operands must be 1-D or 2-D, got {a.shape} and {b.shape}")
        if a.shape[-1] != b.shape[0]:
            raise ShapeError(f"matmul: inner dimensions differ: {a.shape} @ {b.shape}")
        return a @ b

    def vjp(g, vals, out):
        a, b = vals
        if a.ndim == 2 and b.ndim == 2:
            return g @ b.T, a.T @ g
        if a.ndim == 2:
            return np.outer(g, b), a.T @ g
        if b.ndim == 2:
            return b @ g, np.outer(a, g)
        return g * b, g * a

    return fwd, vjp


@_register("dense", 3, "linear", "W @ x + b for x of shape (n,), W (m, n), b (m,)")
def _dense():
    def fwd(x, w, b):
        if x.ndim != 1 or w.ndim != 2 or b.shape != (w.shape[0],) or w.shape[1] != x.shape[0]:
            raise ShapeError(f"dense: incompatible shapes x{x.shape} W{w.shape} b{b.shape}")
        return w @ x + b

    def vjp(g, vals, out):
        x, w, b = vals
        return w.T @ g, np.outer(g, x), g.copy()

    return fwd, vjp


# -- elementwise nonlinearities ----------------------------------------------


@_register("relu", 1, "elementwise", "max(x, 0); derivative at 0 is 0")
def _relu():
    def fwd(x):
        return np.where(x > 0, x, 0.0)

    def vjp(g, vals, out):
        return (np.where(vals[0] > 0, g, 0.0),)

    return fwd, vjp


def sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


@_register("sigmoid", 1, "elementwise", "1 / (1 + exp(-x))")
def _sigmoid():
    def fwd(x):
        return sigmoid(x)

    def vjp(g, vals, out):
        return (g * out * (1.0 - out),)

    return fwd, vjp


@_register("tanh", 1, "elementwise")
def _tanh():
    def fwd(x):
        return np.tanh(x)

    def vjp(g, vals, out):
        return (g * (1.0 - out * out),)

    return fwd, vjp


ELEMENTWISE_DERIVATIVES: dict[str, Callable] = {
    "relu": lambda x, y: (x > 0).astype(np.float64),
    "sigmoid": lambda x, y: y * (1.0 - y),
    "tanh": lambda x, y: 1.0 - y * y,
}


@_register("softmax", 1, "other", "softmax along the last axis")
def _softmax():
    def fwd(x):
        if x.ndim == 0:
            raise ShapeError("softmax: needs at least one axis")
        e = np.exp(x - x.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)

    def vjp(g, vals, out):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return fwd, vjp


# -- pooling -----------------------------------------------------------------


def _pool_windows(x, size, ndim):
    """View ``x`` as (..., window) with windows flattened in row-major order."""
    if ndim == 1:
        if x.ndim != 1 or x.shape[0] % size:
            raise ShapeError(f"pool1d: length {x.shape} not divisible by {size}")
        return x.reshape(-1, size)
    if x.ndim != 3 or x.shape[0] % size or x.shape[1] % size:
        raise ShapeError(f"pool2d: shape {x.shape} (H, W, C) not divisible by {size}")
    h, w, c = x.shape
    v = x.reshape(h // size, size, w // size, size, c).transpose(0, 2, 4, 1, 3)
    return v.reshape(h // size, w // size, c, size * size)


def _unpool(gw, shape, size, ndim):
    if ndim == 1:
        return gw.reshape(shape)
    h, w, c = shape
    v = gw.reshape(h // size, w // size, c, size, size).transpose(0, 3, 1, 4, 2)
    return v.reshape(shape)


def _make_maxpool(ndim):
    def fwd(x, size):
        return _pool_windows(x, int(size), ndim).max(axis=-1)

    def vjp(g, vals, out, size):
        size = int(size)
        win = _pool_windows(vals[0], size, ndim)
        # argmax takes the first maximum: lowest flat index among ties
        idx = win.argmax(axis=-1)
        gw = np.zeros_like(win)
        np.put_along_axis(gw, idx[..., None], g[..., None], axis=-1)
        return (_unpool(gw, vals[0].shape, size, ndim),)

    return fwd, vjp


def _make_avgpool(ndim):
    def fwd(x, size):
        return _pool_windows(x, int(size), ndim).mean(axis=-1)

    def vjp(g, vals, out, size):
        size = int(size)
        win_size = size if ndim == 1 else size * size
        gw = np.repeat(g[..., None] / win_size, win_size, axis=-1)
        return (_unpool(gw, vals[0].shape, size, ndim),)

    return fwd, vjp


OPS["maxpool1d"] = OpDef("maxpool1d", *_make_maxpool(1), 1, "other", "non-overlapping max over (n,)")
OPS["maxpool2d"] = OpDef("maxpool2d", *_make_maxpool(2), 1, "other", "non-overlapping max over (H, W, C)")
OPS["avgpool1d"] = OpDef("avgpool1d", *_make_avgpool(1), 1, "linear", "non-overlapping mean over (n,)")
OPS["avgpool2d"] = OpDef("avgpool2d", *_make_avgpool(2), 1, "linear", "non-overlapping mean over (H, W, C)")


# -- convolution -------------------------------------------------------------


@_register("conv2d", 3, "linear", "stride-1 cross-correlation; x (H, W, Cin), k (kh, kw, Cin, Cout), b (Cout,)")
def _conv2d():
    def _padded(x, pad):
        return np.pad(x, ((pad, pad), (pad, pad), (0, 0))) if pad else x

    def fwd(x, k, b, pad=0):
        if x.ndim != 3 or k.ndim != 4 or k.shape[2] != x.shape[2] or b.shape != (k.shape[3],):
            raise ShapeError(f"conv2d: incompatible shapes x{x.shape} k{k.shape} b{b.shape}")
        xp = _padded(x, int(pad))
        if xp.shape[0] < k.shape[0] or xp.shape[1] < k.shape[1]:
            raise ShapeError(f"conv2d: kernel {k.shape[:2]} larger than input {xp.shape[:2]}")
        win = sliding_window_view(xp, k.shape[:2], axis=(0, 1))
        return np.einsum("hwcij,ijco->hwo", win, k) + b

    def vjp(g, vals, out, pad=0):
        x, k, b = vals
        pad = int(pad)
        xp = _padded(x, pad)
        win = sliding_window_view(xp, k.shape[:2], axis=(0, 1))
        dk = np.einsum("hwcij,hwo->ijco", win, g)
        dxp = np.zeros_like(xp)
        oh, ow = g.shape[:2]
        for i in range(k.shape[0]):
            for j in range(k.shape[1]):
                dxp[i : i + oh, j : j + ow, :] += g @ k[i, j].T
        dx = dxp[pad : pad + x.shape[0], pad : pad + x.shape[1], :] if pad else dxp
        return dx, dk, g.sum(axis=(0, 1))

    return fwd, vjp


# -- data movement -----------------------------------------------------------


@_register("concat", None, "routing", "concatenate along an axis (default 0)")
def _concat():
    def fwd(*xs, axis=0):
        try:
            return np.concatenate(xs, axis=int(axis))
        except ValueError as exc:
            raise ShapeError(f"concat: {exc}") from None

    def vjp(g, vals, out, axis=0):
        bounds = np.cumsum([v.shape[int(axis)] for v in vals])[:-1]
        return tuple(np.split(g, bounds, axis=int(axis)))

    return fwd, vjp


@_register("reshape", 1, "routing", "reshape; one dimension may be -1")
def _reshape():
    def fwd(x, shape):
        try:
            return x.reshape(tuple(shape))
        except ValueError as exc:
            raise ShapeError(f"reshape: {exc}") from None

    def vjp(g, vals, out, shape):
        return (g.reshape(vals[0].shape),)

    return fwd, vjp


@_register("select", 1, "routing", "scalar element at a flat (row-major) index")
def _select():
    def fwd(x, index):
        if not 0 <= int(index) < x.size:
            raise DomainError(f"select: index {index} out of range for size {x.size}")
        return np.asarray(x.reshape(-1)[int(index)])

    def vjp(g, vals, out, index):
        d = np.zeros(vals[0].size)
        d[int(index)] = g
        return (d.reshape(vals[0].shape),)

    return fwd, vjp


@_register("row", 1, "routing", "x[index] along the first axis")
def _row():
    def fwd(x, index):
        if x.ndim == 0 or not 0 <= int(index) < x.shape[0]:
            raise DomainError(f"row: index {index} out of range for shape {x.shape}")
        return x[int(index)].copy()

    def vjp(g, vals, out, index):
        d = np.zeros_like(vals[0])
        d[int(index)] = g
        return (d,)

    return fwd, vjp


@_register("sum", 1, "linear", "sum of all elements (scalar)")
def _sum():
    def fwd(x):
        return np.asarray(x.sum())

    def vjp(g, vals, out):
        return (np.full(vals[0].shape, float(g)),)

    return fwd, vjp


@_register("embedding", 1, "routing", "rows E[ids] of an embedding table E (V, d)")
def _embedding():
    def fwd(table, ids):
        ids = np.asarray(ids, dtype=np.int64)
        if table.ndim != 2:
            raise ShapeError(f"embedding: table must be 2-D, got {table.shape}")
        if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
            raise DomainError(f"embedding: ids outside [0, {table.shape[0]})")
        return table[ids]

    def vjp(g, vals, out, ids):
        d = np.zeros_like(vals[0])
        np.add.at(d, np.asarray(ids, dtype=np.int64), g)
        return (d,)

    return fwd, vjp


@_register("zeros", 0, "routing", "constant zero tensor of a given shape")
def _zeros():
    def fwd(shape):
        return np.zeros(tuple(shape))

    def vjp(g, vals, out, shape):
        return ()

    return fwd, vjp


COMPOSITES: dict[str, CompositeDef] = {
    "lstm_cell": CompositeDef(
        "lstm_cell",
        ("concat", "dense", "sigmoid", "tanh", "multiply", "add"),
        "one LSTM step: gates from dense layers over [x_t, h], c' = f*c + i*g, h' = o*tanh(c')",
    ),
}


def op_catalog() -> list[OpDef | CompositeDef]:
    """All primitive ops followed by composites built from them."""
    return [*OPS.values(), *COMPOSITES.values()]
