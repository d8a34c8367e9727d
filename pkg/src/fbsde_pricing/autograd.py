"""Tape-based reverse-mode differentiation over numpy arrays.

Supported primitives: add, subtract, multiply, divide, negate, matmul
(batched), tanh, relu, square, sum, mean, slicing, reshape and ``where``
with a constant mask (a max/branch selection whose branch is fixed).
Anything else applied to a :class:`Tensor` raises ``UnsupportedPrimitive``.
"""

from __future__ import annotations

import numpy as np

from .errors import UnsupportedPrimitive


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    ndim_extra = grad.ndim - len(shape)
    if ndim_extra:
        grad = grad.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _data(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Tensor:
    """Array node in a recorded computation.

    ``backward_fn`` maps the output gradient to a tuple of parent gradients
    (``None`` for parents that do not need one).
    """

    __slots__ = ("data", "parents", "backward_fn", "requires_grad", "op")
    __array_priority__ = 100

    def __init__(self, data, parents=(), backward_fn=None, requires_grad=False, op="leaf"):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=float)
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.op = op

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def _make(self, data, parents, backward_fn, op):
        if not any(p.requires_grad for p in parents):
            return Tensor(data, op=op)
        return Tensor(data, parents, backward_fn, op=op)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = _lift(other)
        a, b = self, other
        return self._make(a.data + b.data, (a, b),
                          lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")

    __radd__ = __add__

    def __sub__(self, other):
        other = _lift(other)
        a, b = self, other
        return self._make(a.data - b.data, (a, b),
                          lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")

    def __rsub__(self, other):
        return _lift(other) - self

    def __neg__(self):
        return self._make(-self.data, (self,), lambda g: (-g,), "neg")

    def __mul__(self, other):
        other = _lift(other)
        a, b = self, other
        return self._make(
            a.data * b.data, (a, b),
            lambda g: (_unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
                       _unbroadcast(g * a.data, b.shape) if b.requires_grad else None),
            "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _lift(other)
        a, b = self, other
        out = a.data / b.data
        return self._make(
            out, (a, b),
            lambda g: (_unbroadcast(g / b.data, a.shape) if a.requires_grad else None,
                       _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None),
            "div")

    def __rtruediv__(self, other):
        return _lift(other) / self

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        a = self

        def back(g):
            full = np.zeros(a.shape, dtype=g.dtype)
            full[key] = g
            return (full,)

        return self._make(self.data[key], (a,), back, "getitem")

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method == "__call__" and not kwargs:
            op = _UFUNCS.get(ufunc)
            if op is not None:
                return op(*inputs)
        raise UnsupportedPrimitive(f"{ufunc.__name__}.{method} is not a supported primitive")

    # -- reductions and shape ----------------------------------------------
    def sum(self, axis=None):
        a = self

        def back(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, a.shape),)

        return self._make(self.data.sum(axis=axis), (a,), back, "sum")

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis) * (1.0 / n)

    def reshape(self, *shape):
        a = self
        return self._make(self.data.reshape(*shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")

    def square(self):
        a = self
        return self._make(self.data * self.data, (a,), lambda g: (2.0 * g * a.data,), "square")

    def tanh(self):
        out = np.tanh(self.data)
        return self._make(out, (self,), lambda g: (g * (1.0 - out * out),), "tanh")

    def relu(self):
        mask = self.data > 0
        return self._make(np.where(mask, self.data, 0), (self,), lambda g: (g * mask,), "relu")


def matmul(a, b):
    a, b = _lift(a), _lift(b)
    va = a.data[None, :] if a.ndim == 1 else a.data
    vb = b.data[:, None] if b.ndim == 1 else b.data
    out = va @ vb

    def back(g):
        gg = g
        if a.ndim == 1:
            gg = np.expand_dims(gg, -2)
        if b.ndim == 1:
            gg = np.expand_dims(gg, -1)
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(gg @ np.swapaxes(vb, -1, -2), va.shape).reshape(a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.swapaxes(va, -1, -2) @ gg, vb.shape).reshape(b.shape)
        return ga, gb

    if a.ndim == 1:
        out = out[..., 0, :]
    if b.ndim == 1:
        out = out[..., 0]
    return a._make(out, (a, b), back, "matmul")


def _outer_or_matmul(a, b):
    # a (S, m, 1) @ b (S, 1, n) is an outer product; broadcasting is faster
    if a.shape[-1] == 1:
        return a * b
    return np.matmul(a, b)


def dense(x, w, b, activation=None):
    """Fused feature-major layer ``activation(w @ x + b)``.

    Shapes: ``x`` (S, in, M), ``w`` (S, out, in), ``b`` (S, out, 1). The
    activation is applied in place; the backward pass only needs the output.
    """
    x, w, b = _lift(x), _lift(w), _lift(b)
    out = _outer_or_matmul(w.data, x.data)
    out += b.data
    if activation == "tanh":
        np.tanh(out, out=out)
    elif activation == "relu":
        np.maximum(out, 0, out=out)
    elif activation is not None:
        raise UnsupportedPrimitive(f"activation {activation!r}")

    def back(g):
        if activation == "tanh":
            d = np.multiply(out, out)
            np.subtract(1.0, d, out=d)
            d *= g
            g = d
        elif activation == "relu":
            g = g * (out > 0)
        gx = gw = gb = None
        if x.requires_grad:
            gx = _unbroadcast(_outer_or_matmul(np.swapaxes(w.data, -1, -2), g), x.shape)
        if w.requires_grad:
            gw = _unbroadcast(np.matmul(g, np.swapaxes(x.data, -1, -2)), w.shape)
        if b.requires_grad:
            ones = np.ones(g.shape[:-2] + (g.shape[-1], 1), dtype=g.dtype)
            gb = _unbroadcast(np.matmul(g, ones), b.shape)
        return gx, gw, gb

    return x._make(out, (x, w, b), back, "dense")


def where(mask, if_true, if_false):
    """Branch selection with a constant mask; gradient flows to the chosen branch."""
    mask = np.asarray(_data(mask), dtype=bool)
    t, f = _lift(if_true), _lift(if_false)
    return t._make(
        np.where(mask, t.data, f.data), (t, f),
        lambda g: (_unbroadcast(np.where(mask, g, 0), t.shape) if t.requires_grad else None,
                   _unbroadcast(np.where(mask, 0, g), f.shape) if f.requires_grad else None),
        "where")


def tanh(x):
    return _lift(x).tanh()


def relu(x):
    return _lift(x).relu()


def square(x):
    return _lift(x).square()


def mean(x, axis=None):
    return _lift(x).mean(axis)


_UFUNCS = {
    np.add: lambda a, b: _lift(a) + b,
    np.subtract: lambda a, b: _lift(a) - b,
    np.multiply: lambda a, b: _lift(a) * b,
    np.true_divide: lambda a, b: _lift(a) / b,
    np.negative: lambda a: -_lift(a),
    np.matmul: matmul,
    np.tanh: tanh,
    np.square: square,
}


def parameter(array):
    return Tensor(np.asarray(array), requires_grad=True)


def compute_gradients(loss, params):
    """Reverse-mode gradients of scalar ``loss`` with respect to ``params``.

    Returns arrays in the order of ``params``; a parameter the loss does not
    depend on gets zeros. Gradients are cast to each node's dtype.
    """
    if loss.data.size != 1:
        raise ValueError("loss must be a scalar")
    order, seen = [], set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None) if node.parents else grads.get(id(node))
        if g is None or node.backward_fn is None:
            continue
        for p, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not p.requires_grad:
                continue
            pg = np.asarray(pg, dtype=p.data.dtype)
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg
    return [grads.get(id(p), np.zeros_like(p.data)) for p in params]
