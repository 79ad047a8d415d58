"""Reverse-mode automatic differentiation over float64 numpy arrays.

A small tape-based engine: every operation records its parents and a
vector-Jacobian closure. Graphs are built only through nodes that require
gradients, so inference on plain constants carries no tape overhead.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "as_tensor", "concat", "gradient"]


def _unbroadcast(grad, shape):
    """Sum a broadcasted gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A float64 array plus optional gradient tape bookkeeping."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_vjp")

    # Make numpy defer binary ufuncs to our reflected operators.
    __array_ufunc__ = None

    def __init__(self, value, requires_grad=False, _parents=(), _vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._vjp = _vjp

    # ---- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def item(self):
        return float(self.value)

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        return f"Tensor({self.value!r}, requires_grad={self.requires_grad})"

    # ---- graph construction --------------------------------------------

    @staticmethod
    def _make(value, parents, vjp):
        if any(p.requires_grad for p in parents):
            return Tensor(value, requires_grad=True, _parents=parents, _vjp=vjp)
        return Tensor(value)

    # ---- arithmetic ------------------------------------------------------

    def __add__(self, other):
        a, b = self, as_tensor(other)
        out = a.value + b.value

        def vjp(g):
            return (_unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape))

        return Tensor._make(out, (a, b), vjp)

    __radd__ = __add__

    def __mul__(self, other):
        a, b = self, as_tensor(other)
        out = a.value * b.value

        def vjp(g):
            return (
                _unbroadcast(g * b.value, a.value.shape),
                _unbroadcast(g * a.value, b.value.shape),
            )

        return Tensor._make(out, (a, b), vjp)

    __rmul__ = __mul__

    def __sub__(self, other):
        a, b = self, as_tensor(other)
        out = a.value - b.value

        def vjp(g):
            return (_unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape))

        return Tensor._make(out, (a, b), vjp)

    def __rsub__(self, other):
        return as_tensor(other).__sub__(self)

    def __neg__(self):
        a = self
        return Tensor._make(-a.value, (a,), lambda g: (-g,))

    def __truediv__(self, other):
        a, b = self, as_tensor(other)
        out = a.value / b.value

        def vjp(g):
            return (
                _unbroadcast(g / b.value, a.value.shape),
                _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape),
            )

        return Tensor._make(out, (a, b), vjp)

    def __rtruediv__(self, other):
        return as_tensor(other).__truediv__(self)

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("only scalar exponents are supported")
        a = self
        out = a.value**p

        def vjp(g):
            return (g * p * a.value ** (p - 1),)

        return Tensor._make(out, (a,), vjp)

    def __matmul__(self, other):
        a, b = self, as_tensor(other)
        av, bv = a.value, b.value
        if av.ndim == 0 or bv.ndim == 0 or av.ndim > 2 or bv.ndim > 2:
            raise ValueError(f"matmul expects 1-D/2-D operands, got {av.shape} @ {bv.shape}")
        out = av @ bv

        def vjp(g):
            if av.ndim == 2 and bv.ndim == 2:
                return (g @ bv.T, av.T @ g)
            if av.ndim == 2 and bv.ndim == 1:
                # (m,n) @ (n,) -> (m,)
                return (np.outer(g, bv), av.T @ g)
            if av.ndim == 1 and bv.ndim == 2:
                # (m,) @ (m,n) -> (n,)
                return (bv @ g, np.outer(av, g))
            # (n,) @ (n,) -> scalar
            return (g * bv, g * av)

        return Tensor._make(out, (a, b), vjp)

    def __rmatmul__(self, other):
        return as_tensor(other).__matmul__(self)

    # ---- elementwise functions -------------------------------------------

    def exp(self):
        a = self
        out = np.exp(a.value)
        return Tensor._make(out, (a,), lambda g: (g * out,))

    def log(self):
        a = self
        return Tensor._make(np.log(a.value), (a,), lambda g: (g / a.value,))

    def tanh(self):
        a = self
        out = np.tanh(a.value)
        return Tensor._make(out, (a,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self):
        a = self
        v = a.value
        out = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))

        def vjp(g):
            return (g * out * (1.0 - out),)

        return Tensor._make(out, (a,), vjp)

    def relu(self):
        a = self
        out = np.maximum(a.value, 0.0)
        return Tensor._make(out, (a,), lambda g: (g * (a.value > 0),))

    def clip(self, lo, hi):
        a = self
        out = np.clip(a.value, lo, hi)
        mask = (a.value >= lo) & (a.value <= hi)
        return Tensor._make(out, (a,), lambda g: (g * mask,))

    def logaddexp(self, other):
        a, b = self, as_tensor(other)
        out = np.logaddexp(a.value, b.value)

        def vjp(g):
            return (
                _unbroadcast(g * np.exp(a.value - out), a.value.shape),
                _unbroadcast(g * np.exp(b.value - out), b.value.shape),
            )

        return Tensor._make(out, (a, b), vjp)

    # ---- reductions / shape ----------------------------------------------

    def sum(self, axis=None):
        a = self
        out = a.value.sum(axis=axis)

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g, a.value.shape).copy(),)
            g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, a.value.shape).copy(),)

        return Tensor._make(out, (a,), vjp)

    def mean(self, axis=None):
        a = self
        out = a.value.mean(axis=axis)
        n = a.value.size if axis is None else a.value.shape[axis]

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g / n, a.value.shape).copy(),)
            g = np.expand_dims(g, axis)
            return (np.broadcast_to(g / n, a.value.shape).copy(),)

        return Tensor._make(out, (a,), vjp)

    def reshape(self, *shape):
        a = self
        out = a.value.reshape(*shape)
        return Tensor._make(out, (a,), lambda g: (g.reshape(a.value.shape),))

    def transpose(self):
        a = self
        if a.value.ndim != 2:
            raise ValueError("transpose() supports 2-D tensors only")
        return Tensor._make(a.value.T.copy(), (a,), lambda g: (g.T,))

    def __getitem__(self, idx):
        a = self
        out = a.value[idx]

        def vjp(g):
            full = np.zeros_like(a.value)
            np.add.at(full, idx, g)
            return (full,)

        return Tensor._make(out, (a,), vjp)

    # ---- backward pass -----------------------------------------------------

    def backward(self):
        """Accumulate gradients of this scalar into every reachable tensor."""
        if self.value.ndim != 0:
            raise ValueError("backward() requires a scalar output")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(topo):
            if node._vjp is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._vjp(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def concat(parts, axis=-1):
    """Concatenate tensors along `axis`, differentiable through every part."""
    parts = [as_tensor(p) for p in parts]
    out = np.concatenate([p.value for p in parts], axis=axis)
    sizes = [p.value.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._make(out, tuple(parts), vjp)


def value_and_gradient(fn, params, *inputs):
    """Loss value plus exact reverse-mode gradients of a scalar computation.

    `fn` receives a dict name -> Tensor (leaves built from `params`) plus
    `inputs` unchanged, and must return a scalar Tensor built from the
    registered primitives. Returns (float loss, dict name -> gradient array).
    """
    leaves = {k: Tensor(np.asarray(v, dtype=np.float64), requires_grad=True) for k, v in params.items()}
    loss = fn(leaves, *inputs)
    if not isinstance(loss, Tensor):
        raise TypeError("computation must return a Tensor")
    if loss.value.ndim != 0:
        raise ValueError(f"loss must be scalar, got shape {loss.value.shape}")
    if not np.isfinite(loss.value):
        raise FloatingPointError(f"non-finite loss in forward pass: {loss.value}")
    loss.backward()
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.value)) for k, t in leaves.items()}
    return float(loss.value), grads


def gradient(fn, params, *inputs):
    """Exact reverse-mode gradients of a scalar-valued computation."""
    return value_and_gradient(fn, params, *inputs)[1]
