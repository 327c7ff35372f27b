"""Reverse-mode automatic differentiation over numpy arrays.

Every primitive records its backward rule as a composition of engine ops,
so backward passes themselves build differentiable graphs.  That makes
second-order quantities (gradients of a gradient norm with respect to the
parameters that produced it) come out of the same machinery: call
``grad(..., create_graph=True)`` and differentiate the result again.
"""
from __future__ import annotations

from contextlib import nullcontext

import numpy as np

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph recording."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    """An ndarray plus the graph edges needed to backpropagate through it."""

    __slots__ = ("data", "requires_grad", "_parents", "_vjps")

    # keep numpy from absorbing Tensor operands into object arrays;
    # mixed ndarray/Tensor arithmetic must hit the reflected operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, _parents=(), _vjps=()):
        if isinstance(data, Tensor):
            data = data.data
        if not isinstance(data, np.ndarray):
            # numpy scalars keep their dtype; bare python numbers default
            # to float64 so int literals never produce integer tensors
            if isinstance(data, np.generic):
                data = np.asarray(data)
            else:
                data = np.asarray(data, dtype=np.float64)
        self.data = data
        self.requires_grad = requires_grad
        self._parents = _parents
        self._vjps = _vjps

    # -- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- operators -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -np.asarray(other))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __pow__(self, k):
        return power(self, k)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(as_tensor(other), self)

    def __getitem__(self, key):
        return getitem(self, key)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _as_tensor_like(x, ref: Tensor) -> Tensor:
    """Lift `x`, casting bare python scalars to `ref`'s dtype (no upcasting)."""
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float)):
        return Tensor(np.asarray(x, dtype=ref.data.dtype))
    return Tensor(x)


def tensor(data, requires_grad=False, dtype=np.float64) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=requires_grad)


def zeros_like(t: Tensor) -> Tensor:
    return Tensor(np.zeros_like(t.data))


def _make(data: np.ndarray, parents, vjps) -> Tensor:
    """Wrap an op result, recording edges only when a parent needs them."""
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _vjps=tuple(vjps))
    return Tensor(data)


def _unbroadcast(g: Tensor, shape: tuple) -> Tensor:
    """Reduce a broadcast gradient back to `shape` (sum over expanded axes)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = sum_(g, axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ts) in enumerate(zip(g.shape, shape)) if ts == 1 and gs != 1)
    if axes:
        g = sum_(g, axis=axes, keepdims=True)
    if g.shape != shape:
        g = reshape(g, shape)
    return g


# -- primitives ---------------------------------------------------------

def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = _as_tensor_like(b, a)
    return _make(
        a.data + b.data,
        (a, b),
        (lambda g: _unbroadcast(g, a.shape), lambda g: _unbroadcast(g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = _as_tensor_like(b, a)
    return _make(
        a.data * b.data,
        (a, b),
        (lambda g: _unbroadcast(mul(g, b), a.shape), lambda g: _unbroadcast(mul(g, a), b.shape)),
    )


def div(a, b) -> Tensor:
    a = as_tensor(a)
    b = _as_tensor_like(b, a)
    return _make(
        a.data / b.data,
        (a, b),
        (
            lambda g: _unbroadcast(div(g, b), a.shape),
            lambda g: _unbroadcast(mul(div(mul(g, a), mul(b, b)), -1.0), b.shape),
        ),
    )


def power(a, k) -> Tensor:
    a = as_tensor(a)
    k = float(k)
    return _make(
        a.data**k,
        (a,),
        (lambda g: mul(mul(g, k), power(a, k - 1.0)),),
    )


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-d operands, got {a.shape} @ {b.shape}")
    return _make(
        a.data @ b.data,
        (a, b),
        (lambda g: matmul(g, transpose(b)), lambda g: matmul(transpose(a), g)),
    )


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.T, (a,), (lambda g: transpose(g),))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return _make(a.data.reshape(shape), (a,), (lambda g: reshape(g, old),))


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return _make(
        np.broadcast_to(a.data, shape).copy(),
        (a,),
        (lambda g: _unbroadcast(g, old),),
    )


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    in_shape = a.shape

    if axis is None:
        axes = tuple(range(a.ndim))
    elif isinstance(axis, int):
        axes = (axis % a.ndim,)
    else:
        axes = tuple(ax % a.ndim for ax in axis)
    kept = tuple(1 if i in axes else s for i, s in enumerate(in_shape))

    def back(g):
        return broadcast_to(reshape(g, kept), in_shape)

    return _make(a.data.sum(axis=axes if axis is not None else None, keepdims=keepdims), (a,), (back,))


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        n = a.size
    elif isinstance(axis, int):
        n = a.shape[axis]
    else:
        n = int(np.prod([a.shape[ax] for ax in axis]))
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)
    out = _make(out_data, (a,), ())
    if out.requires_grad:
        out._vjps = (lambda g: mul(g, out),)
    return out


def log(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.log(a.data), (a,), (lambda g: div(g, a),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = _make(np.tanh(a.data), (a,), ())
    if out.requires_grad:
        out._vjps = (lambda g: mul(g, 1.0 - mul(out, out)),)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = _make(out_data, (a,), ())
    if out.requires_grad:
        out._vjps = (lambda g: mul(g, mul(out, 1.0 - out)),)
    return out


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = (a.data > 0).astype(a.data.dtype)
    return _make(a.data * mask, (a,), (lambda g: mul(g, mask),))


def clip(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    mask = ((a.data > lo) & (a.data < hi)).astype(a.data.dtype)
    return _make(np.clip(a.data, lo, hi), (a,), (lambda g: mul(g, mask),))


def getitem(a, key) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    return _make(a.data[key], (a,), (lambda g: scatter(g, key, shape),))


def scatter(g, key, shape) -> Tensor:
    """Adjoint of basic indexing: place `g` into zeros of `shape` at `key`."""
    g = as_tensor(g)
    z = np.zeros(shape, dtype=g.data.dtype)
    z[key] = g.data
    return _make(z, (g,), (lambda gg: getitem(gg, key),))


def stack(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def back_i(i):
        key = (slice(None),) * axis + (i,)
        return lambda g: getitem(g, key)

    return _make(data, tuple(tensors), tuple(back_i(i) for i in range(len(tensors))))


def softmax(a, axis=-1) -> Tensor:
    # Shifting by a detached max leaves both value and gradient exact.
    a = as_tensor(a)
    shift = np.max(a.data, axis=axis, keepdims=True)
    e = exp(add(a, -shift))
    return div(e, sum_(e, axis=axis, keepdims=True))


# -- backward driver -----------------------------------------------------

def grad(output: Tensor, inputs, create_graph: bool = False):
    """Gradients of a scalar `output` with respect to each tensor in `inputs`.

    With ``create_graph=True`` the returned tensors carry graph edges and can
    be differentiated again (reverse-over-reverse).
    """
    if output.size != 1:
        raise ValueError(f"grad expects a scalar output, got shape {output.shape}")
    inputs = list(inputs)

    # Iterative topological order over the requires_grad subgraph.
    topo: list[Tensor] = []
    state: dict[int, int] = {}  # 0 = discovered, 1 = finished
    stack = [output]
    while stack:
        node = stack[-1]
        nid = id(node)
        if state.get(nid) == 0:
            state[nid] = 1
            topo.append(node)
            stack.pop()
            continue
        if nid in state:
            stack.pop()
            continue
        state[nid] = 0
        for p in node._parents:
            if p.requires_grad and id(p) not in state:
                stack.append(p)

    input_ids = {id(i) for i in inputs}
    grads: dict[int, Tensor] = {id(output): Tensor(np.ones_like(output.data))}
    ctx = nullcontext() if create_graph else no_grad()
    with ctx:
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            for p, vjp in zip(node._parents, node._vjps):
                if not p.requires_grad:
                    continue
                contrib = vjp(g)
                pid = id(p)
                if pid in grads:
                    grads[pid] = add(grads[pid], contrib)
                else:
                    grads[pid] = contrib
            if id(node) in input_ids:
                grads[id(node)] = g  # keep for the caller

    return [grads[id(i)] if id(i) in grads else zeros_like(i) for i in inputs]
