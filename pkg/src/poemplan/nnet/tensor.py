"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every operation records its inputs and a backward closure on the output
tensor; ``Tensor.backward`` walks the recorded graph once in reverse
topological order and accumulates gradients directly into ``.grad`` buffers.
float64 throughout unless the caller opts into float32 leaves.
"""

from __future__ import annotations

import numpy as np

# Probabilities below this are treated as numerically failed and clamped.
LOG_CLAMP = 1e-30


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64) if not isinstance(data, np.ndarray) else data
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable tensor's .grad."""
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
                if id(p) not in seen:
                    stack.append((p, False))
        self._accum(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar over the functional ops below --
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other), -1.0))

    def __rsub__(self, other):
        # scalar - tensor
        return add(scale(self, -1.0), other)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum g over the axes that were broadcast to reach its shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data, (a, b))

    def backward(g):
        a._accum(_unbroadcast(g, a.data.shape))
        b._accum(_unbroadcast(g, b.data.shape))

    out._backward = backward
    return out


def mul(a, b) -> Tensor:
    """Elementwise product; either side may be a python scalar."""
    if not isinstance(b, Tensor) and np.isscalar(b):
        return scale(_as_tensor(a), float(b))
    if not isinstance(a, Tensor) and np.isscalar(a):
        return scale(_as_tensor(b), float(a))
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data, (a, b))

    def backward(g):
        a._accum(_unbroadcast(g * b.data, a.data.shape))
        b._accum(_unbroadcast(g * a.data, b.data.shape))

    out._backward = backward
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s, (a,))

    def backward(g):
        a._accum(g * s)

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product for operands of rank 1 or 2 (numpy semantics)."""
    out = Tensor(a.data @ b.data, (a, b))
    an, bn = a.data.ndim, b.data.ndim

    def backward(g):
        if an == 2 and bn == 2:
            a._accum(g @ b.data.T)
            b._accum(a.data.T @ g)
        elif an == 2 and bn == 1:
            a._accum(np.outer(g, b.data))
            b._accum(a.data.T @ g)
        elif an == 1 and bn == 2:
            a._accum(b.data @ g)
            b._accum(np.outer(a.data, g))
        else:  # 1-D dot
            a._accum(g * b.data)
            b._accum(g * a.data)

    out._backward = backward
    return out


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T, (a,))

    def backward(g):
        a._accum(g.T)

    out._backward = backward
    return out


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # split by sign so exp never overflows
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(y, (a,))

    def backward(g):
        a._accum(g * y * (1.0 - y))

    out._backward = backward
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, (a,))

    def backward(g):
        a._accum(g * (1.0 - y * y))

    out._backward = backward
    return out


def softmax(a: Tensor) -> Tensor:
    """Stable softmax over a 1-D tensor (max-subtracted)."""
    z = a.data - a.data.max()
    e = np.exp(z)
    y = e / e.sum()
    out = Tensor(y, (a,))

    def backward(g):
        a._accum(y * (g - float(np.dot(g, y))))

    out._backward = backward
    return out


def log(a: Tensor) -> Tensor:
    """Natural log with inputs clamped at LOG_CLAMP; clamped entries get zero grad."""
    clamped = np.maximum(a.data, LOG_CLAMP)
    out = Tensor(np.log(clamped), (a,))

    def backward(g):
        a._accum(np.where(a.data > LOG_CLAMP, g / clamped, 0.0))

    out._backward = backward
    return out


def concat(parts: list[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts]), tuple(parts))
    sizes = [p.data.shape[0] for p in parts]

    def backward(g):
        off = 0
        for p, n in zip(parts, sizes):
            p._accum(g[off:off + n])
            off += n

    out._backward = backward
    return out


def stack(parts: list[Tensor]) -> Tensor:
    """Stack 1-D tensors into a (len, dim) matrix."""
    out = Tensor(np.stack([p.data for p in parts]), tuple(parts))

    def backward(g):
        for i, p in enumerate(parts):
            p._accum(g[i])

    out._backward = backward
    return out


def row(matrix: Tensor, index: int) -> Tensor:
    """Select one row (embedding lookup); grad scatters back into that row."""
    out = Tensor(matrix.data[index], (matrix,))

    def backward(g):
        if matrix.grad is None:
            matrix.grad = np.zeros_like(matrix.data)
        matrix.grad[index] += g

    out._backward = backward
    return out


def pick(vector: Tensor, index: int) -> Tensor:
    """Scalar element of a 1-D tensor."""
    out = Tensor(np.asarray(vector.data[index]), (vector,))

    def backward(g):
        if vector.grad is None:
            vector.grad = np.zeros_like(vector.data)
        vector.grad[index] += g

    out._backward = backward
    return out


def total(a: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    out = Tensor(np.asarray(a.data.sum()), (a,))

    def backward(g):
        a._accum(np.broadcast_to(g, a.data.shape).copy())

    out._backward = backward
    return out
