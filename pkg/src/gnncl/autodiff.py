"""Minimal eager reverse-mode automatic differentiation over float64 numpy arrays.

Every op computes its value immediately and records a backward closure, so
callers can read `.value` mid-graph (the training loop plans discrete
structure from intermediate activations) and still call `backward()` on the
final scalar loss. Only the ops needed by this package are provided.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import expit


class Tensor:
    """A node in the computation tape.

    `value` is always a float64 ndarray (0-d for scalars). `grad` is filled
    by `backward()` for nodes that require gradients.
    """

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, value, requires_grad=False, parents=(), backward_fn=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.grad = None
        self._parents = parents
        self._backward_fn = backward_fn

    @property
    def shape(self):
        return self.value.shape

    def __float__(self):
        return float(self.value)

    def backward(self):
        """Accumulate d(self)/d(leaf) into `.grad` of every reachable leaf."""
        if self.value.ndim != 0:
            raise ValueError("backward() is only defined for scalar tensors")
        order = _topo_order(self)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


class Parameter(Tensor):
    """A named trainable leaf tensor with a persistent gradient buffer."""

    __slots__ = ("name",)

    def __init__(self, value, name):
        super().__init__(np.array(value, dtype=np.float64), requires_grad=True)
        self.name = name
        self.zero_grad()

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)


def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def _accum(tensor, grad):
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.zeros_like(tensor.value)
    tensor.grad += grad


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x):
    return Tensor(x)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"add: shape mismatch {a.value.shape} vs {b.value.shape}")

    def backward(g):
        _accum(a, g)
        _accum(b, g)

    return Tensor(a.value + b.value, parents=(a, b), backward_fn=backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"sub: shape mismatch {a.value.shape} vs {b.value.shape}")

    def backward(g):
        _accum(a, g)
        _accum(b, -g)

    return Tensor(a.value - b.value, parents=(a, b), backward_fn=backward)


def mul(a, b):
    """Elementwise product of two same-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"mul: shape mismatch {a.value.shape} vs {b.value.shape}")

    def backward(g):
        _accum(a, g * b.value)
        _accum(b, g * a.value)

    return Tensor(a.value * b.value, parents=(a, b), backward_fn=backward)


def div(a, b):
    """Elementwise quotient of two same-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"div: shape mismatch {a.value.shape} vs {b.value.shape}")
    out_value = a.value / b.value

    def backward(g):
        _accum(a, g / b.value)
        _accum(b, -g * out_value / b.value)

    return Tensor(out_value, parents=(a, b), backward_fn=backward)


def scale(t, s):
    """Multiply by a python float."""
    t = as_tensor(t)
    s = float(s)

    def backward(g):
        _accum(t, g * s)

    return Tensor(t.value * s, parents=(t,), backward_fn=backward)


def add_const(t, c):
    """Add a constant array/scalar broadcastable to t's shape."""
    t = as_tensor(t)
    out_value = t.value + c
    if out_value.shape != t.value.shape:
        raise ValueError("add_const: constant must broadcast to the tensor shape")

    def backward(g):
        _accum(t, g)

    return Tensor(out_value, parents=(t,), backward_fn=backward)


def mul_const(t, c):
    """Multiply by a constant array/scalar broadcastable to t's shape."""
    t = as_tensor(t)
    out_value = t.value * c
    if out_value.shape != t.value.shape:
        raise ValueError("mul_const: constant must broadcast to the tensor shape")

    def backward(g):
        _accum(t, g * c)

    return Tensor(out_value, parents=(t,), backward_fn=backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _accum(a, g @ b.value.T)
        _accum(b, a.value.T @ g)

    return Tensor(a.value @ b.value, parents=(a, b), backward_fn=backward)


def sparse_matmul(mat, t):
    """Left-multiply by a constant scipy sparse matrix: mat @ t."""
    if not sp.issparse(mat):
        raise TypeError("sparse_matmul expects a scipy sparse matrix")
    t = as_tensor(t)
    mat_t = mat.T.tocsr()

    def backward(g):
        _accum(t, mat_t @ g)

    return Tensor(mat @ t.value, parents=(t,), backward_fn=backward)


def relu(t):
    t = as_tensor(t)
    mask = t.value > 0

    def backward(g):
        _accum(t, g * mask)

    return Tensor(np.where(mask, t.value, 0.0), parents=(t,), backward_fn=backward)


def logistic(t):
    t = as_tensor(t)
    out_value = expit(t.value)

    def backward(g):
        _accum(t, g * out_value * (1.0 - out_value))

    return Tensor(out_value, parents=(t,), backward_fn=backward)


def sqrt(t):
    t = as_tensor(t)
    out_value = np.sqrt(t.value)

    def backward(g):
        _accum(t, g * 0.5 / out_value)

    return Tensor(out_value, parents=(t,), backward_fn=backward)


def gather_rows(t, idx):
    t = as_tensor(t)
    idx = np.asarray(idx, dtype=np.int64)

    def backward(g):
        if t.requires_grad:
            buf = np.zeros_like(t.value)
            np.add.at(buf, idx, g)
            _accum(t, buf)

    return Tensor(t.value[idx], parents=(t,), backward_fn=backward)


def vstack(a, b):
    a, b = as_tensor(a), as_tensor(b)
    na = a.value.shape[0]

    def backward(g):
        _accum(a, g[:na])
        _accum(b, g[na:])

    return Tensor(np.vstack([a.value, b.value]), parents=(a, b), backward_fn=backward)


def hstack(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ca = a.value.shape[1]

    def backward(g):
        _accum(a, g[:, :ca])
        _accum(b, g[:, ca:])

    return Tensor(np.hstack([a.value, b.value]), parents=(a, b), backward_fn=backward)


def row_sum(t):
    """Sum a 2-d tensor over columns, yielding shape (n,)."""
    t = as_tensor(t)

    def backward(g):
        _accum(t, np.repeat(g[:, None], t.value.shape[1], axis=1))

    return Tensor(t.value.sum(axis=1), parents=(t,), backward_fn=backward)


def sum_all(t):
    t = as_tensor(t)

    def backward(g):
        _accum(t, np.full_like(t.value, float(g)))

    return Tensor(t.value.sum(), parents=(t,), backward_fn=backward)


def dot_rows(a, b):
    """Per-row dot product of two (n, d) tensors, yielding shape (n,)."""
    return row_sum(mul(a, b))


def row_norm(t):
    """Per-row Euclidean norm of a (n, d) tensor."""
    return sqrt(row_sum(mul(t, t)))


def cross_entropy_logits(logits, labels, weights=None):
    """Weighted negative log-likelihood summed over rows, from raw logits.

    Numerically stable fused log-softmax + NLL. `labels` indexes the true
    column per row; `weights` (optional) scales each row's contribution.
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.value.shape[0]
    if labels.shape != (n,):
        raise ValueError("cross_entropy_logits: labels must have one entry per row")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)

    shifted = logits.value - logits.value.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted - log_z[:, None]
    value = -(w * log_p[np.arange(n), labels]).sum()

    def backward(g):
        if logits.requires_grad:
            p = np.exp(log_p)
            p[np.arange(n), labels] -= 1.0
            _accum(logits, float(g) * w[:, None] * p)

    return Tensor(value, parents=(logits,), backward_fn=backward)
