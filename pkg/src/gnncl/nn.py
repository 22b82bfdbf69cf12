"""Differentiable kernel: message-passing layers, losses, Adam, gradient checks.

Layers run on the autodiff tape (see `autodiff`), take a pre-normalized
sparse operator plus a dense activation matrix, and support two kinds:

* ``gcn``       - sigma(A_norm @ H @ W) with A_norm = D^-1/2 (A + I) D^-1/2,
* ``sage-mean`` - sigma([H || mean_neighbor(H)] @ W).

Everything is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Parameter, Tensor

LAYER_KINDS = ("gcn", "sage-mean")
ACTIVATIONS = ("relu", "identity")


class DivergenceError(RuntimeError):
    """A non-finite loss or gradient was encountered; the step was aborted."""


class NondeterministicLossError(RuntimeError):
    """A loss closure returned different values on identical evaluations."""


@dataclass(frozen=True)
class LayerConfig:
    kind: str
    in_dim: int
    out_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be >= 1")

    @property
    def weight_shape(self):
        rows = self.in_dim * (2 if self.kind == "sage-mean" else 1)
        return (rows, self.out_dim)


def glorot_uniform(rng, shape):
    limit = math.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# adjacency normalization
# ---------------------------------------------------------------------------

def gcn_normalized_adjacency(adj):
    """Symmetric D^-1/2 (A + I) D^-1/2 with self-loops, from a 0/1 CSR matrix."""
    n = adj.shape[0]
    a_hat = (adj + sp.identity(n, format="csr")).tocsr()
    deg = np.asarray(a_hat.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    d = sp.diags(inv_sqrt)
    return (d @ a_hat @ d).tocsr()


def mean_neighbor_matrix(adj):
    """Row-stochastic D^-1 A (zero rows for isolated nodes), from a 0/1 CSR matrix."""
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.where(deg > 0, 1.0 / np.where(deg > 0, deg, 1), 0.0)
    return (sp.diags(inv) @ adj).tocsr()


def normalized_operator(kind, adj):
    if kind == "gcn":
        return gcn_normalized_adjacency(adj)
    return mean_neighbor_matrix(adj)


# ---------------------------------------------------------------------------
# forward ops
# ---------------------------------------------------------------------------

def gnn_forward(config, weight, operator, H):
    """One message-passing layer on the tape.

    `operator` is the normalized sparse matrix matching `config.kind`
    (symmetric normalized adjacency for gcn, row-mean for sage-mean);
    `H` is an (N, in_dim) tensor or array.
    """
    H = ad.as_tensor(H)
    if not np.all(np.isfinite(H.value)):
        raise ValueError("gnn_forward: non-finite input")
    if H.value.shape[1] != config.in_dim:
        raise ValueError(f"gnn_forward: expected in_dim {config.in_dim}, "
                         f"got {H.value.shape[1]}")
    if weight.value.shape != config.weight_shape:
        raise ValueError(f"gnn_forward: weight shape {weight.value.shape} != "
                         f"{config.weight_shape}")
    if config.kind == "gcn":
        out = ad.sparse_matmul(operator, ad.matmul(H, weight))
    else:
        agg = ad.sparse_matmul(operator, H)
        out = ad.matmul(ad.hstack(H, agg), weight)
    if config.activation == "relu":
        out = ad.relu(out)
    return out


class GNNLayer:
    """LayerConfig + its weight parameter, initialized Glorot-uniform."""

    def __init__(self, config, rng, name):
        self.config = config
        self.weight = Parameter(glorot_uniform(rng, config.weight_shape), name)

    def forward(self, operator, H):
        return gnn_forward(self.config, self.weight, operator, H)


def softmax(logits):
    """Row-stable softmax of a plain array."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_linear(H, W):
    """Linear head + row softmax, returning the probability matrix as values."""
    H_val = H.value if isinstance(H, Tensor) else np.asarray(H, dtype=np.float64)
    W_val = W.value if isinstance(W, Tensor) else np.asarray(W, dtype=np.float64)
    if not (np.all(np.isfinite(H_val)) and np.all(np.isfinite(W_val))):
        raise ValueError("softmax_linear: non-finite input")
    return softmax(H_val @ W_val)


def cross_entropy(P, labels, node_set, weights=None):
    """Summed negative log-likelihood -sum_{v in node_set} w_v log P[v, y_v].

    `weights` optionally maps each class to a loss weight (reweighting
    baseline). Returns a float; the mean is this divided by len(node_set).
    """
    node_set = np.asarray(node_set, dtype=np.int64)
    if len(node_set) == 0:
        raise ValueError("cross_entropy: empty node set")
    P = np.asarray(P, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    picked = P[node_set, labels[node_set]]
    logp = np.log(picked)
    if weights is not None:
        logp = logp * np.asarray(weights)[labels[node_set]]
    return float(-logp.sum())


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Adam with decoupled weight decay; defaults follow the training recipe."""

    learning_rate: float = 0.001
    weight_decay: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state):
    """One Adam update over `params` (list of Parameter) in place.

    Aborts (raising DivergenceError) before touching any parameter if a
    gradient is non-finite.
    """
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise DivergenceError(f"non-finite gradient in parameter {p.name!r}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p in params:
        m = state.m.setdefault(p.name, np.zeros_like(p.value))
        v = state.v.setdefault(p.name, np.zeros_like(p.value))
        m *= state.beta1
        m += (1.0 - state.beta1) * p.grad
        v *= state.beta2
        v += (1.0 - state.beta2) * p.grad ** 2
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p.value -= state.learning_rate * update
        if state.weight_decay:
            p.value -= state.learning_rate * state.weight_decay * p.value
    return params


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------

def finite_difference_check(loss_closure, params, step=1e-5, max_coords_per_param=50,
                            rng=None):
    """Max relative error between analytic and central-difference gradients.

    `loss_closure()` must rebuild the loss tape from the current parameter
    values with all stochastic choices frozen; it is evaluated twice up front
    and must return bitwise-identical values, else
    NondeterministicLossError is raised. Coordinates are subsampled per
    parameter when the parameter is large.
    """
    rng = rng or np.random.default_rng(0)
    first = float(loss_closure())
    second = float(loss_closure())
    if first != second:
        raise NondeterministicLossError(
            f"loss closure not deterministic: {first!r} != {second!r}")

    for p in params:
        p.zero_grad()
    loss = loss_closure()
    loss.backward()
    analytic = {p.name: p.grad.copy() for p in params}

    worst = 0.0
    for p in params:
        flat = p.value.ravel()
        n = flat.size
        if n <= max_coords_per_param:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max_coords_per_param, replace=False)
        for c in coords:
            original = flat[c]
            flat[c] = original + step
            f_plus = float(loss_closure())
            flat[c] = original - step
            f_minus = float(loss_closure())
            flat[c] = original
            fd = (f_plus - f_minus) / (2.0 * step)
            an = analytic[p.name].ravel()[c]
            rel = abs(fd - an) / max(abs(fd), abs(an), 1e-6)
            worst = max(worst, rel)
    return worst
