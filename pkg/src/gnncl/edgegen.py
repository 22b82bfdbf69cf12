"""Learned edge generator.

Scores a candidate pair (i, j) with the bilinear smoothness form
raw = act((W1 h_i) . (W1 h_i - W2 h_j)) and converts it to a link
probability with a logistic. Training reconstructs the observed adjacency
plus a same-class (homophily) target on labeled pairs; augmentation adds
every candidate edge whose probability clears a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .autodiff import Parameter
from .nn import glorot_uniform

SCORE_ACTIVATIONS = ("identity", "relu", "relu-projections")


@dataclass
class EdgeGenerator:
    """Two square projection weights plus the score activation placement."""

    W1: Parameter
    W2: Parameter
    activation: str = "identity"

    def __post_init__(self):
        h = self.W1.value.shape[0]
        if self.W1.value.shape != (h, h) or self.W2.value.shape != (h, h):
            raise ValueError("edge generator weights must be square and equal-sized")
        if self.activation not in SCORE_ACTIVATIONS:
            raise ValueError(f"unknown score activation {self.activation!r}")

    @classmethod
    def create(cls, hidden_dim, rng, activation="identity"):
        return cls(W1=Parameter(glorot_uniform(rng, (hidden_dim, hidden_dim)), "edge_w1"),
                   W2=Parameter(glorot_uniform(rng, (hidden_dim, hidden_dim)), "edge_w2"),
                   activation=activation)

    def parameters(self):
        return [self.W1, self.W2]


@dataclass
class EdgeGenOutput:
    """Scored supports and the resulting augmentation for one epoch."""

    a_pairs: np.ndarray        # (m, 2) scored pairs for adjacency reconstruction
    a_pred: np.ndarray         # probabilities in [0, 1] over a_pairs
    m_pairs: np.ndarray        # (m', 2) labeled pairs for the homophily term
    m_pred: np.ndarray
    a_hat_edges: np.ndarray    # (e, 2) accepted candidate edges
    epsilon: float


def _raw_scores_np(gen, h_src, h_dst):
    u = h_src @ gen.W1.value
    v = h_dst @ gen.W2.value
    if gen.activation == "relu-projections":
        u, diff = np.maximum(u, 0.0), np.maximum(u - v, 0.0)
    else:
        diff = u - v
    raw = (u * diff).sum(axis=1)
    if gen.activation == "relu":
        raw = np.maximum(raw, 0.0)
    return raw


def _raw_scores_tape(gen, h_src, h_dst):
    u = ad.matmul(h_src, gen.W1)
    v = ad.matmul(h_dst, gen.W2)
    if gen.activation == "relu-projections":
        u, diff = ad.relu(u), ad.relu(ad.sub(u, v))
    else:
        diff = ad.sub(u, v)
    raw = ad.dot_rows(u, diff)
    if gen.activation == "relu":
        raw = ad.relu(raw)
    return raw


def edge_score(gen, h_i, h_j):
    """Raw score and logistic link probability for a single pair (values)."""
    h_i = np.asarray(h_i, dtype=np.float64)[None, :]
    h_j = np.asarray(h_j, dtype=np.float64)[None, :]
    if h_i.shape[1] != gen.W1.value.shape[0]:
        raise ValueError("edge_score: embedding dim does not match weights")
    raw = float(_raw_scores_np(gen, h_i, h_j)[0])
    return raw, float(expit(raw))


def attention_coefficients(gen, h_i, neighbor_embeddings):
    """Neighborhood-softmax coefficients over raw scores (sums to 1)."""
    h_i = np.asarray(h_i, dtype=np.float64)
    neighbor_embeddings = np.asarray(neighbor_embeddings, dtype=np.float64)
    raw = _raw_scores_np(gen, np.tile(h_i, (len(neighbor_embeddings), 1)),
                         neighbor_embeddings)
    shifted = raw - raw.max()
    e = np.exp(shifted)
    return e / e.sum()


def score_pairs(gen, embeddings, pairs):
    """Link probabilities for an array of (src, dst) index pairs (values)."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return np.empty(0)
    raw = _raw_scores_np(gen, embeddings[pairs[:, 0]], embeddings[pairs[:, 1]])
    return expit(raw)


def edge_loss_tape(gen, embeddings_snapshot, a_pairs, a_true, m_pairs, m_true):
    """Differentiable reconstruction loss ||A' - A||_F + ||M' - M||_F on the tape.

    `embeddings_snapshot` is a plain value array: the reconstruction loss
    trains only the generator weights, never the encoder that produced the
    embeddings. Empty supports contribute zero.
    """
    snap = ad.constant(np.asarray(embeddings_snapshot, dtype=np.float64))
    total = ad.constant(0.0)
    for pairs, target in ((a_pairs, a_true), (m_pairs, m_true)):
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if len(pairs) == 0:
            continue
        target = np.asarray(target, dtype=np.float64)
        if target.shape != (len(pairs),):
            raise ValueError("edge loss: support and target lengths differ")
        raw = _raw_scores_tape(gen, ad.gather_rows(snap, pairs[:, 0]),
                               ad.gather_rows(snap, pairs[:, 1]))
        diff = ad.add_const(ad.logistic(raw), -target)
        total = ad.add(total, ad.sqrt(ad.sum_all(ad.mul(diff, diff))))
    return total


def edge_loss(output, a_true, m_true):
    """Value-level ||A' - A||_F + ||M' - M||_F over the output's scored supports."""
    a_pred, a_true = np.asarray(output.a_pred, float), np.asarray(a_true, float)
    m_pred, m_true = np.asarray(output.m_pred, float), np.asarray(m_true, float)
    if a_pred.shape != a_true.shape or m_pred.shape != m_true.shape:
        raise ValueError("edge_loss: prediction/target support mismatch")
    loss = 0.0
    if a_pred.size:
        loss += float(np.sqrt(((a_pred - a_true) ** 2).sum()))
    if m_pred.size:
        loss += float(np.sqrt(((m_pred - m_true) ** 2).sum()))
    return loss


def candidate_pairs(parent_neighbor_set, graph):
    """Candidate endpoints for a synthetic node: P plus P's one-hop neighbors."""
    members = np.asarray(parent_neighbor_set, dtype=np.int64)
    candidates = set(int(m) for m in members)
    for m in members:
        candidates.update(int(u) for u in graph.neighbors(m))
    return np.asarray(sorted(candidates), dtype=np.int64)


def augment(candidates, probabilities, epsilon):
    """Keep candidates whose probability clears the threshold (ties included)."""
    candidates = np.asarray(candidates, dtype=np.int64)
    probabilities = np.asarray(probabilities, dtype=np.float64)
    return candidates[probabilities >= epsilon]


def augmentation_debug_payload(source, candidates, probabilities, epsilon):
    """JSON-friendly dump of one node's scored candidates and accepted edges."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    accepted = augment(candidates, probabilities, epsilon)
    return {
        "source": int(source),
        "epsilon": float(epsilon),
        "candidates": [{"node": int(u), "probability": float(p)}
                       for u, p in zip(candidates, probabilities)],
        "accepted": [int(u) for u in accepted],
    }


def training_edge_pairs(graph, train_idx):
    """Observed edges with both endpoints in the training set (static per run)."""
    edges = graph.edge_list()
    if not len(edges):
        return np.empty((0, 2), dtype=np.int64)
    keep = np.isin(edges[:, 0], train_idx) & np.isin(edges[:, 1], train_idx)
    return edges[keep]


def reconstruction_supports(graph, train_idx, rng, pos_pairs=None):
    """Build the epoch's scored supports for the reconstruction loss.

    A-support: every observed edge between training nodes plus an
    equal-count sample of unconnected training pairs. M-support: the
    A-support restricted to labeled (training) endpoints (all of it here),
    with target 1 iff the pair is an observed same-class edge.
    """
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if pos_pairs is None:
        pos_pairs = training_edge_pairs(graph, train_idx)

    n_neg = len(pos_pairs) if len(train_idx) >= 2 else 0
    neg_pairs = []
    existing = {(int(s), int(d)) for s, d in pos_pairs}
    guard = 0
    while len(neg_pairs) < n_neg and guard < 50 * max(n_neg, 1):
        guard += 1
        i, j = rng.choice(train_idx, size=2, replace=False)
        a, b = (int(i), int(j)) if i < j else (int(j), int(i))
        if (a, b) in existing:
            continue
        existing.add((a, b))
        neg_pairs.append((a, b))
    neg_pairs = np.asarray(neg_pairs, dtype=np.int64).reshape(-1, 2)

    a_pairs = np.vstack([pos_pairs, neg_pairs]) if len(pos_pairs) or len(neg_pairs) \
        else np.empty((0, 2), dtype=np.int64)
    a_true = np.concatenate([np.ones(len(pos_pairs)), np.zeros(len(neg_pairs))])
    same_class = graph.labels[a_pairs[:, 0]] == graph.labels[a_pairs[:, 1]] \
        if len(a_pairs) else np.empty(0, dtype=bool)
    m_true = a_true * same_class
    return a_pairs, a_true, a_pairs.copy(), m_true
