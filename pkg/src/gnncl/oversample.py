"""Adaptive embedding-space oversampling.

Each epoch, minority training nodes are drawn with the curriculum
probability, their k-nearest neighbors in embedding space decide whether
they sit on a class boundary (danger nodes: neighborhood mixed between the
own class and others), and each danger node spawns one synthetic node per
same-class neighbor by interpolating between the two embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SAFE, DANGER, NOISE = "safe", "danger", "noise"


@dataclass
class SyntheticNode:
    """One interpolated minority node (lives for a single epoch)."""

    embedding: np.ndarray
    label: int
    parent: int
    partner: int
    r: float


@dataclass
class OversamplePlan:
    """The epoch's frozen oversampling structure."""

    seeds: np.ndarray                 # sampled minority training nodes
    danger_nodes: np.ndarray          # subset of seeds with mixed kNN
    neighbor_sets: dict               # danger node -> same-class kNN members (P)
    k: int
    k_prime: dict                     # danger node -> same-class count in kNN


def minority_classes(labels, train_idx, num_classes):
    """Classes whose training count falls below the mean per-class count."""
    counts = np.bincount(np.asarray(labels)[train_idx], minlength=num_classes)
    return np.flatnonzero(counts < len(train_idx) / num_classes)


def knn_same_space(embeddings, query, k, candidate_set):
    """Indices of the k nearest candidates to `query` by Euclidean distance.

    The query itself is excluded; exact distance ties break toward the
    lower node index.
    """
    candidates = np.asarray(candidate_set, dtype=np.int64)
    candidates = candidates[candidates != query]
    if len(candidates) < k:
        raise ValueError(f"candidate set too small: {len(candidates)} < k={k}")
    diffs = embeddings[candidates] - embeddings[query]
    dists = np.sqrt((diffs * diffs).sum(axis=1))
    order = np.lexsort((candidates, dists))
    return candidates[order[:k]]


def classify_danger(neighbor_labels, query_label):
    """Borderline test: danger iff the kNN mixes own-class and other-class nodes."""
    neighbor_labels = np.asarray(neighbor_labels)
    k_prime = int((neighbor_labels == query_label).sum())
    if k_prime == 0:
        return NOISE
    if k_prime == len(neighbor_labels):
        return SAFE
    return DANGER


def interpolate(parent_embedding, partner_embeddings, rng, parent=-1,
                partners=None, label=-1):
    """Synthesize one node per partner on the open segment parent -> partner.

    Each synthetic embedding is parent + r * (partner - parent) with r drawn
    uniformly from (0, 1); r is recorded on the node for replay.
    """
    parent_embedding = np.asarray(parent_embedding, dtype=np.float64)
    partner_embeddings = np.asarray(partner_embeddings, dtype=np.float64)
    if partners is None:
        partners = [-1] * len(partner_embeddings)
    out = []
    for j, partner_embedding in enumerate(partner_embeddings):
        r = rng.uniform(0.0, 1.0)
        while r == 0.0:   # open interval
            r = rng.uniform(0.0, 1.0)
        embedding = parent_embedding + r * (partner_embedding - parent_embedding)
        out.append(SyntheticNode(embedding=embedding, label=int(label),
                                 parent=int(parent), partner=int(partners[j]),
                                 r=float(r)))
    return out


def sample_seeds(minority_train_nodes, delta_l, rng):
    """Draw each minority training node independently with probability delta_l."""
    if not 0.0 <= delta_l <= 1.0:
        raise ValueError("delta_l must lie in [0, 1]")
    nodes = np.asarray(minority_train_nodes, dtype=np.int64)
    keep = rng.random(len(nodes)) < delta_l
    return np.sort(nodes[keep])


def build_plan(embeddings, labels, train_idx, minority, delta_l, k, rng):
    """Run the full oversampling pass for one epoch.

    Returns (OversamplePlan, list[SyntheticNode]). `embeddings` is the
    encoder output as plain values; `minority` lists minority class ids;
    kNN candidates are the whole training set regardless of class, and the
    interpolation set P keeps the same-class members only.
    """
    labels = np.asarray(labels, dtype=np.int64)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    is_minority = np.isin(labels[train_idx], minority)
    seeds = sample_seeds(train_idx[is_minority], delta_l, rng)

    danger, neighbor_sets, k_prime = [], {}, {}
    synthetic = []
    for seed in seeds:
        nbrs = knn_same_space(embeddings, seed, k, train_idx)
        if classify_danger(labels[nbrs], labels[seed]) != DANGER:
            continue
        same = nbrs[labels[nbrs] == labels[seed]]
        danger.append(seed)
        neighbor_sets[int(seed)] = same
        k_prime[int(seed)] = len(same)
        synthetic.extend(interpolate(embeddings[seed], embeddings[same], rng,
                                     parent=seed, partners=same,
                                     label=labels[seed]))
    plan = OversamplePlan(seeds=seeds, danger_nodes=np.asarray(danger, dtype=np.int64),
                          neighbor_sets=neighbor_sets, k=k, k_prime=k_prime)
    return plan, synthetic


def plan_debug_payload(plan, synthetic):
    """JSON-friendly dump of an epoch's plan + synthetic nodes for audits."""
    return {
        "k": plan.k,
        "seeds": [int(s) for s in plan.seeds],
        "danger_nodes": [int(d) for d in plan.danger_nodes],
        "k_prime": {str(k): int(v) for k, v in plan.k_prime.items()},
        "neighbor_sets": {str(k): [int(x) for x in v]
                          for k, v in plan.neighbor_sets.items()},
        "synthetic": [
            {"parent": s.parent, "partner": s.partner, "label": s.label, "r": s.r}
            for s in synthetic
        ],
    }
