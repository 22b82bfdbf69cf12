"""Neighbor-based triplet mining and loss.

Anchors are nodes confidently assigned to a minority class (prediction
probability past the curriculum threshold, or labeled minority training
nodes outright). Positives and negatives are the anchor's 1-hop neighbors
whose probability for the anchor class clears / falls below the thresholds.
Distances are cosine distances on the final hidden representations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad


@dataclass
class TripletBatch:
    """Mined (anchor, positive, negative, class) index quadruples plus margin."""

    triples: np.ndarray      # (t, 4) int64 rows: anchor, positive, negative, class
    margin: float

    def __post_init__(self):
        self.triples = np.asarray(self.triples, dtype=np.int64).reshape(-1, 4)

    def __len__(self):
        return len(self.triples)


def cosine_distance(h1, h2):
    """1 - cos(h1, h2), in [0, 2]. Raises on (near-)zero-norm inputs."""
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    n1, n2 = np.linalg.norm(h1), np.linalg.norm(h2)
    if n1 <= 1e-12 or n2 <= 1e-12:
        raise ValueError("degenerate embedding: zero-norm vector in cosine distance")
    return float(1.0 - (h1 @ h2) / (n1 * n2))


def _cosine_rows(embeddings, a_idx, b_idx):
    a = embeddings[a_idx]
    b = embeddings[b_idx]
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    return 1.0 - (a * b).sum(axis=1) / (na * nb)


def mine_triplets(P, labels, labeled_mask, row_offsets, col_indices, minority,
                  alpha_plus, alpha_minus, embeddings, margin, cap=16):
    """Mine the epoch's triplet batch from prediction probabilities.

    `P` is the (N, C) probability matrix over the augmented graph whose CSR
    adjacency is (row_offsets, col_indices); `labeled_mask` marks nodes whose
    label is ground truth (training + synthetic); `minority` lists minority
    class ids. A node anchors class j when it is labeled with minority class
    j, or when j is its best minority class and P[v, j] >= alpha_plus.
    Neighbors with P[u, j] >= alpha_plus are positives, P[w, j] <= alpha_minus
    negatives; every combination is emitted, capped per anchor preferring the
    closest positives and negatives in embedding space.
    """
    P = np.asarray(P, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    minority = np.asarray(minority, dtype=np.int64)
    if len(minority) == 0:
        return TripletBatch(np.empty((0, 4), dtype=np.int64), margin)

    minority_probs = P[:, minority]
    best = minority_probs.argmax(axis=1)
    anchor_class = minority[best]
    anchor_ok = minority_probs[np.arange(len(P)), best] >= alpha_plus
    is_labeled_minority = labeled_mask & np.isin(labels, minority)
    anchor_class = np.where(is_labeled_minority, labels, anchor_class)
    anchor_ok = anchor_ok | is_labeled_minority
    # rows with (near-)zero norm have no defined cosine distance; skip them
    usable = np.linalg.norm(embeddings, axis=1) > 1e-12
    anchor_ok = anchor_ok & usable

    triples = []
    for v in np.flatnonzero(anchor_ok):
        j = anchor_class[v]
        nbrs = col_indices[row_offsets[v]:row_offsets[v + 1]]
        if len(nbrs) == 0:
            continue
        nbrs = nbrs[usable[nbrs]]
        if len(nbrs) == 0:
            continue
        pos = nbrs[P[nbrs, j] >= alpha_plus]
        neg = nbrs[P[nbrs, j] <= alpha_minus]
        if len(pos) == 0 or len(neg) == 0:
            continue
        pos = pos[np.lexsort((pos, _cosine_rows(embeddings, np.full(len(pos), v), pos)))]
        neg = neg[np.lexsort((neg, _cosine_rows(embeddings, np.full(len(neg), v), neg)))]
        emitted = 0
        for p in pos:
            for n in neg:
                if emitted >= cap:
                    break
                triples.append((v, p, n, j))
                emitted += 1
            if emitted >= cap:
                break
    return TripletBatch(np.asarray(triples, dtype=np.int64).reshape(-1, 4), margin)


def ntl_loss_tape(batch, embeddings):
    """Differentiable mean hinge over the batch; zero tensor for empty batches."""
    if len(batch) == 0:
        return ad.constant(0.0)
    emb = ad.as_tensor(embeddings)
    a = ad.gather_rows(emb, batch.triples[:, 0])
    p = ad.gather_rows(emb, batch.triples[:, 1])
    n = ad.gather_rows(emb, batch.triples[:, 2])

    def cos_dist(x, y):
        dot = ad.dot_rows(x, y)
        return ad.add_const(ad.scale(ad.div(dot, ad.mul(ad.row_norm(x), ad.row_norm(y))), -1.0), 1.0)

    hinge = ad.relu(ad.add_const(ad.sub(cos_dist(a, p), cos_dist(a, n)), batch.margin))
    return ad.scale(ad.sum_all(hinge), 1.0 / len(batch))


def ntl_loss(batch, embeddings):
    """Mean hinge max(0, m + d(a,p) - d(a,n)) over the batch (0 when empty)."""
    if len(batch) == 0:
        return 0.0
    embeddings = np.asarray(embeddings, dtype=np.float64)
    d_ap = _cosine_rows(embeddings, batch.triples[:, 0], batch.triples[:, 1])
    d_an = _cosine_rows(embeddings, batch.triples[:, 0], batch.triples[:, 2])
    return float(np.maximum(0.0, batch.margin + d_ap - d_an).mean())


def batch_debug_payload(batch):
    """JSON-friendly dump of a mined batch for audits."""
    return {
        "margin": batch.margin,
        "triples": [
            {"anchor": int(a), "positive": int(p), "negative": int(n), "class": int(j)}
            for a, p, n, j in batch.triples
        ],
    }
