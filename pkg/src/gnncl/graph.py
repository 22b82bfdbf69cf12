"""Graph representation, bundle I/O, synthetic graph generation and structure stats.

Graphs are undirected, stored as symmetric CSR (both directions present, no
self-loops). Node features, integer labels and train/val/test index masks
ride alongside. All arrays are float64 / int64 and frozen after construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """A dataset bundle file failed validation; carries file and line context."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + where)
        self.path = str(path) if path is not None else None
        self.line = line


class UndefinedHomophilyError(ValueError):
    """Raised when a class has no node with at least one neighbor."""


@dataclass
class Graph:
    """Immutable undirected graph with per-node features and labels."""

    num_nodes: int
    row_offsets: np.ndarray   # int64, length num_nodes + 1
    col_indices: np.ndarray   # int64, sorted within each row
    features: np.ndarray      # float64, num_nodes x feature_dim
    labels: np.ndarray        # int64, values in [0, num_classes)
    num_classes: int

    def __post_init__(self):
        self.row_offsets = np.asarray(self.row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(self.col_indices, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.num_nodes
        if self.row_offsets.shape != (n + 1,):
            raise ValueError("row_offsets must have length num_nodes + 1")
        if self.row_offsets[0] != 0 or np.any(np.diff(self.row_offsets) < 0):
            raise ValueError("row_offsets must start at 0 and be nondecreasing")
        if self.row_offsets[-1] != len(self.col_indices):
            raise ValueError("row_offsets[-1] must equal len(col_indices)")
        if len(self.col_indices) and (self.col_indices.min() < 0 or self.col_indices.max() >= n):
            raise ValueError("col_indices out of range")
        if self.features.shape[0] != n:
            raise ValueError("features must have one row per node")
        if self.labels.shape != (n,):
            raise ValueError("labels must have one entry per node")
        if np.any(self.labels < 0) or np.any(self.labels >= self.num_classes):
            raise ValueError("every label must lie in [0, num_classes)")
        if len(np.unique(self.labels)) != self.num_classes:
            raise ValueError("every class in [0, num_classes) needs at least one node")
        src = np.repeat(np.arange(n), np.diff(self.row_offsets))
        if np.any(src == self.col_indices):
            raise ValueError("self-loops must not be stored")
        adj = self.to_scipy_csr()
        if (adj != adj.T).nnz != 0:
            raise ValueError("adjacency must be symmetric")
        for arr in (self.row_offsets, self.col_indices, self.features, self.labels):
            arr.flags.writeable = False

    @classmethod
    def from_edges(cls, num_nodes, edges, features, labels, num_classes):
        """Build from an iterable of (src, dst) pairs.

        Input may be directed and contain duplicates or self-loops; the result
        is the deduplicated, symmetrized, loop-free CSR adjacency.
        """
        edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        row_offsets, col_indices = _edges_to_csr(num_nodes, edges)
        return cls(num_nodes, row_offsets, col_indices, features, labels, num_classes)

    @property
    def num_edges(self):
        """Number of undirected edges."""
        return len(self.col_indices) // 2

    def neighbors(self, v):
        return self.col_indices[self.row_offsets[v]:self.row_offsets[v + 1]]

    def degrees(self):
        return np.diff(self.row_offsets)

    def edge_list(self):
        """Sorted unique undirected edges as an (m, 2) array with src < dst."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees())
        dst = self.col_indices
        keep = src < dst
        return np.column_stack([src[keep], dst[keep]])

    def to_scipy_csr(self):
        data = np.ones(len(self.col_indices))
        return sp.csr_matrix((data, self.col_indices, self.row_offsets),
                             shape=(self.num_nodes, self.num_nodes))


def _edges_to_csr(num_nodes, edges):
    """Symmetrize + dedupe an edge array into sorted CSR arrays."""
    if edges.size:
        if edges.min() < 0 or edges.max() >= num_nodes:
            raise ValueError("edge endpoint out of range")
        edges = edges[edges[:, 0] != edges[:, 1]]                # drop self-loops
        both = np.vstack([edges, edges[:, ::-1]])
        both = np.unique(both, axis=0)                           # dedupe + sort
        src, dst = both[:, 0], both[:, 1]
    else:
        src = dst = np.empty(0, dtype=np.int64)
    counts = np.bincount(src, minlength=num_nodes)
    row_offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return row_offsets, dst.astype(np.int64)


@dataclass
class SplitMasks:
    """Disjoint train/validation/test node index sets."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        self.train = np.unique(np.asarray(self.train, dtype=np.int64))
        self.validation = np.unique(np.asarray(self.validation, dtype=np.int64))
        self.test = np.unique(np.asarray(self.test, dtype=np.int64))
        if len(self.train) == 0:
            raise ValueError("train mask must be nonempty")
        combined = np.concatenate([self.train, self.validation, self.test])
        if len(np.unique(combined)) != len(combined):
            raise ValueError("train/validation/test masks must be pairwise disjoint")
        if combined.min() < 0:
            raise ValueError("mask indices must be nonnegative")

    def check_range(self, num_nodes):
        for name in ("train", "validation", "test"):
            arr = getattr(self, name)
            if len(arr) and arr.max() >= num_nodes:
                raise ValueError(f"{name} mask references node >= num_nodes")


@dataclass
class DatasetSpec:
    """Parameters of the stochastic-block-model stand-in generator.

    `modes_per_class` > 1 gives each class several Gaussian feature
    sub-clusters (like multi-topic bag-of-words classes) while edges stay
    class-level; with few labels per class some modes go unlabeled, which is
    the regime where graph-based oversampling matters.
    """

    num_nodes: int
    num_classes: int
    feature_dim: int
    intra_class_edge_prob: float
    inter_class_edge_prob: float
    class_proportions: tuple = ()
    feature_center_separation: float = 2.0
    seed: int = 0
    modes_per_class: int = 1

    def __post_init__(self):
        if not self.class_proportions:
            self.class_proportions = tuple([1.0 / self.num_classes] * self.num_classes)
        self.class_proportions = tuple(float(p) for p in self.class_proportions)
        if len(self.class_proportions) != self.num_classes:
            raise ValueError("class_proportions must have one entry per class")
        if not math.isclose(sum(self.class_proportions), 1.0, abs_tol=1e-9):
            raise ValueError("class_proportions must sum to 1")
        for p in (self.intra_class_edge_prob, self.inter_class_edge_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("edge probabilities must lie in [0, 1]")
        if self.intra_class_edge_prob < self.inter_class_edge_prob:
            raise ValueError("intra_class_edge_prob must be >= inter_class_edge_prob")
        if self.modes_per_class < 1:
            raise ValueError("modes_per_class must be >= 1")


# ---------------------------------------------------------------------------
# bundle I/O
# ---------------------------------------------------------------------------

BUNDLE_FILES = ("edges.tsv", "features.tsv", "labels.tsv", "splits.json")


def load_graph_bundle(path):
    """Load a dataset bundle directory into (Graph, SplitMasks).

    Expects `edges.tsv` (src<TAB>dst per line), `features.tsv` (tab-separated
    reals, line i = node i), `labels.tsv` (one integer per line) and
    `splits.json` ({"train": [...], "val": [...], "test": [...],
    "num_classes": C}). Directed input is symmetrized, duplicate edges are
    collapsed.
    """
    path = Path(path)
    for name in BUNDLE_FILES:
        if not (path / name).exists():
            raise GraphFormatError(f"missing bundle file {name}", path / name)

    splits_path = path / "splits.json"
    try:
        splits = json.loads(splits_path.read_text())
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"invalid JSON: {exc}", splits_path) from exc
    for key in ("train", "val", "test", "num_classes"):
        if key not in splits:
            raise GraphFormatError(f"splits.json missing key '{key}'", splits_path)
    num_classes = int(splits["num_classes"])

    labels_path = path / "labels.tsv"
    labels = []
    for lineno, line in enumerate(labels_path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            label = int(line)
        except ValueError:
            raise GraphFormatError(f"non-integer label {line!r}", labels_path, lineno) from None
        if not 0 <= label < num_classes:
            raise GraphFormatError(
                f"label out of range: {label} with num_classes={num_classes}",
                labels_path, lineno)
        labels.append(label)
    num_nodes = len(labels)

    features_path = path / "features.tsv"
    rows = []
    for lineno, line in enumerate(features_path.read_text().splitlines(), start=1):
        parts = line.rstrip("\n").split("\t")
        try:
            row = [float(x) for x in parts]
        except ValueError:
            raise GraphFormatError("non-numeric feature value", features_path, lineno) from None
        if rows and len(row) != len(rows[0]):
            raise GraphFormatError(
                f"feature row length {len(row)} != {len(rows[0])}", features_path, lineno)
        rows.append(row)
    if len(rows) != num_nodes:
        raise GraphFormatError(
            f"features.tsv has {len(rows)} rows but labels.tsv has {num_nodes}", features_path)
    features = np.asarray(rows, dtype=np.float64)

    edges_path = path / "edges.tsv"
    edges = []
    for lineno, line in enumerate(edges_path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise GraphFormatError("expected 'src<TAB>dst'", edges_path, lineno)
        try:
            src, dst = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"non-integer node id in {line!r}", edges_path, lineno) from None
        if not (0 <= src < num_nodes and 0 <= dst < num_nodes):
            raise GraphFormatError(f"node id out of range in ({src}, {dst})", edges_path, lineno)
        edges.append((src, dst))

    graph = Graph.from_edges(num_nodes, edges, features, labels, num_classes)
    masks = SplitMasks(splits["train"], splits["val"], splits["test"])
    masks.check_range(num_nodes)
    return graph, masks


def save_graph_bundle(graph, masks, path):
    """Write a Graph + SplitMasks as a bundle directory (see load_graph_bundle)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "edges.tsv", "w") as f:
        for src, dst in graph.edge_list():
            f.write(f"{src}\t{dst}\n")
    with open(path / "features.tsv", "w") as f:
        for row in graph.features:
            f.write("\t".join(repr(float(x)) for x in row) + "\n")
    with open(path / "labels.tsv", "w") as f:
        for label in graph.labels:
            f.write(f"{label}\n")
    splits = {
        "train": [int(i) for i in masks.train],
        "val": [int(i) for i in masks.validation],
        "test": [int(i) for i in masks.test],
        "num_classes": graph.num_classes,
    }
    with open(path / "splits.json", "w") as f:
        json.dump(splits, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# structure statistics
# ---------------------------------------------------------------------------

def train_class_counts(graph, masks):
    """Per-class node counts inside the training mask."""
    return np.bincount(graph.labels[masks.train], minlength=graph.num_classes)


def imbalance_ratio(graph, masks):
    """Largest-to-smallest per-class training count (M:1), over classes present."""
    counts = train_class_counts(graph, masks)
    present = counts[counts > 0]
    return float(present.max() / present.min())


def downsample_minority(masks, graph, ratio, minority_fraction, rng):
    """Shrink randomly chosen minority classes' training sets to ceil(count * ratio).

    `minority_fraction` controls how many classes become minority
    (round(num_classes * minority_fraction), chosen uniformly without
    replacement). Non-training masks are untouched.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must lie in (0, 1]")
    num_minority = int(round(graph.num_classes * minority_fraction))
    chosen = np.sort(rng.choice(graph.num_classes, size=num_minority, replace=False))
    train_labels = graph.labels[masks.train]
    kept = []
    for cls in range(graph.num_classes):
        members = masks.train[train_labels == cls]
        if cls in chosen and len(members):
            target = math.ceil(len(members) * ratio)
            members = np.sort(rng.choice(members, size=target, replace=False))
        kept.append(members)
    return SplitMasks(np.concatenate(kept), masks.validation, masks.test)


def class_homophily(graph, class_id):
    """Mean same-label neighbor fraction over the class's non-isolated nodes."""
    members = np.flatnonzero(graph.labels == class_id)
    fractions = []
    for v in members:
        nbrs = graph.neighbors(v)
        if len(nbrs) == 0:
            continue
        fractions.append(np.mean(graph.labels[nbrs] == class_id))
    if not fractions:
        raise UndefinedHomophilyError(
            f"undefined homophily: class {class_id} has no node with a neighbor")
    return float(np.mean(fractions))


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------

def generate_synthetic_graph(spec, split_fractions=(0.1, 0.1, 0.8)):
    """Sample a homophilous stochastic-block-model graph with Gaussian features.

    Edge probability is intra_class_edge_prob inside a class and
    inter_class_edge_prob across classes. Class feature centers are isotropic
    Gaussian draws scaled so expected pairwise center distance is
    feature_center_separation; per-node noise is unit Gaussian. Splits are
    stratified per class with at least one training node each.
    """
    rng = np.random.default_rng(spec.seed)
    counts = _class_counts_from_proportions(spec.num_nodes, spec.class_proportions)
    labels = np.repeat(np.arange(spec.num_classes), counts)
    boundaries = np.concatenate([[0], np.cumsum(counts)])

    edges = []
    for a in range(spec.num_classes):
        for b in range(a, spec.num_classes):
            p = spec.intra_class_edge_prob if a == b else spec.inter_class_edge_prob
            if p == 0.0:
                continue
            rows = np.arange(boundaries[a], boundaries[a + 1])
            cols = np.arange(boundaries[b], boundaries[b + 1])
            draw = rng.random((len(rows), len(cols)))
            if a == b:
                draw = np.triu(draw, k=1) + np.tril(np.ones_like(draw))  # keep i<j only
            hit_r, hit_c = np.nonzero(draw < p)
            if len(hit_r):
                edges.append(np.column_stack([rows[hit_r], cols[hit_c]]))
    edges = np.vstack(edges) if edges else np.empty((0, 2), dtype=np.int64)

    scale = spec.feature_center_separation / math.sqrt(2.0 * spec.feature_dim)
    centers = rng.normal(size=(spec.num_classes, spec.modes_per_class,
                               spec.feature_dim)) * scale
    modes = rng.integers(0, spec.modes_per_class, size=spec.num_nodes)
    features = centers[labels, modes] + rng.normal(size=(spec.num_nodes,
                                                         spec.feature_dim))

    graph = Graph.from_edges(spec.num_nodes, edges, features, labels, spec.num_classes)
    masks = _stratified_split(labels, spec.num_classes, split_fractions, rng)
    return graph, masks


def _class_counts_from_proportions(num_nodes, proportions):
    raw = np.asarray(proportions) * num_nodes
    counts = np.floor(raw).astype(np.int64)
    remainder = num_nodes - counts.sum()
    # hand leftover nodes to the largest fractional parts (ties: lowest class id)
    order = np.lexsort((np.arange(len(raw)), -(raw - counts)))
    counts[order[:remainder]] += 1
    if np.any(counts == 0):
        raise ValueError("infeasible class_proportions: a class received 0 nodes")
    return counts


def _stratified_split(labels, num_classes, fractions, rng):
    f_train, f_val, _ = fractions
    train, val, test = [], [], []
    for cls in range(num_classes):
        members = rng.permutation(np.flatnonzero(labels == cls))
        n_train = max(1, int(round(f_train * len(members))))
        n_val = int(round(f_val * len(members)))
        n_val = min(n_val, len(members) - n_train)
        train.append(members[:n_train])
        val.append(members[n_train:n_train + n_val])
        test.append(members[n_train + n_val:])
    return SplitMasks(np.concatenate(train), np.concatenate(val), np.concatenate(test))
