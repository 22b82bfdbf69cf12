"""End-to-end training: composes encoder, oversampler, edge generator,
classifier and the triplet loss into one per-epoch objective, plus the
classic baselines (plain model, duplication oversampling, loss reweighting)
and the ablation variants.

Per-epoch structure (seeds, kNN plan, interpolation randoms, generated
edges, reconstruction supports, mined triplets) is frozen before the loss is
assembled, so within an epoch the total loss is a deterministic, smooth
function of the parameters; the whole run is deterministic under its seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from . import edgegen, metriclearn, metrics, oversample
from .autodiff import Parameter
from .curriculum import CurriculumSchedule
from .graph import Graph, SplitMasks
from .nn import (AdamState, DivergenceError, GNNLayer, LayerConfig, adam_step,
                 glorot_uniform, normalized_operator, softmax)

VARIANTS = ("gnn-cl", "gnn-cl-o", "gnn-cl-m", "gnn-cl-c",
            "origin", "oversampling", "reweighting")
BASELINE_VARIANTS = ("origin", "oversampling", "reweighting")
CHECKPOINT_FORMAT_VERSION = 1


def normalize_variant(name):
    return str(name).strip().lower().replace("_", "-")


@dataclass
class TrainConfig:
    """Everything one training run needs besides the data."""

    base_model: str = "gcn"            # or "sage-mean"
    hidden_dim: int = 64
    lam: float = 0.002                 # edge-loss weight (lambda)
    gamma: float = 1.0                 # triplet-loss weight
    mu: float = 1.0
    beta_plus: float = 0.6
    beta_minus: float = 0.1
    k: int = 5
    epsilon: float = 0.5
    margin: float = 0.5
    max_epochs: int = 2000
    patience: int = 100
    seed: int = 0
    variant: str = "gnn-cl"
    n_s: int = 1                       # duplication count, oversampling baseline
    learning_rate: float = 0.001
    weight_decay: float = 0.0005
    score_activation: str = "identity"
    triplet_cap: int = 16

    def __post_init__(self):
        self.variant = normalize_variant(self.variant)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.base_model not in ("gcn", "sage-mean"):
            raise ValueError(f"unknown base_model {self.base_model!r}")
        if self.lam < 0 or self.gamma < 0:
            raise ValueError("lambda and gamma must be nonnegative")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.k < 1 or self.hidden_dim < 1 or self.max_epochs < 1:
            raise ValueError("k, hidden_dim and max_epochs must be >= 1")
        if self.n_s < 0:
            raise ValueError("n_s must be >= 0")

    @property
    def schedule(self):
        return CurriculumSchedule(self.mu, self.beta_plus, self.beta_minus,
                                  self.max_epochs)


# JSON field names; the internal attribute `lam` serializes as "lambda".
_CONFIG_JSON_KEYS = {
    "base_model": "base_model", "hidden_dim": "hidden_dim", "lam": "lambda",
    "gamma": "gamma", "mu": "mu", "beta_plus": "beta_plus",
    "beta_minus": "beta_minus", "k": "k", "epsilon": "epsilon",
    "margin": "margin", "max_epochs": "max_epochs", "patience": "patience",
    "seed": "seed", "variant": "variant", "n_s": "n_s",
    "learning_rate": "learning_rate", "weight_decay": "weight_decay",
    "score_activation": "score_activation", "triplet_cap": "triplet_cap",
}


def config_to_json_dict(config):
    return {json_key: getattr(config, attr)
            for attr, json_key in _CONFIG_JSON_KEYS.items()}


def config_from_json_dict(data):
    known = {json_key: attr for attr, json_key in _CONFIG_JSON_KEYS.items()}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ValueError(f"unknown train config key {key!r}")
        kwargs[known[key]] = value
    return TrainConfig(**kwargs)


@dataclass
class LossBundle:
    l_node: float
    l_edge: float
    l_gcl: float
    l_ntl: float
    total: float


@dataclass
class EpochRecord:
    epoch: int
    losses: LossBundle
    val_cma: float
    n_synthetic: int
    n_edges_added: int
    n_triplets: int


@dataclass
class AugmentedGraph:
    """Base graph plus this epoch's synthetic nodes and accepted edges."""

    base: Graph
    synthetic: list
    extra_edges: np.ndarray       # (e, 2) rows (synthetic_global_id, real_id)
    adjacency: sp.csr_matrix      # (N_hat, N_hat), symmetric, no self-loops
    labels: np.ndarray            # length N_hat
    labeled_mask: np.ndarray      # bool, True for train nodes and synthetics

    @property
    def num_nodes(self):
        return self.adjacency.shape[0]


class Model:
    """Encoder block, classifier block, linear head and edge generator.

    Parameter creation order is fixed (encoder, classifier, head, edge
    generator) so that variants sharing a seed share the first draws.
    """

    def __init__(self, config, feature_dim, num_classes, rng):
        kind = config.base_model
        self.encoder = GNNLayer(LayerConfig(kind, feature_dim, config.hidden_dim,
                                            "relu"), rng, "encoder_w")
        self.classifier = GNNLayer(LayerConfig(kind, config.hidden_dim,
                                               config.hidden_dim, "relu"),
                                   rng, "classifier_w")
        self.head = Parameter(glorot_uniform(rng, (config.hidden_dim, num_classes)),
                              "head_w")
        self.edge_gen = edgegen.EdgeGenerator.create(config.hidden_dim, rng,
                                                     config.score_activation)
        self.num_classes = num_classes

    def parameters(self):
        return [self.encoder.weight, self.classifier.weight, self.head,
                *self.edge_gen.parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def snapshot(self):
        return {p.name: p.value.copy() for p in self.parameters()}

    def restore(self, snapshot):
        for p in self.parameters():
            np.copyto(p.value, snapshot[p.name])


@dataclass
class _Static:
    """Per-run precomputed structure shared by all epochs."""

    base_adjacency: sp.csr_matrix
    base_operator: sp.csr_matrix
    train_edges: np.ndarray
    minority: np.ndarray
    class_weights: np.ndarray | None
    k_eff: int
    labels: np.ndarray
    train_mask_bool: np.ndarray


def _prepare_static(config, graph, masks):
    base_adj = graph.to_scipy_csr()
    operator = normalized_operator(config.base_model, base_adj)
    minority = oversample.minority_classes(graph.labels, masks.train,
                                           graph.num_classes)
    weights = None
    if config.variant == "reweighting":
        counts = np.bincount(graph.labels[masks.train], minlength=graph.num_classes)
        weights = np.zeros(graph.num_classes)
        nz = counts > 0
        weights[nz] = len(masks.train) / (graph.num_classes * counts[nz])
    train_mask_bool = np.zeros(graph.num_nodes, dtype=bool)
    train_mask_bool[masks.train] = True
    return _Static(
        base_adjacency=base_adj,
        base_operator=operator,
        train_edges=edgegen.training_edge_pairs(graph, masks.train),
        minority=minority,
        class_weights=weights,
        k_eff=min(config.k, len(masks.train) - 1),
        labels=graph.labels,
        train_mask_bool=train_mask_bool,
    )


@dataclass
class EpochForward:
    """Tape handles plus the frozen structure of one epoch."""

    H1: ad.Tensor
    H_aug: ad.Tensor
    H2: ad.Tensor
    logits: ad.Tensor
    P: np.ndarray
    augmented: AugmentedGraph
    plan: oversample.OversamplePlan | None
    triplets: metriclearn.TripletBatch | None
    edge_supports: tuple | None      # (a_pairs, a_true, m_pairs, m_true)
    labeled_nodes: np.ndarray        # rows entering the node loss
    labeled_targets: np.ndarray


def _empty_augmented(graph, base_adj, train_mask_bool):
    return AugmentedGraph(base=graph, synthetic=[],
                          extra_edges=np.empty((0, 2), dtype=np.int64),
                          adjacency=base_adj, labels=graph.labels,
                          labeled_mask=train_mask_bool)


def _augmented_adjacency(graph, base_adjacency, n_syn, extra_edges):
    base = base_adjacency.tocoo()
    n_hat = graph.num_nodes + n_syn
    rows = np.concatenate([base.row, extra_edges[:, 0], extra_edges[:, 1]])
    cols = np.concatenate([base.col, extra_edges[:, 1], extra_edges[:, 0]])
    data = np.ones(len(rows))
    return sp.coo_matrix((data, (rows, cols)), shape=(n_hat, n_hat)).tocsr()


def forward_epoch(model, config, graph, masks, static, epoch, rng):
    """Run one epoch's forward pass and freeze its discrete structure."""
    schedule = config.schedule
    variant = config.variant
    H1 = model.encoder.forward(static.base_operator, graph.features)

    oversampling_on = variant in ("gnn-cl", "gnn-cl-m", "gnn-cl-c")
    plan, synthetic = None, []
    if oversampling_on and len(static.minority) and static.k_eff >= 1:
        delta = config.mu if variant == "gnn-cl-c" else schedule.delta(epoch)
        plan, synthetic = oversample.build_plan(
            H1.value, static.labels, masks.train, static.minority, delta,
            static.k_eff, rng)

    if synthetic:
        parents = np.array([s.parent for s in synthetic], dtype=np.int64)
        partners = np.array([s.partner for s in synthetic], dtype=np.int64)
        rs = np.array([s.r for s in synthetic])[:, None]
        par = ad.gather_rows(H1, parents)
        part = ad.gather_rows(H1, partners)
        H_syn = ad.add(par, ad.mul_const(ad.sub(part, par), rs))
        H_aug = ad.vstack(H1, H_syn)

        all_values = H_aug.value
        extra = []
        for si, node in enumerate(synthetic):
            cands = edgegen.candidate_pairs(plan.neighbor_sets[node.parent], graph)
            pairs = np.column_stack([np.full(len(cands), graph.num_nodes + si),
                                     cands])
            probs = edgegen.score_pairs(model.edge_gen, all_values, pairs)
            accepted = edgegen.augment(cands, probs, config.epsilon)
            extra.extend((graph.num_nodes + si, int(u)) for u in accepted)
        extra = np.asarray(extra, dtype=np.int64).reshape(-1, 2)
        adjacency = _augmented_adjacency(graph, static.base_adjacency,
                                         len(synthetic), extra)
        labels_aug = np.concatenate([static.labels,
                                     [s.label for s in synthetic]]).astype(np.int64)
        labeled = np.concatenate([static.train_mask_bool,
                                  np.ones(len(synthetic), dtype=bool)])
        augmented = AugmentedGraph(graph, synthetic, extra, adjacency,
                                   labels_aug, labeled)
        clf_operator = normalized_operator(config.base_model, adjacency)
    else:
        H_aug = H1
        augmented = _empty_augmented(graph, static.base_adjacency,
                                     static.train_mask_bool)
        clf_operator = static.base_operator

    H2 = model.classifier.forward(clf_operator, H_aug)
    logits = ad.matmul(H2, model.head)
    P = softmax(logits.value)

    edge_supports = None
    if variant not in BASELINE_VARIANTS:
        edge_supports = edgegen.reconstruction_supports(
            graph, masks.train, rng, pos_pairs=static.train_edges)

    triplets = None
    ntl_on = (variant in ("gnn-cl", "gnn-cl-o", "gnn-cl-c")
              and config.gamma > 0 and len(static.minority))
    if ntl_on:
        if variant == "gnn-cl-c":
            a_plus, a_minus = 1.0 - config.beta_plus, config.beta_minus
        else:
            a_plus = schedule.alpha_plus(epoch)
            a_minus = schedule.alpha_minus(epoch)
        adj = augmented.adjacency
        triplets = metriclearn.mine_triplets(
            P, augmented.labels, augmented.labeled_mask,
            adj.indptr, adj.indices, static.minority, a_plus, a_minus,
            H2.value, config.margin, cap=config.triplet_cap)

    n_syn = len(synthetic)
    labeled_nodes = np.concatenate([masks.train,
                                    graph.num_nodes + np.arange(n_syn)])
    labeled_targets = augmented.labels[labeled_nodes]
    return EpochForward(H1=H1, H_aug=H_aug, H2=H2, logits=logits, P=P,
                        augmented=augmented, plan=plan, triplets=triplets,
                        edge_supports=edge_supports,
                        labeled_nodes=labeled_nodes.astype(np.int64),
                        labeled_targets=labeled_targets)


def total_loss(fwd, model, config, class_weights=None):
    """Assemble the epoch objective; returns (LossBundle, scalar tensor)."""
    row_weights = None
    if class_weights is not None:
        row_weights = class_weights[fwd.labeled_targets]
    picked = ad.gather_rows(fwd.logits, fwd.labeled_nodes)
    l_node_t = ad.cross_entropy_logits(picked, fwd.labeled_targets, row_weights)

    if fwd.edge_supports is not None:
        a_pairs, a_true, m_pairs, m_true = fwd.edge_supports
        l_edge_t = edgegen.edge_loss_tape(model.edge_gen, fwd.H1.value,
                                          a_pairs, a_true, m_pairs, m_true)
    else:
        l_edge_t = ad.constant(0.0)

    l_gcl_t = ad.add(l_node_t, ad.scale(l_edge_t, config.lam))

    if fwd.triplets is not None and config.variant != "gnn-cl-m":
        l_ntl_t = metriclearn.ntl_loss_tape(fwd.triplets, fwd.H2)
    else:
        l_ntl_t = ad.constant(0.0)
    total_t = ad.add(l_gcl_t, ad.scale(l_ntl_t, config.gamma))

    bundle = LossBundle(l_node=float(l_node_t), l_edge=float(l_edge_t),
                        l_gcl=float(l_gcl_t), l_ntl=float(l_ntl_t),
                        total=float(total_t))
    return bundle, total_t


def build_frozen_loss(model, config, graph, masks, static, epoch, rng):
    """Closure over the full objective with the epoch's structure frozen.

    Runs one forward pass to fix the discrete plan (seeds, partners,
    interpolation randoms, generated edges, reconstruction supports, mined
    triplets, and the edge-input embedding snapshot), then returns
    (closure, fwd) where closure() rebuilds the loss tape from the current
    parameter values on that same plan. This is the function whose gradient
    each optimization step actually follows, in the form the
    finite-difference gate requires.
    """
    fwd = forward_epoch(model, config, graph, masks, static, epoch, rng)
    synthetic = fwd.augmented.synthetic
    parents = np.array([s.parent for s in synthetic], dtype=np.int64)
    partners = np.array([s.partner for s in synthetic], dtype=np.int64)
    rs = np.array([s.r for s in synthetic]).reshape(-1, 1)
    if synthetic:
        clf_operator = normalized_operator(config.base_model,
                                           fwd.augmented.adjacency)
    else:
        clf_operator = static.base_operator
    edge_snapshot = fwd.H1.value.copy()
    row_weights = None
    if static.class_weights is not None:
        row_weights = static.class_weights[fwd.labeled_targets]

    def closure():
        H1 = model.encoder.forward(static.base_operator, graph.features)
        if len(synthetic):
            par = ad.gather_rows(H1, parents)
            part = ad.gather_rows(H1, partners)
            H_aug = ad.vstack(H1, ad.add(par, ad.mul_const(ad.sub(part, par), rs)))
        else:
            H_aug = H1
        H2 = model.classifier.forward(clf_operator, H_aug)
        logits = ad.matmul(H2, model.head)
        picked = ad.gather_rows(logits, fwd.labeled_nodes)
        l_node = ad.cross_entropy_logits(picked, fwd.labeled_targets, row_weights)
        if fwd.edge_supports is not None:
            a_pairs, a_true, m_pairs, m_true = fwd.edge_supports
            l_edge = edgegen.edge_loss_tape(model.edge_gen, edge_snapshot,
                                            a_pairs, a_true, m_pairs, m_true)
        else:
            l_edge = ad.constant(0.0)
        if fwd.triplets is not None and config.variant != "gnn-cl-m":
            l_ntl = metriclearn.ntl_loss_tape(fwd.triplets, H2)
        else:
            l_ntl = ad.constant(0.0)
        l_gcl = ad.add(l_node, ad.scale(l_edge, config.lam))
        return ad.add(l_gcl, ad.scale(l_ntl, config.gamma))

    return closure, fwd


def _layer_values(layer, operator, H):
    """Inference-path forward producing plain values."""
    cfg = layer.config
    W = layer.weight.value
    if cfg.kind == "gcn":
        out = operator @ (H @ W)
    else:
        out = np.hstack([H, operator @ H]) @ W
    return np.maximum(out, 0.0) if cfg.activation == "relu" else out


def predict_probabilities(model, operator, features):
    """Class probabilities on the base graph (no synthetic nodes)."""
    h1 = _layer_values(model.encoder, operator, features)
    h2 = _layer_values(model.classifier, operator, h1)
    return softmax(h2 @ model.head.value)


@dataclass
class TrainState:
    """Result of one training run."""

    config: TrainConfig
    model: Model
    adam: AdamState
    graph: Graph                   # the graph trained on (post-duplication)
    masks: SplitMasks
    history: list = field(default_factory=list)
    best_val_cma: float = float("-inf")
    best_epoch: int = -1
    epochs_since_improvement: int = 0
    stopped_early: bool = False

    def evaluate(self, node_set=None):
        """MetricsReport on the test set (or a given node set) of the base graph."""
        static_op = normalized_operator(self.config.base_model,
                                        self.graph.to_scipy_csr())
        probs = predict_probabilities(self.model, static_op, self.graph.features)
        nodes = self.masks.test if node_set is None else np.asarray(node_set)
        return metrics.evaluate(probs[nodes], self.graph.labels[nodes],
                                self.graph.num_classes)


def duplicate_minority(graph, masks, n_s):
    """Oversampling baseline preprocessing: append n_s copies of every
    minority training node together with copies of its incident edges."""
    minority = oversample.minority_classes(graph.labels, masks.train,
                                           graph.num_classes)
    targets = masks.train[np.isin(graph.labels[masks.train], minority)]
    if n_s == 0 or len(targets) == 0:
        return graph, masks
    n = graph.num_nodes
    new_edges, new_features, new_labels, new_train = [], [], [], []
    next_id = n
    for parent in targets:
        for _ in range(n_s):
            new_features.append(graph.features[parent])
            new_labels.append(graph.labels[parent])
            new_train.append(next_id)
            for u in graph.neighbors(parent):
                new_edges.append((next_id, int(u)))
            next_id += 1
    edges = np.vstack([graph.edge_list(),
                       np.asarray(new_edges, dtype=np.int64).reshape(-1, 2)])
    features = np.vstack([graph.features, np.asarray(new_features)]) \
        if new_features else graph.features
    labels = np.concatenate([graph.labels, new_labels])
    bigger = Graph.from_edges(next_id, edges, features, labels, graph.num_classes)
    bigger_masks = SplitMasks(np.concatenate([masks.train, new_train]),
                              masks.validation, masks.test)
    return bigger, bigger_masks


def train(config, graph, masks):
    """Full training run; returns the TrainState with best parameters restored."""
    masks.check_range(graph.num_nodes)
    if config.variant == "oversampling":
        graph, masks = duplicate_minority(graph, masks, config.n_s)

    rng_init = np.random.default_rng(config.seed)
    model = Model(config, graph.features.shape[1], graph.num_classes, rng_init)
    adam = AdamState(learning_rate=config.learning_rate,
                     weight_decay=config.weight_decay)
    static = _prepare_static(config, graph, masks)
    state = TrainState(config=config, model=model, adam=adam, graph=graph,
                       masks=masks)
    eval_nodes = masks.validation if len(masks.validation) else masks.train
    best_snapshot = model.snapshot()

    for epoch in range(config.max_epochs):
        rng_epoch = np.random.default_rng([config.seed, epoch])
        model.zero_grad()
        fwd = forward_epoch(model, config, graph, masks, static, epoch, rng_epoch)
        bundle, total_t = total_loss(fwd, model, config, static.class_weights)
        if not np.isfinite(bundle.total):
            raise DivergenceError(
                f"non-finite loss at epoch {epoch}: {bundle}")
        total_t.backward()
        adam_step(model.parameters(), adam)

        probs = predict_probabilities(model, static.base_operator, graph.features)
        val_cma = metrics.cma(probs[eval_nodes].argmax(axis=1),
                              graph.labels[eval_nodes], graph.num_classes)
        state.history.append(EpochRecord(
            epoch=epoch, losses=bundle, val_cma=val_cma,
            n_synthetic=len(fwd.augmented.synthetic),
            n_edges_added=len(fwd.augmented.extra_edges),
            n_triplets=0 if fwd.triplets is None else len(fwd.triplets)))

        if val_cma > state.best_val_cma:
            state.best_val_cma = val_cma
            state.best_epoch = epoch
            state.epochs_since_improvement = 0
            best_snapshot = model.snapshot()
        else:
            state.epochs_since_improvement += 1
        if state.epochs_since_improvement > config.patience:
            state.stopped_early = True
            break

    model.restore(best_snapshot)
    return state


def run_baseline(config, graph, masks):
    """Train one of the non-curriculum baselines (origin/oversampling/reweighting)."""
    if config.variant not in BASELINE_VARIANTS:
        raise ValueError(f"run_baseline expects one of {BASELINE_VARIANTS}, "
                         f"got {config.variant!r}")
    return train(config, graph, masks)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, state):
    """Versioned JSON container of parameters + config + best epoch."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "epoch": state.best_epoch,
        "config": config_to_json_dict(state.config),
        "parameters": {
            p.name: {"shape": list(p.value.shape),
                     "data": [float(x) for x in p.value.ravel()]}
            for p in state.model.parameters()
        },
    }
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True)
        f.write("\n")


def load_checkpoint(path):
    """Returns (config, {name: array}, epoch) from a checkpoint file."""
    payload = json.loads(Path(path).read_text())
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {version!r}")
    config = config_from_json_dict(payload["config"])
    params = {name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
              for name, entry in payload["parameters"].items()}
    return config, params, payload["epoch"]
