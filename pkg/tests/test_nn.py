import numpy as np
import pytest
import scipy.sparse as sp

from gnncl import autodiff as ad
from gnncl.autodiff import Parameter
from gnncl.nn import (AdamState, DivergenceError, LayerConfig,
                      NondeterministicLossError, adam_step, cross_entropy,
                      finite_difference_check, gcn_normalized_adjacency,
                      gnn_forward, mean_neighbor_matrix, softmax,
                      softmax_linear)


def identity_param(d, name="w"):
    return Parameter(np.eye(d), name)


def adjacency(n, edges):
    mat = np.zeros((n, n))
    for a, b in edges:
        mat[a, b] = mat[b, a] = 1
    return sp.csr_matrix(mat)


# ---------------------------------------------------------------------------
# normalization + forward
# ---------------------------------------------------------------------------

def test_gcn_identity_on_edgeless_graph():
    cfg = LayerConfig("gcn", 3, 3, "identity")
    op = gcn_normalized_adjacency(adjacency(4, []))
    H = np.random.default_rng(0).normal(size=(4, 3))
    out = gnn_forward(cfg, identity_param(3), op, H)
    np.testing.assert_allclose(out.value, H, atol=1e-15)


def test_gcn_two_node_hand_normalization():
    # single edge: A+I is all-ones, degrees 2 -> every entry 1/2
    op = gcn_normalized_adjacency(adjacency(2, [(0, 1)]))
    np.testing.assert_allclose(op.toarray(), np.full((2, 2), 0.5), atol=1e-15)
    cfg = LayerConfig("gcn", 3, 3, "identity")
    out = gnn_forward(cfg, identity_param(3), op, np.ones((2, 3)))
    np.testing.assert_allclose(out.value, np.ones((2, 3)), atol=1e-15)


def test_relu_output_nonnegative():
    rng = np.random.default_rng(1)
    cfg = LayerConfig("gcn", 4, 5)
    op = gcn_normalized_adjacency(adjacency(6, [(0, 1), (2, 3), (4, 5)]))
    w = Parameter(rng.normal(size=(4, 5)), "w")
    out = gnn_forward(cfg, w, op, rng.normal(size=(6, 4)))
    assert (out.value >= 0).all()


def test_sage_mean_concatenates_self_and_neighbors():
    cfg = LayerConfig("sage-mean", 2, 4, "identity")
    op = mean_neighbor_matrix(adjacency(3, [(0, 1), (0, 2)]))
    H = np.array([[1.0, 0.0], [0.0, 2.0], [4.0, 0.0]])
    w = Parameter(np.eye(4), "w")
    out = gnn_forward(cfg, w, op, H)
    # row 0: self (1,0) || mean of neighbors ((0,2),(4,0)) = (2,1)
    np.testing.assert_allclose(out.value[0], [1.0, 0.0, 2.0, 1.0])


def test_mean_neighbor_isolated_row_is_zero():
    op = mean_neighbor_matrix(adjacency(3, [(0, 1)]))
    assert op[2].nnz == 0


def test_gnn_forward_validates():
    cfg = LayerConfig("gcn", 3, 2, "identity")
    op = gcn_normalized_adjacency(adjacency(2, [(0, 1)]))
    with pytest.raises(ValueError, match="non-finite"):
        gnn_forward(cfg, Parameter(np.zeros((3, 2)), "w"), op,
                    np.array([[1.0, np.nan, 0.0], [0.0, 0.0, 0.0]]))
    with pytest.raises(ValueError, match="in_dim"):
        gnn_forward(cfg, Parameter(np.zeros((3, 2)), "w"), op, np.ones((2, 4)))


def test_permutation_equivariance():
    rng = np.random.default_rng(4)
    n, d = 8, 3
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (0, 7)]
    H = rng.normal(size=(n, d))
    perm = rng.permutation(n)
    for kind, builder in (("gcn", gcn_normalized_adjacency),
                          ("sage-mean", mean_neighbor_matrix)):
        cfg = LayerConfig(kind, d, d)
        w = Parameter(rng.normal(size=cfg.weight_shape), "w")
        base = gnn_forward(cfg, w, builder(adjacency(n, edges)), H).value
        perm_edges = [(perm[a], perm[b]) for a, b in edges]
        permuted = gnn_forward(cfg, w, builder(adjacency(n, perm_edges)),
                               H[np.argsort(perm)]).value
        np.testing.assert_allclose(permuted[perm], base, atol=1e-12)


def test_layer_config_validation():
    with pytest.raises(ValueError):
        LayerConfig("gat", 2, 2)
    with pytest.raises(ValueError):
        LayerConfig("gcn", 0, 2)
    with pytest.raises(ValueError):
        LayerConfig("gcn", 2, 2, "tanh")


# ---------------------------------------------------------------------------
# softmax + cross entropy
# ---------------------------------------------------------------------------

def test_softmax_zero_logits_uniform():
    p = softmax(np.zeros((2, 4)))
    np.testing.assert_allclose(p, np.full((2, 4), 0.25), atol=1e-15)


def test_softmax_extreme_logits():
    p = softmax(np.array([[1000.0, -1000.0]]))
    np.testing.assert_allclose(p, [[1.0, 0.0]], atol=1e-12)


def test_softmax_frozen_values():
    # direct evaluation oracle: exp(x)/sum(exp(x)) at (1,2,3)
    p = softmax_linear(np.array([[1.0, 2.0, 3.0]]), np.eye(3))
    np.testing.assert_allclose(
        p[0],
        [0.09003057317038046, 0.24472847105479767, 0.6652409557748219],
        atol=1e-12)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(8)
    logits = rng.normal(scale=50, size=(40, 6))
    p = softmax(logits)
    np.testing.assert_allclose(p.sum(axis=1), np.ones(40), atol=1e-9)
    assert (p >= 0).all()


def test_cross_entropy_values():
    P = np.eye(3)[np.array([0, 1, 2])]
    assert cross_entropy(P, [0, 1, 2], [0, 1, 2]) == pytest.approx(0.0)

    uniform = np.full((3, 4), 0.25)
    assert cross_entropy(uniform, [0, 1, 2], [0, 1, 2]) == pytest.approx(
        4.1588830833596715, abs=1e-12)

    P = np.array([[0.7, 0.3]])
    assert cross_entropy(P, [1], [0]) == pytest.approx(1.2039728043259361,
                                                       abs=1e-12)


def test_cross_entropy_empty_set():
    with pytest.raises(ValueError, match="empty"):
        cross_entropy(np.ones((2, 2)) / 2, [0, 1], [])


def test_cross_entropy_matches_logit_path():
    rng = np.random.default_rng(10)
    logits = rng.normal(size=(7, 4))
    labels = rng.integers(0, 4, size=7)
    nodes = np.array([0, 2, 3, 6])
    via_probs = cross_entropy(softmax(logits), labels, nodes)
    via_logits = float(ad.cross_entropy_logits(
        ad.gather_rows(ad.constant(logits), nodes), labels[nodes]))
    assert via_probs == pytest.approx(via_logits, abs=1e-10)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def test_adam_zero_gradient_no_decay():
    p = Parameter(np.array([1.0, -2.0]), "p")
    p.zero_grad()
    adam_step([p], AdamState(weight_decay=0.0))
    np.testing.assert_allclose(p.value, [1.0, -2.0])


def test_adam_first_step_moves_by_learning_rate():
    p = Parameter(np.array([1.0]), "p")
    p.zero_grad()
    p.grad[:] = 1.0
    state = AdamState(learning_rate=0.001, weight_decay=0.0)
    adam_step([p], state)
    # bias-corrected first step: m_hat = v_hat = 1 -> step ~ lr
    assert p.value[0] == pytest.approx(1.0 - 0.001, abs=1e-6)
    assert state.step == 1


def test_adam_decoupled_decay():
    p = Parameter(np.array([4.0]), "p")
    p.zero_grad()
    state = AdamState(learning_rate=0.01, weight_decay=0.1)
    adam_step([p], state)
    assert p.value[0] == pytest.approx(4.0 * (1 - 0.01 * 0.1), abs=1e-12)


def test_adam_aborts_on_nonfinite_gradient():
    p = Parameter(np.array([1.0]), "p")
    q = Parameter(np.array([2.0]), "q")
    p.zero_grad()
    q.zero_grad()
    q.grad[:] = np.nan
    with pytest.raises(DivergenceError, match="q"):
        adam_step([p, q], AdamState())
    assert p.value[0] == 1.0   # aborted before mutating anything


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def test_fd_quadratic_tight():
    rng = np.random.default_rng(11)
    w = Parameter(rng.normal(size=(4, 3)), "w")
    closure = lambda: ad.scale(ad.sum_all(ad.mul(w, w)), 0.5)
    err = finite_difference_check(closure, [w], step=1e-6)
    assert err < 1e-8


@pytest.mark.parametrize("kind,builder", [
    ("gcn", gcn_normalized_adjacency),
    ("sage-mean", mean_neighbor_matrix),
])
def test_fd_every_layer_backward(kind, builder):
    # layer backward vs central differences on a random small instance
    rng = np.random.default_rng(17)
    n, d, h, C = 9, 4, 5, 3
    edges = {(int(a), int(b)) for a, b in rng.integers(0, n, size=(14, 2))
             if a != b}
    op = builder(adjacency(n, sorted(edges)))
    H = rng.normal(size=(n, d))
    labels = rng.integers(0, C, size=n)
    cfg = LayerConfig(kind, d, h, "relu")
    w = Parameter(rng.normal(size=cfg.weight_shape), "w")
    head = Parameter(rng.normal(size=(h, C)), "head")

    def closure():
        out = gnn_forward(cfg, w, op, H)
        return ad.cross_entropy_logits(ad.matmul(out, head), labels)

    err = finite_difference_check(closure, [w, head], step=1e-5)
    assert err <= 1e-3


def test_fd_detects_nondeterminism():
    w = Parameter(np.ones(2), "w")
    state = {"n": 0}

    def closure():
        state["n"] += 1
        return ad.scale(ad.sum_all(w), float(state["n"]))

    with pytest.raises(NondeterministicLossError):
        finite_difference_check(closure, [w])


def test_fd_catches_wrong_gradient():
    w = Parameter(np.array([1.0, 2.0]), "w")

    def closure():
        # deliberately wrong backward: claims gradient 3x the true one
        t = ad.sum_all(ad.mul(w, w))
        return ad.Tensor(t.value, parents=(w,),
                         backward_fn=lambda g: ad._accum(w, 6.0 * w.value * g))

    err = finite_difference_check(closure, [w], step=1e-6)
    assert err > 0.5
