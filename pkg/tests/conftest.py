import numpy as np
import pytest

from gnncl.graph import Graph, SplitMasks


@pytest.fixture
def path_graph():
    """a-b-c path with labels (0, 0, 1) and 2-d features."""
    return Graph.from_edges(
        num_nodes=3,
        edges=[(0, 1), (1, 2)],
        features=np.arange(6, dtype=float).reshape(3, 2),
        labels=[0, 0, 1],
        num_classes=2,
    )


@pytest.fixture
def small_imbalanced():
    """Seeded random graph with a clear minority class, plus splits."""
    rng = np.random.default_rng(42)
    n, C = 60, 3
    labels = np.array([0] * 30 + [1] * 22 + [2] * 8)
    edges = set()
    for _ in range(240):
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        # bias toward same-class edges
        if labels[i] == labels[j] or rng.random() < 0.25:
            edges.add((min(i, j), max(i, j)))
    features = rng.normal(size=(n, 5)) + labels[:, None] * 1.5
    graph = Graph.from_edges(n, sorted(edges), features, labels, C)
    order = rng.permutation(n)
    masks = SplitMasks(order[:24], order[24:36], order[36:])
    # make sure every class is in train
    missing = set(range(C)) - set(labels[masks.train])
    assert not missing
    return graph, masks
