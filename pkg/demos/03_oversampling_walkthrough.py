#!/usr/bin/env python3
"""One oversampling + edge-generation pass, step by step.

Shows the borderline detection (safe / danger / noise), the SMOTE-style
interpolation in embedding space, and how the edge generator scores and
thresholds candidate edges for a synthetic node.
"""

import numpy as np

from gnncl.autodiff import Parameter
from gnncl.edgegen import EdgeGenerator, augment, candidate_pairs, score_pairs
from gnncl.graph import Graph
from gnncl.oversample import build_plan, classify_danger, knn_same_space

rng = np.random.default_rng(3)

# a small graph: majority class 0 (10 nodes), minority class 1 (4 nodes)
labels = np.array([0] * 10 + [1] * 4)
edges = [(0, 1), (0, 2), (1, 3), (2, 4), (4, 5), (5, 6), (6, 7), (7, 8),
         (8, 9), (10, 11), (11, 3), (12, 5), (13, 7), (10, 12)]
graph = Graph.from_edges(14, edges, rng.normal(size=(14, 2)), labels, 2)

# pretend these are encoder embeddings: minority sits between two blobs
emb = np.vstack([rng.normal(size=(10, 2)),
                 rng.normal(size=(4, 2)) + [1.2, 0.6]])
train = np.arange(14)

print("danger classification for each minority node (k=5):")
for v in (10, 11, 12, 13):
    nbrs = knn_same_space(emb, v, 5, train)
    verdict = classify_danger(labels[nbrs], labels[v])
    same = int((labels[nbrs] == labels[v]).sum())
    print(f"  node {v}: kNN {list(nbrs)} -> k'={same} -> {verdict}")

plan, synthetic = build_plan(emb, labels, train, minority=np.array([1]),
                             delta_l=1.0, k=5, rng=rng)
print(f"\nplan: seeds {list(plan.seeds)}, danger {list(plan.danger_nodes)}")
print(f"synthesized {len(synthetic)} nodes:")
for s in synthetic:
    print(f"  parent {s.parent} -> partner {s.partner}, r={s.r:.3f}, "
          f"embedding {np.round(s.embedding, 3)}")

# score candidate edges for the first synthetic node
gen = EdgeGenerator.create(hidden_dim=2, rng=rng)
node = synthetic[0]
cands = candidate_pairs(plan.neighbor_sets[node.parent], graph)
all_emb = np.vstack([emb, node.embedding[None, :]])
pairs = np.column_stack([np.full(len(cands), 14), cands])
probs = score_pairs(gen, all_emb, pairs)
print(f"\ncandidates for synthetic node (parent {node.parent}): {list(cands)}")
print(f"link probabilities: {np.round(probs, 3)}")
for eps in (0.3, 0.5):
    accepted = [int(u) for u in augment(cands, probs, eps)]
    print(f"  accepted at epsilon={eps}: {accepted}")
print("\n(the generator is untrained here; during training it learns to")
print("reconstruct the observed adjacency and same-class structure first)")
