"""
Swapping weak neighbors for strong two-hop nodes
================================================

Node 1 has three neighbors. Two of them score below the threshold, so their
slots go to the best-scoring nodes two hops away. The sequence keeps its
length of four (three neighbors plus node 1 itself).
"""
import numpy as np

from node2seq import SelectorConfig, build_graph, khop_reachability
from node2seq.layer import attention_scores, project_features
from node2seq.selector import rank_neighbors, select_nodes

g = build_graph(7, [(0, 1), (0, 2), (0, 3), (1, 4), (2, 5), (3, 6)])
x = np.array([[1.0, 0.0], [-0.5, 0.2], [0.1, 0.9], [0.8, 0.4], [0.9, 0.3], [0.2, 0.2], [0.6, 0.1]])
w1 = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, -1.0]])
s = attention_scores(project_features(x, w1), 0)
for j, v in enumerate(s):
    print(f"score(1, {j + 1}) = {v:+.2f}")

local = rank_neighbors(s, g.neighbors(0), center=0)
print("local sequence:   ", [int(i) + 1 for i in local.indices])

reach = khop_reachability(g, 2)
within = reach.indices[reach.indptr[0] : reach.indptr[1]]
seq = select_nodes(s, g.neighbors(0), within, SelectorConfig(beta=0.0, ell=2, enabled=True), center=0)
print("selected sequence:", [int(i) + 1 for i in seq.indices])
print(f"  {seq.n_local} kept locals, {seq.n_nonlocal} non-local replacements")

# a huge threshold rejects every local node, a very low one keeps them all
for beta in (-np.inf, 0.0, 1.9, np.inf):
    sel = select_nodes(s, g.neighbors(0), within, SelectorConfig(beta, 2, True), center=0)
    print(f"beta={beta:>5}: {[int(i) + 1 for i in sel.indices]}")
