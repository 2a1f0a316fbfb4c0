"""
Following one node through a Node2Seq layer
===========================================

A five-node graph, a 2-d feature per node and a fixed projection to 3
channels. We watch node 1 rank its neighbors, arrange them into a sequence,
convolve, read out and combine with its own features.
"""
import numpy as np

from node2seq import Node2SeqParams, build_graph, node2seq_forward
from node2seq.layer import arrange_features, attention_scores, combine, conv1d_aggregate, project_features, readout
from node2seq.selector import rank_neighbors

# node p in the drawing is row p - 1 here
edges = [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (3, 4)]
g = build_graph(5, edges)
x = np.array([[1.0, 0.0], [0.0, 0.3], [0.2, 0.5], [0.9, 0.1], [0.6, 0.2]])

params = Node2SeqParams.init(np.random.default_rng(0), c_in=2, c_out=3, kernel_size=3)
params.w1 = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])

# project every node to 3 channels
xbar = project_features(x, params.w1)
print("projected features", x.shape, "->", xbar.shape)

# raw dot-product scores of node 1 against everyone, itself included
scores = attention_scores(xbar, 0)
print("scores from node 1:", np.round(scores, 2))

# rank the 1-hop neighborhood (node 1 is its own neighbor)
seq = rank_neighbors(scores, g.neighbors(0), center=0)
print("sequence:", [int(i) + 1 for i in seq.indices])

# the ordered sequence is a 5 x 3 matrix; a width-3 kernel slides over it
xs = arrange_features(xbar, seq)
f = conv1d_aggregate(xs, params)
print("conv output", xs.shape, "->", f.shape)

vec, _ = readout(f, "mean")
print("mean readout", vec.shape)
print("node 1 output", np.round(combine(x[0], params.w2, vec), 4))

# the batched layer does the same for every node at once
out, _ = node2seq_forward(x, g, params)
print("batched row 1 ", np.round(out[0], 4))
