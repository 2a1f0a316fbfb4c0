"""
Node2Seq against GCN on Cora
============================

Converts the raw LINQS files under data/raw/cora (if not done yet) and trains
the three model variants over a few seeds. Takes a few minutes on one core.
"""
import statistics
import sys
from pathlib import Path

from node2seq import TrainConfig, load_dataset, train
from node2seq.datasets import convert

root = Path(__file__).resolve().parents[1] / "data"
if not (root / "cora" / "meta.txt").is_file():
    if not (root / "raw" / "cora" / "cora.content").is_file():
        sys.exit("data/raw/cora is missing; see the README for how to fetch it")
    convert("planetoid_text", root / "raw" / "cora", root / "cora")
ds = load_dataset(root / "cora")
print(f"Cora: {ds.graph.n} nodes, {ds.graph.num_edges} edges, {ds.features.shape[1]} features")

seeds = [0, 1, 2]
for ablation in ("gcn2", "gcn_star", "node2seq"):
    cfg = TrainConfig(ablation=ablation, epochs=200, normalize_features=True)
    accs = [train(ds, cfg, s)[1].best_test for s in seeds]
    print(f"{ablation:9s} {100 * statistics.fmean(accs):.1f} ± {100 * statistics.stdev(accs):.1f}")
