"""Node2Seq: attention-ordered neighbor sequences aggregated by 1-D convolutions."""
from .config import TrainConfig, load_config
from .gcn import GcnParams, gcn_backward, gcn_forward
from .graph import Dataset, GraphStore, build_graph, khop_reachability, load_dataset, normalize_adjacency, random_split
from .layer import LayerConfig, Node2SeqParams, node2seq_backward, node2seq_forward
from .selector import NeighborSequence, SelectorConfig, rank_neighbors, select_nodes
from .training import AdamState, Model, TrainReport, adam_step, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Dataset",
    "GcnParams",
    "GraphStore",
    "LayerConfig",
    "Model",
    "NeighborSequence",
    "Node2SeqParams",
    "SelectorConfig",
    "TrainConfig",
    "TrainReport",
    "adam_step",
    "build_graph",
    "evaluate",
    "gcn_backward",
    "gcn_forward",
    "khop_reachability",
    "load_config",
    "load_dataset",
    "node2seq_backward",
    "node2seq_forward",
    "normalize_adjacency",
    "random_split",
    "rank_neighbors",
    "select_nodes",
    "train",
]
