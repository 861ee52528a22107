"""cfdet: self-explaining classifier for typed dependence graphs.

Consumes the upstream graph-JSON schema, classifies each graph, and emits
a factual/counterfactual edge partition explaining the decision.
"""

from .data import GraphData, load_dataset, load_graph, load_split_plan
from .metrics import Evaluation, evaluate
from .model import Detector, Explanation, edge_embed, gumbel_sample, split_subgraphs
from .train import TrainConfig, TrainResult, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "GraphData",
    "load_dataset",
    "load_graph",
    "load_split_plan",
    "Evaluation",
    "evaluate",
    "Detector",
    "Explanation",
    "edge_embed",
    "gumbel_sample",
    "split_subgraphs",
    "TrainConfig",
    "TrainResult",
    "load_checkpoint",
    "save_checkpoint",
    "train",
]
