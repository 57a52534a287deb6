"""Graph inference representations: anchor-frontier message passing,
exact position certificates, decision fusion and an experiment harness."""
from .anchors import AnchorSet, partition_anchors, select_anchors
from .certify import certify_set_distance, certify_anchor_distances
from .fusion import ABLATIONS, expert_complementarity, two_stage_train
from .graph import Graph, build_graph, multi_source_bfs, read_edge_list
from .harness import ExperimentConfig, FusionConfig, aggregate_runs, run_experiment, run_fusion
from .metrics import accuracy, roc_auc
from .models import Hyper, ModelConfig, forward, train_model
from .schedule import build_schedule

__all__ = [
    "ABLATIONS", "AnchorSet", "ExperimentConfig", "FusionConfig", "Graph", "Hyper", "ModelConfig",
    "accuracy", "aggregate_runs", "build_graph", "build_schedule", "certify_set_distance",
    "certify_anchor_distances", "expert_complementarity", "forward", "multi_source_bfs",
    "partition_anchors", "read_edge_list", "roc_auc", "run_experiment", "run_fusion",
    "select_anchors", "train_model", "two_stage_train",
]
