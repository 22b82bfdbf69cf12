"""Imbalanced semi-supervised node classification with curriculum-scheduled
embedding-space oversampling, a learned edge generator and neighbor-based
triplet metric learning, on top of small numpy message-passing networks."""

from .curriculum import CurriculumSchedule
from .graph import (DatasetSpec, Graph, SplitMasks, class_homophily,
                    downsample_minority, generate_synthetic_graph,
                    imbalance_ratio, load_graph_bundle, save_graph_bundle)
from .metrics import MetricsReport, auc_roc_macro, cma, evaluate
from .trainer import TrainConfig, TrainState, run_baseline, train

__version__ = "0.1.0"

__all__ = [
    "CurriculumSchedule", "DatasetSpec", "Graph", "SplitMasks",
    "MetricsReport", "TrainConfig", "TrainState",
    "auc_roc_macro", "class_homophily", "cma", "downsample_minority",
    "evaluate", "generate_synthetic_graph", "imbalance_ratio",
    "load_graph_bundle", "run_baseline", "save_graph_bundle", "train",
]
