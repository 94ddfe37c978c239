from .datasets import DatasetError, DatasetRecord, load_dataset, save_dataset, split_indices
from .experiments import EXPERIMENTS, run_experiments
from .generators import (GENERATORS, gen_beta2, gen_geometric_toy, gen_wl_hard, random_geometric_complex,
                         random_graph_complex)
from .train import RunConfig, TrainingError, auroc, evaluate, load_model, read_metrics, train

__all__ = [
    "DatasetError", "DatasetRecord", "load_dataset", "save_dataset", "split_indices",
    "EXPERIMENTS", "run_experiments",
    "GENERATORS", "gen_beta2", "gen_geometric_toy", "gen_wl_hard", "random_geometric_complex", "random_graph_complex",
    "RunConfig", "TrainingError", "auroc", "evaluate", "load_model", "read_metrics", "train",
]
