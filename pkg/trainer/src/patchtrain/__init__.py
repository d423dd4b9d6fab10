"""Toy-scale trainer for patch-arrangement shards."""

from .model import TripleBranchClassifier, build_model
from .optim import apply_wv, build_sgd
from .shards import Record, iter_records, load_manifest, load_split
from .train import DivergenceError, TrainerConfig, train_eval

__version__ = "0.1.0"

__all__ = [
    "TripleBranchClassifier",
    "build_model",
    "apply_wv",
    "build_sgd",
    "Record",
    "iter_records",
    "load_manifest",
    "load_split",
    "DivergenceError",
    "TrainerConfig",
    "train_eval",
    "__version__",
]
