"""Composite quantile regression with second-order boosted trees and the arctan pinball loss."""
__version__ = "0.1.0"

from ._kernels import BACKEND
from .booster import BoosterConfig, Model, fit, load_model, predict, save_model, single_point_update
from .data import Dataset, load_csv, make_toy, standardize_targets, true_toy_quantile
from .loss import LossSpec, QuantileLevels
from .tree import TreeParams

__all__ = [
    "BACKEND",
    "BoosterConfig",
    "Dataset",
    "LossSpec",
    "Model",
    "QuantileLevels",
    "TreeParams",
    "fit",
    "load_csv",
    "load_model",
    "make_toy",
    "predict",
    "save_model",
    "single_point_update",
    "standardize_targets",
    "true_toy_quantile",
]
