"""guidestack: multi-loss ensembles and stacked generalization for
sgRNA on-target efficacy scoring."""

__version__ = "0.1.0"

from .dataio import Dataset, DatasetSchema, SplitPlan, load_dataset, normalize_score, save_dataset, split
from .encoding import decode, encode_matrix, one_hot, validate
from .learners import (
    ForestParams,
    GbmParams,
    LinearParams,
    TreeParams,
    fit_base,
    fit_forest,
    fit_gbm,
    fit_linear,
    fit_tree,
)
from .losses import LossSpec, default_loss_set, loss_value, negative_gradient, optimal_constant
from .metrics import binarize, classification_metrics, metric_report, mse, spearman
from .refine import RefinedModel, fit_refined, predict_refined
from .stacking import RefinedSpec, SingleSpec, StackedEnsemble, VotedSpec, fit_stacked, predict_stacked
from .tuning import TuneSpec, grid_search, vote_predict

__all__ = [
    "Dataset",
    "DatasetSchema",
    "SplitPlan",
    "LossSpec",
    "TreeParams",
    "ForestParams",
    "GbmParams",
    "LinearParams",
    "TuneSpec",
    "SingleSpec",
    "RefinedSpec",
    "VotedSpec",
    "StackedEnsemble",
    "RefinedModel",
    "load_dataset",
    "save_dataset",
    "normalize_score",
    "split",
    "validate",
    "one_hot",
    "decode",
    "encode_matrix",
    "default_loss_set",
    "loss_value",
    "negative_gradient",
    "optimal_constant",
    "fit_tree",
    "fit_forest",
    "fit_gbm",
    "fit_linear",
    "fit_base",
    "fit_refined",
    "predict_refined",
    "grid_search",
    "vote_predict",
    "fit_stacked",
    "predict_stacked",
    "spearman",
    "mse",
    "binarize",
    "classification_metrics",
    "metric_report",
]
