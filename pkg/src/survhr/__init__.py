"""Survival models with Shapley-derived hazard ratios.

Fits linear Cox proportional-hazards models and gradient-boosted-tree Cox
models, explains the tree model with exact per-feature attributions, and
turns those attributions into per-variable hazard ratios with bootstrap
confidence intervals, alongside concordance / Kaplan-Meier evaluation
tooling and a synthetic-data generator for end-to-end consistency checks.
"""

from .coxph import (
    CoxModel,
    fit_coxph,
    hazard_ratio_coxph,
    neg_log_partial_likelihood,
)
from .data import (
    FeatureSpec,
    SignedTime,
    SurvivalDataset,
    SurvivalRecord,
    bootstrap_resample,
    encode_signed_time,
    load_csv,
    preprocess,
)
from .errors import (
    CapacityError,
    ConvergenceError,
    FitError,
    MetricError,
    ParseError,
    ShapeError,
    SplitError,
    SurvhrError,
    ValidationError,
)
from .hazard import (
    HrEstimate,
    SubgroupSplit,
    bootstrap_hr,
    hr_from_shap,
    median_split,
)
from .metrics import CvResult, KmCurve, c_index, kfold_cv, km_estimate
from .shapley import ShapMatrix, shap_brute_force, tree_shap
from .simdata import SimConfig, simulate
from .trees import (
    Hyperparams,
    TreeEnsemble,
    TreeNode,
    build_tree,
    cox_grad_hess,
    predict_margin,
    train,
)
from .tuning import SearchSpace, random_search

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConvergenceError",
    "CoxModel",
    "CvResult",
    "FeatureSpec",
    "FitError",
    "HrEstimate",
    "Hyperparams",
    "KmCurve",
    "MetricError",
    "ParseError",
    "SearchSpace",
    "ShapMatrix",
    "ShapeError",
    "SignedTime",
    "SimConfig",
    "SplitError",
    "SubgroupSplit",
    "SurvhrError",
    "SurvivalDataset",
    "SurvivalRecord",
    "TreeEnsemble",
    "TreeNode",
    "ValidationError",
    "bootstrap_hr",
    "bootstrap_resample",
    "build_tree",
    "c_index",
    "cox_grad_hess",
    "encode_signed_time",
    "fit_coxph",
    "hazard_ratio_coxph",
    "hr_from_shap",
    "kfold_cv",
    "km_estimate",
    "load_csv",
    "median_split",
    "neg_log_partial_likelihood",
    "predict_margin",
    "preprocess",
    "random_search",
    "shap_brute_force",
    "simulate",
    "train",
    "tree_shap",
]
