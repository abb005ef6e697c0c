"""Interpretable classification of tabular cohort data.

Asymmetry features from paired ROI volumes, forward selection, Bayesian
hyperparameter tuning, six classifier families, Shapley explanations,
permutation and aspect importance, and rank-based evaluation statistics.
"""
from .dataset import (
    CohortConfig,
    FeatureSet,
    TabularDataset,
    engineer_roi_features,
    generate_synthetic,
    load_csv,
    select_feature_set,
)
from .models import ModelKind, train

__version__ = "0.1.0"

__all__ = [
    "CohortConfig",
    "FeatureSet",
    "ModelKind",
    "TabularDataset",
    "engineer_roi_features",
    "generate_synthetic",
    "load_csv",
    "select_feature_set",
    "train",
]
