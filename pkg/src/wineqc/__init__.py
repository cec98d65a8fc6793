"""Leakage-free wine-quality benchmark toolkit with native tree ensembles."""

from .data import ClassCounts, Dataset, class_counts, load_csv
from .metrics import MetricsReport, compute_report
from .pipeline import ExperimentConfig, ExperimentReport, run_experiment
from .resample import ResampleReport, Standardizer, smote_tomek
from .split import FoldPlan, HoldoutSplit, stratified_group_kfold, stratified_holdout
from .tune import SearchSpace, StudyResult, TrialRecord, default_space, run_study

__version__ = "0.1.0"

__all__ = [
    "ClassCounts", "Dataset", "class_counts", "load_csv",
    "MetricsReport", "compute_report",
    "ExperimentConfig", "ExperimentReport", "run_experiment",
    "ResampleReport", "Standardizer", "smote_tomek",
    "FoldPlan", "HoldoutSplit", "stratified_group_kfold", "stratified_holdout",
    "SearchSpace", "StudyResult", "TrialRecord", "default_space", "run_study",
    "__version__",
]
