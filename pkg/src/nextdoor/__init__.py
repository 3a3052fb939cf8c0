"""Next-Door analysis: which lasso-selected predictors are indispensable.

For each predictor selected by a cross-validated lasso, the model refit
without it at the same penalty is compared with the base model through
randomized, selection-bias-corrected CV errors and a bootstrap test.
"""

from .analysis import AnalysisConfig, nested_model_curve, run_next_door
from .bootstrap import BootstrapParams, bootstrap_pvalue, model_score, selection_frequency
from .cv import CvLossMatrix, cv_loss_matrix, make_folds, sample_covariance
from .data_io import DataError, Dataset, load_csv, load_prostate
from .debias import RandomizationParams, debias_errors
from .lasso import LassoFit, fit_lasso, fit_path, lambda_grid
from .post_selection import post_selection_pvalue
from .report import NextDoorReport, read_report, render_text, write_report

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig", "BootstrapParams", "CvLossMatrix", "DataError", "Dataset", "LassoFit",
    "NextDoorReport", "RandomizationParams", "bootstrap_pvalue", "cv_loss_matrix",
    "debias_errors", "fit_lasso", "fit_path", "lambda_grid", "load_csv", "load_prostate",
    "make_folds", "model_score", "nested_model_curve", "post_selection_pvalue", "read_report",
    "render_text", "run_next_door", "sample_covariance", "selection_frequency", "write_report",
]
