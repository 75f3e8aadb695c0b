"""Covariate selection and standardization for censored time-to-event trials."""

from ._core import (
    ConfigError,
    DataError,
    Dataset,
    NumericalError,
    __version__,
    dataset_from_csv,
    dataset_to_csv,
    decorrelated_score_test,
    double_selection,
    fit_cox,
    kaplan_meier,
    logrank_test,
    post_lasso,
    score_bias_oracle,
    significance_selection_single,
    simulate,
    standardized_curve,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "NumericalError",
    "__version__",
    "dataset_from_csv",
    "dataset_to_csv",
    "decorrelated_score_test",
    "double_selection",
    "fit_cox",
    "kaplan_meier",
    "logrank_test",
    "post_lasso",
    "score_bias_oracle",
    "significance_selection_single",
    "simulate",
    "standardized_curve",
]
