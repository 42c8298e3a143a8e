"""Conditional inference survival ensembles for level and playtime churn prediction."""

from ._core import (  # noqa: F401
    CoxModel,
    Dataset,
    ForestParams,
    InvalidInput,
    IoError,
    KmModel,
    NumericFailure,
    SurvivalCurve,
    SurvivalForest,
    TreeParams,
    VariableTest,
    best_split_point,
    brier_score,
    censoring_km,
    conditional_moments,
    evaluate,
    featurize,
    fit_cox,
    fit_km_baseline,
    integrated_brier,
    kaplan_meier,
    linear_statistic,
    load_model,
    logrank_scores,
    median_survival,
    merge_partials,
    nelson_aalen,
    read_dataset_csv,
    simulate,
    train_forest,
    train_partial,
)

__all__ = [name for name in dir() if not name.startswith("_")]
