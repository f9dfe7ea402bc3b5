"""Gaussian mixture reduction with the Pearson chi-square criterion, plus
Gaussian-sum filtering and smoothing for linear state-space models."""

from ._gmred import (
    ArgumentError,
    GaussianComponent,
    GaussianMixture,
    LinearStateSpaceModel,
    NumericError,
    ReductionStuck,
    default_prior,
    filter_step,
    global_kl_fit,
    isd_numeric,
    kitagawa_wkl,
    kl_numeric,
    levelshift_series,
    merge_geometry,
    merge_pair,
    mixture_moments,
    moment_preserving_merge,
    normalize,
    pearson_chi2,
    predict_step,
    reduce_to,
    run_filter,
    run_smoother,
    runnalls_bound,
    salmond_trace,
    score_pair,
    set_num_threads,
    table1,
    table3,
    trend_model,
    williams_isd,
)

__all__ = [name for name in dir() if not name.startswith("_")]
