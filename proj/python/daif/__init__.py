"""Inverted-framework multivariate time-series forecasting with on-the-fly
augmentation: spectral top-K filtering, cross-variation patching, and a
trainable inverted Seq2Seq forecaster."""

from ._daif import (
    ConfigError,
    ContractError,
    DataError,
    IoError,
    NumericError,
    __version__,
    amplitude,
    augment,
    correlation_matrix,
    cross_variation_patch,
    frequency_filter,
    frequency_filter_augment,
    irdft,
    load_csv,
    predict,
    rdft,
    run_experiment,
    synth_generate,
    top_k_indices,
    write_csv,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DataError",
    "IoError",
    "NumericError",
    "__version__",
    "amplitude",
    "augment",
    "correlation_matrix",
    "cross_variation_patch",
    "frequency_filter",
    "frequency_filter_augment",
    "irdft",
    "load_csv",
    "predict",
    "rdft",
    "run_experiment",
    "synth_generate",
    "top_k_indices",
    "write_csv",
]
