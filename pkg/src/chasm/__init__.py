"""Streaming changepoint detection via the spectrum of an online dynamics estimate."""

from .bias import BiasExperiment, BiasPoint, marginal_equivalence_demo, run_bias
from .dynamics import DynamicsEstimator
from .errors import NumericsError
from .metrics import ArlResult, EvalConfig, Outcome, arl, classify_single, prf_multi, prf_single
from .mewma import ComplexMewma, beta
from .pipeline import AbortedRun, ChasmDetector, DetectionRecord, DetectorConfig, stack_lags
from .spectrum import (
    AlignedSpectrum,
    Permutation,
    align,
    alignment_cost,
    dominant_eigenvalues,
    solve_assignment,
)
from .synthetic import (
    ARL0_LENGTH,
    ARL1_LENGTH,
    DATASETS,
    NoiseSpec,
    Replication,
    VarModel,
    draw_noise,
    make_bivariate_dataset,
    make_dataset,
    make_fullrank_highdim,
    make_sparse_highdim,
    random_noise_covariance,
    rotation_transition,
    sample_unit_disk,
    simulate,
    stationary_covariance,
)

__version__ = "0.1.0"

__all__ = [
    "AbortedRun",
    "AlignedSpectrum",
    "ArlResult",
    "ARL0_LENGTH",
    "ARL1_LENGTH",
    "BiasExperiment",
    "BiasPoint",
    "ChasmDetector",
    "ComplexMewma",
    "DATASETS",
    "DetectionRecord",
    "DetectorConfig",
    "DynamicsEstimator",
    "EvalConfig",
    "NoiseSpec",
    "NumericsError",
    "Outcome",
    "Permutation",
    "Replication",
    "VarModel",
    "align",
    "alignment_cost",
    "arl",
    "beta",
    "classify_single",
    "dominant_eigenvalues",
    "draw_noise",
    "make_bivariate_dataset",
    "make_dataset",
    "make_fullrank_highdim",
    "make_sparse_highdim",
    "marginal_equivalence_demo",
    "prf_multi",
    "prf_single",
    "random_noise_covariance",
    "rotation_transition",
    "run_bias",
    "sample_unit_disk",
    "simulate",
    "solve_assignment",
    "stack_lags",
    "stationary_covariance",
    "__version__",
]
