"""Rotationally invariant cleaning of empirical cross-covariance matrices."""

from __future__ import annotations

from xcov.cleaner import (
    Algorithm,
    CleaningOptions,
    CleaningResult,
    clean_algo1,
    clean_algo2,
    frobenius_target,
    isotonic_pava,
    overfitting_predict,
    rescale_frobenius,
    rie_matrix,
)
from xcov.empirical import EmpiricalSvd, SampleSet, svd_with_coeffs
from xcov.errors import DimensionError, EvaluationError, MatrixFormatError, PreconditionError, XcovError

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "CleaningOptions",
    "CleaningResult",
    "DimensionError",
    "EmpiricalSvd",
    "EvaluationError",
    "MatrixFormatError",
    "PreconditionError",
    "SampleSet",
    "XcovError",
    "clean_algo1",
    "clean_algo2",
    "frobenius_target",
    "isotonic_pava",
    "overfitting_predict",
    "rescale_frobenius",
    "rie_matrix",
    "svd_with_coeffs",
]
