from __future__ import annotations

import numpy as np
import pytest

from xcov.empirical import SampleSet, cross_covariance, empirical_covariances, svd_with_coeffs
from xcov.errors import DimensionError
from xcov.model import make_rng

from conftest import random_instance


def null_space_completion(V):
    Q, _ = np.linalg.qr(np.hstack([V, np.eye(V.shape[0])]))
    return Q[:, V.shape[1] : V.shape[0]]


def test_sample_set_validation():
    with pytest.raises(DimensionError, match="T=5.*T=6"):
        SampleSet(np.zeros((2, 5)), np.zeros((3, 6)))
    with pytest.raises(DimensionError):
        SampleSet(np.zeros((4, 5)), np.zeros((3, 5)))


def test_svd_reconstructs_cross_covariance():
    X, Y = random_instance(make_rng(0), 6, 9, 20)
    svd = svd_with_coeffs(SampleSet(X, Y))
    np.testing.assert_allclose((svd.U * svd.s) @ svd.V.T, X @ Y.T / 20, atol=1e-12)
    assert np.all(np.diff(svd.s) <= 0)


def test_coefficients_match_quadratic_forms():
    smp = SampleSet(*random_instance(make_rng(1), 5, 8, 30))
    svd = svd_with_coeffs(smp)
    cx, cy = empirical_covariances(smp)
    for k in range(5):
        assert svd.coeff_A[k] == pytest.approx(svd.U[:, k] @ cx @ svd.U[:, k], rel=1e-12)
        assert svd.coeff_B[k] == pytest.approx(svd.V[:, k] @ cy @ svd.V[:, k], rel=1e-12)
    # tail equals the quadratic forms over an explicit orthonormal completion of V
    W = null_space_completion(svd.V)
    assert svd.coeff_B_tail == pytest.approx(np.trace(W.T @ cy @ W), rel=1e-10)


def test_cross_covariance_definition():
    X, Y = random_instance(make_rng(2), 3, 4, 7)
    np.testing.assert_allclose(cross_covariance(SampleSet(X, Y)), sum(np.outer(X[:, t], Y[:, t]) for t in range(7)) / 7)
