from __future__ import annotations

import numpy as np
import pytest

from xcov.empirical import SampleSet, svd_with_coeffs
from xcov.errors import DimensionError, PreconditionError
from xcov.model import Bimodal, ModelSpec, build_model, make_rng, sample
from xcov.oracle import (
    ledoit_peche_projection,
    limit_formula_check,
    oracle_L,
    oracle_report,
    oracle_singular_values,
)

from conftest import random_instance


def _least_squares_oracle(svd, truth):
    """Minimise ||U diag(x) V' - C||_F over x by solving the vectorised normal equations."""
    design = np.stack([np.outer(svd.U[:, k], svd.V[:, k]).ravel() for k in range(svd.n)], axis=1)
    x, *_ = np.linalg.lstsq(design, truth.ravel(), rcond=None)
    return x


@pytest.mark.parametrize("seed", range(10))
def test_oracle_values_minimise_frobenius_distance(seed):
    rng = make_rng(77, seed)
    n = int(rng.integers(2, 10))
    p = int(rng.integers(n, 14))
    smp = SampleSet(*random_instance(rng, n, p, 30))
    truth = rng.standard_normal((n, p))
    svd = svd_with_coeffs(smp)
    np.testing.assert_allclose(oracle_singular_values(svd, truth), _least_squares_oracle(svd, truth), atol=1e-9)


def test_truth_shape_checked(factor_case):
    _, _, svd = factor_case
    with pytest.raises(DimensionError):
        oracle_singular_values(svd, np.zeros((2, 2)))


def _isolated_modes(s, min_gap):
    gaps = np.abs(s[:, None] - s[None, :])
    np.fill_diagonal(gaps, np.inf)
    return [k for k in range(len(s)) if gaps[k].min() > min_gap and s[k] > min_gap]


def test_limit_formula_recovers_oracle_value():
    spec = ModelSpec(Bimodal(), n=20, p=35, T=50)
    rng = make_rng(6)
    model = build_model(spec, rng)
    svd = svd_with_coeffs(sample(model, spec.T, rng))
    modes = _isolated_modes(svd.s, 0.02)
    assert modes
    for k in modes[:3]:
        approx, exact = limit_formula_check(svd, model.block_C, k, epsilon=0.01)
        assert abs(approx - exact) < 1e-3


def test_limit_formula_preconditions(factor_case):
    model, _, svd = factor_case
    with pytest.raises(PreconditionError, match="contains another"):
        limit_formula_check(svd, model.block_C, 0, epsilon=10.0)
    with pytest.raises(PreconditionError):
        limit_formula_check(svd, model.block_C, svd.n, epsilon=1e-3)
    with pytest.raises(PreconditionError):
        limit_formula_check(svd, model.block_C, 0, epsilon=1e-3, points=100)


def test_oracle_report_bundle(bimodal_case):
    model, smp, svd = bimodal_case
    k = _isolated_modes(svd.s, 0.01)[0]
    rep = oracle_report(smp, model.block_C, zs=[0.5 + 1j], limit_modes=[(k, 0.005)], svd=svd)
    assert rep.l_true_at[0.5 + 1j] == oracle_L(smp, model.block_C, 0.5 + 1j, svd=svd)
    assert rep.limit_check[k][1] == rep.s_oracle[k]


def test_oracle_L_unknown_method(bimodal_case):
    model, smp, _ = bimodal_case
    with pytest.raises(PreconditionError):
        oracle_L(smp, model.block_C, 1j, method="nope")


def test_ledoit_peche_large_sample_limit():
    rng = make_rng(1)
    X, Y = random_instance(rng, 2, 3, 200_000)
    smp = SampleSet(X, Y)
    lp = ledoit_peche_projection(smp)
    assert lp.shape == (2, 3)
    np.testing.assert_allclose(lp, X @ Y.T / smp.T, atol=5e-3)


def test_ledoit_peche_shrinks_null_model():
    rng = make_rng(2)
    smp = SampleSet(rng.standard_normal((50, 400)), rng.standard_normal((80, 400)))
    lp = ledoit_peche_projection(smp)
    assert np.linalg.norm(lp) < np.linalg.norm(smp.X @ smp.Y.T / smp.T)
    with pytest.raises(PreconditionError):
        ledoit_peche_projection(smp, eta=0.0)
