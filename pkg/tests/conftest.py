from __future__ import annotations

import numpy as np
import pytest

from xcov.empirical import svd_with_coeffs
from xcov.model import Bimodal, FactorModel, ModelSpec, build_model, make_rng, sample


@pytest.fixture
def factor_case():
    """A small factor-model sample with its truth and cached SVD."""
    spec = ModelSpec(FactorModel(0.3, 0.2, 0.5, 0.5), n=30, p=45, T=80, seed=11)
    rng = make_rng(spec.seed)
    model = build_model(spec, rng)
    smp = sample(model, spec.T, rng)
    return model, smp, svd_with_coeffs(smp)


@pytest.fixture
def bimodal_case():
    spec = ModelSpec(Bimodal(), n=40, p=70, T=100, seed=3)
    rng = make_rng(spec.seed)
    model = build_model(spec, rng)
    smp = sample(model, spec.T, rng)
    return model, smp, svd_with_coeffs(smp)


def random_instance(rng: np.random.Generator, n: int, p: int, T: int):
    """Correlated Gaussian data with a generic (non-identity) joint covariance."""
    L = rng.standard_normal((n + p, n + p)) / np.sqrt(n + p)
    W = (np.eye(n + p) + L) @ rng.standard_normal((n + p, T))
    return W[:n], W[n:]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
