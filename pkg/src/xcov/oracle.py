"""Simulation-only ground truth: oracle singular values, the true oracle function,
its Stieltjes-inversion limit, and the Ledoit-Péché comparator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from xcov.empirical import EmpiricalSvd, SampleSet, svd_with_coeffs
from xcov.errors import DimensionError, PreconditionError
from xcov.resolvent import DIRECT_SIZE_LIMIT, _as_z, _out, mode_sums

__all__ = [
    "OracleReport",
    "ledoit_peche_eigenvalues",
    "ledoit_peche_projection",
    "limit_formula_check",
    "oracle_L",
    "oracle_report",
    "oracle_singular_values",
]


def _check_truth(svd: EmpiricalSvd, truth: ArrayLike) -> NDArray[np.float64]:
    truth = np.asarray(truth, dtype=np.float64)
    if truth.shape != svd.cxy.shape:
        raise DimensionError(f"truth has shape {truth.shape}, expected {svd.cxy.shape}")
    return truth


def oracle_singular_values(svd: EmpiricalSvd, truth: ArrayLike) -> NDArray[np.float64]:
    """``u_k' C v_k`` for every mode: the Frobenius-optimal values along the empirical singular vectors."""
    truth = _check_truth(svd, truth)
    return np.einsum("ij,ij->j", svd.U, truth @ svd.V)


def oracle_L(
    sample: SampleSet,
    truth: ArrayLike,
    z: ArrayLike,
    *,
    method: str = "svd",
    svd: EmpiricalSvd | None = None,
):
    """True oracle function ``Tr[(z^2 - C_XY C_XY')^{-1} C_XY C'] / T``.

    ``method="svd"`` expands over the singular triplets and scales to large
    sizes; ``method="dense"`` inverts the resolvent directly (``n * p`` capped).
    """
    z = _as_z(z)
    if method == "svd":
        svd = svd if svd is not None else svd_with_coeffs(sample)
        weights = svd.s * oracle_singular_values(svd, truth)
        return _out(mode_sums(svd.s, z, weights)[..., 0] / svd.T)
    if method == "dense":
        if sample.n * sample.p > DIRECT_SIZE_LIMIT:
            raise PreconditionError(f"dense path limited to n*p <= {DIRECT_SIZE_LIMIT}")
        truth = np.asarray(truth, dtype=np.float64)
        cxy = sample.X @ sample.Y.T / sample.T
        if truth.shape != cxy.shape:
            raise DimensionError(f"truth has shape {truth.shape}, expected {cxy.shape}")
        M = cxy @ cxy.T
        P = cxy @ truth.T
        flat = z.reshape(-1)
        vals = np.array([np.trace(np.linalg.solve(zz**2 * np.eye(sample.n) - M, P)) for zz in flat]) / sample.T
        return _out(vals.reshape(z.shape))
    raise PreconditionError(f"unknown method {method!r}")


def _integrals(svd: EmpiricalSvd, weights: NDArray[np.float64], center: float, eps: float, eta: float, points: int):
    """Integrate Im L and Im(zG) over [center - eps, center + eps] at height eta.

    The abscissae follow ``x = center + eta * sinh(u)`` with ``u`` uniform, which
    turns the width-eta peak at ``center`` into a smooth integrand; the
    trapezoidal rule is then applied in ``u``.
    """
    umax = np.arcsinh(eps / eta)
    u = np.linspace(-umax, umax, points)
    x = center + eta * np.sinh(u)
    jac = eta * np.cosh(u)
    z = x + 1j * eta
    sums = mode_sums(svd.s, z, np.column_stack([weights, np.ones_like(svd.s)])) / svd.T
    im_l = sums[:, 0].imag * jac
    im_zg = (z * sums[:, 1]).imag * jac
    return np.trapezoid(im_l, u), np.trapezoid(im_zg, u)


def limit_formula_check(
    svd: EmpiricalSvd,
    truth: ArrayLike,
    k: int,
    epsilon: float,
    etas: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5),
    points: int = 4001,
) -> tuple[float, float]:
    """Recover ``u_k' C v_k`` numerically from the ratio of integrated imaginary parts.

    Returns ``(extrapolated_ratio, exact_value)``.  The ratio is computed for
    each ``eta`` (in decreasing order) and the last two are combined by
    Richardson extrapolation assuming an error linear in ``eta``.  ``k`` is
    zero-based.  ``epsilon`` must isolate ``s_k`` from the other singular values
    and keep the window inside ``(0, inf)``.
    """
    truth = _check_truth(svd, truth)
    s = svd.s
    if not 0 <= k < len(s):
        raise PreconditionError(f"mode index {k} out of range for n={len(s)}")
    if points < 2000:
        raise PreconditionError("use at least 2000 abscissae")
    others = np.delete(s, k)
    if np.any(np.abs(others - s[k]) <= epsilon):
        raise PreconditionError(f"[s_k - eps, s_k + eps] around s_{k}={s[k]:.6g} contains another singular value")
    if epsilon >= s[k]:
        raise PreconditionError(f"window must stay in (0, inf): epsilon={epsilon} >= s_k={s[k]:.6g}")
    etas = sorted(etas, reverse=True)
    if len(etas) < 2:
        raise PreconditionError("need at least two eta values")

    oracle = oracle_singular_values(svd, truth)
    weights = s * oracle
    ratios = []
    for eta in etas:
        num, den = _integrals(svd, weights, float(s[k]), epsilon, eta, points)
        ratios.append(num / den)
    e1, e0 = etas[-2], etas[-1]
    r1, r0 = ratios[-2], ratios[-1]
    extrapolated = (e1 * r0 - e0 * r1) / (e1 - e0)
    return float(extrapolated), float(oracle[k])


@dataclass(frozen=True, eq=False)
class OracleReport:
    s_oracle: NDArray[np.float64]
    l_true_at: dict[complex, complex] = field(default_factory=dict)
    limit_check: dict[int, tuple[float, float]] = field(default_factory=dict)


def oracle_report(
    sample: SampleSet,
    truth: ArrayLike,
    zs: Sequence[complex] = (),
    limit_modes: Sequence[tuple[int, float]] = (),
    svd: EmpiricalSvd | None = None,
) -> OracleReport:
    """Bundle the oracle quantities for one sample; ``limit_modes`` lists ``(k, epsilon)`` pairs."""
    svd = svd if svd is not None else svd_with_coeffs(sample)
    return OracleReport(
        s_oracle=oracle_singular_values(svd, truth),
        l_true_at={complex(z): complex(oracle_L(sample, truth, z, svd=svd)) for z in zs},
        limit_check={k: limit_formula_check(svd, truth, k, eps) for k, eps in limit_modes},
    )


def ledoit_peche_eigenvalues(lam: ArrayLike, q: float, eta: float) -> NDArray[np.float64]:
    """Ledoit-Péché map ``lam / |1 - q + q lam g(lam - i eta)|^2`` of a covariance spectrum.

    ``g`` is the Stieltjes transform of the spectrum ``lam`` itself and ``q`` the
    dimension-to-sample ratio.
    """
    if eta <= 0:
        raise PreconditionError(f"eta must be positive, got {eta}")
    lam = np.clip(np.asarray(lam, dtype=np.float64), 0.0, None)
    zz = lam - 1j * eta
    g = np.mean(1.0 / (zz[:, None] - lam[None, :]), axis=1)
    return lam / np.abs(1.0 - q + q * lam * g) ** 2


def ledoit_peche_projection(sample: SampleSet, eta: float | None = None) -> NDArray[np.float64]:
    """Upper-right ``n x p`` block of the Ledoit-Péché RIE of the stacked covariance.

    Eigenvalues of ``E = W W' / T`` (``W`` = X stacked on Y) are cleaned by
    :func:`ledoit_peche_eigenvalues` with ``q = (n+p)/T``; ``eta`` defaults to
    ``T^(-1/2)``.
    """
    T = sample.T
    W = np.vstack([sample.X, sample.Y])
    eta = T ** -0.5 if eta is None else float(eta)
    E = W @ W.T / T
    lam, Q = np.linalg.eigh(0.5 * (E + E.T))
    cleaned = ledoit_peche_eigenvalues(lam, W.shape[0] / T, eta)
    full = (Q * cleaned) @ Q.T
    return full[: sample.n, sample.n :]
