"""Empirical covariances, the SVD of C_XY and the coefficients cached on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from xcov.errors import DimensionError

__all__ = [
    "EmpiricalSvd",
    "SampleSet",
    "cross_covariance",
    "empirical_covariances",
    "svd_from_matrices",
    "svd_with_coeffs",
]

FloatArray = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class SampleSet:
    """``T`` paired observations stored column-wise: X is ``n x T``, Y is ``p x T``."""

    X: FloatArray
    Y: FloatArray

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=np.float64)
        Y = np.asarray(self.Y, dtype=np.float64)
        if X.ndim != 2 or Y.ndim != 2:
            raise DimensionError("X and Y must be two-dimensional")
        if X.shape[1] != Y.shape[1]:
            raise DimensionError(f"X has T={X.shape[1]} columns but Y has T={Y.shape[1]}")
        if X.shape[0] > Y.shape[0]:
            raise DimensionError(f"expected n <= p, got n={X.shape[0]}, p={Y.shape[0]}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.Y.shape[0]

    @property
    def T(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class EmpiricalSvd:
    """Thin SVD ``C_XY = U diag(s) V'`` plus the quadratic-form coefficients.

    ``coeff_A[l] = u_l' C_X u_l`` and ``coeff_B[l] = v_l' C_Y v_l``;
    ``coeff_B_tail`` is the same sum taken over an orthonormal completion of
    ``v_1..v_n`` in R^p.
    """

    cxy: FloatArray
    s: FloatArray
    U: FloatArray
    V: FloatArray
    coeff_A: FloatArray
    coeff_B: FloatArray
    coeff_B_tail: float
    trace_cx: float
    trace_cy: float
    T: int

    @property
    def n(self) -> int:
        return self.cxy.shape[0]

    @property
    def p(self) -> int:
        return self.cxy.shape[1]


def cross_covariance(sample: SampleSet) -> FloatArray:
    return sample.X @ sample.Y.T / sample.T


def empirical_covariances(sample: SampleSet) -> tuple[FloatArray, FloatArray]:
    cx = sample.X @ sample.X.T / sample.T
    cy = sample.Y @ sample.Y.T / sample.T
    return 0.5 * (cx + cx.T), 0.5 * (cy + cy.T)


def svd_from_matrices(cxy: FloatArray, cx: FloatArray, cy: FloatArray, T: int) -> EmpiricalSvd:
    cxy = np.asarray(cxy, dtype=np.float64)
    n, p = cxy.shape
    if n > p:
        raise DimensionError(f"expected n <= p, got n={n}, p={p}")
    if cx.shape != (n, n) or cy.shape != (p, p):
        raise DimensionError(f"covariances {cx.shape}, {cy.shape} do not match C_XY {cxy.shape}")
    U, s, Vt = np.linalg.svd(cxy, full_matrices=False)
    V = Vt.T
    coeff_A = np.einsum("ij,ij->j", U, cx @ U)
    coeff_B = np.einsum("ij,ij->j", V, cy @ V)
    trace_cy = float(np.trace(cy))
    # trace completeness stands in for completing v_1..v_n to a basis of R^p
    tail = trace_cy - float(coeff_B.sum())
    return EmpiricalSvd(
        cxy=cxy,
        s=s,
        U=U,
        V=V,
        coeff_A=coeff_A,
        coeff_B=coeff_B,
        coeff_B_tail=tail,
        trace_cx=float(np.trace(cx)),
        trace_cy=trace_cy,
        T=int(T),
    )


def svd_with_coeffs(sample: SampleSet) -> EmpiricalSvd:
    cx, cy = empirical_covariances(sample)
    return svd_from_matrices(cross_covariance(sample), cx, cy, sample.T)
