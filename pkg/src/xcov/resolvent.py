"""Spectral functions of C_XY evaluated off the real axis.

With ``G = (z^2 - C_XY C_XY')^{-1}`` and its partner on the ``p`` side, the
normalized traces

    G(z) = Tr G / T,   H(z) = Tr G C_XY C_XY' / T,
    A(z) = Tr G C_X / T,   B(z) = Tr G~ C_Y / T

all reduce to sums over the singular values once the SVD and its quadratic-form
coefficients are cached (see :class:`xcov.empirical.EmpiricalSvd`).  From them
two data-only estimates of the oracle function ``L(z) = Tr G C_XY C' / T`` are
built: a general one through ``Theta = z^2 A B / (1 + H)``, and one that needs
identity true covariances and goes through ``K``.

All functions accept a scalar or an array of ``z`` and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from xcov.empirical import EmpiricalSvd, SampleSet, cross_covariance, empirical_covariances
from xcov.errors import EvaluationError, PreconditionError

__all__ = [
    "DirectReference",
    "POLE_TOL",
    "SpectralPoint",
    "eval_A_B",
    "eval_G",
    "eval_H",
    "eval_L_thm1",
    "eval_L_thm2",
    "eval_direct_reference",
    "spectral_point",
]

POLE_TOL = 1e-14
DIRECT_SIZE_LIMIT = 10_000
_CHUNK = 256

Complex = Union[complex, NDArray[np.complex128]]


def _as_z(z: ArrayLike) -> NDArray[np.complex128]:
    z = np.asarray(z, dtype=np.complex128)
    if np.any(z.imag == 0):
        raise PreconditionError("z must lie off the real axis")
    return z


def _out(x: NDArray[np.complex128]) -> Complex:
    return complex(x) if x.ndim == 0 else x


def mode_sums(s: NDArray[np.float64], z: NDArray[np.complex128], coeffs: NDArray[np.float64]) -> NDArray[np.complex128]:
    """``sum_l coeffs[l, j] / (z^2 - s_l^2)`` for every z; shape ``z.shape + (k,)``.

    Evaluated in fixed-size blocks of z so memory stays bounded for large n
    while every z sees the same summation order.
    """
    s2 = np.asarray(s, dtype=np.float64) ** 2
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(len(s2), -1)
    flat = z.reshape(-1)
    out = np.empty((flat.size, coeffs.shape[1]), dtype=np.complex128)
    for start in range(0, flat.size, _CHUNK):
        zz = flat[start : start + _CHUNK] ** 2
        out[start : start + _CHUNK] = (1.0 / (zz[:, None] - s2[None, :])) @ coeffs
    return out.reshape(z.shape + (coeffs.shape[1],))


def _g_h_a_b(svd: EmpiricalSvd, z: NDArray[np.complex128]):
    stack = np.column_stack([np.ones_like(svd.s), svd.s**2, svd.coeff_A, svd.coeff_B])
    sums = mode_sums(svd.s, z, stack) / svd.T
    g, h, a, b = (sums[..., j] for j in range(4))
    b = b + svd.coeff_B_tail / (svd.T * z**2)
    return g, h, a, b


def eval_G(svd: EmpiricalSvd, z: ArrayLike) -> Complex:
    z = _as_z(z)
    return _out(mode_sums(svd.s, z, np.ones_like(svd.s))[..., 0] / svd.T)


def eval_H(svd: EmpiricalSvd, z: ArrayLike) -> Complex:
    z = _as_z(z)
    return _out(mode_sums(svd.s, z, svd.s**2)[..., 0] / svd.T)


def eval_A_B(svd: EmpiricalSvd, z: ArrayLike) -> tuple[Complex, Complex]:
    z = _as_z(z)
    _, _, a, b = _g_h_a_b(svd, z)
    return _out(a), _out(b)


# L estimates -----------------------------------------------------------------


def thm1_from_parts(z, h, a, b):
    """Return ``(theta, L, ok)`` for the general estimate; ``ok`` is False at poles."""
    one_h = 1.0 + h
    ok = np.abs(one_h) >= POLE_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = z**2 * a * b / one_h
        den = one_h - theta
        ok &= np.abs(den) >= POLE_TOL
        L = 1.0 - 1.0 / den
    return theta, L, ok


def thm2_from_parts(z, g, h, n: int, p: int, T: int):
    """Return ``(K, L, ok)`` for the identity-covariance estimate.

    ``ok`` is False where ``1 + H`` vanishes or ``1 + 4K`` lands on the
    principal square root's branch cut ``(-inf, 0]``.
    """
    one_h = 1.0 + h
    K = ((p - n) / T + z**2 * g) * g * one_h**2
    w = 1.0 + 4.0 * K
    ok = (np.abs(one_h) >= POLE_TOL) & ~((w.imag == 0) & (w.real <= 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        L = (1.0 + 2.0 * h - np.sqrt(w)) / (2.0 * one_h)
    return K, L, ok


def eval_L_thm1(svd: EmpiricalSvd, z: ArrayLike) -> Complex:
    """General data-only estimate ``(H - Theta) / (1 + H - Theta)`` of the oracle function."""
    z = _as_z(z)
    _, h, a, b = _g_h_a_b(svd, z)
    _, L, ok = thm1_from_parts(z, h, a, b)
    if not np.all(ok):
        bad = np.asarray(z)[~ok].reshape(-1)[0]
        raise EvaluationError(f"pole of the Theta-based estimate at z={bad}")
    return _out(L)


def eval_L_thm2(
    spectrum: EmpiricalSvd | ArrayLike,
    z: ArrayLike,
    n: int | None = None,
    p: int | None = None,
    T: int | None = None,
) -> Complex:
    """Identity-covariance estimate ``(1 + 2H - sqrt(1 + 4K)) / (2(1 + H))``.

    ``spectrum`` is either an :class:`EmpiricalSvd` or the singular values
    alone, in which case ``n``, ``p`` and ``T`` are required.  ``H`` is taken
    as ``z^2 G - n/T``.
    """
    z = _as_z(z)
    if isinstance(spectrum, EmpiricalSvd):
        s = spectrum.s
        n = spectrum.n if n is None else n
        p = spectrum.p if p is None else p
        T = spectrum.T if T is None else T
    else:
        s = np.asarray(spectrum, dtype=np.float64)
        if n is None or p is None or T is None:
            raise PreconditionError("n, p and T are required when passing bare singular values")
    g = mode_sums(s, z, np.ones_like(s))[..., 0] / T
    h = z**2 * g - n / T
    _, L, ok = thm2_from_parts(z, g, h, n, p, T)
    if not np.all(ok):
        bad = np.asarray(z)[~ok].reshape(-1)[0]
        raise EvaluationError(f"branch cut or pole of the K-based estimate at z={bad}")
    return _out(L)


@dataclass(frozen=True)
class SpectralPoint:
    z: complex
    g: complex
    h: complex
    a: complex
    b: complex
    theta: complex
    k: complex
    l_thm1: complex
    l_thm2: complex | None


def spectral_point(svd: EmpiricalSvd, z: complex, *, identity_covariances: bool = False) -> SpectralPoint:
    """Every resolvent quantity at one ``z``.

    ``l_thm2`` is only filled in when the caller asserts identity true
    covariances; ``k`` is always reported.
    """
    zz = _as_z(z)
    g, h, a, b = _g_h_a_b(svd, zz)
    theta, l1, ok1 = thm1_from_parts(zz, h, a, b)
    if not ok1:
        raise EvaluationError(f"pole of the Theta-based estimate at z={z}")
    k, l2, ok2 = thm2_from_parts(zz, g, z**2 * g - svd.n / svd.T, svd.n, svd.p, svd.T)
    l_thm2 = None
    if identity_covariances:
        if not ok2:
            raise EvaluationError(f"branch cut or pole of the K-based estimate at z={z}")
        l_thm2 = complex(l2)
    return SpectralPoint(
        z=complex(z),
        g=complex(g),
        h=complex(h),
        a=complex(a),
        b=complex(b),
        theta=complex(theta),
        k=complex(k),
        l_thm1=complex(l1),
        l_thm2=l_thm2,
    )


# Dense reference -------------------------------------------------------------


@dataclass(frozen=True)
class DirectReference:
    z: complex
    g: complex
    h: complex
    a: complex
    b: complex
    l_true: complex | None


def eval_direct_reference(sample: SampleSet, z: complex, truth=None) -> DirectReference:
    """G, H, A, B (and the true L when ``truth`` is given) by dense complex inversion.

    Intended as a test oracle; refuses instances with ``n * p > 10_000``.
    """
    if sample.n * sample.p > DIRECT_SIZE_LIMIT:
        raise PreconditionError(f"dense reference limited to n*p <= {DIRECT_SIZE_LIMIT}, got {sample.n * sample.p}")
    zz = complex(_as_z(z))
    T = sample.T
    cxy = cross_covariance(sample)
    cx, cy = empirical_covariances(sample)
    M = cxy @ cxy.T
    G = np.linalg.inv(zz**2 * np.eye(sample.n) - M)
    Gt = np.linalg.inv(zz**2 * np.eye(sample.p) - cxy.T @ cxy)
    l_true = None
    if truth is not None:
        truth = np.asarray(truth, dtype=np.float64)
        if truth.shape != cxy.shape:
            raise PreconditionError(f"truth has shape {truth.shape}, expected {cxy.shape}")
        l_true = complex(np.trace(G @ cxy @ truth.T) / T)
    return DirectReference(
        z=zz,
        g=complex(np.trace(G) / T),
        h=complex(np.trace(G @ M) / T),
        a=complex(np.trace(G @ cx) / T),
        b=complex(np.trace(Gt @ cy) / T),
        l_true=l_true,
    )
