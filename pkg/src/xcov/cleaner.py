"""Cleaning the singular values of an empirical cross-covariance matrix.

Each empirical singular value ``s_k`` is mapped to

    s_k * Im L(z) / Im H(z),   z = s_k + i * eta,   eta = (n p T)^(-1/6)

where ``L`` is one of the data-only estimates from :mod:`xcov.resolvent`.
Algorithm 1 uses the general ``Theta`` estimate and needs the full SVD with its
cached coefficients; Algorithm 2 assumes identity true covariances and needs
only the singular values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from xcov.empirical import EmpiricalSvd
from xcov.errors import EvaluationError, PreconditionError
from xcov.resolvent import mode_sums, thm1_from_parts, thm2_from_parts

__all__ = [
    "Algorithm",
    "CleaningOptions",
    "CleaningResult",
    "clean_algo1",
    "clean_algo2",
    "default_eta",
    "frobenius_target",
    "isotonic_pava",
    "overfitting_predict",
    "rescale_frobenius",
    "rie_matrix",
    "write_spectrum_csv",
]

IM_H_TOL = 1e-30

FLAG_DEGENERATE = "degenerate_im_h"
FLAG_BRANCH = "branch_cut"
FLAG_ZERO = "zero_singular_value"
FLAG_POLE = "pole"


class Algorithm(str, Enum):
    ALGO1 = "algo1"
    ALGO2 = "algo2"


@dataclass(frozen=True)
class CleaningOptions:
    eta: float | None = None
    isotonic: bool = True
    clip_negative: bool = False


@dataclass(frozen=True, eq=False)
class CleaningResult:
    s_empirical: NDArray[np.float64]
    s_cleaned: NDArray[np.float64]
    eta: float
    algorithm: Algorithm
    isotonic_applied: bool
    rescaled: bool
    per_mode_ratio: NDArray[np.float64]
    mode_flags: tuple[str, ...]
    notes: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.s_empirical)


def default_eta(n: int, p: int, T: int) -> float:
    return float((n * p * T) ** (-1.0 / 6.0))


def isotonic_pava(values: ArrayLike, weights: ArrayLike | None = None) -> NDArray[np.float64]:
    """Least-squares projection onto non-increasing sequences (pool adjacent violators)."""
    y = np.asarray(values, dtype=np.float64)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    if y.shape != w.shape or y.ndim != 1:
        raise PreconditionError("values and weights must be 1-d arrays of equal length")
    # blocks as (weighted mean, weight, length); merge while a later block exceeds an earlier one
    means: list[float] = []
    wts: list[float] = []
    lens: list[int] = []
    for yi, wi in zip(y, w):
        means.append(float(yi))
        wts.append(float(wi))
        lens.append(1)
        while len(means) > 1 and means[-2] < means[-1]:
            m2, w2, l2 = means.pop(), wts.pop(), lens.pop()
            wt = wts[-1] + w2
            means[-1] = (means[-1] * wts[-1] + m2 * w2) / wt
            wts[-1] = wt
            lens[-1] += l2
    return np.repeat(np.array(means), lens)


def _fill_from_neighbours(values: NDArray[np.float64], valid: NDArray[np.bool_]) -> NDArray[np.float64]:
    """Replace invalid entries by the value at the nearest valid index (lower index on ties)."""
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        raise EvaluationError("no mode could be cleaned: Im H vanished everywhere")
    out = values.copy()
    for k in np.flatnonzero(~valid):
        out[k] = values[idx[np.argmin(np.abs(idx - k))]]
    return out


def _finish(
    s: NDArray[np.float64],
    raw: NDArray[np.float64],
    im_h: NDArray[np.float64],
    ok: NDArray[np.bool_],
    failure_flag: str,
    eta: float,
    algorithm: Algorithm,
    options: CleaningOptions,
) -> CleaningResult:
    zero = s == 0
    degenerate = ~zero & (np.abs(im_h) < IM_H_TOL)
    branch = ~zero & ~degenerate & ~ok
    valid = ~(zero | degenerate | branch)

    cleaned = np.where(zero, 0.0, raw)
    if np.any(degenerate | branch):
        # zero modes are exact, so they count as valid neighbours
        cleaned = _fill_from_neighbours(cleaned, valid | zero)

    flags = []
    for k in range(len(s)):
        if zero[k]:
            flags.append(FLAG_ZERO)
        elif degenerate[k]:
            flags.append(FLAG_DEGENERATE)
        elif branch[k]:
            flags.append(failure_flag)
        else:
            flags.append("")

    if options.isotonic:
        cleaned = isotonic_pava(cleaned)
    if options.clip_negative:
        cleaned = np.maximum(cleaned, 0.0)
    return CleaningResult(
        s_empirical=s,
        s_cleaned=cleaned,
        eta=eta,
        algorithm=algorithm,
        isotonic_applied=options.isotonic,
        rescaled=False,
        per_mode_ratio=_ratio(cleaned, s),
        mode_flags=tuple(flags),
    )


def _ratio(cleaned: NDArray[np.float64], s: NDArray[np.float64]) -> NDArray[np.float64]:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, cleaned / np.where(s > 0, s, 1.0), np.nan)


def clean_algo1(svd: EmpiricalSvd, options: CleaningOptions | None = None) -> CleaningResult:
    """Clean with the general estimate; works for arbitrary true covariances."""
    options = options or CleaningOptions()
    n, p, T = svd.n, svd.p, svd.T
    eta = default_eta(n, p, T) if options.eta is None else float(options.eta)
    if eta <= 0:
        raise PreconditionError(f"eta must be positive, got {eta}")
    s = svd.s
    z = s + 1j * eta
    stack = np.column_stack([s**2, svd.coeff_A, svd.coeff_B])
    sums = mode_sums(s, z, stack) / T
    h, a = sums[:, 0], sums[:, 1]
    b = sums[:, 2] + svd.coeff_B_tail / (T * z**2)
    _, L, ok = thm1_from_parts(z, h, a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = s * L.imag / h.imag
    return _finish(s, raw, h.imag, ok, FLAG_POLE, eta, Algorithm.ALGO1, options)


def clean_algo2(s: ArrayLike, n: int, p: int, T: int, options: CleaningOptions | None = None) -> CleaningResult:
    """Clean from singular values alone; valid when the true covariances are identities.

    Singular values are sorted non-increasing before cleaning.
    """
    options = options or CleaningOptions()
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1 or len(s) != n:
        raise PreconditionError(f"expected {n} singular values, got shape {s.shape}")
    if np.any(s < 0):
        raise PreconditionError("singular values must be non-negative")
    notes: tuple[str, ...] = ()
    if np.any(np.diff(s) > 0):
        s = np.sort(s, kind="stable")[::-1]
        notes = ("singular values were re-sorted to non-increasing order",)
    eta = default_eta(n, p, T) if options.eta is None else float(options.eta)
    if eta <= 0:
        raise PreconditionError(f"eta must be positive, got {eta}")
    z = s + 1j * eta
    g = mode_sums(s, z, np.ones_like(s))[:, 0] / T
    h = z**2 * g - n / T
    _, L, ok = thm2_from_parts(z, g, h, n, p, T)
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = s * L.imag / h.imag
    result = _finish(s, raw, h.imag, ok, FLAG_BRANCH, eta, Algorithm.ALGO2, options)
    return replace(result, notes=result.notes + notes)


def frobenius_target(svd: EmpiricalSvd) -> float:
    """Unbiased estimate of ``||C||_F^2`` from the data (may be negative)."""
    T = svd.T
    raw = float(np.sum(svd.s**2)) - svd.trace_cx * svd.trace_cy / T
    return raw / (1.0 + 1.0 / T - 2.0 / T**2)


def rescale_frobenius(result: CleaningResult, svd: EmpiricalSvd) -> CleaningResult:
    """Scale the cleaned values so their squared norm equals the positive part of the unbiased estimate."""
    target = max(0.0, frobenius_target(svd))
    current = float(np.sum(result.s_cleaned**2))
    notes = result.notes
    if target == 0.0:
        cleaned = np.zeros_like(result.s_cleaned)
        if current > 0:
            notes += ("unbiased norm estimate was not positive; cleaned values set to 0",)
    elif current == 0.0:
        return replace(result, notes=notes + ("cleaned values are all zero; rescale skipped",))
    else:
        cleaned = result.s_cleaned * np.sqrt(target / current)
    return replace(
        result,
        s_cleaned=cleaned,
        per_mode_ratio=_ratio(cleaned, result.s_empirical),
        rescaled=True,
        notes=notes,
    )


def overfitting_predict(result: CleaningResult) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Predicted out-of-sample / in-sample ratio per mode, and the mask of modes where it is undefined."""
    ratio = _ratio(result.s_cleaned, result.s_empirical)
    return ratio, np.isnan(ratio)


def rie_matrix(svd: EmpiricalSvd, result: CleaningResult) -> NDArray[np.float64]:
    return (svd.U * result.s_cleaned) @ svd.V.T


def write_spectrum_csv(path: str | Path, result: CleaningResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "s_empirical", "s_cleaned", "ratio", "flags"])
        for k in range(result.n):
            ratio = result.per_mode_ratio[k]
            w.writerow(
                [
                    k + 1,
                    repr(float(result.s_empirical[k])),
                    repr(float(result.s_cleaned[k])),
                    "" if np.isnan(ratio) else repr(float(ratio)),
                    result.mode_flags[k],
                ]
            )
