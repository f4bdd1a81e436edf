"""Ground-truth joint covariance models and Gaussian sampling.

Every model is a symmetric positive semi-definite matrix

    Sigma = [[A, C], [C', B]]

of size ``(n + p) x (n + p)`` with ``n <= p``; ``C`` is the true cross-covariance
that the cleaners try to recover.  Samples are drawn as ``sqrt_sigma @ Z`` with
``Z`` standard Gaussian.

Random streams are numpy ``Generator`` objects backed by the counter-based
Philox bit generator.  Per-trial streams are keyed by ``(seed, *keys)`` through
``SeedSequence`` spawn keys, so trials can run in any order or in parallel and
still reproduce bit-for-bit.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from numpy.typing import NDArray

from xcov.empirical import SampleSet
from xcov.errors import DimensionError, PreconditionError

__all__ = [
    "Bimodal",
    "FactorModel",
    "JointGaussianModel",
    "ModelSpec",
    "Null",
    "Wishart",
    "build_bimodal_model",
    "build_factor_model",
    "build_model",
    "build_regression_model",
    "build_wishart_model",
    "haar_orthonormal",
    "load_model_spec",
    "make_rng",
    "sample",
]

FloatArray = NDArray[np.float64]


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Philox stream for ``seed``, or for the sub-stream addressed by ``keys`` (e.g. model, trial)."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class JointGaussianModel:
    block_A: FloatArray
    block_C: FloatArray
    block_B: FloatArray
    sqrt_sigma: FloatArray
    report: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.block_C.shape[0]

    @property
    def p(self) -> int:
        return self.block_C.shape[1]

    @property
    def sigma(self) -> FloatArray:
        return np.block([[self.block_A, self.block_C], [self.block_C.T, self.block_B]])

    @classmethod
    def from_blocks(
        cls,
        block_A: FloatArray,
        block_C: FloatArray,
        block_B: FloatArray,
        report: tuple[str, ...] = (),
    ) -> "JointGaussianModel":
        block_A = np.asarray(block_A, dtype=np.float64)
        block_C = np.asarray(block_C, dtype=np.float64)
        block_B = np.asarray(block_B, dtype=np.float64)
        n, p = block_C.shape
        if block_A.shape != (n, n) or block_B.shape != (p, p):
            raise DimensionError(
                f"blocks do not fit together: A {block_A.shape}, C {block_C.shape}, B {block_B.shape}"
            )
        if n > p:
            raise DimensionError(f"expected n <= p, got n={n}, p={p}")
        sigma = np.block([[block_A, block_C], [block_C.T, block_B]])
        return cls(block_A, block_C, block_B, _psd_factor(sigma), tuple(report))


def _psd_factor(sigma: FloatArray) -> FloatArray:
    """Cholesky factor when positive definite, else the clipped symmetric square root."""
    sigma = 0.5 * (sigma + sigma.T)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    w, Q = np.linalg.eigh(sigma)
    scale = max(float(np.max(np.abs(w))), 1.0)
    if w.min() < -1e-10 * scale:
        raise PreconditionError(f"covariance is not PSD (smallest eigenvalue {w.min():.3e})")
    return (Q * np.sqrt(np.clip(w, 0.0, None))) @ Q.T


def haar_orthonormal(rng: np.random.Generator, rows: int, cols: int) -> FloatArray:
    """``rows x cols`` matrix with Haar-distributed orthonormal columns."""
    if cols > rows:
        raise DimensionError(f"cannot draw {cols} orthonormal columns in dimension {rows}")
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


# Model variants -------------------------------------------------------------


@dataclass(frozen=True)
class Null:
    """``Sigma = I_{n+p}``: X and Y independent white noise."""


@dataclass(frozen=True)
class Bimodal:
    """``Sigma = [[I, C], [C', I]]`` with true singular values from a two-uniform mixture.

    Each true singular value falls in ``low`` with probability ``weight`` and in
    ``high`` otherwise.
    """

    low: tuple[float, float] = (0.1, 0.25)
    high: tuple[float, float] = (0.5, 0.65)
    weight: float = 0.5

    def __post_init__(self) -> None:
        for a, b in (self.low, self.high):
            if not 0.0 <= a <= b:
                raise PreconditionError(f"invalid interval [{a}, {b}]")
            if b >= 1.0:
                raise PreconditionError(
                    f"interval [{a}, {b}] reaches 1: [[I, C], [C', I]] would not be PSD"
                )
        if not 0.0 <= self.weight <= 1.0:
            raise PreconditionError(f"weight must lie in [0, 1], got {self.weight}")


@dataclass(frozen=True)
class FactorModel:
    """``Y = C'X + noise``: ``Sigma = [[I, C], [C', C'C + noise_var I]]``."""

    nonzero_fraction: float = 0.0
    sv_low: float = 0.2
    sv_high: float = 0.5
    noise_var: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.nonzero_fraction <= 1.0:
            raise PreconditionError(f"nonzero_fraction must lie in [0, 1], got {self.nonzero_fraction}")
        if not 0.0 < self.sv_low <= self.sv_high:
            raise PreconditionError(f"need 0 < sv_low <= sv_high, got [{self.sv_low}, {self.sv_high}]")
        if self.noise_var < 0.0:
            raise PreconditionError(f"noise_var must be >= 0, got {self.noise_var}")


@dataclass(frozen=True)
class Wishart:
    """``Sigma = H H' / (2m)`` with ``H`` an ``m x 2m`` standard Gaussian matrix, ``m = n + p``."""

    m: int


Variant = Union[Null, Bimodal, FactorModel, Wishart]


@dataclass(frozen=True)
class ModelSpec:
    variant: Variant
    n: int
    p: int
    T: int
    seed: int = 0
    freeze_truth: bool = False

    def __post_init__(self) -> None:
        if min(self.n, self.p, self.T) < 1:
            raise PreconditionError(f"n, p, T must be positive, got {self.n}, {self.p}, {self.T}")
        if self.n > self.p:
            raise DimensionError(f"expected n <= p, got n={self.n}, p={self.p}")
        if isinstance(self.variant, Wishart) and self.variant.m != self.n + self.p:
            raise DimensionError(f"Wishart needs m = n + p = {self.n + self.p}, got m={self.variant.m}")


def build_factor_model(spec: ModelSpec, rng: np.random.Generator) -> JointGaussianModel:
    v = spec.variant
    if not isinstance(v, FactorModel):
        raise PreconditionError(f"expected a FactorModel spec, got {type(v).__name__}")
    n, p = spec.n, spec.p
    report: list[str] = []
    # small epsilon keeps 0.1 * 200 from flooring to 19
    k = math.floor(v.nonzero_fraction * n + 1e-9)
    if v.nonzero_fraction > 0 and k == 0:
        k = 1
        report.append(f"nonzero_fraction*n = {v.nonzero_fraction * n:.3g} < 1; rounded up to one mode")
    sv = np.zeros(n)
    sv[:k] = rng.uniform(v.sv_low, v.sv_high, size=k)
    U = haar_orthonormal(rng, n, n)
    V = haar_orthonormal(rng, p, n)
    C = (U * sv) @ V.T
    B = C.T @ C + v.noise_var * np.eye(p)
    return JointGaussianModel.from_blocks(np.eye(n), C, B, tuple(report))


def build_wishart_model(spec: ModelSpec, rng: np.random.Generator) -> JointGaussianModel:
    v = spec.variant
    if not isinstance(v, Wishart):
        raise PreconditionError(f"expected a Wishart spec, got {type(v).__name__}")
    m = v.m
    H = rng.standard_normal((m, 2 * m))
    sigma = H @ H.T / (2 * m)
    n = spec.n
    return JointGaussianModel.from_blocks(sigma[:n, :n], sigma[:n, n:], sigma[n:, n:])


def build_bimodal_model(n: int, p: int, density: Bimodal, rng: np.random.Generator) -> JointGaussianModel:
    if n > p:
        raise DimensionError(f"expected n <= p, got n={n}, p={p}")
    in_low = rng.random(n) < density.weight
    sv = np.where(
        in_low,
        rng.uniform(*density.low, size=n),
        rng.uniform(*density.high, size=n),
    )
    U = haar_orthonormal(rng, n, n)
    V = haar_orthonormal(rng, p, n)
    C = (U * sv) @ V.T
    return JointGaussianModel.from_blocks(np.eye(n), C, np.eye(p))


def build_regression_model(A: FloatArray, noise_var: float) -> JointGaussianModel:
    """Model of ``R = A F + noise`` with ``F`` standard Gaussian; X plays R, Y plays F."""
    A = np.asarray(A, dtype=np.float64)
    n, p = A.shape
    return JointGaussianModel.from_blocks(A @ A.T + noise_var * np.eye(n), A, np.eye(p))


def build_model(spec: ModelSpec, rng: np.random.Generator) -> JointGaussianModel:
    v = spec.variant
    if isinstance(v, Null):
        return JointGaussianModel.from_blocks(np.eye(spec.n), np.zeros((spec.n, spec.p)), np.eye(spec.p))
    if isinstance(v, Bimodal):
        return build_bimodal_model(spec.n, spec.p, v, rng)
    if isinstance(v, FactorModel):
        return build_factor_model(spec, rng)
    if isinstance(v, Wishart):
        return build_wishart_model(spec, rng)
    raise PreconditionError(f"unknown model variant {v!r}")


def sample(model: JointGaussianModel, T: int, rng: np.random.Generator) -> SampleSet:
    """Draw ``T`` i.i.d. columns of ``N(0, Sigma)`` and split them into X and Y."""
    if T < 1:
        raise PreconditionError(f"T must be >= 1, got {T}")
    Z = rng.standard_normal((model.n + model.p, T))
    W = model.sqrt_sigma @ Z
    return SampleSet(W[: model.n], W[model.n :])


# Config files -----------------------------------------------------------------

_VARIANT_KEYS = {
    "null": set(),
    "bimodal": {"low_a", "low_b", "high_a", "high_b", "weight"},
    "factor": {"fraction", "sv_low", "sv_high", "noise_var"},
    "wishart": {"m"},
}
_COMMON_KEYS = {"variant", "n", "p", "t", "seed", "freeze_truth"}


def load_model_spec(path: str | Path) -> ModelSpec:
    """Read a ``[model]`` section of key = value pairs.

    Keys: ``variant`` (null | bimodal | factor | wishart), ``n``, ``p``, ``T``,
    ``seed``, ``freeze_truth``; factor adds ``fraction``, ``sv_low``,
    ``sv_high``, ``noise_var``; bimodal adds ``low_a``, ``low_b``, ``high_a``,
    ``high_b``, ``weight``; wishart may give ``m`` (defaults to ``n + p``).
    """
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section("model"):
        raise PreconditionError(f"{path}: missing [model] section")
    sec = parser["model"]
    variant = sec.get("variant", "").strip().lower()
    if variant not in _VARIANT_KEYS:
        raise PreconditionError(f"{path}: unknown variant {variant!r}")
    unknown = set(sec.keys()) - _COMMON_KEYS - _VARIANT_KEYS[variant]
    if unknown:
        raise PreconditionError(f"{path}: unknown keys for {variant}: {sorted(unknown)}")

    n, p, T = sec.getint("n"), sec.getint("p"), sec.getint("t")
    if n is None or p is None or T is None:
        raise PreconditionError(f"{path}: n, p and T are required")
    if variant == "null":
        v: Variant = Null()
    elif variant == "bimodal":
        d = Bimodal()
        v = Bimodal(
            low=(sec.getfloat("low_a", d.low[0]), sec.getfloat("low_b", d.low[1])),
            high=(sec.getfloat("high_a", d.high[0]), sec.getfloat("high_b", d.high[1])),
            weight=sec.getfloat("weight", d.weight),
        )
    elif variant == "factor":
        d = FactorModel()
        v = FactorModel(
            nonzero_fraction=sec.getfloat("fraction", d.nonzero_fraction),
            sv_low=sec.getfloat("sv_low", d.sv_low),
            sv_high=sec.getfloat("sv_high", d.sv_high),
            noise_var=sec.getfloat("noise_var", d.noise_var),
        )
    else:
        v = Wishart(m=sec.getint("m", n + p))
    return ModelSpec(
        variant=v,
        n=n,
        p=p,
        T=T,
        seed=sec.getint("seed", 0),
        freeze_truth=sec.getboolean("freeze_truth", False),
    )
