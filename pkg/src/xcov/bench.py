"""Monte-Carlo experiments and their reports.

Every experiment draws trial ``i`` of model ``m`` from the stream
``make_rng(seed, m, i)``, so trials are independent of scheduling and results
are gathered in trial order.  Each ``run_*`` function returns a result object
with ``summary()`` (JSON-ready dict) and ``tables()`` (CSV tables), both
consumed by :func:`emit_report`.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np
from numpy.typing import NDArray

from xcov.cleaner import CleaningOptions, clean_algo1, clean_algo2, frobenius_target, rie_matrix
from xcov.empirical import svd_with_coeffs
from xcov.model import (
    Bimodal,
    FactorModel,
    JointGaussianModel,
    ModelSpec,
    Null,
    Wishart,
    build_model,
    build_regression_model,
    haar_orthonormal,
    make_rng,
    sample,
)
from xcov.oracle import ledoit_peche_projection, oracle_L, oracle_singular_values
from xcov.resolvent import eval_L_thm1, eval_L_thm2

__all__ = [
    "OracleValidationConfig",
    "OverfitConfig",
    "OverfitTrial",
    "Table1Config",
    "TrialReport",
    "emit_report",
    "mean_ci",
    "run_oracle_validation",
    "run_overfitting",
    "run_prop3_checks",
    "run_simulation",
    "run_table1",
    "table1_models",
]

Z95 = 1.96
ABS_FALLBACK = 1e-12

R = TypeVar("R")


def _map(fn: Callable[[int], R], count: int, workers: int) -> list[R]:
    if workers <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def mean_ci(values: Iterable[float]) -> dict[str, float | int | None]:
    """Mean with a normal-theory 95% interval (1.96 SE) and the 2.5/97.5 percentiles."""
    x = np.asarray(list(values), dtype=np.float64)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return {"count": 0, "mean": None, "se": None, "half_width": None, "pct_lo": None, "pct_hi": None}
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else None
    return {
        "count": int(x.size),
        "mean": float(np.mean(x)),
        "median": float(np.median(x)),
        "se": se,
        "half_width": None if se is None else Z95 * se,
        "pct_lo": float(np.percentile(x, 2.5)),
        "pct_hi": float(np.percentile(x, 97.5)),
    }


def _distance(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    return float(np.linalg.norm(a - b))


# Table 1 --------------------------------------------------------------------


def table1_models(n: int = 200, p: int = 350, T: int = 500, seed: int = 0) -> dict[str, ModelSpec]:
    """Models (1)-(5): factor models with 0..40% nonzero modes; model (6): Wishart."""
    specs = {
        str(i + 1): ModelSpec(FactorModel(frac, 0.2, 0.5, 0.5), n=n, p=p, T=T, seed=seed)
        for i, frac in enumerate((0.0, 0.1, 0.2, 0.3, 0.4))
    }
    specs["6"] = ModelSpec(Wishart(m=n + p), n=n, p=p, T=T, seed=seed)
    return specs


@dataclass(frozen=True)
class Table1Config:
    n: int = 200
    p: int = 350
    T: int = 500
    trials: int = 100
    seed: int = 0
    isotonic: bool = True
    lp_eta: float | None = None
    freeze_truth: bool = False
    models: tuple[str, ...] = ("1", "2", "3", "4", "5", "6")
    workers: int = 1


@dataclass(frozen=True)
class TrialReport:
    model_id: str
    seed: int
    trial: int
    T: int
    n: int
    p: int
    dist_empirical: float
    dist_algo1: float
    dist_algo1_raw: float
    dist_algo2: float
    dist_lp: float
    quotient_emp: float
    quotient_lp: float
    quotient_emp_raw: float
    quotient_lp_raw: float


def _quotient(num: float, den: float) -> float:
    return 100.0 * num / den if den > 0 else float("nan")


def _table1_trial(
    model_id: str, model_index: int, spec: ModelSpec, config: Table1Config, frozen: JointGaussianModel | None, trial: int
) -> TrialReport:
    rng = make_rng(config.seed, model_index, trial)
    model = frozen if frozen is not None else build_model(spec, rng)
    smp = sample(model, spec.T, rng)
    svd = svd_with_coeffs(smp)
    truth = model.block_C
    d_emp = _distance(svd.cxy, truth)
    opts = CleaningOptions(isotonic=config.isotonic)
    d_a1 = _distance(rie_matrix(svd, clean_algo1(svd, opts)), truth)
    raw_opts = CleaningOptions(isotonic=not config.isotonic)
    d_a1_other = _distance(rie_matrix(svd, clean_algo1(svd, raw_opts)), truth)
    d_a1_raw = d_a1 if not config.isotonic else d_a1_other
    d_a2 = _distance(rie_matrix(svd, clean_algo2(svd.s, svd.n, svd.p, svd.T, opts)), truth)
    d_lp = _distance(ledoit_peche_projection(smp, eta=config.lp_eta), truth)
    return TrialReport(
        model_id=model_id,
        seed=config.seed,
        trial=trial,
        T=spec.T,
        n=spec.n,
        p=spec.p,
        dist_empirical=d_emp,
        dist_algo1=d_a1,
        dist_algo1_raw=d_a1_raw,
        dist_algo2=d_a2,
        dist_lp=d_lp,
        quotient_emp=_quotient(d_a1, d_emp),
        quotient_lp=_quotient(d_a1, d_lp),
        quotient_emp_raw=_quotient(d_a1_raw, d_emp),
        quotient_lp_raw=_quotient(d_a1_raw, d_lp),
    )


@dataclass
class Table1Result:
    config: Table1Config
    trials: list[TrialReport] = field(default_factory=list)

    def by_model(self) -> dict[str, list[TrialReport]]:
        out: dict[str, list[TrialReport]] = {m: [] for m in self.config.models}
        for t in self.trials:
            out.setdefault(t.model_id, []).append(t)
        return out

    def summary(self) -> dict[str, Any]:
        models = {}
        for mid, rows in self.by_model().items():
            models[mid] = {
                "algo_over_empirical": mean_ci(r.quotient_emp for r in rows),
                "algo_over_lp": mean_ci(r.quotient_lp for r in rows),
                "algo_over_empirical_no_isotonic": mean_ci(r.quotient_emp_raw for r in rows),
                "algo_over_lp_no_isotonic": mean_ci(r.quotient_lp_raw for r in rows),
                "algo2_over_empirical": mean_ci(_quotient(r.dist_algo2, r.dist_empirical) for r in rows),
            }
        return {"experiment": "table1", "config": asdict(self.config), "models": models}

    def tables(self) -> dict[str, tuple[list[str], list[list[Any]]]]:
        header = list(TrialReport.__dataclass_fields__)
        return {"trials": (header, [list(asdict(t).values()) for t in self.trials])}


def run_table1(config: Table1Config = Table1Config()) -> Table1Result:
    specs = table1_models(config.n, config.p, config.T, config.seed)
    result = Table1Result(config)
    for model_index, mid in enumerate(config.models):
        spec = specs[mid]
        frozen = build_model(spec, make_rng(config.seed, model_index)) if config.freeze_truth else None
        result.trials.extend(
            _map(lambda i: _table1_trial(mid, model_index, spec, config, frozen, i), config.trials, config.workers)
        )
    return result


# Oracle-function validation ------------------------------------------------


@dataclass(frozen=True)
class OracleValidationConfig:
    T_grid: tuple[int, ...] = (250, 500, 1000, 2000)
    n_ratio: float = 0.4
    p_ratio: float = 0.7
    z: complex = 0.5 + 1.0j
    trials: int = 100
    seed: int = 0
    density: Bimodal = Bimodal()
    workers: int = 1


def _relative_difference(truth: complex, approx: complex) -> float:
    diff = abs(truth - approx)
    return diff if abs(truth) < ABS_FALLBACK else diff / abs(truth)


@dataclass
class OracleValidationResult:
    config: OracleValidationConfig
    rows: list[dict[str, Any]] = field(default_factory=list)

    def curve(self) -> list[dict[str, Any]]:
        out = []
        for T in self.config.T_grid:
            rows = [r for r in self.rows if r["T"] == T]
            out.append(
                {
                    "T": T,
                    "n": rows[0]["n"] if rows else None,
                    "p": rows[0]["p"] if rows else None,
                    "thm1": mean_ci(r["rel_thm1"] for r in rows),
                    "thm2": mean_ci(r["rel_thm2"] for r in rows),
                }
            )
        return out

    def summary(self) -> dict[str, Any]:
        cfg = asdict(self.config)
        cfg["z"] = [self.config.z.real, self.config.z.imag]
        return {"experiment": "oracle-validate", "config": cfg, "curve": self.curve()}

    def tables(self):
        header = ["T", "n", "p", "trial", "l_true_re", "l_true_im", "rel_thm1", "rel_thm2"]
        return {"trials": (header, [[r[h] for h in header] for r in self.rows])}


def run_oracle_validation(config: OracleValidationConfig = OracleValidationConfig()) -> OracleValidationResult:
    result = OracleValidationResult(config)
    z = complex(config.z)
    for gi, T in enumerate(config.T_grid):
        n, p = round(config.n_ratio * T), round(config.p_ratio * T)
        spec = ModelSpec(config.density, n=n, p=p, T=T, seed=config.seed)

        def trial(i: int, T=T, n=n, p=p, gi=gi, spec=spec) -> dict[str, Any]:
            rng = make_rng(config.seed, gi, i)
            model = build_model(spec, rng)
            smp = sample(model, T, rng)
            svd = svd_with_coeffs(smp)
            l_true = complex(oracle_L(smp, model.block_C, z, svd=svd))
            l1 = complex(eval_L_thm1(svd, z))
            l2 = complex(eval_L_thm2(svd, z))
            return {
                "T": T,
                "n": n,
                "p": p,
                "trial": i,
                "l_true_re": l_true.real,
                "l_true_im": l_true.imag,
                "rel_thm1": _relative_difference(l_true, l1),
                "rel_thm2": _relative_difference(l_true, l2),
            }

        result.rows.extend(_map(trial, config.trials, config.workers))
    return result


# Exact expectation identities --------------------------------------------


@dataclass
class Prop3Result:
    spec: ModelSpec
    trials: int
    rows: list[dict[str, float]] = field(default_factory=list)

    IDENTITIES = {
        "cleaned_overlap": ("sum_s_oracle", "target_cleaned_overlap"),
        "empirical_norm": ("sum_s2", "target_empirical_norm"),
        "unbiased_norm": ("unbiased_estimate", "true_norm"),
    }

    def identity(self, name: str) -> dict[str, Any]:
        stat, target = self.IDENTITIES[name]
        diffs = np.array([r[stat] - r[target] for r in self.rows])
        ci = mean_ci(diffs)
        z = None
        if ci["se"]:
            z = ci["mean"] / ci["se"]
        return {
            "mean_statistic": float(np.mean([r[stat] for r in self.rows])),
            "mean_target": float(np.mean([r[target] for r in self.rows])),
            "mean_difference": ci["mean"],
            "se": ci["se"],
            "z_score": z,
            "pass": bool(z is not None and abs(z) <= 4.0),
        }

    def summary(self) -> dict[str, Any]:
        return {
            "experiment": "prop3",
            "config": {"n": self.spec.n, "p": self.spec.p, "T": self.spec.T, "seed": self.spec.seed, "trials": self.trials,
                       "variant": _variant_dict(self.spec)},
            "identities": {name: self.identity(name) for name in self.IDENTITIES},
        }

    def tables(self):
        header = ["trial", "sum_s_oracle", "sum_s2", "unbiased_estimate", "true_norm",
                  "target_cleaned_overlap", "target_empirical_norm", "trace_a_trace_b"]
        return {"trials": (header, [[r[h] for h in header] for r in self.rows])}


def _variant_dict(spec: ModelSpec) -> dict[str, Any]:
    d = asdict(spec.variant)
    d["kind"] = type(spec.variant).__name__
    return d


def run_prop3_checks(spec: ModelSpec, trials: int = 2000, seed: int | None = None, workers: int = 1) -> Prop3Result:
    """Monte-Carlo means of the three exact expectation identities.

    Per trial the statistics are compared with targets computed from that
    trial's true model, so redrawing the truth each trial is allowed:

    * ``sum_k s_k (u_k' C v_k)`` against ``||C||_F^2``;
    * ``sum_k s_k^2`` against ``(1 + 1/T) ||C||_F^2 + Tr A Tr B / T``;
    * the unbiased norm estimate against ``||C||_F^2``.
    """
    seed = spec.seed if seed is None else seed
    frozen = build_model(spec, make_rng(seed, 0)) if spec.freeze_truth else None
    T = spec.T

    def trial(i: int) -> dict[str, float]:
        rng = make_rng(seed, 1, i)
        model = frozen if frozen is not None else build_model(spec, rng)
        smp = sample(model, T, rng)
        svd = svd_with_coeffs(smp)
        truth_norm = float(np.sum(model.block_C**2))
        trace_ab = float(np.trace(model.block_A) * np.trace(model.block_B))
        return {
            "trial": i,
            "sum_s_oracle": float(np.sum(svd.s * oracle_singular_values(svd, model.block_C))),
            "sum_s2": float(np.sum(svd.s**2)),
            "unbiased_estimate": frobenius_target(svd),
            "true_norm": truth_norm,
            "target_cleaned_overlap": truth_norm,
            "target_empirical_norm": (1.0 + 1.0 / T) * truth_norm + trace_ab / T,
            "trace_a_trace_b": trace_ab,
        }

    return Prop3Result(spec, trials, _map(trial, trials, workers))


# Overfitting -----------------------------------------------------------------


PROFILES = {
    "desk": {"n": 200, "p": 200, "T": 2000, "T_oos": 500},
    "paper": {"n": 1000, "p": 1000, "T": 10000, "T_oos": 1000},
}


@dataclass(frozen=True)
class OverfitConfig:
    """``R = A F + noise`` with ``A = U diag(sv) V'``, Haar ``U, V`` and ``sv ~ U[sv_low, sv_high]``."""

    n: int = 200
    p: int = 200
    T: int = 2000
    T_oos: int = 500
    sv_low: float = 0.3
    sv_high: float = 1.5
    noise_var: float = 0.5
    seed: int = 0
    isotonic: bool = True
    oos_repeats: int = 0

    @classmethod
    def profile(cls, name: str, **overrides: Any) -> "OverfitConfig":
        return cls(**{**PROFILES[name], **overrides})


@dataclass(frozen=True, eq=False)
class OverfitTrial:
    s: NDArray[np.float64]
    in_sample_overlap: NDArray[np.float64]
    oos_overlap: NDArray[np.float64]
    predicted: NDArray[np.float64]
    factor_observed: NDArray[np.float64]
    factor_predicted: NDArray[np.float64]
    s_oracle: NDArray[np.float64]


def _per_mode_overlap(svd, C: NDArray[np.float64]) -> NDArray[np.float64]:
    return svd.s * np.einsum("ij,ij->j", svd.U, C @ svd.V)


@dataclass
class OverfitResult:
    config: OverfitConfig
    trial: OverfitTrial
    repeated_oos_mean: NDArray[np.float64] | None = None
    repeated_oos_se: NDArray[np.float64] | None = None

    def correlation(self) -> float:
        ok = np.isfinite(self.trial.factor_observed) & np.isfinite(self.trial.factor_predicted)
        return float(np.corrcoef(self.trial.factor_observed[ok], self.trial.factor_predicted[ok])[0, 1])

    def in_sample_identity_error(self) -> float:
        t = self.trial
        return float(np.max(np.abs(t.in_sample_overlap - t.s**2) / np.maximum(t.s**2, np.finfo(float).tiny)))

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "experiment": "overfit",
            "config": asdict(self.config),
            "pearson_observed_vs_predicted": self.correlation(),
            "max_relative_in_sample_identity_error": self.in_sample_identity_error(),
            "mean_factor_observed": float(np.mean(self.trial.factor_observed)),
            "mean_factor_predicted": float(np.mean(self.trial.factor_predicted)),
        }
        if self.repeated_oos_mean is not None:
            target = self.trial.s * self.trial.s_oracle
            zs = (self.repeated_oos_mean - target) / self.repeated_oos_se
            out["repeated_oos"] = {"repeats": self.config.oos_repeats, "max_abs_z": float(np.max(np.abs(zs)))}
        return out

    def tables(self):
        t = self.trial
        header = ["k", "s", "in_sample_overlap", "oos_overlap", "predicted_overlap", "factor_observed", "factor_predicted"]
        rows = [
            [k + 1, t.s[k], t.in_sample_overlap[k], t.oos_overlap[k], t.predicted[k], t.factor_observed[k], t.factor_predicted[k]]
            for k in range(len(t.s))
        ]
        scatter = [[t.factor_predicted[k], t.factor_observed[k]] for k in range(len(t.s))]
        return {"modes": (header, rows), "scatter": (["predicted", "observed"], scatter)}


def run_overfitting(config: OverfitConfig = OverfitConfig()) -> OverfitResult:
    rng = make_rng(config.seed, 0)
    k = min(config.n, config.p)
    sv = rng.uniform(config.sv_low, config.sv_high, size=k)
    A = (haar_orthonormal(rng, config.n, k) * sv) @ haar_orthonormal(rng, config.p, k).T
    model = build_regression_model(A, config.noise_var)

    rng = make_rng(config.seed, 1)
    svd = svd_with_coeffs(sample(model, config.T, rng))
    cleaned = clean_algo1(svd, CleaningOptions(isotonic=config.isotonic)).s_cleaned
    oos = sample(model, config.T_oos, rng)
    in_overlap = _per_mode_overlap(svd, svd.cxy)
    oos_overlap = _per_mode_overlap(svd, oos.X @ oos.Y.T / oos.T)
    with np.errstate(divide="ignore", invalid="ignore"):
        trial = OverfitTrial(
            s=svd.s,
            in_sample_overlap=in_overlap,
            oos_overlap=oos_overlap,
            predicted=svd.s * cleaned,
            factor_observed=oos_overlap / in_overlap,
            factor_predicted=cleaned / svd.s,
            s_oracle=oracle_singular_values(svd, A),
        )
    result = OverfitResult(config, trial)
    if config.oos_repeats > 0:
        draws = np.array([
            _per_mode_overlap(svd, (lambda o: o.X @ o.Y.T / o.T)(sample(model, config.T_oos, make_rng(config.seed, 2, r))))
            for r in range(config.oos_repeats)
        ])
        result.repeated_oos_mean = draws.mean(axis=0)
        result.repeated_oos_se = draws.std(axis=0, ddof=1) / math.sqrt(config.oos_repeats)
    return result


# Single-model simulation (histograms) ----------------------------------------


@dataclass
class SimulationResult:
    spec: ModelSpec
    s_true: NDArray[np.float64]
    s_empirical: NDArray[np.float64]
    s_cleaned: NDArray[np.float64]
    s_oracle: NDArray[np.float64]
    bin_edges: NDArray[np.float64]
    options: CleaningOptions
    algorithm: str
    sigma: NDArray[np.float64]

    def summary(self) -> dict[str, Any]:
        mean_emp = float(np.mean(self.s_empirical))
        return {
            "experiment": "simulate",
            "config": {"n": self.spec.n, "p": self.spec.p, "T": self.spec.T, "seed": self.spec.seed,
                       "variant": _variant_dict(self.spec), "algorithm": self.algorithm,
                       "options": asdict(self.options)},
            "mean_empirical": mean_emp,
            "mean_cleaned": float(np.mean(self.s_cleaned)),
            "mean_true": float(np.mean(self.s_true)),
            "cleaned_over_empirical_mean": float(np.mean(self.s_cleaned)) / mean_emp if mean_emp > 0 else None,
        }

    def tables(self):
        hist = {name: np.histogram(vals, bins=self.bin_edges)[0]
                for name, vals in (("true", self.s_true), ("empirical", self.s_empirical), ("cleaned", self.s_cleaned))}
        rows = [[self.bin_edges[i], self.bin_edges[i + 1], int(hist["true"][i]), int(hist["empirical"][i]), int(hist["cleaned"][i])]
                for i in range(len(self.bin_edges) - 1)]
        modes = [[k + 1, self.s_empirical[k], self.s_cleaned[k], self.s_oracle[k]] for k in range(len(self.s_empirical))]
        return {
            "histogram": (["bin_lo", "bin_hi", "true", "empirical", "cleaned"], rows),
            "modes": (["k", "s_empirical", "s_cleaned", "s_oracle"], modes),
        }


def run_simulation(
    spec: ModelSpec,
    options: CleaningOptions = CleaningOptions(),
    algorithm: str = "algo1",
    bin_edges: Sequence[float] | None = None,
) -> SimulationResult:
    rng = make_rng(spec.seed, 0)
    model = build_model(spec, rng)
    svd = svd_with_coeffs(sample(model, spec.T, rng))
    if algorithm == "algo1":
        res = clean_algo1(svd, options)
    else:
        res = clean_algo2(svd.s, svd.n, svd.p, svd.T, options)
    s_true = np.linalg.svd(model.block_C, compute_uv=False)
    edges = np.linspace(-0.2, 1.2, 71) if bin_edges is None else np.asarray(bin_edges, dtype=np.float64)
    return SimulationResult(
        spec, s_true, svd.s, res.s_cleaned, oracle_singular_values(svd, model.block_C), edges, options, algorithm, model.sigma
    )


# Reports -----------------------------------------------------------------------


def _clean_json(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_json(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return repr(f) if math.isfinite(f) else ""
    return str(v)


def emit_report(result: Any, out_dir: str | Path, stem: str) -> list[Path]:
    """Write ``<stem>.json`` and one ``<stem>_<table>.csv`` per table; returns the paths written."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out_dir}: {exc}") from exc
    written = []
    path = out_dir / f"{stem}.json"
    text = json.dumps(_clean_json(result.summary()), indent=2, sort_keys=True, allow_nan=False)
    try:
        path.write_text(text + "\n", encoding="utf-8")
        written.append(path)
        for name, (header, rows) in result.tables().items():
            path = out_dir / f"{stem}_{name}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows([_cell(v) for v in row] for row in rows)
            written.append(path)
    except OSError as exc:
        raise OSError(f"cannot write report file {path}: {exc}") from exc
    return written
