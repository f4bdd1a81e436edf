"""Command-line entry point: ``xcov <command> [options]``.

Commands
--------
clean            clean the cross-covariance of two data files
simulate         clean one simulated model and write histogram data
table1           distance quotients for the six benchmark models
oracle-validate  accuracy of the two oracle-function estimates versus T
overfit          observed against predicted overfitting factors
prop3            Monte-Carlo check of the exact expectation identities

Exit codes: 0 success, 2 invalid input, 64 usage error, 70 numerical failure.
Reports go to ``--out-dir``, which defaults to ``$XCOV_OUTPUT_DIR`` or
``./xcov-output``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from xcov import bench
from xcov.cleaner import CleaningOptions, clean_algo1, clean_algo2, rescale_frobenius, rie_matrix, write_spectrum_csv
from xcov.empirical import SampleSet, svd_with_coeffs
from xcov.errors import DimensionError, EvaluationError, MatrixFormatError, PreconditionError
from xcov.matrix_io import read_matrix, write_matrix
from xcov.model import Bimodal, FactorModel, ModelSpec, Null, Wishart, load_model_spec

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_USAGE = 64
EXIT_NUMERIC = 70

OUTPUT_ENV = "XCOV_OUTPUT_DIR"
COVARIANCE_WARN_TOL = 0.10

log = logging.getLogger("xcov")


class UsageError(Exception):
    pass


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever ``sys.stderr`` is at emit time (it may be swapped after setup)."""

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default; 2 is reserved for bad input here
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _default_out_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or "xcov-output")


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xcov", description="Cleaning of empirical cross-covariance matrices.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def common(p: argparse.ArgumentParser, *, seed: bool = True) -> None:
        p.add_argument("--out-dir", type=Path, default=None, help=f"output directory (default ${OUTPUT_ENV} or ./xcov-output)")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    def cleaning(p: argparse.ArgumentParser) -> None:
        p.add_argument("--algorithm", type=int, choices=(1, 2), default=1)
        p.add_argument("--no-isotonic", dest="isotonic", action="store_false", help="skip the monotone projection")
        p.add_argument("--clip-negative", action="store_true", help="replace negative cleaned values by 0")
        p.add_argument("--eta", type=_positive_float, default=None, help="override the default (n p T)^(-1/6)")

    p = sub.add_parser("clean", help="clean the cross-covariance of two data files")
    common(p, seed=False)
    cleaning(p)
    p.add_argument("--x", type=Path, help="n x T matrix (CSV or binary)")
    p.add_argument("--y", type=Path, help="p x T matrix (CSV or binary)")
    p.add_argument("--singular-values", type=Path, help="precomputed singular values (algorithm 2 only)")
    p.add_argument("--p", dest="p_dim", type=_positive_int, help="dimension p when using --singular-values")
    p.add_argument("--T", dest="T", type=_positive_int, help="sample size T when using --singular-values")
    p.add_argument("--rescale", action="store_true", help="match the unbiased Frobenius-norm estimate")
    p.add_argument("--write-matrix", action="store_true", help="also write U diag(s_cleaned) V' as rie.csv")

    p = sub.add_parser("simulate", help="clean one simulated model and write histogram data")
    common(p)
    cleaning(p)
    p.add_argument("--config", type=Path, help="INI file with a [model] section")
    p.add_argument("--variant", choices=("null", "bimodal", "factor", "wishart"), default="bimodal")
    p.add_argument("--n", type=_positive_int, default=200)
    p.add_argument("--p", dest="p_dim", type=_positive_int, default=350)
    p.add_argument("--T", dest="T", type=_positive_int, default=500)
    p.add_argument("--fraction", type=float, default=0.2, help="nonzero fraction for the factor variant")
    p.add_argument("--dump-sigma", action="store_true", help="also write the true joint covariance as sigma.csv")

    p = sub.add_parser("table1", help="distance quotients for the six benchmark models")
    common(p)
    p.add_argument("--profile", choices=("desk", "paper"), default="desk")
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--no-isotonic", dest="isotonic", action="store_false")
    p.add_argument("--lp-eta", type=_positive_float, default=None, help="comparator bandwidth (default T^(-1/2))")
    p.add_argument("--freeze-truth", action="store_true", help="draw each model's truth once instead of per trial")
    p.add_argument("--models", default="1,2,3,4,5,6")
    p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("oracle-validate", help="accuracy of the oracle-function estimates versus T")
    common(p)
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--T-grid", default="250,500,1000,2000")
    p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("overfit", help="observed against predicted overfitting factors")
    common(p)
    p.add_argument("--profile", choices=sorted(bench.PROFILES), default="desk")
    p.add_argument("--oos-repeats", type=int, default=0)
    p.add_argument("--no-isotonic", dest="isotonic", action="store_false")

    p = sub.add_parser("prop3", help="Monte-Carlo check of the exact expectation identities")
    common(p)
    p.add_argument("--trials", type=_positive_int, default=2000)
    p.add_argument("--model", choices=("1", "2", "3", "4", "5", "6", "null"), default="3")
    p.add_argument("--n", type=_positive_int, default=40)
    p.add_argument("--p", dest="p_dim", type=_positive_int, default=70)
    p.add_argument("--T", dest="T", type=_positive_int, default=100)
    p.add_argument("--workers", type=_positive_int, default=1)
    return parser


def _out_dir(args: argparse.Namespace) -> Path:
    return args.out_dir if args.out_dir is not None else _default_out_dir()


def _options(args: argparse.Namespace) -> CleaningOptions:
    return CleaningOptions(eta=args.eta, isotonic=args.isotonic, clip_negative=args.clip_negative)


def _int_list(text: str, name: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--{name} must be a comma-separated list of integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise UsageError(f"--{name} entries must be positive")
    return values


def _report(result, out_dir: Path, stem: str) -> None:
    for path in bench.emit_report(result, out_dir, stem):
        print(path)


def cmd_clean(args: argparse.Namespace) -> int:
    out_dir = _out_dir(args)
    options = _options(args)
    if args.singular_values is not None:
        if args.algorithm != 2:
            raise UsageError("--singular-values requires --algorithm 2 (algorithm 1 needs the data)")
        if args.p_dim is None or args.T is None:
            raise UsageError("--singular-values requires --p and --T")
        s = read_matrix(args.singular_values).reshape(-1)
        result = clean_algo2(s, len(s), args.p_dim, args.T, options)
        if args.rescale or args.write_matrix:
            raise UsageError("--rescale and --write-matrix need the data files")
    else:
        if args.x is None or args.y is None:
            raise UsageError("clean needs --x and --y, or --singular-values")
        X, Y = read_matrix(args.x), read_matrix(args.y)
        if X.shape[1] != Y.shape[1]:
            raise DimensionError(f"sample sizes differ: X has T={X.shape[1]} columns, Y has T={Y.shape[1]}")
        transposed = X.shape[0] > Y.shape[0]
        if transposed:
            log.warning("n=%d > p=%d: swapping X and Y; the outputs refer to C_YX", X.shape[0], Y.shape[0])
            X, Y = Y, X
        svd = svd_with_coeffs(SampleSet(X, Y))
        if args.algorithm == 1:
            result = clean_algo1(svd, options)
        else:
            for name, trace, dim in (("X", svd.trace_cx, svd.n), ("Y", svd.trace_cy, svd.p)):
                if abs(trace / dim - 1.0) > COVARIANCE_WARN_TOL:
                    log.warning(
                        "Tr C_%s / %d = %.3g deviates from 1 by more than %d%%; algorithm 2 assumes identity covariances",
                        name, dim, trace / dim, round(100 * COVARIANCE_WARN_TOL),
                    )
            result = clean_algo2(svd.s, svd.n, svd.p, svd.T, options)
        if args.rescale:
            result = rescale_frobenius(result, svd)
    for note in result.notes:
        log.warning("%s", note)
    flagged = sum(1 for f in result.mode_flags if f)
    if flagged:
        log.warning("%d mode(s) flagged; see the flags column", flagged)

    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "spectrum.csv"
    write_spectrum_csv(path, result)
    print(path)
    if args.singular_values is None and args.write_matrix:
        path = out_dir / "rie.csv"
        write_matrix(path, rie_matrix(svd, result))
        print(path)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.config is not None:
        spec = load_model_spec(args.config)
    else:
        n, p, T = args.n, args.p_dim, args.T
        variant = {
            "null": lambda: Null(),
            "bimodal": lambda: Bimodal(),
            "factor": lambda: FactorModel(nonzero_fraction=args.fraction),
            "wishart": lambda: Wishart(m=n + p),
        }[args.variant]()
        spec = ModelSpec(variant, n=n, p=p, T=T, seed=args.seed)
    result = bench.run_simulation(spec, _options(args), algorithm=f"algo{args.algorithm}")
    _report(result, _out_dir(args), "simulate")
    if args.dump_sigma:
        path = _out_dir(args) / "sigma.csv"
        write_matrix(path, result.sigma)
        print(path)
    return EXIT_OK


def cmd_table1(args: argparse.Namespace) -> int:
    models = tuple(m.strip() for m in args.models.split(","))
    unknown = set(models) - {"1", "2", "3", "4", "5", "6"}
    if unknown:
        raise UsageError(f"unknown model ids {sorted(unknown)}; choose from 1-6")
    # the two --profile settings coincide for this experiment
    config = bench.Table1Config(
        trials=args.trials,
        seed=args.seed,
        isotonic=args.isotonic,
        lp_eta=args.lp_eta,
        freeze_truth=args.freeze_truth,
        models=models,
        workers=args.workers,
    )
    _report(bench.run_table1(config), _out_dir(args), "table1")
    return EXIT_OK


def cmd_oracle_validate(args: argparse.Namespace) -> int:
    config = bench.OracleValidationConfig(
        T_grid=_int_list(args.T_grid, "T-grid"), trials=args.trials, seed=args.seed, workers=args.workers
    )
    _report(bench.run_oracle_validation(config), _out_dir(args), "oracle_validate")
    return EXIT_OK


def cmd_overfit(args: argparse.Namespace) -> int:
    if args.oos_repeats < 0:
        raise UsageError("--oos-repeats must be >= 0")
    config = bench.OverfitConfig.profile(
        args.profile, seed=args.seed, isotonic=args.isotonic, oos_repeats=args.oos_repeats
    )
    _report(bench.run_overfitting(config), _out_dir(args), "overfit")
    return EXIT_OK


def cmd_prop3(args: argparse.Namespace) -> int:
    n, p, T = args.n, args.p_dim, args.T
    if args.model == "null":
        spec = ModelSpec(Null(), n=n, p=p, T=T, seed=args.seed)
    else:
        spec = bench.table1_models(n, p, T, args.seed)[args.model]
    _report(bench.run_prop3_checks(spec, args.trials, workers=args.workers), _out_dir(args), "prop3")
    return EXIT_OK


COMMANDS = {
    "clean": cmd_clean,
    "simulate": cmd_simulate,
    "table1": cmd_table1,
    "oracle-validate": cmd_oracle_validate,
    "overfit": cmd_overfit,
    "prop3": cmd_prop3,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    if not log.handlers:
        handler = _StderrHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
        log.addHandler(handler)
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)

    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"xcov {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MatrixFormatError, DimensionError, PreconditionError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"xcov {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (EvaluationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"xcov {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"xcov {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
