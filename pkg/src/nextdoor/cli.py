"""Command-line entry point: ``nextdoor analyze|nested|simulate``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .analysis import AnalysisConfig, AnalysisError, nested_model_curve, run_next_door
from .bootstrap import BootstrapParams
from .cv import CvError
from .data_io import DataError, load_csv, prostate_path
from .debias import CovarianceError, RandomizationParams
from .lasso import ConvergenceError
from .report import FORMATS, read_report, render_csv, render_text, write_report

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
BUILTIN = {"builtin:prostate": False, "builtin:prostate-test": True}
NUMERICAL = (ConvergenceError, CovarianceError, CvError, np.linalg.LinAlgError, FloatingPointError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_analysis_flags(p):
    p.add_argument("--data", help="training CSV (header row), or builtin:prostate")
    p.add_argument("--response", help="response column name")
    p.add_argument("--family", choices=("gaussian", "binomial"), default="gaussian")
    p.add_argument("--test-data", help="held-out CSV with the same columns")
    p.add_argument("--folds", type=int, help="number of CV folds (default 10)")
    p.add_argument("--fold-col", help="column holding fold labels")
    p.add_argument("--nlambda", type=int, default=100)
    p.add_argument("--lambda-ratio", type=float, default=0.01)
    p.add_argument("--criterion", choices=("min", "1se"), default="min")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--gamma1", type=float, default=0.1)
    p.add_argument("--gamma2", type=float, default=0.05)
    p.add_argument("--H", type=int, default=1000, help="randomization rounds")
    p.add_argument("--B", type=int, default=10000, help="bootstrap replicates")
    p.add_argument("--boot-freq", type=int, default=50, help="resamples for selection frequency")
    p.add_argument("--freq-cutoff", type=float, default=0.05)
    p.add_argument("--tau2", type=float, help="post-selection noise variance")
    p.add_argument("--exclude", default="", help='extra exclusion sets, e.g. "a,b;c"')
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nextdoor", description="Next-Door analysis for the lasso.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    a = sub.add_parser("analyze", help="analyze a dataset and write the report")
    _add_analysis_flags(a)
    a.add_argument("--out", help="report path (default: stdout)")
    a.add_argument("--format", choices=FORMATS, default="text")
    a.add_argument("--figure", help="also save a summary figure (PNG) here")

    n = sub.add_parser("nested", help="held-out error of nested unpenalized refits")
    _add_analysis_flags(n)
    n.add_argument("--report", help="reuse a JSON report instead of re-running the analysis")
    n.add_argument("--ordering", choices=("model_pvalue", "model_score"), default="model_pvalue")
    n.add_argument("--start-size", type=int, default=1)
    n.add_argument("--out", help="CSV path; a PNG with the same stem is written alongside")

    s = sub.add_parser("simulate", help="type I error, power or bootstrap-accuracy experiments")
    s.add_argument("--experiment", choices=("type1", "power", "accuracy"),
                   help="default: power when --signal-grid is given, else type1")
    s.add_argument("--design", default="orthogonal",
                   choices=("orthogonal", "redundant1", "correlated", "redundant2"))
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--p", type=int, default=10, help="predictors (models for accuracy)")
    s.add_argument("--s", type=int, default=5)
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--level", type=float, default=0.1)
    s.add_argument("--methods", default="model_pvalue,model_score,post_selection,naive")
    s.add_argument("--signal-grid", help="comma-separated coefficients for predictor 1")
    s.add_argument("--mean-mode", choices=("zero", "n_scaled_random"), default="zero")
    s.add_argument("--H", type=int, default=200)
    s.add_argument("--B", type=int, default=500)
    s.add_argument("--nlambda", type=int, default=50)
    s.add_argument("--boot-freq", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", help="CSV path; a PNG with the same stem is written alongside")
    return parser


def parse_exclusions(text: str) -> tuple:
    """'a,b;c' -> (('a', 'b'), ('c',))."""
    sets = []
    for part in text.split(";"):
        names = tuple(x.strip() for x in part.split(",") if x.strip())
        if names:
            sets.append(names)
    return tuple(sets)


def _load(path, args, folds=True):
    if path in BUILTIN:
        path = prostate_path(BUILTIN[path])
    return load_csv(path, args.response, args.family, args.fold_col if folds else None,
                    drop=() if folds or not args.fold_col else (args.fold_col,))


def _config(args) -> AnalysisConfig:
    return AnalysisConfig(
        V=args.folds or 10, m=args.nlambda, ratio=args.lambda_ratio, criterion=args.criterion,
        randomization=RandomizationParams(args.alpha, args.gamma1, args.H),
        bootstrap=BootstrapParams(args.B, args.gamma2), n_boot_freq=args.boot_freq,
        frequency_cutoff=args.freq_cutoff, seed=args.seed, tau_sq=args.tau2,
        exclusion_sets=parse_exclusions(args.exclude), n_jobs=args.jobs)


def _check_analysis_args(args):
    if not args.data:
        raise UsageError("--data is required")
    if not args.response:
        raise UsageError("--response is required")
    if args.fold_col and args.folds is not None:
        raise UsageError("--folds and --fold-col are mutually exclusive")


def _analyze(args):
    _check_analysis_args(args)
    cfg = _config(args)
    d = _load(args.data, args)
    test = _load(args.test_data, args, folds=False) if args.test_data else None
    report = run_next_door(d, cfg, test)
    if args.out:
        write_report(report, args.out, args.format)
    else:
        out = {"text": render_text, "csv": render_csv}.get(args.format)
        sys.stdout.write(out(report) if out else report.to_json() + "\n")
    if args.figure:
        from .plotting import plot_report
        plot_report(report, args.figure)


def _nested(args):
    if not args.test_data:
        raise UsageError("nested needs --test-data")
    _check_analysis_args(args)
    d = _load(args.data, args)
    report = read_report(args.report) if args.report else run_next_door(d, _config(args))
    test = _load(args.test_data, args, folds=False)
    curve = nested_model_curve(d, test, report, args.ordering, args.start_size)
    lines = ["k,test_error"] + [f"{k},{e!r}" for k, e in curve]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        from .plotting import plot_nested_curve
        plot_nested_curve(curve, Path(args.out).with_suffix(".png"))
    else:
        sys.stdout.write(text)


def _floats(text, flag):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{flag} must be a comma-separated list of numbers") from None


def _simulate(args):
    from . import plotting, simulation
    exp = args.experiment or ("power" if args.signal_grid else "type1")
    methods = tuple(x.strip() for x in args.methods.split(",") if x.strip())
    if exp == "accuracy":
        res = simulation.selection_bootstrap_experiment(args.p, args.mean_mode, args.reps, args.n, args.B,
                                               min(args.H, 50), seed=args.seed)
        table = res.to_frame()
        figure = lambda path: plotting.plot_pvalue_ecdfs(res, path)  # noqa: E731
    else:
        try:
            spec = simulation.DesignSpec(args.design, args.n, args.p, args.s, args.seed)
            cfg = simulation.simulation_config(H=args.H, B=args.B, nlambda=args.nlambda,
                                               n_boot_freq=args.boot_freq)
            simulation._check_methods(methods)
        except ValueError as e:
            raise UsageError(str(e)) from None
        if exp == "power":
            if not args.signal_grid:
                raise UsageError("power experiment needs --signal-grid")
            grid = _floats(args.signal_grid, "--signal-grid")
            table = simulation.power_curve(spec, grid, args.level, args.reps, methods, cfg,
                                           args.jobs)
            figure = lambda path: plotting.plot_power_curves(table, path)  # noqa: E731
        else:
            if args.signal_grid:
                raise UsageError("--signal-grid only applies to the power experiment")
            table = simulation.type_one_error_experiment(spec, args.level, args.reps, methods,
                                                         cfg, args.jobs)
            figure = lambda path: plotting.plot_rates(table, path, args.level)  # noqa: E731
    if args.out:
        table.to_csv(args.out, index=False)
        figure(Path(args.out).with_suffix(".png"))
    else:
        table.to_csv(sys.stdout, index=False)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        {"analyze": _analyze, "nested": _nested, "simulate": _simulate}[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except AnalysisError as e:
        cause = e.__cause__
        if isinstance(cause, DataError):
            print(f"data error: {e}", file=sys.stderr)
            return EXIT_DATA
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except NUMERICAL as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # invalid parameter values caught by the config dataclasses
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
