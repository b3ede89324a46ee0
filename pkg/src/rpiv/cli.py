"""Command-line front end.

Subcommands: ``test`` runs the residual prediction test on a CSV file,
``simulate`` runs Monte-Carlo rejection experiments, ``jtest`` runs the
Sargan-Hansen baseline.  Reports are written as JSON (stable key order) or
tidy CSV; stderr carries diagnostics only, and stdout stays silent when
``--out`` is given.

Exit codes: 0 success, 2 data or configuration error, 3 rank or degeneracy
error.
"""

import argparse
import csv
import io
import json
import math
import os
import sys

from . import __version__
from .dataset import ColumnRoles, augment, load_csv
from .exceptions import DataError, EstimationError
from .jtest import sargan, square_instrument
from .rptest import run_aggregated
from .simulate import (
    METHODS,
    SETTINGS,
    VIOLATIONS,
    SimSpec,
    default_methods,
    power_curve,
    rejection_experiment,
    report_rows,
)


def _csv_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rpiv",
        description="Residual prediction specification test for linear IV models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p):
        p.add_argument("--out", help="output file; stdout when omitted")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: RPIV_THREADS or hardware count)")

    def add_roles(p):
        p.add_argument("--data", required=True, help="input CSV path")
        p.add_argument("--response", required=True)
        p.add_argument("--endogenous", required=True, type=_csv_list,
                       help="comma-separated column names")
        p.add_argument("--instruments", required=True, type=_csv_list,
                       help="comma-separated column names")
        p.add_argument("--controls", type=_csv_list, default=[],
                       help="comma-separated column names")
        p.add_argument("--cluster-col", default=None)

    p_test = sub.add_parser("test", help="run the residual prediction test on a CSV")
    add_roles(p_test)
    p_test.add_argument("--variance", choices=("het", "hom", "cluster"), default="het")
    p_test.add_argument("--splits", type=int, default=50)
    p_test.add_argument("--clip-quantile", type=float, default=0.9)
    p_test.add_argument("--gamma-frac", type=float, default=0.05)
    add_io(p_test)

    p_sim = sub.add_parser("simulate", help="Monte-Carlo rejection experiments")
    p_sim.add_argument("--setting", choices=SETTINGS, required=True)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--reps", type=int, default=1000)
    p_sim.add_argument("--violation", choices=VIOLATIONS, default="none")
    p_sim.add_argument("--strength", type=float, default=0.0)
    p_sim.add_argument("--strengths", type=_float_list, default=None,
                       help="comma-separated strengths; runs one experiment per value")
    p_sim.add_argument("--cluster-size", type=int, default=0)
    p_sim.add_argument("--cluster-strength", type=float, default=0.0)
    p_sim.add_argument("--alpha", type=float, default=0.05)
    p_sim.add_argument("--methods", type=_csv_list, default=None,
                       help=f"comma-separated subset of {', '.join(METHODS)}")
    add_io(p_sim)

    p_j = sub.add_parser("jtest", help="Sargan-Hansen overidentification test")
    add_roles(p_j)
    p_j.add_argument("--augment-square", default=None, metavar="COLUMN",
                     help="append the square of this instrument before testing")
    add_io(p_j)
    return parser


def _configure_threads(requested: int | None) -> None:
    if requested is None:
        env = os.environ.get("RPIV_THREADS")
        requested = int(env) if env else (os.cpu_count() or 1)
    if requested < 1:
        raise DataError("--threads must be positive")
    import numba

    numba.set_num_threads(min(requested, numba.config.NUMBA_NUM_THREADS))


def _roles_from_args(args) -> ColumnRoles:
    return ColumnRoles(
        response=args.response,
        endogenous=tuple(args.endogenous),
        instruments=tuple(args.instruments),
        controls=tuple(args.controls),
        cluster=args.cluster_col,
    )


def _json_safe(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _roles_config(args) -> dict:
    return {
        "data": args.data,
        "response": args.response,
        "endogenous": list(args.endogenous),
        "instruments": list(args.instruments),
        "controls": list(args.controls),
        "cluster_col": args.cluster_col,
    }


def _cmd_test(args):
    if args.variance == "cluster" and args.cluster_col is None:
        raise DataError("cluster column required")
    ds = load_csv(args.data, _roles_from_args(args))
    aug = augment(ds)
    agg = run_aggregated(
        aug,
        args.splits,
        variance=args.variance,
        clip_quantile=args.clip_quantile,
        gamma_frac=args.gamma_frac,
        seed=args.seed,
    )
    split_rows = [
        {
            "split_index": k,
            "seed": o.seed,
            "numerator": o.numerator,
            "sigma_hat": o.sigma_hat,
            "gamma": o.gamma,
            "statistic": o.statistic,
            "p_value": o.p_value,
            "variance": o.variance_kind,
            "n_a": o.n_a,
            "n_0": o.n_0,
            "degenerate": o.degenerate,
        }
        for k, o in enumerate(agg.per_split)
    ]
    payload = {
        "command": "test",
        "library_version": __version__,
        "config": {
            **_roles_config(args),
            "variance": args.variance,
            "splits": args.splits,
            "clip_quantile": args.clip_quantile,
            "gamma_frac": args.gamma_frac,
            "seed": args.seed,
        },
        "aggregated_p": agg.aggregated_p,
        "splits": split_rows,
    }
    csv_rows = [{**row, "aggregated_p": agg.aggregated_p} for row in split_rows]
    return payload, csv_rows


def _cmd_simulate(args):
    spec = SimSpec(
        setting=args.setting,
        n=args.n,
        violation=args.violation,
        strength=args.strength,
        cluster_strength=args.cluster_strength,
        cluster_size=args.cluster_size,
        reps=args.reps,
        alpha=args.alpha,
        master_seed=args.seed,
    )
    methods = tuple(args.methods) if args.methods else default_methods(spec)
    if args.strengths is not None:
        reports = power_curve(spec, args.strengths, methods)
        strengths = [float(t) for t in args.strengths]
    else:
        reports = [rejection_experiment(spec, methods)]
        strengths = [spec.strength]
    rows = [row for report in reports for row in report_rows(report)]
    payload = {
        "command": "simulate",
        "library_version": __version__,
        "config": {
            "setting": spec.setting,
            "n": spec.n,
            "violation": spec.violation,
            "strengths": strengths,
            "cluster_size": spec.cluster_size,
            "cluster_strength": spec.cluster_strength,
            "reps": spec.reps,
            "alpha": spec.alpha,
            "seed": spec.master_seed,
            "methods": list(methods),
        },
        "results": [{k: _json_safe(v) for k, v in row.items()} for row in rows],
    }
    return payload, rows


def _cmd_jtest(args):
    ds = load_csv(args.data, _roles_from_args(args))
    aug = augment(ds)
    if args.augment_square is not None:
        instruments = list(args.instruments)
        if args.augment_square not in instruments:
            raise DataError(
                f"--augment-square column '{args.augment_square}' is not an instrument"
            )
        aug = square_instrument(aug, instruments.index(args.augment_square))
    outcome = sargan(aug)
    payload = {
        "command": "jtest",
        "library_version": __version__,
        "config": {
            **_roles_config(args),
            "augment_square": args.augment_square,
            "seed": args.seed,
        },
        "statistic": outcome.statistic,
        "dof": outcome.dof,
        "p_value": outcome.p_value,
    }
    rows = [{"statistic": outcome.statistic, "dof": outcome.dof, "p_value": outcome.p_value}]
    return payload, rows


def _render(payload, rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _configure_threads(args.threads)
        if args.command == "test":
            payload, rows = _cmd_test(args)
        elif args.command == "simulate":
            payload, rows = _cmd_simulate(args)
        else:
            payload, rows = _cmd_jtest(args)
        text = _render(payload, rows, args.format)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except DataError as exc:
        print(f"rpiv: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"rpiv: {exc}", file=sys.stderr)
        return 2
    except EstimationError as exc:
        print(f"rpiv: {exc}", file=sys.stderr)
        return 3
    return 0


def entry() -> None:
    raise SystemExit(main())
