"""Command-line front end: estimate, bench, optimize, report.

Every run embeds its fully resolved configuration (including the seed)
in the output header, and re-running the header's command reproduces the
output byte for byte. Exit codes: 0 on success, 2 on flag or spec
validation errors, 3 when the black box returns a non-finite value.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import parse_spec, read_csv, run_bench, write_csv
from .distributions import DISTRIBUTIONS, get_distribution
from .estimators import (
    COVARIATES,
    NonFiniteOutputError,
    SmoothingConfig,
    estimate,
)
from .optim import format_trajectory_csv, minimize
from .sampling import STRATEGY_KINDS, SamplingError, Strategy
from .testbed import FUNCTION_NAMES, grid_from_csv, make_function

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONFINITE = 3


def _parse_vector(text):
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of reals: {text!r}")


def _add_common_estimation_flags(p):
    p.add_argument("--function", required=True, choices=FUNCTION_NAMES)
    p.add_argument("--n", type=int, default=None, help="input dimension")
    p.add_argument("--dist", required=True, choices=sorted(DISTRIBUTIONS))
    p.add_argument("--gamma", type=float, default=1.0, help="scalar smoothing scale")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--strategy", required=True, choices=STRATEGY_KINDS)
    p.add_argument("--antithetic", action="store_true")
    p.add_argument("--covariate", choices=COVARIATES, default="none")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gradsmooth",
        description="Gradient estimation for black-box functions via stochastic smoothing.",
    )
    parser.add_argument("--version", action="version", version=f"gradsmooth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate value/Jacobian/scale gradients at a point")
    _add_common_estimation_flags(est)
    est.add_argument("--x", type=_parse_vector, default=None, help="evaluation point, comma-separated")
    est.add_argument("--grid", type=Path, default=None, help="cost-map CSV (shortest-path)")
    est.add_argument("--scale-matrix", type=Path, default=None,
                     help="lower-triangular scale matrix CSV (replaces --gamma)")
    est.add_argument("--median-k", type=int, default=None)
    est.add_argument("--with-cov", action="store_true",
                     help="include the output covariance block")
    est.add_argument("--out", choices=("json", "csv"), default="json")

    ben = sub.add_parser("bench", help="run a variance benchmark from a spec file")
    ben.add_argument("spec", type=Path)
    ben.add_argument("--out", type=Path, default=Path("bench_results.csv"))
    ben.add_argument("--figures", type=Path, default=None,
                     help="also render a heatmap figure to this path")
    ben.add_argument("--quiet", action="store_true")

    opt = sub.add_parser("optimize", help="gradient descent on a smoothed objective")
    _add_common_estimation_flags(opt)
    opt.add_argument("--x0", type=_parse_vector, required=True)
    opt.add_argument("--steps", type=int, required=True)
    opt.add_argument("--lr", type=float, required=True)
    opt.add_argument("--gamma-decay", type=float, default=None)
    opt.add_argument("--out", type=Path, default=None, help="trajectory CSV path (default stdout)")
    opt.add_argument("--figures", type=Path, default=None,
                     help="also render a trajectory figure to this path")

    rep = sub.add_parser("report", help="render figures from a bench or trajectory CSV")
    rep.add_argument("csv_file", type=Path)
    rep.add_argument("--out", type=Path, default=None, help="figure path (default: CSV stem + .png)")
    return parser


def _canonical_command(args, flags):
    parts = ["gradsmooth", args.command]
    for flag, value in flags:
        if value is None or value is False:
            continue
        if value is True:
            parts.append(flag)
        elif isinstance(value, np.ndarray):
            parts.append(f"{flag} {','.join(repr(float(v)) for v in value)}")
        else:
            parts.append(f"{flag} {value}")
    return " ".join(parts)


def _report_to_dict(report, cfg):
    def arr(a):
        return None if a is None else np.asarray(a).tolist()

    out = {
        "value": arr(report.value),
        "jacobian": arr(report.jacobian),
        "samples_used": report.samples_used,
        "seed": report.seed,
    }
    if report.dgamma is not None:
        out["dgamma"] = arr(report.dgamma)
    if report.dscale is not None:
        out["dscale"] = arr(report.dscale)
    if report.out_cov is not None:
        out["out_cov"] = arr(report.out_cov)
        out["d_out_cov_dx"] = arr(report.d_out_cov_dx)
        out["d_out_cov_dscale"] = arr(report.d_out_cov_dscale)
    if report.median_k is not None:
        out["median_k"] = report.median_k
        out["median_value"] = report.median_value
        out["median_gradient"] = arr(report.median_gradient)
    return out


def _report_csv(out_dict, config, command):
    lines = ["# gradsmooth estimate report", f"# command: {command}"]
    for key, val in config.items():
        lines.append(f"# {key}: {val}")
    lines.append("quantity,index,value")

    def emit(name, value):
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        for idx in np.ndindex(arr.shape):
            label = "_".join(str(i) for i in idx)
            lines.append(f"{name},{label},{arr[idx]!r}")

    for key in (
        "value",
        "jacobian",
        "dgamma",
        "dscale",
        "out_cov",
        "d_out_cov_dx",
        "d_out_cov_dscale",
        "median_value",
        "median_gradient",
    ):
        if out_dict.get(key) is not None:
            emit(key, out_dict[key])
    return "\n".join(lines) + "\n"


def _resolve_point(args):
    if args.grid is not None:
        grid = grid_from_csv(args.grid)
        x = grid.costs.ravel()
        n = x.size
        if args.function != "shortest-path":
            raise ValueError("--grid only applies to --function shortest-path")
    elif args.x is not None:
        x = args.x
        n = args.n if args.n is not None else x.size
        if x.size != n:
            raise ValueError(f"--x has {x.size} entries but --n is {n}")
    else:
        raise ValueError("provide an evaluation point via --x or --grid")
    return x, n


def _cmd_estimate(args):
    x, n = _resolve_point(args)
    f = make_function(args.function, n)
    scale_matrix = None
    if args.scale_matrix is not None:
        scale_matrix = np.loadtxt(args.scale_matrix, delimiter=",", ndmin=2)
    cfg = SmoothingConfig(
        get_distribution(args.dist),
        samples=args.samples,
        strategy=Strategy(args.strategy, antithetic=args.antithetic),
        gamma=None if scale_matrix is not None else args.gamma,
        scale_matrix=scale_matrix,
        covariate=args.covariate,
    )
    report = estimate(
        f, x, cfg, args.seed, with_covariance=args.with_cov, median_k=args.median_k
    )
    command = _canonical_command(
        args,
        [
            ("--function", args.function),
            ("--n", n),
            ("--x", None if args.grid is not None else x),
            ("--grid", args.grid),
            ("--dist", args.dist),
            ("--gamma", None if scale_matrix is not None else repr(args.gamma)),
            ("--scale-matrix", args.scale_matrix),
            ("--samples", args.samples),
            ("--strategy", args.strategy),
            ("--antithetic", args.antithetic),
            ("--covariate", args.covariate),
            ("--median-k", args.median_k),
            ("--with-cov", args.with_cov),
            ("--seed", args.seed),
            ("--out", args.out),
        ],
    )
    config = {
        "function": args.function,
        "n": n,
        "distribution": args.dist,
        "scale": "matrix" if scale_matrix is not None else repr(args.gamma),
        "samples": args.samples,
        "strategy": args.strategy,
        "antithetic": args.antithetic,
        "covariate": args.covariate,
        "seed": args.seed,
    }
    out_dict = _report_to_dict(report, cfg)
    if args.out == "json":
        payload = {"command": command, "config": config, "report": out_dict}
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(_report_csv(out_dict, config, command))
    return EXIT_OK


def _cmd_bench(args):
    spec = parse_spec(args.spec.read_text(encoding="utf-8"))
    command = f"gradsmooth bench {args.spec} --out {args.out}"

    def progress(row):
        if not args.quiet:
            print(
                f"{row['distribution']:>10} {row['strategy']:>15} "
                f"antithetic={row['antithetic']:<5} {row['covariate']:>4} "
                f"mean_l2={row['mean_l2']}",
                file=sys.stderr,
            )

    result = run_bench(spec, progress=progress)
    write_csv(result, args.out, command=command)
    if not args.quiet:
        print(f"wrote {len(result.rows)} cells to {args.out}", file=sys.stderr)
    if args.figures is not None:
        from .report import bench_heatmap_figure

        bench_heatmap_figure(result.header, result.rows, args.figures)
        if not args.quiet:
            print(f"wrote figure to {args.figures}", file=sys.stderr)
    return EXIT_OK


def _cmd_optimize(args):
    if args.x0.size == 0:
        raise ValueError("--x0 must not be empty")
    n = args.n if args.n is not None else args.x0.size
    f = make_function(args.function, n)
    if f.m != 1:
        raise ValueError(f"optimize needs a scalar objective; {args.function!r} has m={f.m}")
    cfg = SmoothingConfig(
        get_distribution(args.dist),
        samples=args.samples,
        strategy=Strategy(args.strategy, antithetic=args.antithetic),
        gamma=args.gamma,
        covariate=args.covariate,
    )
    trajectory = minimize(
        f, cfg, args.x0, args.steps, args.lr, schedule=args.gamma_decay, seed=args.seed
    )
    command = _canonical_command(
        args,
        [
            ("--function", args.function),
            ("--n", n),
            ("--x0", args.x0),
            ("--dist", args.dist),
            ("--gamma", repr(args.gamma)),
            ("--samples", args.samples),
            ("--strategy", args.strategy),
            ("--antithetic", args.antithetic),
            ("--covariate", args.covariate),
            ("--steps", args.steps),
            ("--lr", repr(args.lr)),
            ("--gamma-decay", None if args.gamma_decay is None else repr(args.gamma_decay)),
            ("--seed", args.seed),
        ],
    )
    text = format_trajectory_csv(trajectory, command=command)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
    if args.figures is not None:
        from .report import trajectory_figure

        trajectory_figure(
            [p.step for p in trajectory],
            [p.x for p in trajectory],
            [p.fx for p in trajectory],
            [p.gamma for p in trajectory],
            args.figures,
        )
    return EXIT_OK


def _cmd_report(args):
    lines = args.csv_file.read_text(encoding="utf-8").splitlines()
    out = args.out if args.out is not None else args.csv_file.with_suffix(".png")
    if lines and "trajectory" in lines[0]:
        data = [l.split(",") for l in lines if l and not l.startswith("#")]
        names = data[0]
        table = {name: np.array([float(r[i]) for r in data[1:]])
                 for i, name in enumerate(names)}
        xs = np.stack([table[c] for c in names if c.startswith("x")], axis=1)
        from .report import trajectory_figure

        trajectory_figure(table["step"], xs, table["fx"], table["gamma"], out)
    else:
        header, rows = read_csv(args.csv_file)
        from .report import bench_heatmap_figure

        bench_heatmap_figure(header, rows, out)
    print(f"wrote figure to {out}", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "estimate": _cmd_estimate,
    "bench": _cmd_bench,
    "optimize": _cmd_optimize,
    "report": _cmd_report,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NonFiniteOutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except (SamplingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
