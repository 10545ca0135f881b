"""Variance benchmark: estimator error against an oracle, per cell.

A cell is one (distribution, strategy, antithetic, covariate)
combination. For every cell the harness draws ``trials`` base points,
estimates the Jacobian with ``samples`` perturbations, and records the
mean Frobenius distance to the oracle Jacobian. Cells that violate a
sampling precondition (Cartesian with s != k^n, antithetic with odd s or
an asymmetric distribution) are reported as dashes rather than errors.

Base points, oracle runs and estimation plans all draw their seeds from
disjoint streams of the master seed, so results are bit-reproducible and
independent of evaluation order; the base points and the per-trial
oracle are shared by every cell so that cells differ only in the
estimator under test.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .distributions import get_distribution
from .estimators import SmoothingConfig, jacobian
from .oracle import reference_jacobian
from .sampling import SamplingError, Strategy, make_plan, transform
from .testbed import make_function

__all__ = [
    "BenchSpec",
    "BenchResult",
    "run_bench",
    "write_csv",
    "format_csv",
    "read_csv",
    "parse_spec",
    "CSV_COLUMNS",
    "INVALID_CELL",
]

CSV_COLUMNS = (
    "function",
    "n",
    "distribution",
    "strategy",
    "antithetic",
    "covariate",
    "samples",
    "trials",
    "mean_l2",
    "stderr",
    "oracle_se",
    "seed",
)

# Marker for cells whose strategy/count/distribution combination is invalid,
# mirroring the dashes of the reference variance tables.
INVALID_CELL = "—"

_BASE_STREAM = 101
_ORACLE_STREAM = 202
_CELL_STREAM = 303


@dataclass(frozen=True)
class BenchSpec:
    """Grid of benchmark cells plus the shared sampling budget."""

    function: str
    n: int
    distributions: tuple[str, ...]
    strategies: tuple[str, ...]
    covariates: tuple[str, ...] = ("none",)
    antithetic: tuple[bool, ...] = (False,)
    samples: int = 1024
    trials: int = 10
    gamma: float = 1.0
    master_seed: int = 0
    oracle_factor: int = 64
    oracle_cap: int = 2**22

    def __post_init__(self):
        if not self.distributions:
            raise ValueError("benchmark needs at least one distribution")
        if not self.strategies:
            raise ValueError("benchmark needs at least one strategy")
        if not self.covariates:
            raise ValueError("benchmark needs at least one covariate")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        for name in self.distributions:
            get_distribution(name)
        for kind in self.strategies:
            Strategy(kind)

    @property
    def oracle_budget(self):
        return min(self.oracle_factor * self.samples, self.oracle_cap)


def base_point_rule(function):
    """How benchmark base points are drawn, recorded in the output."""
    if function == "shortest-path":
        return "uniform[0.1,1] per grid cell"
    return "iid standard normal"


def _draw_base_point(function, n, rng):
    if function == "shortest-path":
        return rng.uniform(0.1, 1.0, size=n)
    return rng.standard_normal(n)


@dataclass
class BenchResult:
    header: dict
    rows: list[dict] = field(default_factory=list)
    flagged: list[str] = field(default_factory=list)


def _derived_seed(*path):
    return int(np.random.SeedSequence(list(path)).generate_state(1)[0])


def run_bench(spec: BenchSpec, progress=None) -> BenchResult:
    """Run the full cell grid; returns rows in enumeration order."""
    f = make_function(spec.function, spec.n)
    xs = [
        _draw_base_point(
            spec.function, spec.n, np.random.default_rng(
                np.random.SeedSequence([spec.master_seed, _BASE_STREAM, t])
            ),
        )
        for t in range(spec.trials)
    ]
    oracle_cache: dict[tuple[str, int], tuple[np.ndarray, float]] = {}

    def oracle_for(dist_name, d_index, t):
        key = (dist_name, t)
        if key not in oracle_cache:
            d = get_distribution(dist_name)
            oracle_cache[key] = reference_jacobian(
                spec.function,
                f,
                d,
                xs[t],
                spec.gamma,
                spec.oracle_budget,
                seed=_derived_seed(spec.master_seed, _ORACLE_STREAM, d_index, t),
            )
        return oracle_cache[key]

    result = BenchResult(
        header={
            "function": spec.function,
            "n": spec.n,
            "samples": spec.samples,
            "trials": spec.trials,
            "gamma": spec.gamma,
            "master_seed": spec.master_seed,
            "base_point_rule": base_point_rule(spec.function),
            "oracle_budget": spec.oracle_budget,
        }
    )
    cell_index = -1
    for d_index, dist_name in enumerate(spec.distributions):
        d = get_distribution(dist_name)
        for kind in spec.strategies:
            for anti in spec.antithetic:
                for cov in spec.covariates:
                    cell_index += 1
                    row = {
                        "function": spec.function,
                        "n": spec.n,
                        "distribution": dist_name,
                        "strategy": kind,
                        "antithetic": "true" if anti else "false",
                        "covariate": cov,
                        "samples": spec.samples,
                        "trials": spec.trials,
                        "seed": spec.master_seed,
                    }
                    try:
                        strategy = Strategy(kind, antithetic=anti)
                        cfg = SmoothingConfig(
                            d,
                            samples=spec.samples,
                            strategy=strategy,
                            gamma=spec.gamma,
                            covariate=cov,
                        )
                        # Probe the plan preconditions before paying for trials.
                        make_plan(strategy, spec.samples, spec.n, 0)
                    except (SamplingError, ValueError):
                        row.update(mean_l2=INVALID_CELL, stderr=INVALID_CELL,
                                   oracle_se=INVALID_CELL)
                        result.rows.append(row)
                        if progress is not None:
                            progress(row)
                        continue
                    errors = np.empty(spec.trials)
                    oracle_ses = np.empty(spec.trials)
                    for t in range(spec.trials):
                        ref, ref_se = oracle_for(dist_name, d_index, t)
                        plan_seed = _derived_seed(
                            spec.master_seed, _CELL_STREAM, cell_index, t
                        )
                        plan = transform(
                            make_plan(strategy, spec.samples, spec.n, plan_seed), d
                        )
                        est = jacobian(f, xs[t], cfg, plan)
                        errors[t] = np.sqrt(((est - ref) ** 2).sum())
                        oracle_ses[t] = ref_se
                    mean_l2 = float(errors.mean())
                    stderr = float(errors.std(ddof=1) / np.sqrt(spec.trials)) if spec.trials > 1 else 0.0
                    oracle_se = float(oracle_ses.mean())
                    row.update(mean_l2=mean_l2, stderr=stderr, oracle_se=oracle_se)
                    if mean_l2 > 0 and oracle_se > 0.1 * mean_l2:
                        result.flagged.append(
                            f"{dist_name}/{kind}/antithetic={anti}/{cov}: "
                            f"oracle_se {oracle_se!r} exceeds 10% of mean_l2 {mean_l2!r}"
                        )
                    result.rows.append(row)
                    if progress is not None:
                        progress(row)
    return result


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_csv(result: BenchResult, command=None) -> str:
    """Render the result as CSV text with '#' header comments."""
    buf = io.StringIO()
    buf.write("# gradsmooth bench results\n")
    if command:
        buf.write(f"# command: {command}\n")
    for key, val in result.header.items():
        buf.write(f"# {key}: {_fmt(val)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in result.rows:
        writer.writerow([_fmt(row[col]) for col in CSV_COLUMNS])
    for note in result.flagged:
        buf.write(f"# flagged: {note}\n")
    return buf.getvalue()


def write_csv(result: BenchResult, path, command=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(result, command=command))


def read_csv(path):
    """Parse a bench CSV back into (header, rows); numbers are floats."""
    header = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        columns = None
        for record in reader:
            if not record:
                continue
            if record[0].startswith("#"):
                text = ",".join(record)[1:].strip()
                if ":" in text:
                    key, _, val = text.partition(":")
                    header.setdefault(key.strip(), val.strip())
                continue
            if columns is None:
                columns = record
                continue
            row = dict(zip(columns, record))
            for key in ("mean_l2", "stderr", "oracle_se"):
                if row.get(key) not in (None, INVALID_CELL):
                    row[key] = float(row[key])
            for key in ("n", "samples", "trials", "seed"):
                if key in row:
                    row[key] = int(row[key])
            rows.append(row)
    return header, rows


_LIST_KEYS = {"distributions", "strategies", "covariates", "antithetic"}
_INT_KEYS = {"n", "samples", "trials", "master_seed", "oracle_factor", "oracle_cap"}
_FLOAT_KEYS = {"gamma"}
_BOOL = {"true": True, "false": False, "1": True, "0": False}


def parse_spec(text: str) -> BenchSpec:
    """Parse the flat key=value benchmark spec format.

    Lines are ``key=value``; '#' starts a comment; list-valued keys take
    comma-separated entries. Unknown keys are rejected.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"spec line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key in _LIST_KEYS:
            items = [item.strip() for item in val.split(",") if item.strip()]
            if key == "antithetic":
                try:
                    items = [_BOOL[item.lower()] for item in items]
                except KeyError:
                    raise ValueError(
                        f"spec line {lineno}: antithetic entries must be true/false"
                    ) from None
            values[key] = tuple(items)
        elif key in _INT_KEYS:
            values[key] = int(val)
        elif key in _FLOAT_KEYS:
            values[key] = float(val)
        elif key == "function":
            values[key] = val
        else:
            raise ValueError(f"spec line {lineno}: unknown key {key!r}")
    missing = {"function", "n", "distributions", "strategies"} - set(values)
    if missing:
        raise ValueError(f"spec is missing required keys: {', '.join(sorted(missing))}")
    return BenchSpec(**values)
