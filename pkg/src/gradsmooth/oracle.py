"""Ground-truth gradients for scoring the estimators.

Two routes: closed-form convolutions for simple fixtures (step functions
convolve to the distribution's CDF), and a high-budget reference
estimate for combinatorial functions, run as randomized-QMC with the
leave-one-out baseline over several independent seeds so its own
uncertainty can be bootstrapped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import Distribution
from .estimators import BlackBox, SmoothingConfig, jacobian
from .sampling import (
    RQMC_CARTESIAN,
    RQMC_LATIN,
    CartesianSampleCountError,
    Strategy,
    _cartesian_root,
    make_plan,
    transform,
)

__all__ = [
    "UnsupportedFixturePairError",
    "FIXTURES",
    "analytic_oracle",
    "OracleEstimate",
    "bruteforce_oracle",
    "reference_jacobian",
]

FIXTURES = ("heaviside", "staircase", "linear", "constant")

# Tail probability at which shifted-step sums are truncated, and the cap on
# how many step terms the truncation may take.
_TAIL_MASS = 1e-12
_MAX_TERMS = 2_000_000


class UnsupportedFixturePairError(ValueError):
    """No closed-form convolution for this fixture/distribution pair."""


def _heaviside_oracle(d, x, gamma):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    # E[H(x_1 + gamma*eps_1)] = P(eps_1 >= -x_1/gamma) = 1 - F(-x_1/gamma).
    t = -x[0] / gamma
    value = np.array([1.0 - float(d.cdf(t))])
    grad = np.zeros((1, n))
    grad[0, 0] = float(d.density(t)) / gamma
    return value, grad


def _staircase_oracle(d, x, gamma, step):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != 1:
        raise UnsupportedFixturePairError("staircase fixture is one-dimensional")
    x0 = float(x[0])
    z_lo = float(d.inverse_cdf(_TAIL_MASS))
    z_hi = float(d.inverse_cdf(1.0 - _TAIL_MASS))
    # floor(y) = sum_{j>=1} 1{y >= j} - sum_{j>=0} 1{y < -j} with
    # y = (x + gamma*eps)/step, so each term is one CDF evaluation. Terms
    # whose argument falls outside the [z_lo, z_hi] quantile window are
    # saturated at 0 or 1 and are accounted for in closed form.
    rise_sat = math.floor((x0 + gamma * z_lo) / step)  # j <= rise_sat: P ~ 1
    rise_end = math.ceil((x0 + gamma * z_hi) / step)  # j >= rise_end: P ~ 0
    fall_sat = math.floor(-(x0 + gamma * z_hi) / step)  # j <= fall_sat: P ~ 1
    fall_end = math.ceil(-(x0 + gamma * z_lo) / step)  # j >= fall_end: P ~ 0
    terms = (rise_end - rise_sat) + (fall_end - fall_sat)
    if terms > _MAX_TERMS:
        raise UnsupportedFixturePairError(
            f"staircase x {d.name}: truncation at tail mass {_TAIL_MASS:g} needs "
            f"~{terms} step terms (heavy tails make the smoothed value diverge)"
        )
    value = float(max(rise_sat, 0))
    grad = 0.0
    for j in range(max(rise_sat + 1, 1), rise_end + 1):
        t = (j * step - x0) / gamma
        value += 1.0 - float(d.cdf(t))
        grad += float(d.density(t)) / gamma
    value -= float(max(fall_sat + 1, 0))
    for j in range(max(fall_sat + 1, 0), fall_end + 1):
        t = (-j * step - x0) / gamma
        value -= float(d.cdf(t))
        grad += float(d.density(t)) / gamma
    return np.array([step * value]), np.array([[step * grad]])


def _linear_oracle(d, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not d.symmetric:
        raise UnsupportedFixturePairError(
            f"linear fixture needs a symmetric distribution, got {d.name!r}"
        )
    return x.copy(), np.eye(x.size)


def analytic_oracle(fixture, d: Distribution, x, gamma, *, step=1.0, const=1.0):
    """Closed-form smoothed value and Jacobian for a fixture.

    Supported pairs: heaviside with any distribution, staircase with any
    light-tailed distribution (the shifted-step truncation diverges for
    Cauchy), linear with symmetric distributions, constant with anything.
    Returns (value, jacobian) of shapes (m,) and (m, n).
    """
    if fixture != "linear" and (gamma is None or not gamma > 0.0):
        raise ValueError(f"gamma must be positive, got {gamma}")
    if fixture == "heaviside":
        return _heaviside_oracle(d, x, gamma)
    if fixture == "staircase":
        return _staircase_oracle(d, x, gamma, step)
    if fixture == "linear":
        return _linear_oracle(d, x)
    if fixture == "constant":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.array([const]), np.zeros((1, x.size))
    raise UnsupportedFixturePairError(
        f"unknown fixture {fixture!r}; valid fixtures: {', '.join(FIXTURES)}"
    )


@dataclass
class OracleEstimate:
    """Reference Jacobian with bootstrap uncertainty."""

    jacobian: np.ndarray
    se: np.ndarray
    se_frobenius: float
    samples_used: int
    seeds: int


def bruteforce_oracle(
    f: BlackBox,
    d: Distribution,
    x,
    scale,
    budget,
    seed=0,
    *,
    seed_reps=16,
    bootstrap_reps=200,
):
    """High-budget reference Jacobian with a bootstrap standard error.

    Splits ``budget`` evaluations over ``seed_reps`` independent RQMC
    runs with the leave-one-out baseline (Cartesian grid when the
    per-seed count is a perfect n-th power, Latin hypercube otherwise),
    averages them, and bootstraps the spread of the per-seed estimates.
    """
    per_seed = max(int(budget) // seed_reps, 2)
    try:
        _cartesian_root(per_seed, f.n)
        kind = RQMC_CARTESIAN
    except CartesianSampleCountError:
        kind = RQMC_LATIN
    strategy = Strategy(kind)
    matrix_scale = np.ndim(scale) == 2
    estimates = np.empty((seed_reps, f.m, f.n))
    for i in range(seed_reps):
        plan_seed = int(np.random.SeedSequence([int(seed), i]).generate_state(1)[0])
        if matrix_scale:
            cfg = SmoothingConfig(
                d, samples=per_seed, strategy=strategy,
                scale_matrix=np.asarray(scale, dtype=float), covariate="loo",
            )
        else:
            cfg = SmoothingConfig(
                d, samples=per_seed, strategy=strategy,
                gamma=float(scale), covariate="loo",
            )
        plan = transform(make_plan(strategy, per_seed, f.n, plan_seed), d)
        estimates[i] = jacobian(f, x, cfg, plan)
    point = estimates.mean(axis=0)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xB007]))
    picks = rng.integers(0, seed_reps, size=(bootstrap_reps, seed_reps))
    boot_means = estimates[picks].mean(axis=1)
    se = boot_means.std(axis=0)
    return OracleEstimate(
        jacobian=point,
        se=se,
        se_frobenius=float(np.sqrt((se**2).sum())),
        samples_used=per_seed * seed_reps,
        seeds=seed_reps,
    )


def reference_jacobian(function_name, f: BlackBox, d: Distribution, x, gamma, budget, seed=0):
    """Best available oracle for a testbed function.

    Exact where a closed form exists (constant, heaviside), the
    high-budget reference estimate otherwise. Returns
    (jacobian, se_frobenius).
    """
    if function_name == "constant":
        return np.zeros((f.m, f.n)), 0.0
    if function_name == "heaviside":
        _, grad = analytic_oracle("heaviside", d, np.atleast_1d(x), gamma)
        return grad, 0.0
    est = bruteforce_oracle(f, d, x, gamma, budget, seed=seed)
    return est.jacobian, est.se_frobenius
