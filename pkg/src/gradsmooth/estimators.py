"""Gradient estimators for stochastically smoothed black-box functions.

Given f: R^n -> R^m, a smoothing distribution mu and a scale (scalar
gamma or lower-triangular matrix L), the smoothed function is
``E[f(x + gamma*eps)]`` (or ``E[f(x + L@eps)]``) and every quantity here
is a score-weighted sample mean over one plan of perturbations:

* value:      mean of f(x + scale*eps_i)
* jacobian:   mean of (f_i - c_i) * w_i^T, with w_i the per-sample score
              divided by gamma (scalar scale) or premultiplied by L^-1
              (matrix scale)
* dgamma:     mean of (f_i - c_i) * (score_i . eps_i - n) / gamma
* dscale:     mean of (f_i - c_i) * L^-T (score_i eps_i^T - I)
* output covariance and its gradients w.r.t. x and L, assembled from the
  score-weighted second moments minus the product-rule terms built from
  the value/jacobian/dscale estimates on the same plan
* k-sample median value and gradient, weighting each sample by the
  probability q_i that it is the median of a random k-subset

The baseline c_i is the covariate: 0, f(x) (one extra evaluation), or
the leave-one-out mean of the other s-1 outputs. Baselines change the
variance, never the expectation, because every weight above has zero
mean under mu.

Samples whose score is undefined (the measure-zero kink set of Laplace
and Triangular) contribute exactly zero, implementing the indicator that
makes smoothing valid for absolutely continuous densities.

All estimates are deterministic functions of (f, x, config, plan);
accumulation uses numpy's pairwise summation throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from .distributions import Distribution
from .sampling import (
    AntitheticSymmetryError,
    Strategy,
    make_plan,
    transform,
)

__all__ = [
    "COVARIATES",
    "BlackBox",
    "SmoothingConfig",
    "EstimateReport",
    "EstimationError",
    "NonFiniteOutputError",
    "CovariateNeedsTwoSamplesError",
    "MatrixScaleNotAllowedError",
    "SingularScaleMatrixError",
    "EvenKUnsupportedError",
    "KExceedsSError",
    "VectorOutputUnsupportedError",
    "smooth_value",
    "jacobian",
    "dgamma",
    "dscale_matrix",
    "output_covariance",
    "median_weights",
    "median_gradient",
    "compose_objective",
    "estimate",
]

COVARIATES = ("none", "fx", "loo")


class EstimationError(Exception):
    """Base class for estimator failures."""


class NonFiniteOutputError(EstimationError):
    """The black box returned NaN or infinity for some sample."""

    def __init__(self, sample_index, message=None):
        self.sample_index = sample_index
        super().__init__(
            message or f"black box produced a non-finite output at sample {sample_index}"
        )


class CovariateNeedsTwoSamplesError(EstimationError, ValueError):
    """The leave-one-out baseline needs at least two samples."""


class MatrixScaleNotAllowedError(EstimationError, ValueError):
    """This estimator is defined for a scalar scale only."""


class SingularScaleMatrixError(EstimationError, ValueError):
    """The scale matrix must be lower triangular with positive diagonal."""


class EvenKUnsupportedError(EstimationError, ValueError):
    """k-sample medians are defined here for odd k > 1 only."""


class KExceedsSError(EstimationError, ValueError):
    """The median subset size k cannot exceed the sample count."""


class VectorOutputUnsupportedError(EstimationError, ValueError):
    """The median estimator handles scalar outputs only."""


@dataclass(frozen=True)
class BlackBox:
    """A deterministic function f: R^n -> R^m evaluated pointwise.

    ``eval`` maps one n-vector to an m-vector. ``batch``, if given, maps
    an (s, n) block to an (s, m) block and must agree with ``eval``
    row-for-row; estimators use it when present because f is evaluated
    once per perturbation sample.
    """

    n: int
    m: int
    eval: Callable[[np.ndarray], np.ndarray]
    batch: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __call__(self, x):
        return np.atleast_1d(np.asarray(self.eval(np.asarray(x, dtype=float)), dtype=float))

    def evaluate(self, points):
        """Evaluate on an (s, n) block, checking outputs stay finite."""
        points = np.asarray(points, dtype=float)
        if self.batch is not None:
            out = np.asarray(self.batch(points), dtype=float)
        else:
            out = np.stack([self(p) for p in points])
        out = out.reshape(points.shape[0], self.m)
        if not np.all(np.isfinite(out)):
            bad = int(np.argwhere(~np.isfinite(out).all(axis=1))[0, 0])
            raise NonFiniteOutputError(bad)
        return out


@dataclass(frozen=True)
class SmoothingConfig:
    """Distribution, scale, sample count, strategy and covariate choice.

    Exactly one of ``gamma`` (scalar scale > 0) or ``scale_matrix``
    (lower-triangular with strictly positive diagonal) applies; passing a
    matrix clears the scalar.
    """

    distribution: Distribution
    samples: int
    strategy: Strategy
    gamma: float | None = 1.0
    scale_matrix: np.ndarray | None = None
    covariate: str = "none"

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError(f"need at least one sample, got {self.samples}")
        if self.covariate not in COVARIATES:
            raise ValueError(
                f"unknown covariate {self.covariate!r}; valid: {', '.join(COVARIATES)}"
            )
        if self.covariate == "loo" and self.samples < 2:
            raise CovariateNeedsTwoSamplesError(
                "leave-one-out covariate needs at least 2 samples"
            )
        if self.strategy.antithetic and not self.distribution.symmetric:
            raise AntitheticSymmetryError(
                f"antithetic sampling requires a symmetric distribution, "
                f"got {self.distribution.name!r}"
            )
        if self.scale_matrix is not None:
            L = np.array(self.scale_matrix, dtype=float)
            if L.ndim != 2 or L.shape[0] != L.shape[1]:
                raise ValueError(f"scale matrix must be square, got shape {L.shape}")
            if np.any(np.triu(L, k=1) != 0.0):
                raise ValueError("scale matrix must be lower triangular")
            if np.any(np.diag(L) <= 0.0):
                raise SingularScaleMatrixError(
                    "scale matrix needs a strictly positive diagonal"
                )
            L.setflags(write=False)
            object.__setattr__(self, "scale_matrix", L)
            object.__setattr__(self, "gamma", None)
        else:
            if self.gamma is None or not self.gamma > 0.0:
                raise ValueError(f"gamma must be positive, got {self.gamma}")

    @property
    def is_matrix_scale(self):
        return self.scale_matrix is not None


@dataclass
class EstimateReport:
    """All estimator outputs for one (f, x, config, plan) run."""

    value: np.ndarray
    jacobian: np.ndarray
    dgamma: np.ndarray | None = None
    dscale: np.ndarray | None = None
    out_cov: np.ndarray | None = None
    d_out_cov_dx: np.ndarray | None = None
    d_out_cov_dscale: np.ndarray | None = None
    median_value: float | None = None
    median_gradient: np.ndarray | None = None
    median_k: int | None = None
    samples_used: int = 0
    seed: int = 0


def _as_plan(f, cfg, plan):
    if plan.s != cfg.samples:
        raise ValueError(f"plan has {plan.s} samples, config expects {cfg.samples}")
    if plan.n != f.n:
        raise ValueError(f"plan dimension {plan.n} does not match black box n={f.n}")
    if plan.eps is None:
        plan = transform(plan, cfg.distribution)
    return plan


class _Evaluation:
    """One shared evaluation batch; every estimator is a linear
    functional of these outputs."""

    def __init__(self, f, x, cfg, plan):
        plan = _as_plan(f, cfg, plan)
        self.f = f
        self.x = np.asarray(x, dtype=float).reshape(f.n)
        self.cfg = cfg
        self.plan = plan
        self.eps = plan.eps
        if cfg.is_matrix_scale:
            points = self.x[None, :] + self.eps @ cfg.scale_matrix.T
        else:
            points = self.x[None, :] + cfg.gamma * self.eps
        self.outputs = f.evaluate(points)  # (s, m)
        d = cfg.distribution
        omega = d.in_omega(self.eps)
        self.valid = ~omega.any(axis=1)  # per-sample indicator
        scores = np.array(d.score(self.eps), dtype=float)
        scores[~self.valid, :] = 0.0
        if plan.pairing is not None:
            # Mirror rows carry the exact negated score so antithetic
            # cancellation is exact, not just up to libm rounding.
            half = plan.s // 2
            scores[half:] = -scores[:half]
        self.scores = scores
        self._fx = None

    @property
    def s(self):
        return self.plan.s

    def fx(self):
        if self._fx is None:
            self._fx = self.f(self.x).reshape(self.f.m)
        return self._fx

    def baseline(self):
        """Per-sample covariate baseline, shape (s, m)."""
        cov = self.cfg.covariate
        if cov == "none":
            return np.zeros_like(self.outputs)
        if cov == "fx":
            return np.broadcast_to(self.fx(), self.outputs.shape)
        total = self.outputs.sum(axis=0, keepdims=True)
        return (total - self.outputs) / (self.s - 1)

    def product_baseline(self):
        """Covariate baseline for the pairwise output products, (s, m, m)."""
        cov = self.cfg.covariate
        prods = np.einsum("si,sj->sij", self.outputs, self.outputs)
        if cov == "none":
            return prods, np.zeros_like(prods)
        if cov == "fx":
            fx = self.fx()
            return prods, np.broadcast_to(np.outer(fx, fx), prods.shape)
        total = prods.sum(axis=0, keepdims=True)
        return prods, (total - prods) / (self.s - 1)

    def scaled_scores(self):
        """Per-sample gradient weights: score/gamma or L^-1 @ score."""
        if self.cfg.is_matrix_scale:
            return solve_triangular(self.cfg.scale_matrix, self.scores.T, lower=True).T
        return self.scores / self.cfg.gamma

    def _effective_scale(self):
        if self.cfg.is_matrix_scale:
            return self.cfg.scale_matrix
        return self.cfg.gamma * np.eye(self.f.n)

    def scale_weights(self):
        """Per-sample scale-matrix weights L^-T (score eps^T - I), (s, n, n)."""
        n = self.f.n
        T = np.einsum("si,sj->sij", self.scores, self.eps)
        T[self.valid] -= np.eye(n)
        L = self._effective_scale()
        # L^-T contracts the row index of each per-sample matrix.
        rows_first = T.transpose(1, 0, 2).reshape(n, -1)
        solved = solve_triangular(L, rows_first, lower=True, trans="T")
        return solved.reshape(n, self.s, n).transpose(1, 0, 2)

    def _fold_pairs(self, payload, weights):
        """Antithetic reduction: sum_i a_i w_i = sum_base (a_i - a_pair) w_i.

        The mirror weights are exact negations, so pairing the payload
        differences first makes score-weighted sums cancel exactly (a
        constant payload contributes a hard zero, not rounding noise).
        """
        pairing = self.plan.pairing
        base = np.flatnonzero(np.arange(self.s) < pairing)
        return payload[base] - payload[pairing[base]], weights[base]

    # --- estimates -------------------------------------------------------

    def value(self):
        return self.outputs.mean(axis=0)

    def jacobian(self):
        resid = self.outputs - self.baseline()
        weights = self.scaled_scores()
        if self.plan.pairing is not None:
            resid, weights = self._fold_pairs(resid, weights)
        return resid.T @ weights / self.s

    def dgamma(self):
        if self.cfg.is_matrix_scale:
            raise MatrixScaleNotAllowedError(
                "dgamma needs a scalar scale; use dscale_matrix for matrix scales"
            )
        # The -n offset is what makes the weight zero-mean in n dimensions
        # (it is the trace of the matrix-scale weight at L = gamma*I).
        dots = np.einsum("si,si->s", self.scores, self.eps)
        w = np.where(self.valid, dots - self.f.n, 0.0) / self.cfg.gamma
        resid = self.outputs - self.baseline()
        return resid.T @ w / self.s

    def dscale(self):
        if not self.cfg.is_matrix_scale:
            raise ValueError("dscale_matrix needs a matrix-scale config")
        return self._dscale_any()

    def _dscale_any(self):
        resid = self.outputs - self.baseline()
        return np.einsum("sm,sjk->mjk", resid, self.scale_weights()) / self.s

    def output_covariance(self):
        v = self.value()
        J = self.jacobian()
        dL = self._dscale_any()
        G = self.outputs.T @ self.outputs / self.s - np.outer(v, v)
        prods, base = self.product_baseline()
        resid = prods - base
        weights = self.scaled_scores()
        if self.plan.pairing is not None:
            folded_resid, folded_weights = self._fold_pairs(resid, weights)
        else:
            folded_resid, folded_weights = resid, weights
        second_dx = np.einsum("sij,sk->ijk", folded_resid, folded_weights) / self.s
        dG_dx = second_dx - v[:, None, None] * J[None, :, :] - v[None, :, None] * J[:, None, :]
        # The scale weights are mirror-symmetric, so no antithetic folding here.
        second_dL = np.einsum("sij,skl->ijkl", resid, self.scale_weights()) / self.s
        dG_dL = (
            second_dL
            - v[:, None, None, None] * dL[None, :, :, :]
            - v[None, :, None, None] * dL[:, None, :, :]
        )
        return G, dG_dx, dG_dL

    def median(self, k):
        if self.f.m != 1:
            raise VectorOutputUnsupportedError(
                "k-sample median gradients support scalar outputs only"
            )
        if self.cfg.is_matrix_scale:
            raise MatrixScaleNotAllowedError("k-sample median needs a scalar scale")
        g = self.outputs[:, 0]
        q = median_weights(g, k)
        value = float(q @ g)
        grad = (q * g) @ self.scaled_scores()
        return value, grad


def smooth_value(f, x, cfg, plan):
    """Sample mean of f over the perturbed inputs, shape (m,)."""
    return _Evaluation(f, x, cfg, plan).value()


def jacobian(f, x, cfg, plan):
    """Score-weighted Jacobian estimate of the smoothed f, shape (m, n)."""
    return _Evaluation(f, x, cfg, plan).jacobian()


def dgamma(f, x, cfg, plan):
    """Derivative of the smoothed f w.r.t. the scalar scale, shape (m,)."""
    return _Evaluation(f, x, cfg, plan).dgamma()


def dscale_matrix(f, x, cfg, plan):
    """Derivative of the smoothed f w.r.t. the scale matrix, (m, n, n)."""
    return _Evaluation(f, x, cfg, plan).dscale()


def output_covariance(f, x, cfg, plan):
    """Output covariance and its gradients: (G, dG_dx, dG_dL).

    Shapes (m, m), (m, m, n) and (m, m, n, n). A scalar-scale config is
    treated as L = gamma * I.
    """
    return _Evaluation(f, x, cfg, plan).output_covariance()


def median_weights(values, k):
    """Probability q_i that values[i] is the median of a random k-subset.

    k must be odd and 1 < k <= s. For distinct values the weight of the
    element with 1-based sorted rank r is C(r-1, h) * C(s-r, h) / C(s, k)
    with h = (k-1)/2; tied values share the mass of their ranks equally.
    The weights sum to one.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    s = values.size
    if k <= 1 or k % 2 == 0:
        raise EvenKUnsupportedError(f"median subset size must be odd and > 1, got k={k}")
    if k > s:
        raise KExceedsSError(f"median subset size k={k} exceeds sample count s={s}")
    h = (k - 1) // 2
    order = np.argsort(values, kind="stable")
    total = math.comb(s, k)
    counts = np.array(
        [math.comb(r, h) * math.comb(s - 1 - r, h) for r in range(s)], dtype=float
    )
    q_sorted = counts / total
    sorted_vals = values[order]
    # Equal values are interchangeable as subset medians: average their mass.
    start = 0
    for stop in range(1, s + 1):
        if stop == s or sorted_vals[stop] != sorted_vals[start]:
            if stop - start > 1:
                q_sorted[start:stop] = q_sorted[start:stop].mean()
            start = stop
    q = np.empty(s)
    q[order] = q_sorted
    return q


def median_gradient(f, x, cfg, plan, k):
    """k-sample median estimate and its gradient for scalar f.

    Returns (value, grad) where value = sum_i q_i f(x + gamma*eps_i) and
    grad = sum_i q_i f(x + gamma*eps_i) score(eps_i)/gamma.
    """
    return _Evaluation(f, x, cfg, plan).median(k)


def compose_objective(h, loss):
    """Black box x -> loss(h(x)) for smoothing a scalar objective.

    The alternative route smooths h itself (the full Jacobian) and
    backpropagates an externally differentiated loss through the smoothed
    outputs.
    """

    def _eval(x):
        return np.atleast_1d(float(loss(h(x))))

    if h.batch is not None:

        def _batch(points):
            outs = h.batch(points)
            return np.array([[float(loss(row))] for row in np.asarray(outs)])

    else:
        _batch = None

    name = f"loss({h.name})" if h.name else "loss(h)"
    return BlackBox(n=h.n, m=1, eval=_eval, batch=_batch, name=name)


def estimate(f, x, cfg, seed, *, with_covariance=False, median_k=None):
    """Run every applicable estimator on one shared evaluation batch.

    Builds the plan from (cfg.strategy, cfg.samples, f.n, seed), evaluates
    f once per sample, and fills an :class:`EstimateReport`.
    """
    plan = transform(make_plan(cfg.strategy, cfg.samples, f.n, seed), cfg.distribution)
    ev = _Evaluation(f, x, cfg, plan)
    report = EstimateReport(
        value=ev.value(),
        jacobian=ev.jacobian(),
        samples_used=cfg.samples,
        seed=seed,
    )
    if cfg.is_matrix_scale:
        report.dscale = ev.dscale()
    else:
        report.dgamma = ev.dgamma()
    if with_covariance:
        report.out_cov, report.d_out_cov_dx, report.d_out_cov_dscale = ev.output_covariance()
    if median_k is not None:
        report.median_value, report.median_gradient = ev.median(median_k)
        report.median_k = median_k
    return report
