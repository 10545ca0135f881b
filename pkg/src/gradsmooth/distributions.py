"""Standardized smoothing distributions: densities, scores, inverse CDFs.

Every distribution here is zero-location and unit-scale. Location and
scale never live inside the distribution object; they are applied by the
caller as ``x + gamma * eps`` or ``x + L @ eps``. Multivariate smoothing
uses n independent copies of the univariate density, so the multivariate
score is simply the vector of per-coordinate scores.

The score of a distribution is the derivative of the negative
log-density, ``d/de -log mu(e)``. For densities that are absolutely
continuous but not differentiable everywhere (Laplace, Triangular) the
score does not exist on a measure-zero set; :meth:`Distribution.score`
returns NaN there and :meth:`Distribution.in_omega` flags the same
points, so estimators can zero out those contributions instead of
propagating garbage.

All instances are immutable and stateless; samplers take an explicit
``numpy.random.Generator``, so distributions can be shared freely across
threads.
"""

from __future__ import annotations

import math
from typing import ClassVar

import numpy as np
from scipy import special

__all__ = [
    "Distribution",
    "Gaussian",
    "Logistic",
    "Gumbel",
    "Cauchy",
    "Laplace",
    "Triangular",
    "DISTRIBUTIONS",
    "get_distribution",
    "UNIT_EPS",
]

# Uniform variates are clamped to [UNIT_EPS, 1 - UNIT_EPS] before the
# inverse-CDF transform; Cauchy and Gumbel quantiles diverge at 0 and 1.
UNIT_EPS = 1e-12


class Distribution:
    """Base class for the standardized smoothing distributions."""

    name: ClassVar[str]
    symmetric: ClassVar[bool]
    support: ClassVar[tuple[float, float]] = (-math.inf, math.inf)

    # --- density -------------------------------------------------------

    def density(self, e):
        raise NotImplementedError

    def log_density(self, e):
        raise NotImplementedError

    # --- score ---------------------------------------------------------

    def _raw_score(self, e):
        raise NotImplementedError

    def in_omega(self, e):
        """Boolean mask of points where the score is undefined.

        Membership is checked with exact floating-point equality: the set
        has measure zero, so under continuous sampling it is only ever hit
        by deliberately injected values, and those must be masked exactly.
        """
        e = np.asarray(e, dtype=float)
        return np.zeros(e.shape, dtype=bool)

    def score(self, e):
        """Derivative of -log density; NaN wherever it is undefined."""
        e = np.asarray(e, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            raw = self._raw_score(e)
        omega = self.in_omega(e)
        if omega.any():
            raw = np.where(omega, np.nan, raw)
        return raw

    # --- CDF and sampling ----------------------------------------------

    def cdf(self, e):
        raise NotImplementedError

    def _inverse_cdf(self, u):
        raise NotImplementedError

    def inverse_cdf(self, u):
        """Quantile function on the open interval (0, 1)."""
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0.0) or np.any(u >= 1.0):
            raise ValueError(f"{self.name}: inverse_cdf requires 0 < u < 1")
        return self._inverse_cdf(u)

    def sample(self, rng, size=None):
        """Draw from the distribution via the inverse CDF.

        Sampling goes through the same quantile transform as the QMC
        paths, so plain Monte Carlo and grid-based plans share one code
        path for mapping unit variates to perturbations.
        """
        u = np.clip(rng.random(size), UNIT_EPS, 1.0 - UNIT_EPS)
        return self._inverse_cdf(u)

    def __repr__(self):
        return f"{type(self).__name__}()"


class Gaussian(Distribution):
    """Standard normal: density exp(-e^2/2)/sqrt(2*pi), score e."""

    name = "gaussian"
    symmetric = True

    def density(self, e):
        e = np.asarray(e, dtype=float)
        return np.exp(-0.5 * e * e) / math.sqrt(2.0 * math.pi)

    def log_density(self, e):
        e = np.asarray(e, dtype=float)
        return -0.5 * e * e - 0.5 * math.log(2.0 * math.pi)

    def _raw_score(self, e):
        return np.asarray(e, dtype=float).copy()

    def cdf(self, e):
        return special.ndtr(np.asarray(e, dtype=float))

    def _inverse_cdf(self, u):
        return special.ndtri(u)


class Logistic(Distribution):
    """Logistic: density exp(-e)/(1+exp(-e))^2, score tanh(e/2)."""

    name = "logistic"
    symmetric = True

    def density(self, e):
        # exp(-|e|) form is symmetric and immune to overflow.
        a = np.exp(-np.abs(np.asarray(e, dtype=float)))
        return a / (1.0 + a) ** 2

    def log_density(self, e):
        a = np.abs(np.asarray(e, dtype=float))
        return -a - 2.0 * np.log1p(np.exp(-a))

    def _raw_score(self, e):
        return np.tanh(0.5 * e)

    def cdf(self, e):
        return special.expit(np.asarray(e, dtype=float))

    def _inverse_cdf(self, u):
        return np.log(u) - np.log1p(-u)


class Gumbel(Distribution):
    """Gumbel: density exp(-e - exp(-e)), score 1 - exp(-e)."""

    name = "gumbel"
    symmetric = False

    def density(self, e):
        e = np.asarray(e, dtype=float)
        with np.errstate(over="ignore"):
            return np.exp(-e - np.exp(-e))

    def log_density(self, e):
        e = np.asarray(e, dtype=float)
        with np.errstate(over="ignore"):
            return -e - np.exp(-e)

    def _raw_score(self, e):
        return 1.0 - np.exp(-e)

    def cdf(self, e):
        e = np.asarray(e, dtype=float)
        with np.errstate(over="ignore"):
            return np.exp(-np.exp(-e))

    def _inverse_cdf(self, u):
        return -np.log(-np.log(u))


class Cauchy(Distribution):
    """Cauchy: density 1/(pi*(1+e^2)), score 2e/(1+e^2)."""

    name = "cauchy"
    symmetric = True

    def density(self, e):
        e = np.asarray(e, dtype=float)
        return 1.0 / (math.pi * (1.0 + e * e))

    def log_density(self, e):
        e = np.asarray(e, dtype=float)
        return -math.log(math.pi) - np.log1p(e * e)

    def _raw_score(self, e):
        return 2.0 * e / (1.0 + e * e)

    def cdf(self, e):
        e = np.asarray(e, dtype=float)
        return 0.5 + np.arctan(e) / math.pi

    def _inverse_cdf(self, u):
        return np.tan(math.pi * (u - 0.5))


class Laplace(Distribution):
    """Laplace: density exp(-|e|)/2, score sign(e), undefined at 0."""

    name = "laplace"
    symmetric = True

    def density(self, e):
        e = np.asarray(e, dtype=float)
        return 0.5 * np.exp(-np.abs(e))

    def log_density(self, e):
        e = np.asarray(e, dtype=float)
        return -np.abs(e) - math.log(2.0)

    def _raw_score(self, e):
        return np.sign(e)

    def in_omega(self, e):
        e = np.asarray(e, dtype=float)
        return e == 0.0

    def cdf(self, e):
        e = np.asarray(e, dtype=float)
        half_tail = 0.5 * np.exp(-np.abs(e))
        return np.where(e < 0.0, half_tail, 1.0 - half_tail)

    def _inverse_cdf(self, u):
        return np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 * (1.0 - u)))


class Triangular(Distribution):
    """Triangular on [-1, 1]: density max(0, 1-|e|), score sign(e)/(1-|e|).

    The score is undefined at the kink (0), at the support edges (+-1)
    and everywhere outside the support, where the log-density is -inf.
    """

    name = "triangular"
    symmetric = True
    support = (-1.0, 1.0)

    def density(self, e):
        e = np.asarray(e, dtype=float)
        return np.maximum(0.0, 1.0 - np.abs(e))

    def log_density(self, e):
        with np.errstate(divide="ignore"):
            return np.log(self.density(e))

    def _raw_score(self, e):
        return np.sign(e) / (1.0 - np.abs(e))

    def in_omega(self, e):
        e = np.asarray(e, dtype=float)
        return (e == 0.0) | (np.abs(e) >= 1.0)

    def cdf(self, e):
        e = np.asarray(e, dtype=float)
        e = np.clip(e, -1.0, 1.0)
        left = 0.5 * (1.0 + e) ** 2
        right = 1.0 - 0.5 * (1.0 - e) ** 2
        return np.where(e <= 0.0, left, right)

    def _inverse_cdf(self, u):
        left = -1.0 + np.sqrt(2.0 * u)
        right = 1.0 - np.sqrt(np.maximum(2.0 * (1.0 - u), 0.0))
        return np.where(u <= 0.5, left, right)


DISTRIBUTIONS: dict[str, Distribution] = {
    d.name: d
    for d in (Gaussian(), Logistic(), Gumbel(), Cauchy(), Laplace(), Triangular())
}


def get_distribution(name: str) -> Distribution:
    """Look up a distribution by its lowercase CLI name."""
    try:
        return DISTRIBUTIONS[name]
    except KeyError:
        valid = ", ".join(sorted(DISTRIBUTIONS))
        raise ValueError(f"unknown distribution {name!r}; valid names: {valid}") from None
