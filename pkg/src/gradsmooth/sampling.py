"""Perturbation plans: MC, Cartesian and Latin (R)QMC unit points.

A plan is an s-by-n block of points in the open unit cube plus the
metadata needed to reproduce it. Grid-based strategies spread the points
evenly: Cartesian plans place one point in each cell of a k^n grid
(requiring s = k^n), Latin plans place one point in each of s bins per
dimension. The QMC variants take cell/bin centers; the RQMC variants
draw uniformly within each cell/bin. Antithetic plans build s/2 base
points and append their mirror images u -> 1 - u, which transform to
eps -> -eps under any symmetric distribution.

Plans are generated single-threaded, frozen afterwards (read-only
arrays), and are bit-reproducible from (strategy, s, n, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .distributions import UNIT_EPS, Distribution

__all__ = [
    "MC",
    "QMC_CARTESIAN",
    "RQMC_CARTESIAN",
    "QMC_LATIN",
    "RQMC_LATIN",
    "STRATEGY_KINDS",
    "Strategy",
    "SamplePlan",
    "SamplingError",
    "CartesianSampleCountError",
    "AntitheticOddCountError",
    "AntitheticSymmetryError",
    "make_plan",
    "transform",
]

MC = "mc"
QMC_CARTESIAN = "qmc-cartesian"
RQMC_CARTESIAN = "rqmc-cartesian"
QMC_LATIN = "qmc-latin"
RQMC_LATIN = "rqmc-latin"

STRATEGY_KINDS = (MC, QMC_CARTESIAN, RQMC_CARTESIAN, QMC_LATIN, RQMC_LATIN)


class SamplingError(ValueError):
    """Invalid sampling strategy or sample count."""


class CartesianSampleCountError(SamplingError):
    """Cartesian grids need s = k^n for an integer k >= 1."""


class AntitheticOddCountError(SamplingError):
    """Antithetic pairing needs an even sample count."""


class AntitheticSymmetryError(SamplingError):
    """Antithetic pairing needs a symmetric distribution."""


@dataclass(frozen=True)
class Strategy:
    """A sampling strategy kind plus the antithetic flag."""

    kind: str
    antithetic: bool = False

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            valid = ", ".join(STRATEGY_KINDS)
            raise SamplingError(f"unknown strategy {self.kind!r}; valid kinds: {valid}")

    @property
    def is_cartesian(self):
        return self.kind in (QMC_CARTESIAN, RQMC_CARTESIAN)

    def label(self):
        return self.kind + ("+antithetic" if self.antithetic else "")


@dataclass(frozen=True)
class SamplePlan:
    """An s-by-n block of unit points, optionally transformed to eps.

    ``pairing`` is the antithetic involution: row i mirrors row
    pairing[i], with ``unit_points[pairing[i]] == 1 - unit_points[i]``
    exactly. It is None for non-antithetic plans.
    """

    unit_points: np.ndarray
    strategy: Strategy
    seed: int
    pairing: np.ndarray | None = None
    eps: np.ndarray | None = None

    @property
    def s(self):
        return self.unit_points.shape[0]

    @property
    def n(self):
        return self.unit_points.shape[1]


def _cartesian_root(s, n):
    k = round(s ** (1.0 / n))
    for cand in (k - 1, k, k + 1):
        if cand >= 1 and cand**n == s:
            return cand
    raise CartesianSampleCountError(
        f"cartesian strategies require samples = k^n; got samples={s}, n={n}"
    )


def _cartesian_cells(k, n):
    """All k^n cell index vectors in lexicographic order, shape (k^n, n)."""
    grids = np.meshgrid(*([np.arange(k)] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _latin_bins(rng, s, n):
    return np.stack([rng.permutation(s) for _ in range(n)], axis=1)


def _base_points(strategy, s, n, rng):
    """Unit points for a non-antithetic plan."""
    kind = strategy.kind
    if kind == MC:
        return rng.random((s, n))
    if kind in (QMC_CARTESIAN, RQMC_CARTESIAN):
        k = _cartesian_root(s, n)
        cells = _cartesian_cells(k, n)
        offset = 0.5 if kind == QMC_CARTESIAN else rng.random((s, n))
        return (cells + offset) / k
    # Latin: one point per bin per dimension, bin order from a seeded
    # permutation per dimension.
    bins = _latin_bins(rng, s, n)
    offset = 0.5 if kind == QMC_LATIN else rng.random((s, n))
    return (bins + offset) / s


def _antithetic_points(strategy, s, n, rng):
    """s/2 base points plus appended mirrors, preserving grid invariants."""
    kind = strategy.kind
    half = s // 2
    if kind == MC:
        base = rng.random((half, n))
    elif kind in (QMC_CARTESIAN, RQMC_CARTESIAN):
        k = _cartesian_root(s, n)
        # s even forces k even, so cell -> mirror cell (k-1-c) has no fixed
        # points; keep the lexicographically smaller cell of each pair and
        # mirroring fills the rest of the grid exactly.
        cells = _cartesian_cells(k, n)
        mirror = k - 1 - cells
        keep = np.array([tuple(c) < tuple(m) for c, m in zip(cells, mirror)])
        cells = cells[keep]
        offset = 0.5 if kind == QMC_CARTESIAN else rng.random((half, n))
        base = (cells + offset) / k
    else:
        # Latin: each mirror bin pair {b, s-1-b} contributes one base point,
        # so base + mirrors still cover every bin exactly once.
        pair_ids = np.stack([rng.permutation(half) for _ in range(n)], axis=1)
        side = rng.integers(0, 2, size=(half, n)).astype(bool)
        bins = np.where(side, s - 1 - pair_ids, pair_ids)
        offset = 0.5 if kind == QMC_LATIN else rng.random((half, n))
        base = (bins + offset) / s
    base = np.clip(base, UNIT_EPS, 1.0 - UNIT_EPS)
    # Derive the lower element of each pair from the upper one: 1 - hi is
    # exact for hi >= 1/2 (Sterbenz), so u <-> 1 - u is an exact involution
    # in both directions, not just up to a rounding of 1 - (1 - u).
    hi = np.where(base >= 0.5, base, 1.0 - base)
    lo = 1.0 - hi
    return np.concatenate(
        [np.where(base >= 0.5, hi, lo), np.where(base >= 0.5, lo, hi)], axis=0
    )


def make_plan(strategy: Strategy, s: int, n: int, seed: int) -> SamplePlan:
    """Generate the unit points of a plan.

    Raises :class:`CartesianSampleCountError` if a Cartesian strategy is
    asked for s != k^n, and :class:`AntitheticOddCountError` for
    antithetic plans with odd s.
    """
    if s < 1:
        raise SamplingError(f"need at least one sample, got s={s}")
    if n < 1:
        raise SamplingError(f"need at least one dimension, got n={n}")
    rng = np.random.default_rng(seed)
    if strategy.antithetic:
        if s % 2 != 0:
            raise AntitheticOddCountError(
                f"antithetic plans require an even sample count, got s={s}"
            )
        points = _antithetic_points(strategy, s, n, rng)  # clamped pre-mirroring
        half = s // 2
        pairing = np.concatenate([np.arange(half) + half, np.arange(half)])
        pairing.setflags(write=False)
    else:
        points = np.clip(_base_points(strategy, s, n, rng), UNIT_EPS, 1.0 - UNIT_EPS)
        pairing = None
    points.setflags(write=False)
    return SamplePlan(unit_points=points, strategy=strategy, seed=seed, pairing=pairing)


def transform(plan: SamplePlan, d: Distribution) -> SamplePlan:
    """Map the plan's unit points through the inverse CDF of ``d``.

    For antithetic plans the mirror half is set to the exact negation of
    the base half, which is what the quantile transform gives for a
    symmetric distribution up to rounding; non-symmetric distributions
    (Gumbel) are rejected because mirrored unit points no longer cancel.
    """
    if plan.strategy.antithetic and not d.symmetric:
        raise AntitheticSymmetryError(
            f"antithetic sampling requires a symmetric distribution, got {d.name!r}"
        )
    eps = d.inverse_cdf(plan.unit_points)
    if plan.pairing is not None:
        half = plan.s // 2
        eps[half:] = -eps[:half]
    eps.setflags(write=False)
    return replace(plan, eps=eps)
