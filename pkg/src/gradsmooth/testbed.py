"""Piecewise-constant black-box functions for the variance benchmarks.

Each function here has zero gradient almost everywhere (the outputs only
change on a measure-zero set of inputs), so first-order or path-wise
differentiation yields nothing and smoothing-based estimation is the
only route to useful gradients.

Functions come in a scalar form (one input vector) and a vectorized
batch form used by the estimators, which must agree row-for-row.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .estimators import BlackBox

__all__ = [
    "GridCostMap",
    "argsort_permutation",
    "ranking_matrix",
    "shortest_path_mask",
    "heaviside",
    "staircase",
    "grid_from_csv",
    "grid_to_csv",
    "FUNCTION_NAMES",
    "make_function",
]

# Perturbed cost maps can dip below zero; Dijkstra needs positive costs,
# so the black-box wrapper clamps at this floor.
COST_FLOOR = 1e-6


def argsort_permutation(x):
    """Permutation matrix P with P @ x sorted ascending (stable ties)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    order = np.argsort(x, kind="stable")
    P = np.zeros((n, n))
    P[np.arange(n), order] = 1.0
    return P


def ranking_matrix(x):
    """Transpose of :func:`argsort_permutation`: the ranking permutation."""
    return argsort_permutation(x).T


def _argsort_batch(points):
    s, n = points.shape
    order = np.argsort(points, axis=1, kind="stable")
    P = np.zeros((s, n, n))
    P[np.arange(s)[:, None], np.arange(n)[None, :], order] = 1.0
    return P.reshape(s, n * n)


def _ranking_batch(points):
    s, n = points.shape
    P = _argsort_batch(points).reshape(s, n, n)
    return P.transpose(0, 2, 1).reshape(s, n * n)


def heaviside(x):
    """1 if the first coordinate is >= 0, else 0 (as a 1-vector)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.array([1.0 if x[0] >= 0.0 else 0.0])


def staircase(x, step=1.0):
    """floor(x / step) * step."""
    return np.floor(x / step) * step


@dataclass(frozen=True)
class GridCostMap:
    """A positive cost per grid cell; paths run corner to corner.

    The source is (0, 0) and the target is (height-1, width-1). Path cost
    is the sum of entered cells' costs, including both endpoints.
    """

    costs: np.ndarray

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=float)
        if costs.ndim != 2 or costs.shape[0] < 2 or costs.shape[1] < 2:
            raise ValueError(f"grid must be at least 2x2, got shape {costs.shape}")
        if np.any(costs <= 0.0):
            raise ValueError("grid costs must be strictly positive")
        costs = costs.copy()
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)

    @property
    def height(self):
        return self.costs.shape[0]

    @property
    def width(self):
        return self.costs.shape[1]


# 8-neighborhood offsets, in lexicographic (row, col) order.
_NEIGHBORS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def _dijkstra_distances(costs):
    """Node-cost Dijkstra distances from (0, 0) to every cell."""
    h, w = costs.shape
    dist = np.full((h, w), np.inf)
    dist[0, 0] = costs[0, 0]
    done = np.zeros((h, w), dtype=bool)
    heap = [(dist[0, 0], 0, 0)]
    while heap:
        d, r, c = heapq.heappop(heap)
        if done[r, c]:
            continue
        done[r, c] = True
        for dr, dc in _NEIGHBORS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and not done[rr, cc]:
                nd = d + costs[rr, cc]
                if nd < dist[rr, cc]:
                    dist[rr, cc] = nd
                    heapq.heappush(heap, (nd, rr, cc))
    return dist


def _backtrack_mask(dist, costs):
    """Mark the shortest path target -> source along optimal predecessors.

    At every step the predecessor is the lexicographically smallest
    (row, col) neighbor on an optimal path, which fixes the tie-break when
    several shortest paths exist.
    """
    h, w = costs.shape
    mask = np.zeros((h, w))
    r, c = h - 1, w - 1
    mask[r, c] = 1.0
    steps = 0
    while (r, c) != (0, 0):
        # dist[r, c] was computed as dist[pred] + costs[r, c], so testing
        # that exact sum keeps the float comparison exact.
        for dr, dc in _NEIGHBORS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and dist[rr, cc] + costs[r, c] == dist[r, c]:
                r, c = rr, cc
                break
        else:
            raise RuntimeError("no predecessor found; distances are inconsistent")
        mask[r, c] = 1.0
        steps += 1
        if steps > h * w:
            raise RuntimeError("path reconstruction did not terminate")
    return mask


def shortest_path_mask(grid: GridCostMap):
    """Binary mask of the cheapest 8-neighborhood corner-to-corner path."""
    dist = _dijkstra_distances(grid.costs)
    return _backtrack_mask(dist, grid.costs)


def _relaxation_distances(costs):
    """Batched distances via repeated 8-neighbor relaxation.

    ``costs`` has shape (s, h, w). Each relaxation sweep evaluates the
    same prefix sums Dijkstra would, so for positive costs the result is
    bit-identical to :func:`_dijkstra_distances` per sample.
    """
    s, h, w = costs.shape
    dist = np.full((s, h, w), np.inf)
    dist[:, 0, 0] = costs[:, 0, 0]
    for _ in range(h * w):
        prev = dist
        padded = np.pad(dist, ((0, 0), (1, 1), (1, 1)), constant_values=np.inf)
        best = dist
        for dr, dc in _NEIGHBORS:
            shifted = padded[:, 1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
            best = np.minimum(best, shifted + costs)
        dist = best
        if np.array_equal(dist, prev):
            break
    return dist


def _backtrack_mask_batch(dist, costs):
    s, h, w = costs.shape
    mask = np.zeros((s, h, w))
    r = np.full(s, h - 1)
    c = np.full(s, w - 1)
    mask[np.arange(s), r, c] = 1.0
    active = np.ones(s, dtype=bool)
    for _ in range(h * w):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        orig_r, orig_c = r[idx].copy(), c[idx].copy()
        here = dist[idx, orig_r, orig_c]
        cost_here = costs[idx, orig_r, orig_c]
        found = np.zeros(idx.size, dtype=bool)
        for dr, dc in _NEIGHBORS:
            rr = orig_r + dr
            cc = orig_c + dc
            inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            hit = np.zeros(idx.size, dtype=bool)
            sub = np.flatnonzero(inside & ~found)
            if sub.size:
                # Same exact-sum test as the scalar backtrack.
                hit[sub] = dist[idx[sub], rr[sub], cc[sub]] + cost_here[sub] == here[sub]
            take = hit & ~found
            if take.any():
                t = np.flatnonzero(take)
                r[idx[t]] = rr[t]
                c[idx[t]] = cc[t]
                found[take] = True
        if not found.all():
            raise RuntimeError("no predecessor found; distances are inconsistent")
        mask[idx, r[idx], c[idx]] = 1.0
        active[idx] = (r[idx] != 0) | (c[idx] != 0)
    if active.any():
        raise RuntimeError("path reconstruction did not terminate")
    return mask


def _shortest_path_batch(points, h, w):
    costs = np.maximum(points.reshape(-1, h, w), COST_FLOOR)
    dist = _relaxation_distances(costs)
    mask = _backtrack_mask_batch(dist, costs)
    return mask.reshape(points.shape[0], h * w)


def grid_from_csv(path):
    """Load a cost map from CSV: one row per grid row, positive reals."""
    costs = np.loadtxt(path, delimiter=",", ndmin=2)
    return GridCostMap(costs)


def grid_to_csv(grid: GridCostMap, path):
    np.savetxt(path, grid.costs, delimiter=",")


FUNCTION_NAMES = (
    "argsort",
    "rank",
    "shortest-path",
    "heaviside",
    "staircase",
    "staircase-abs",
    "constant",
)


def make_function(name, n, step=1.0):
    """Build the named black box on R^n.

    ``argsort`` and ``rank`` flatten their n-by-n permutation matrices;
    ``shortest-path`` treats x as a flattened square cost map (n must be
    a perfect square) and clamps perturbed costs at a small positive
    floor. ``staircase-abs`` is |staircase| with its minimum plateau at
    [0, step); ``constant`` always returns 1.
    """
    if name in ("argsort", "rank"):
        single = argsort_permutation if name == "argsort" else ranking_matrix
        batch = _argsort_batch if name == "argsort" else _ranking_batch
        return BlackBox(
            n=n,
            m=n * n,
            eval=lambda x: single(x).ravel(),
            batch=batch,
            name=name,
        )
    if name == "shortest-path":
        side = round(n**0.5)
        if side * side != n or side < 2:
            raise ValueError(f"shortest-path needs n = side^2 with side >= 2, got n={n}")

        def _eval(x):
            costs = np.maximum(np.asarray(x, dtype=float).reshape(side, side), COST_FLOOR)
            return shortest_path_mask(GridCostMap(costs)).ravel()

        return BlackBox(
            n=n,
            m=n,
            eval=_eval,
            batch=lambda pts: _shortest_path_batch(pts, side, side),
            name=name,
        )
    if name == "heaviside":
        return BlackBox(
            n=n,
            m=1,
            eval=heaviside,
            batch=lambda pts: (pts[:, :1] >= 0.0).astype(float),
            name=name,
        )
    if name in ("staircase", "staircase-abs"):
        if n != 1:
            raise ValueError(f"{name} is one-dimensional, got n={n}")
        post = np.abs if name == "staircase-abs" else (lambda v: v)
        return BlackBox(
            n=1,
            m=1,
            eval=lambda x: post(staircase(np.atleast_1d(x)[:1], step)),
            batch=lambda pts: post(staircase(pts[:, :1], step)),
            name=name,
        )
    if name == "constant":
        return BlackBox(
            n=n,
            m=1,
            eval=lambda x: np.array([1.0]),
            batch=lambda pts: np.ones((pts.shape[0], 1)),
            name=name,
        )
    valid = ", ".join(FUNCTION_NAMES)
    raise ValueError(f"unknown function {name!r}; valid names: {valid}")
