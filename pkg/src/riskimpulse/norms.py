"""Weighted norms and span semi-norms on a truncated state grid.

The state space is truncated to [-L, L] and discretized on strictly
increasing nodes; a nonnegative weight w(x) defines the weighted sup norm
|g|/(1+w), its beta-shrinked variant |g|/(1+beta*w), the corresponding
span semi-norm over node pairs, and a weighted total-variation norm for
signed discrete measures.  Span semi-norms kill constants, which is what
makes the anchored Bellman iteration contract.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError

# A grid function is a plain 1-D float array aligned with StateGrid.points.
GridFunction = np.ndarray


@dataclass(frozen=True, eq=False)
class StateGrid:
    """Grid nodes over [-L, L], their weight values, and the shift-set nodes."""

    points: np.ndarray
    weight_values: np.ndarray
    shift_set_indices: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weight_values, dtype=float)
        idx = np.asarray(self.shift_set_indices, dtype=int)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weight_values", wts)
        object.__setattr__(self, "shift_set_indices", idx)
        if pts.ndim != 1 or pts.size < 1:
            raise DomainError("grid points must be a nonempty 1-D array")
        if np.any(np.diff(pts) <= 0.0):
            raise DomainError("grid points must be strictly increasing")
        if wts.shape != pts.shape:
            raise DomainError("weight_values must align with points")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(wts)):
            raise DomainError("grid points and weights must be finite")
        if np.any(wts < 0.0):
            raise DomainError("weight_values must be nonnegative")
        if idx.size == 0:
            raise DomainError("shift_set_indices must be nonempty")
        if np.any(idx < 0) or np.any(idx >= pts.size):
            raise DomainError("shift_set_indices out of range")

    @classmethod
    def uniform(
        cls,
        L: float,
        n_nodes: int,
        weight: Callable[[np.ndarray], np.ndarray] = np.abs,
        shift_targets=None,
    ) -> "StateGrid":
        """Uniform grid on [-L, L]; shift targets must land on nodes exactly.

        Targets are snapped to the nearest node when within 1e-9 of it and
        rejected otherwise.
        """
        if n_nodes < 3:
            raise DomainError(f"n_nodes must be >= 3, got {n_nodes}")
        if not L > 0.0:
            raise DomainError(f"L must be positive, got {L}")
        pts = np.linspace(-L, L, n_nodes)
        if shift_targets is None:
            idx = np.array([np.argmin(np.abs(pts))], dtype=int)
        else:
            targets = np.asarray(shift_targets, dtype=float)
            if targets.size == 0:
                raise DomainError("shift_targets must be nonempty")
            if np.any(np.abs(targets) > L):
                raise DomainError("shift_targets must lie inside [-L, L]")
            idx = np.empty(targets.size, dtype=int)
            for k, t in enumerate(targets):
                j = int(np.argmin(np.abs(pts - t)))
                if abs(pts[j] - t) > 1e-9:
                    raise DomainError(
                        f"shift target {t!r} is not a grid node "
                        f"(nearest node {pts[j]!r})"
                    )
                idx[k] = j
        return cls(points=pts, weight_values=weight(pts), shift_set_indices=idx)

    @property
    def n(self) -> int:
        return self.points.size

    def nearest_index(self, x: float) -> int:
        """Index of the grid node closest to x (left node wins ties)."""
        j = int(np.searchsorted(self.points, x))
        if j <= 0:
            return 0
        if j >= self.n:
            return self.n - 1
        return j - 1 if x - self.points[j - 1] <= self.points[j] - x else j

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.points.tobytes())
        h.update(self.weight_values.tobytes())
        h.update(np.ascontiguousarray(self.shift_set_indices).tobytes())
        return h.hexdigest()[:16]


def _aligned(g, grid: StateGrid) -> np.ndarray:
    arr = np.asarray(g, dtype=float).reshape(-1)
    if arr.size != grid.n:
        raise DomainError(
            f"grid function length {arr.size} does not match grid size {grid.n}"
        )
    return arr


def omega_norm(g: GridFunction, grid: StateGrid) -> float:
    """max_i |g(x_i)| / (1 + w(x_i))."""
    arr = _aligned(g, grid)
    return float(np.max(np.abs(arr) / (1.0 + grid.weight_values)))


def beta_omega_norm(g: GridFunction, grid: StateGrid, beta: float) -> float:
    """max_i |g(x_i)| / (1 + beta * w(x_i)); beta = 1 recovers omega_norm."""
    if not beta > 0.0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    arr = _aligned(g, grid)
    return float(np.max(np.abs(arr) / (1.0 + beta * grid.weight_values)))


def beta_span_seminorm(g: GridFunction, grid: StateGrid, beta: float) -> float:
    """max over node pairs of (g(x) - g(y)) / (2 + beta w(x) + beta w(y)).

    Exact O(n^2) pair scan; constants have span exactly 0.  Desk-scale
    grids stay in the low thousands of nodes, so the quadratic cost is a
    couple of milliseconds.
    """
    if not beta > 0.0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    arr = _aligned(g, grid)
    w = grid.weight_values
    num = arr[:, None] - arr[None, :]
    den = 2.0 + beta * (w[:, None] + w[None, :])
    return float(np.max(num / den))


def centering_constant(g: GridFunction, grid: StateGrid, beta: float) -> float:
    """The d minimizing |g + d| in the beta-shrinked norm.

    d -> |g + d|_{beta,w} is piecewise linear and convex: the one-sided
    envelopes a+(d) = max (g+d)/(1+bw) and a-(d) = max -(g+d)/(1+bw) are
    respectively increasing and decreasing in d, so the minimizer is the
    crossing point, found by bisection on a+(d) - a-(d).  At the optimum
    the centered norm equals the span semi-norm.
    """
    if not beta > 0.0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    arr = _aligned(g, grid)
    scale = 1.0 + beta * grid.weight_values

    def gap(d):
        r = (arr + d) / scale
        return float(np.max(r) + np.min(r))  # a+(d) - a-(d)

    hi = float(np.max(np.abs(arr)))
    if hi == 0.0:
        return 0.0
    lo = -hi
    # gap(lo) <= 0 <= gap(hi) by construction of the bracket
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def weighted_tv_norm(signed_weights, grid: StateGrid, beta: float) -> float:
    """sum_i (1 + beta w(x_i)) |h_i| for a signed discrete measure h on the grid.

    With beta -> 0 and h a difference of two probability vectors this is
    the total variation in the sum-of-absolute-differences convention
    (twice the common half-TV normalization).
    """
    if beta < 0.0:
        raise DomainError(f"beta must be nonnegative, got {beta!r}")
    h = _aligned(signed_weights, grid)
    return float(np.sum((1.0 + beta * grid.weight_values) * np.abs(h)))
