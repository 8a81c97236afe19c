"""Entropic utility measure and Esscher tilting.

The entropic utility of a random outcome Z at risk aversion gamma is the
certainty equivalent (1/gamma) ln E[exp(gamma Z)]; gamma = 0 is the plain
expectation, handled as a hard branch rather than a limit.  Both the
sample-based and the weighted-discrete entry points evaluate via
max-shifted log-mean-exp so large |gamma| * range never overflows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericalError


@dataclass(frozen=True)
class RiskParams:
    """Risk aversion gamma plus the |gamma| threshold for the mean branch."""

    gamma: float
    zero_tolerance: float = 1e-12

    def __post_init__(self):
        if not np.isfinite(self.gamma):
            raise DomainError(f"gamma must be finite, got {self.gamma!r}")
        if not (0.0 < self.zero_tolerance < 1.0):
            raise DomainError(
                f"zero_tolerance must lie in (0, 1), got {self.zero_tolerance!r}"
            )

    @property
    def is_zero(self) -> bool:
        return abs(self.gamma) <= self.zero_tolerance


def _as_finite_1d(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size == 0:
        raise DomainError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def entropic_utility(samples: Sequence[float], params: RiskParams) -> float:
    """Entropic utility of the empirical law of `samples`.

    Returns (1/gamma) ln(mean exp(gamma z_i)), evaluated after subtracting
    max(gamma z_i); the arithmetic mean when |gamma| <= zero_tolerance.
    The result always lies in [min(samples), max(samples)].
    """
    z = _as_finite_1d(samples, "samples")
    if params.is_zero:
        return float(np.mean(z))
    gz = params.gamma * z
    m = float(np.max(gz))
    return float((m + np.log(np.mean(np.exp(gz - m)))) / params.gamma)


def entropic_utility_rows(matrix: np.ndarray, params: RiskParams) -> np.ndarray:
    """Row-wise `entropic_utility` for a (rows, samples) matrix.

    Used in the hot loops of the Bellman operator; performs the same
    shifted evaluation as the scalar form, so single rows agree bitwise.
    """
    z = np.asarray(matrix, dtype=float)
    if params.is_zero:
        return np.mean(z, axis=1)
    gz = params.gamma * z
    m = np.max(gz, axis=1, keepdims=True)
    out = (m[:, 0] + np.log(np.mean(np.exp(gz - m), axis=1))) / params.gamma
    return out


def _check_weights(values, weights):
    v = _as_finite_1d(values, "values")
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != v.shape:
        raise DomainError(
            f"values and weights length mismatch: {v.size} vs {w.size}"
        )
    if not np.all(np.isfinite(w)):
        raise DomainError("weights contain non-finite entries")
    if np.any(w < 0.0):
        raise DomainError("weights must be nonnegative")
    total = float(np.sum(w))
    if abs(total - 1.0) > 1e-12:
        raise DomainError(f"weights must sum to 1 within 1e-12, got {total!r}")
    return v, w


def entropic_utility_weighted(
    values: Sequence[float], weights: Sequence[float], params: RiskParams
) -> float:
    """Entropic utility of the discrete law sum_i w_i * delta_{v_i}.

    Zero-weight atoms are ignored entirely, so extreme values carried at
    weight 0 cannot poison the max shift.
    """
    v, w = _check_weights(values, weights)
    live = w > 0.0
    v, w = v[live], w[live]
    if params.is_zero:
        return float(np.dot(w, v))
    gv = params.gamma * v
    m = float(np.max(gv))
    return float((m + np.log(np.dot(w, np.exp(gv - m)))) / params.gamma)


def esscher_weights(
    values: Sequence[float], weights: Sequence[float], gamma: float
) -> np.ndarray:
    """Exponentially tilted weights w_i e^{gamma v_i} / sum_j w_j e^{gamma v_j}.

    This is the maximising measure in the dual representation of the
    entropic utility.  gamma = 0 returns the input weights unchanged.
    """
    v, w = _check_weights(values, weights)
    if gamma == 0.0:
        return w.copy()
    gv = gamma * v
    m = float(np.max(gv[w > 0.0]))
    tilted = w * np.exp(gv - m)
    total = float(np.sum(tilted))
    if not (total > 0.0 and np.isfinite(total)):
        raise NumericalError("tilted weights degenerate", total=total)
    return tilted / total


def effective_sample_size(weights: Sequence[float]) -> float:
    """1 / sum w_i^2 for a probability vector; N means uniform, 1 means a point mass."""
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


@dataclass(frozen=True)
class HolderSplit:
    """Entropic value of a sum next to its super/sub-additive split bounds."""

    lhs: float
    superadditive_bound: float
    subadditive_bound: float


def holder_split(
    x_samples: Sequence[float],
    y_samples: Sequence[float],
    gamma: float,
    p: float,
) -> HolderSplit:
    """Split mu^gamma(X+Y) on a paired empirical law, gamma < 0, p > 1.

    With q = p/(p-1):

        lhs  >= mu^{p gamma}(X) + mu^{q gamma}(Y)        (superadditive)
        lhs  <= mu^{gamma/p}(X) + mu^{-q gamma/p}(Y)     (subadditive)

    Both inequalities hold exactly on any empirical law, so the only slack
    needed downstream is floating point.
    """
    x = _as_finite_1d(x_samples, "x_samples")
    y = _as_finite_1d(y_samples, "y_samples")
    if x.size != y.size:
        raise DomainError(
            f"paired samples length mismatch: {x.size} vs {y.size}"
        )
    if not p > 1.0:
        raise DomainError(f"p must exceed 1, got {p!r}")
    if not gamma < 0.0:
        raise DomainError(f"gamma must be negative, got {gamma!r}")
    q = p / (p - 1.0)
    # exact-gamma parameters; the zero branch is unreachable here
    mu = lambda s, g: entropic_utility(s, RiskParams(g))
    lhs = mu(x + y, gamma)
    upper = mu(x, gamma / p) + mu(y, -q * gamma / p)
    lower = mu(x, p * gamma) + mu(y, q * gamma)
    return HolderSplit(lhs=lhs, superadditive_bound=lower, subadditive_bound=upper)
