"""Empirical certification of the ergodicity and noise assumptions.

None of these routines prove anything; they certify, at Monte Carlo
resolution, the testable consequences the solver relies on: geometric
drift of the weight along one step, a local minorisation witness, the
diffusion noise moment bound, and continuity/monotonicity of the gain in
the risk aversion.  Certification failures are reported, not raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bellman import ImpulseProblem, solve_fixed_point
from .entropic import RiskParams, entropic_utility
from .errors import DomainError
from .kernel import FrozenKernel
from .processes import DiffusionModel, derive_stream, \
    diffusion_noise_mgf_bound, noise_component_samples, sample_segment

_B_GRID = np.round(np.arange(0.05, 0.951, 0.05), 2)


@dataclass(frozen=True, eq=False)
class DriftEstimate:
    """Certified drift coefficient and the per-gamma noise offsets.

    b1_hat is the smallest coefficient on the 0.05 grid for which the
    residual mu_hat(w(X_delta)) - b w(x) shows no growth in w(x) over the
    top quartile of probe states, simultaneously for every probed gamma.
    M2_hat is the resulting max residual; M1_hat is the analogous offset
    for the one-step path integral of the weight (slope fixed at 1).
    """

    b1_hat: float
    M1_hat: Dict[float, float]
    M2_hat: Dict[float, float]
    test_states: np.ndarray
    n_samples: int
    seed: int
    certified: bool
    failure_reason: str = ""
    mu_end_hat: Dict[float, np.ndarray] = field(default_factory=dict)
    mu_int_hat: Dict[float, np.ndarray] = field(default_factory=dict)


def _segment_weight_stats(model, omega, test_states, delta, n_samples, seed):
    """Per state: samples of w(X_delta) and of the path integral of w."""
    end_w = np.empty((len(test_states), n_samples))
    int_w = np.empty((len(test_states), n_samples))
    for i, x in enumerate(test_states):
        for j in range(n_samples):
            rng = derive_stream(seed, i, j)
            seg = sample_segment(model, x, delta, rng)
            if seg.states.ndim == 1:
                wpath = np.asarray(omega(seg.states), dtype=float)
            else:
                wpath = np.asarray([omega(s) for s in seg.states], dtype=float)
            end_w[i, j] = wpath[-1]
            int_w[i, j] = np.trapezoid(wpath, seg.times)
    return end_w, int_w


def _flat_over_top_quartile(residuals: np.ndarray, wx: np.ndarray) -> bool:
    """No residual growth in w(x): per-weight-level maxima non-increasing.

    States are grouped by (near-)equal weight before the comparison, so
    symmetric probe pairs such as +/-x do not trip the check on noise.
    """
    order = np.argsort(wx)
    wx_s, r_s = wx[order], residuals[order]
    n = wx_s.size
    take = max(3, int(np.ceil(n / 4)))
    wx_top, r_top = wx_s[-take:], r_s[-take:]
    levels: List[float] = []
    maxima: List[float] = []
    for w, r in zip(wx_top, r_top):
        if levels and abs(w - levels[-1]) <= 1e-9 * max(1.0, abs(w)):
            maxima[-1] = max(maxima[-1], r)
        else:
            levels.append(w)
            maxima.append(r)
    return all(b <= a for a, b in zip(maxima, maxima[1:]))


def verify_drift(
    model,
    omega: Callable,
    gammas: Sequence[float],
    test_states: Sequence[float],
    delta: float,
    n_samples: int,
    seed: int,
) -> DriftEstimate:
    """Certify one-step geometric drift of the weight from probe states.

    Drift concerns the uncontrolled process only, so the result is
    independent of any reward.  If no coefficient below 1 passes the
    flatness criterion the estimate is returned uncertified.
    """
    test_states = np.asarray(test_states, dtype=float)
    if test_states.size < 4:
        raise DomainError("need at least 4 test states")
    gammas = [float(g) for g in gammas]
    end_w, int_w = _segment_weight_stats(model, omega, test_states, delta, n_samples, seed)
    wx = omega(test_states)

    mu_end = {g: np.array([entropic_utility(end_w[i], RiskParams(g))
                           for i in range(test_states.size)]) for g in gammas}
    mu_int = {g: np.array([entropic_utility(int_w[i], RiskParams(g))
                           for i in range(test_states.size)]) for g in gammas}

    M1 = {g: float(np.max(mu_int[g] - wx)) for g in gammas}

    for b in _B_GRID:
        if all(_flat_over_top_quartile(mu_end[g] - b * wx, wx) for g in gammas):
            M2 = {g: float(np.max(mu_end[g] - b * wx)) for g in gammas}
            return DriftEstimate(
                b1_hat=float(b), M1_hat=M1, M2_hat=M2,
                test_states=test_states, n_samples=n_samples, seed=seed,
                certified=True, mu_end_hat=mu_end, mu_int_hat=mu_int,
            )
    M2 = {g: float(np.max(mu_end[g] - _B_GRID[-1] * wx)) for g in gammas}
    return DriftEstimate(
        b1_hat=float("nan"), M1_hat=M1, M2_hat=M2,
        test_states=test_states, n_samples=n_samples, seed=seed,
        certified=False,
        failure_reason="no coefficient below 1 passes the flatness criterion",
        mu_end_hat=mu_end, mu_int_hat=mu_int,
    )


@dataclass(frozen=True, eq=False)
class NoiseBoundCheck:
    empirical_mgf: float
    analytic_bound: float
    rel_stderr: float
    satisfied: bool


def verify_noise_bound_example1(
    model: DiffusionModel,
    gamma: float,
    t: float,
    n_samples: int,
    seed: int,
) -> NoiseBoundCheck:
    """Empirical MGF of the diffusion noise component against its bound.

    The contract allows three relative standard errors of Monte Carlo
    slack on top of the analytic bound.
    """
    if not gamma > 0.0:
        raise DomainError(f"gamma must be positive, got {gamma!r}")
    bound = diffusion_noise_mgf_bound(model, gamma, t)
    wz = noise_component_samples(model, t, n_samples, derive_stream(seed))
    vals = np.exp(gamma * wz)
    emp = float(np.mean(vals))
    rel_se = float(np.std(vals, ddof=1) / np.sqrt(n_samples) / emp)
    return NoiseBoundCheck(
        empirical_mgf=emp, analytic_bound=bound, rel_stderr=rel_se,
        satisfied=emp <= bound * (1.0 + 3.0 * rel_se),
    )


@dataclass(frozen=True, eq=False)
class MinorisationEstimate:
    """Histogram witness for the local minorisation of the one-step law.

    nu_hat is the normalized bin-wise minimum of the per-probe-state
    terminal histograms, d_hat its unnormalized mass; d_hat = 0 means the
    assumption is not certified at this resolution.
    """

    radius_R: float
    d_hat: float
    histogram_bins: int
    overlap_on_U: float
    certified: bool
    nu_hat: np.ndarray = field(default_factory=lambda: np.empty(0))
    bin_edges: np.ndarray = field(default_factory=lambda: np.empty(0))


def verify_minorisation(
    model,
    omega: Callable,
    radius_R: float,
    delta: float,
    histogram_bins: int,
    n_samples: int,
    seed: int,
    probe_states: Sequence[float],
    bin_range: Tuple[float, float],
    shift_range: Optional[Tuple[float, float]] = None,
) -> MinorisationEstimate:
    """Bin-wise minimum of one-step histograms from probe states.

    probe_states must lie in the sublevel set {w <= R} (at least 5 of
    them, including its boundary); bin_range is the truncation interval
    the histograms share; shift_range marks the shift set for the overlap
    report.
    """
    probes = np.asarray(probe_states, dtype=float)
    if probes.size < 5:
        raise DomainError("need at least 5 probe states")
    if not radius_R > 0.0:
        raise DomainError("radius_R must be positive")
    if np.any(omega(probes) > radius_R + 1e-9):
        raise DomainError("probe states must lie in the sublevel set of radius R")
    if histogram_bins < 2:
        raise DomainError("histogram_bins must be >= 2")
    edges = np.linspace(bin_range[0], bin_range[1], histogram_bins + 1)
    hists = np.empty((probes.size, histogram_bins))
    for i, x in enumerate(probes):
        terminals = np.empty(n_samples)
        for j in range(n_samples):
            seg = sample_segment(model, x, delta, derive_stream(seed, i, j))
            terminals[j] = seg.terminal
        clipped = np.clip(terminals, edges[0], edges[-1])
        counts, _ = np.histogram(clipped, bins=edges)
        hists[i] = counts / n_samples
    mins = np.min(hists, axis=0)
    d_hat = float(np.sum(mins))
    if d_hat <= 0.0:
        return MinorisationEstimate(
            radius_R=radius_R, d_hat=0.0, histogram_bins=histogram_bins,
            overlap_on_U=0.0, certified=False,
            nu_hat=np.zeros(histogram_bins), bin_edges=edges,
        )
    nu_hat = mins / d_hat
    overlap = 0.0
    if shift_range is not None:
        lo, hi = shift_range
        touches = (edges[1:] > lo) & (edges[:-1] < hi)
        overlap = float(np.sum(nu_hat[touches]))
    return MinorisationEstimate(
        radius_R=radius_R, d_hat=d_hat, histogram_bins=histogram_bins,
        overlap_on_U=overlap, certified=True, nu_hat=nu_hat, bin_edges=edges,
    )


@dataclass(frozen=True, eq=False)
class SweepResult:
    pairs: List[Tuple[float, float]]
    max_adjacent_jump: float
    lambda_range: float


def lambda_gamma_sweep(
    kernel_factory: Callable[[], FrozenKernel],
    problem: ImpulseProblem,
    gammas: Sequence[float],
    tol: float = 1e-9,
    max_iter: int = 500,
) -> SweepResult:
    """Solve the fixed point across a shared frozen kernel for each gamma.

    The kernel factory is invoked once: the frozen samples are
    gamma-independent, so differences along the sweep reflect the risk
    aversion alone.  The gain must be nondecreasing in gamma; violations
    beyond solver tolerance raise.
    """
    gammas = [float(g) for g in gammas]
    if any(g >= 0.0 for g in gammas):
        raise DomainError("sweep gammas must all be negative")
    if any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise DomainError("sweep gammas must be strictly increasing")
    kernel = kernel_factory()
    pairs = []
    for g in gammas:
        sol = solve_fixed_point(kernel, problem, RiskParams(g), tol=tol, max_iter=max_iter)
        pairs.append((g, sol.lam))
    lams = np.asarray([lam for _, lam in pairs])
    drops = np.diff(lams)
    if np.any(drops < -10.0 * tol):
        worst = int(np.argmin(drops))
        raise DomainError(
            f"gain decreased between gamma={gammas[worst]} and "
            f"gamma={gammas[worst + 1]}: {drops[worst]:.3e}"
        )
    max_jump = float(np.max(np.abs(drops))) if drops.size else 0.0
    lam_range = float(lams.max() - lams.min()) if lams.size else 0.0
    return SweepResult(pairs=pairs, max_adjacent_jump=max_jump, lambda_range=lam_range)
