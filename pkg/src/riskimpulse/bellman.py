"""Dyadic Bellman operator with impulse actions and its span-contraction solver.

At each grid state the controller either stays (entropic continuation from
the state itself) or shifts to a target xi at strictly negative cost
c(x, xi), after which the process continues uncontrolled from xi.  Because
shift targets are grid nodes, the shift branch reuses the same frozen
kernel: no extra simulation per target.

The solver iterates g <- Rg - Rg(anchor) from g = 0 and stops when the
step shrinks below tolerance in the beta-shrinked span semi-norm, with
beta fixed at 1/(2 max_{xi in U} w(xi)) clamped to (0, 1].  It returns the
pair (w, lambda) with w anchored to zero; lambda / delta is the optimal
long-run entropic rate.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .entropic import RiskParams, esscher_weights
from .errors import ConvergenceError, DomainError, NumericalError
from .kernel import FrozenKernel, interpolate_grid_function, stay_values
from .norms import GridFunction, StateGrid, _aligned, beta_span_seminorm, \
    omega_norm, weighted_tv_norm


@dataclass(frozen=True)
class Action:
    """One impulse decision: stay (shift_flag 0) or shift to `target`."""

    shift_flag: int
    target: float = float("nan")


@dataclass(frozen=True, eq=False)
class ImpulseProblem:
    """Reward, shift costs, discretized shift set, and dyadic step.

    Construct through `for_grid`, which validates that every target is a
    grid node, that costs stay below the negative ceiling on the grid x
    target product, and that reward and best-case cost have finite
    weighted norms.  The cost table over (state, target) is precomputed
    here because it never changes across Bellman iterations.
    """

    reward: Callable[[float], float]
    shift_cost: Callable[[float, float], float]
    cost_ceiling: float
    shift_targets: np.ndarray
    delta: float
    weight: Callable
    target_indices: np.ndarray
    cost_table: np.ndarray  # (n_states, n_targets)

    @classmethod
    def for_grid(
        cls,
        grid: StateGrid,
        reward: Callable,
        shift_cost: Callable,
        cost_ceiling: float,
        shift_targets,
        delta: float,
        weight: Callable = np.abs,
    ) -> "ImpulseProblem":
        if not delta > 0.0:
            raise DomainError(f"delta must be positive, got {delta!r}")
        if not cost_ceiling < 0.0:
            raise DomainError(f"cost_ceiling must be negative, got {cost_ceiling!r}")
        targets = np.asarray(shift_targets, dtype=float).reshape(-1)
        if targets.size == 0:
            raise DomainError("shift_targets must be nonempty")
        L = max(abs(grid.points[0]), abs(grid.points[-1]))
        if np.any(np.abs(targets) > L):
            raise DomainError("shift_targets must lie inside the grid interval")
        indices = np.empty(targets.size, dtype=int)
        for k, t in enumerate(targets):
            j = grid.nearest_index(t)
            if abs(grid.points[j] - t) > 1e-9:
                raise DomainError(
                    f"shift target {t!r} is not a grid node (nearest {grid.points[j]!r})"
                )
            indices[k] = j
        targets = grid.points[indices].copy()  # snap to exact node values
        cost_table = np.empty((grid.n, targets.size))
        for k, t in enumerate(targets):
            cost_table[:, k] = [shift_cost(x, t) for x in grid.points]
        if not np.all(np.isfinite(cost_table)):
            raise DomainError("shift_cost produced non-finite values on the grid")
        worst = float(np.max(cost_table))
        if worst > cost_ceiling:
            raise DomainError(
                f"shift cost {worst!r} exceeds the ceiling {cost_ceiling!r} "
                "somewhere on the grid x target product"
            )
        fvals = np.asarray([reward(x) for x in grid.points], dtype=float)
        if not np.all(np.isfinite(fvals)):
            raise DomainError("reward is not finite on the grid")
        omega_norm(fvals, grid)                 # finiteness of |f|_w
        omega_norm(np.min(cost_table, axis=1), grid)  # finiteness of |c_hat|_w
        return cls(
            reward=reward, shift_cost=shift_cost, cost_ceiling=float(cost_ceiling),
            shift_targets=targets, delta=float(delta), weight=weight,
            target_indices=indices, cost_table=cost_table,
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.cost_table).tobytes())
        h.update(np.ascontiguousarray(self.shift_targets).tobytes())
        h.update(f"{self.delta!r}:{self.cost_ceiling!r}".encode())
        return h.hexdigest()[:16]


def default_beta(problem: ImpulseProblem, grid: StateGrid) -> float:
    """Shrink factor 1 / (2 max_{xi in U} w(xi)), clamped to (0, 1]."""
    w_targets = grid.weight_values[problem.target_indices]
    top = float(np.max(w_targets))
    if top <= 0.0:
        return 1.0
    return min(1.0, 1.0 / (2.0 * top))


@dataclass(frozen=True, eq=False)
class BellmanStep:
    """One operator application: values and the per-state argmax action."""

    Rg: np.ndarray
    shift_flag: np.ndarray    # 0 stay, 1 shift
    target_index: np.ndarray  # grid index of the chosen target, -1 for stay
    targets: np.ndarray       # target values, nan where staying

    def action(self, i: int) -> Action:
        if self.shift_flag[i]:
            return Action(1, float(self.targets[i]))
        return Action(0)


@dataclass(frozen=True, eq=False)
class BellmanSolution:
    """Grid function w (anchored to zero) and gain lambda solving the pair."""

    w: np.ndarray
    lam: float
    gamma: float
    delta: float
    iterations: int
    residual_span: float
    anchor_index: int
    beta: float
    kernel_fingerprint: str
    problem_fingerprint: str


def bellman_apply(
    kernel: FrozenKernel, g: GridFunction, problem: ImpulseProblem, params: RiskParams
) -> BellmanStep:
    """One application of the impulse Bellman operator to g.

    Stay value F(x) is the entropic continuation at x; shift values are
    F(xi) + c(x, xi) over the targets.  Ties break stay-over-shift, then
    lowest target index, which keeps runs reproducible (exact ties are
    non-generic since costs are strictly negative).
    """
    grid = kernel.grid
    gv = _aligned(g, grid)
    F = stay_values(kernel, gv, params)
    shift_vals = F[problem.target_indices][None, :] + problem.cost_table
    best_k = np.argmax(shift_vals, axis=1)
    best_shift = shift_vals[np.arange(grid.n), best_k]
    shift_flag = best_shift > F
    Rg = np.where(shift_flag, best_shift, F)
    target_index = np.where(shift_flag, problem.target_indices[best_k], -1)
    full_targets = np.where(shift_flag, grid.points[problem.target_indices[best_k]], np.nan)
    return BellmanStep(
        Rg=Rg,
        shift_flag=shift_flag.astype(np.int8),
        target_index=target_index.astype(int),
        targets=full_targets,
    )


def operator_T(
    kernel: FrozenKernel, g: GridFunction, problem: ImpulseProblem, params: RiskParams
) -> np.ndarray:
    """T g = gamma * R(g / gamma); defined for gamma != 0 only."""
    if params.is_zero:
        raise DomainError("operator_T requires gamma != 0")
    gv = _aligned(g, kernel.grid)
    return params.gamma * bellman_apply(kernel, gv / params.gamma, problem, params).Rg


def solve_fixed_point(
    kernel: FrozenKernel,
    problem: ImpulseProblem,
    params: RiskParams,
    tol: float = 1e-9,
    max_iter: int = 500,
    anchor_index: Optional[int] = None,
) -> BellmanSolution:
    """Anchored value iteration from g = 0 until the step span drops below tol.

    The solution is unique up to an additive constant; anchoring w to zero
    at the node nearest the origin picks the representative, and lambda is
    read off as (R w)(anchor).  The stored residual_span re-checks
    |R w - w - lambda| in the shrinked span semi-norm with one extra
    operator application.
    """
    if not tol > 0.0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")
    grid = kernel.grid
    if anchor_index is None:
        anchor_index = int(np.argmin(np.abs(grid.points)))
    if not 0 <= anchor_index < grid.n:
        raise DomainError(f"anchor_index {anchor_index} out of range")
    beta = default_beta(problem, grid)
    g = np.zeros(grid.n)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        Rg = bellman_apply(kernel, g, problem, params).Rg
        if not np.all(np.isfinite(Rg)):
            raise NumericalError("non-finite Bellman iterate", iteration=iterations)
        new = Rg - Rg[anchor_index]
        step_span = beta_span_seminorm(new - g, grid, beta)
        g = new
        if step_span < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"no convergence after {max_iter} iterations "
            f"(last step span {step_span:.3e})",
            last_residual=step_span, iterations=max_iter,
        )
    w = g
    final = bellman_apply(kernel, w, problem, params)
    lam = float(final.Rg[anchor_index])
    residual_span = beta_span_seminorm(final.Rg - w - lam, grid, beta)
    return BellmanSolution(
        w=w, lam=lam, gamma=params.gamma, delta=problem.delta,
        iterations=iterations, residual_span=residual_span,
        anchor_index=anchor_index, beta=beta,
        kernel_fingerprint=kernel.fingerprint(),
        problem_fingerprint=problem.fingerprint(),
    )


@dataclass(frozen=True, eq=False)
class ContractionEstimate:
    L_hat: float
    ratios: np.ndarray


def contraction_estimate(
    kernel: FrozenKernel,
    problem: ImpulseProblem,
    params: RiskParams,
    span_bound: float,
    n_pairs: int,
    rng: np.random.Generator,
) -> ContractionEstimate:
    """Empirical local-contraction factor of T on random function pairs.

    Pairs are rescaled so each function has plain (beta = 1) weighted span
    at most span_bound; the ratio uses the solver's shrinked span.  Pairs
    whose difference has zero span (constant offsets) are skipped.
    """
    if not span_bound > 0.0:
        raise DomainError("span_bound must be positive")
    if n_pairs < 1:
        raise DomainError("n_pairs must be >= 1")
    grid = kernel.grid
    beta = default_beta(problem, grid)

    def draw():
        f = rng.standard_normal(grid.n)
        s = beta_span_seminorm(f, grid, 1.0)
        if s > span_bound:
            f = f * (span_bound / s)
        return f

    ratios = []
    for _ in range(n_pairs):
        f1, f2 = draw(), draw()
        den = beta_span_seminorm(f1 - f2, grid, beta)
        if den <= 1e-14:
            continue
        num = beta_span_seminorm(
            operator_T(kernel, f1, problem, params)
            - operator_T(kernel, f2, problem, params),
            grid, beta,
        )
        ratios.append(num / den)
    if not ratios:
        raise DomainError("all pairs degenerate; nothing to estimate")
    ratios = np.asarray(ratios)
    return ContractionEstimate(L_hat=float(np.max(ratios)), ratios=ratios)


def _esscher_measure_on_grid(
    kernel: FrozenKernel, state_index: int, g: GridFunction, params: RiskParams
) -> np.ndarray:
    """Tilted empirical one-step measure, binned onto grid nodes.

    Each frozen sample's Esscher weight is split between the two grid
    nodes bracketing its (clamped) terminal with linear interpolation
    weights.
    """
    grid = kernel.grid
    vals = kernel.reward_integrals[state_index] + interpolate_grid_function(
        grid, g, kernel.terminals[state_index]
    )
    n = vals.size
    w = esscher_weights(vals, np.full(n, 1.0 / n), params.gamma)
    if grid.n == 1:
        return np.array([float(np.sum(w))])
    pts = grid.points
    t = np.clip(kernel.terminals[state_index], pts[0], pts[-1])
    j = np.clip(np.searchsorted(pts, t, side="right") - 1, 0, grid.n - 2)
    gap = pts[j + 1] - pts[j]
    frac = (t - pts[j]) / gap
    out = np.zeros(grid.n)
    np.add.at(out, j, w * (1.0 - frac))
    np.add.at(out, j + 1, w * frac)
    return out


def esscher_tv_diagnostic(
    kernel: FrozenKernel,
    g1: GridFunction,
    g2: GridFunction,
    x_index: int,
    y_index: int,
    problem: ImpulseProblem,
    params: RiskParams,
) -> float:
    """Weighted total variation between two cross-paired Esscher measures.

    Measure one tilts the one-step law from x (or from the target chosen
    by the argmax under g2, if that argmax shifts) by the values built
    from g1; measure two swaps the roles (y, g2, argmax under g1).  This
    is the signed-measure difference whose weighted variation drives the
    one-step contraction bound.
    """
    grid = kernel.grid
    for idx in (x_index, y_index):
        if not 0 <= idx < grid.n:
            raise DomainError(f"state index {idx} out of range")
    step_g2 = bellman_apply(kernel, g2, problem, params)
    step_g1 = bellman_apply(kernel, g1, problem, params)
    s1 = int(step_g2.target_index[x_index]) if step_g2.shift_flag[x_index] else x_index
    s2 = int(step_g1.target_index[y_index]) if step_g1.shift_flag[y_index] else y_index
    h1 = _esscher_measure_on_grid(kernel, s1, g1, params)
    h2 = _esscher_measure_on_grid(kernel, s2, g2, params)
    beta = default_beta(problem, grid)
    return weighted_tv_norm(h1 - h2, grid, beta)
