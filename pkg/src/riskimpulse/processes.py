"""Uncontrolled Markov process simulators producing one dyadic-step segment.

Three model families: an Ito-like mean-reverting diffusion (Euler-Maruyama
with exact-in-distribution Gaussian sub-step increments), a regular step
process with state-dependent exponential clocks, and a piecewise
deterministic process whose flow is advanced analytically between jumps.
Event-driven segments record states both on a uniform quadrature mesh and
at event times (with a pre-jump node placed one ulp before each jump), so
trapezoid quadrature of path integrals never straddles a discontinuity.

All randomness flows through streams keyed by (global seed, state index,
replication index), which makes kernel construction reproducible and
embarrassingly parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, NumericalError

_MAX_EVENTS_PER_SEGMENT = 100_000


def derive_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream (seed, *key).

    Streams with distinct keys are statistically independent and the
    mapping is stable, so rebuilding with the same key reproduces draws
    bit for bit.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class PathSegment:
    """One simulated segment over [0, delta].

    `times` and `states` are the recorded sub-step nodes (times strictly
    increasing, first 0, last delta); `states` has shape (m,) in one
    dimension and (m, d) otherwise.
    """

    times: np.ndarray
    states: np.ndarray
    terminal: Union[float, np.ndarray]
    rng_draws_consumed: int


@dataclass(frozen=True, eq=False)
class DiffusionModel:
    """dX = (A X + g(X)) dt + vol(X) dW with stable A.

    `mean_reversion` is either a positive scalar alpha (drift -alpha * x in
    any dimension) or a stable d x d matrix A.  Stability is checked at
    construction for scalars and diagonal matrices; for general matrices
    the caller asserts it.  The sup-norm bounds of g and vol must be
    supplied; they feed the noise moment-bound oracle.
    """

    mean_reversion: Union[float, np.ndarray]
    vol: Optional[Callable] = None
    drift_bounded: Optional[Callable] = None
    vol_bound: float = 0.0
    drift_bound: float = 0.0
    dimension: int = 1
    substeps: int = 16

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError(f"dimension must be >= 1, got {self.dimension}")
        if self.substeps < 1:
            raise DomainError(f"substeps must be >= 1, got {self.substeps}")
        if not (np.isfinite(self.vol_bound) and self.vol_bound >= 0.0):
            raise DomainError("vol_bound must be finite and nonnegative")
        if not (np.isfinite(self.drift_bound) and self.drift_bound >= 0.0):
            raise DomainError("drift_bound must be finite and nonnegative")
        mr = self.mean_reversion
        if np.isscalar(mr):
            if not (np.isfinite(mr) and mr > 0.0):
                raise DomainError(
                    f"scalar mean_reversion must be a positive rate, got {mr!r}"
                )
        else:
            A = np.asarray(mr, dtype=float)
            if A.shape != (self.dimension, self.dimension):
                raise DomainError(
                    f"mean_reversion matrix shape {A.shape} does not match "
                    f"dimension {self.dimension}"
                )
            object.__setattr__(self, "mean_reversion", A)
            if np.allclose(A, np.diag(np.diag(A))):
                if np.any(np.diag(A) >= 0.0):
                    raise DomainError(
                        "diagonal mean_reversion matrix must have negative entries"
                    )
            # general matrices: stability asserted by the caller

    @classmethod
    def ornstein_uhlenbeck(
        cls,
        alpha: float,
        sigma: float,
        dimension: int = 1,
        substeps: int = 16,
        drift_bounded: Optional[Callable] = None,
        drift_bound: float = 0.0,
    ) -> "DiffusionModel":
        """Mean reversion -alpha * x with constant volatility sigma."""
        vol = None if sigma == 0.0 else (lambda x: sigma)
        return cls(
            mean_reversion=float(alpha),
            vol=vol,
            drift_bounded=drift_bounded,
            vol_bound=float(abs(sigma)),
            drift_bound=float(drift_bound),
            dimension=dimension,
            substeps=substeps,
        )

    def drift_matrix(self) -> np.ndarray:
        if np.isscalar(self.mean_reversion):
            return -float(self.mean_reversion) * np.eye(self.dimension)
        return self.mean_reversion


@dataclass(frozen=True, eq=False)
class StepProcessModel:
    """Pure-jump process: hold Exp(rate(x)) then jump to A(x) + w.

    rate(x) = max(|x|^(1+rate_exponent), base_rate); the jump map plus
    bounded noise must contract, |A(x)| + |w| <= contraction_beta |x| + K,
    which is asserted on every simulated jump.  Scalar state space.
    """

    base_rate: float
    rate_exponent: float
    jump_map: Callable[[float], float]
    jump_noise: Callable[[np.random.Generator], float]
    noise_bound: float
    contraction_beta: float
    contraction_offset: float
    substeps: int = 16

    def __post_init__(self):
        if not self.base_rate > 0.0:
            raise DomainError("base_rate must be positive")
        if not self.rate_exponent > 0.0:
            raise DomainError("rate_exponent must be positive")
        if not 0.0 < self.contraction_beta < 1.0:
            raise DomainError("contraction_beta must lie in (0, 1)")
        if self.contraction_offset < 0.0:
            raise DomainError("contraction_offset must be nonnegative")
        if not (np.isfinite(self.noise_bound) and self.noise_bound >= 0.0):
            raise DomainError("noise_bound must be finite and nonnegative")
        if self.substeps < 1:
            raise DomainError("substeps must be >= 1")

    def rate(self, x: float) -> float:
        return max(abs(x) ** (1.0 + self.rate_exponent), self.base_rate)


@dataclass(frozen=True, eq=False)
class PdmpModel:
    """Deterministic flow punctuated by jumps at a constant exponential rate.

    Between jumps the state follows `flow(x, t)` started from the last
    post-jump state; the flow must satisfy |flow(x, t)| <= e^{-alpha t}|x| + M,
    spot-checked at construction.  At each jump x -> jump_map(x) + noise
    with Gaussian noise of scale jump_noise_std.  Scalar state space.
    """

    flow: Callable[[float, float], float]
    flow_alpha: float
    flow_offset: float
    jump_rate: float
    jump_map: Callable[[float], float]
    jump_noise_std: float = 1.0
    substeps: int = 16

    def __post_init__(self):
        if not self.flow_alpha > 0.0:
            raise DomainError("flow_alpha must be positive")
        if self.flow_offset < 0.0:
            raise DomainError("flow_offset must be nonnegative")
        if not self.jump_rate > 0.0:
            raise DomainError("jump_rate must be positive")
        if not self.jump_noise_std > 0.0:
            raise DomainError("jump_noise_std must be positive")
        if self.substeps < 1:
            raise DomainError("substeps must be >= 1")
        for x in (-7.3, -1.0, 0.0, 0.5, 4.9):
            for t in (0.1, 0.5, 1.0):
                if abs(self.flow(x, t)) > math.exp(-self.flow_alpha * t) * abs(x) + self.flow_offset + 1e-9:
                    raise DomainError(
                        f"declared flow bound violated at x={x}, t={t}"
                    )


def _check_finite_state(x, when: str, **context):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite state {when}", **context)


def _sample_diffusion(model: DiffusionModel, start, delta: float, rng) -> PathSegment:
    s = model.substeps
    h = delta / s
    sqh = math.sqrt(h)
    times = np.linspace(0.0, delta, s + 1)
    if model.dimension == 1:
        a = float(model.drift_matrix()[0, 0])
        g = model.drift_bounded
        vol = model.vol
        x = float(start)
        states = np.empty(s + 1)
        states[0] = x
        draws = rng.standard_normal(s)
        for k in range(s):
            drift = a * x + (g(x) if g is not None else 0.0)
            noise = (vol(x) * draws[k] * sqh) if vol is not None else 0.0
            x = x + drift * h + noise
            if not math.isfinite(x):
                raise NumericalError("non-finite state mid-path", substep=k + 1)
            states[k + 1] = x
        return PathSegment(times=times, states=states, terminal=x,
                           rng_draws_consumed=s)
    # d-dimensional path, used by the drift and noise-bound checks
    A = model.drift_matrix()
    g = model.drift_bounded
    vol = model.vol
    x = np.asarray(start, dtype=float).reshape(model.dimension)
    states = np.empty((s + 1, model.dimension))
    states[0] = x
    draws = rng.standard_normal((s, model.dimension))
    for k in range(s):
        drift = A @ x + (np.asarray(g(x), dtype=float) if g is not None else 0.0)
        if vol is not None:
            sig = vol(x)
            noise = (sig @ draws[k] if np.ndim(sig) == 2 else sig * draws[k]) * sqh
        else:
            noise = 0.0
        x = x + drift * h + noise
        _check_finite_state(x, "mid-path", substep=k + 1)
        states[k + 1] = x
    return PathSegment(times=times, states=states, terminal=x.copy(),
                       rng_draws_consumed=s * model.dimension)


def _event_nodes(delta: float, substeps: int, jump_times) -> np.ndarray:
    """Uniform mesh plus (pre-jump, post-jump) node pairs, deduplicated."""
    mesh = np.linspace(0.0, delta, substeps + 1)
    if not jump_times:
        return mesh
    taus = np.asarray(jump_times)
    pre = np.nextafter(taus, -np.inf)
    return np.unique(np.concatenate([mesh, pre, taus]))


def _sample_step(model: StepProcessModel, start, delta: float, rng) -> PathSegment:
    x = float(start)
    if not math.isfinite(x):
        raise DomainError("start state must be finite")
    t = 0.0
    draws = 0
    jump_times = []
    post_states = []
    while True:
        rate = model.rate(x)
        hold = rng.exponential(1.0 / rate)
        draws += 1
        if t + hold >= delta:
            break
        t += hold
        pre = x
        w = float(model.jump_noise(rng))
        draws += 1
        if abs(w) > model.noise_bound + 1e-12:
            raise DomainError(
                f"jump_noise sample {w!r} exceeds declared bound {model.noise_bound!r}"
            )
        x = float(model.jump_map(pre)) + w
        if not math.isfinite(x):
            raise NumericalError("non-finite state mid-path", jump_index=len(jump_times))
        bound = model.contraction_beta * abs(pre) + model.contraction_offset
        if abs(x) > bound + 1e-9:
            raise DomainError(
                f"post-jump state {x!r} violates contraction bound {bound!r}"
            )
        jump_times.append(t)
        post_states.append(x)
        if len(jump_times) > _MAX_EVENTS_PER_SEGMENT:
            raise NumericalError("event count exploded", events=len(jump_times))
    times = _event_nodes(delta, model.substeps, jump_times)
    taus = np.asarray(jump_times)
    # piecewise-constant path: state on [tau_k, tau_{k+1}) is post_states[k]
    idx = np.searchsorted(taus, times, side="right")
    values = np.concatenate([[float(start)], np.asarray(post_states, dtype=float)])
    states = values[idx]
    return PathSegment(times=times, states=states, terminal=float(states[-1]),
                       rng_draws_consumed=draws)


def _sample_pdmp(model: PdmpModel, start, delta: float, rng) -> PathSegment:
    x_anchor = float(start)
    if not math.isfinite(x_anchor):
        raise DomainError("start state must be finite")
    t_anchor = 0.0
    draws = 0
    jump_times = []
    anchors = [(0.0, x_anchor)]
    t = 0.0
    while True:
        hold = rng.exponential(1.0 / model.jump_rate)
        draws += 1
        if t + hold >= delta:
            break
        t += hold
        pre = float(model.flow(x_anchor, t - t_anchor))
        w = model.jump_noise_std * float(rng.standard_normal())
        draws += 1
        x_anchor = float(model.jump_map(pre)) + w
        if not math.isfinite(x_anchor):
            raise NumericalError("non-finite state mid-path", jump_index=len(jump_times))
        t_anchor = t
        jump_times.append(t)
        anchors.append((t, x_anchor))
        if len(jump_times) > _MAX_EVENTS_PER_SEGMENT:
            raise NumericalError("event count exploded", events=len(jump_times))
    times = _event_nodes(delta, model.substeps, jump_times)
    anchor_times = np.asarray([a[0] for a in anchors])
    anchor_states = [a[1] for a in anchors]
    idx = np.searchsorted(anchor_times, times, side="right") - 1
    states = np.empty_like(times)
    for i, (tt, k) in enumerate(zip(times, idx)):
        states[i] = model.flow(anchor_states[k], tt - anchor_times[k])
    _check_finite_state(states, "mid-path")
    return PathSegment(times=times, states=states, terminal=float(states[-1]),
                       rng_draws_consumed=draws)


def sample_segment(model, start, delta: float, rng: np.random.Generator) -> PathSegment:
    """Simulate one segment of length delta from `start` under `model`.

    Identical (model, start, delta, stream key) reproduce the segment bit
    for bit.  Diffusions use Euler-Maruyama on `substeps` partitions;
    event-driven models simulate exponential clocks exactly and advance
    the deterministic part analytically.
    """
    if not delta > 0.0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    if not np.all(np.isfinite(np.asarray(start, dtype=float))):
        raise DomainError("start state must be finite")
    if isinstance(model, DiffusionModel):
        return _sample_diffusion(model, start, delta, rng)
    if isinstance(model, StepProcessModel):
        return _sample_step(model, start, delta, rng)
    if isinstance(model, PdmpModel):
        return _sample_pdmp(model, start, delta, rng)
    raise DomainError(f"unknown model type {type(model).__name__}")


def diffusion_noise_mgf_bound(model: DiffusionModel, gamma: float, t: float) -> float:
    """Analytic bound 2^d exp(gamma^2 d |vol|_inf^2 / 2) for the noise MGF.

    Bounds E[exp(gamma * sup_i |Z_i(t)|)] where Z is the stochastic-integral
    component of the diffusion, uniformly over t <= 1 and the start state.
    """
    if not gamma > 0.0:
        raise DomainError(f"gamma must be positive, got {gamma!r}")
    if not 0.0 < t <= 1.0:
        raise DomainError(f"t must lie in (0, 1], got {t!r}")
    d = model.dimension
    return float(2.0**d * math.exp(0.5 * gamma * gamma * d * model.vol_bound**2))


def noise_component_samples(
    model: DiffusionModel, t: float, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Monte Carlo samples of sup_i |Z_i(t)| for the diffusion noise component.

    Z solves dZ = A Z dt + vol(X) dW with Z(0) = 0, jointly Euler-evolved
    with X (started at the origin), which isolates the stochastic integral
    from the e^{At} x0 and drift terms.  Vectorized over samples; requires
    vol to broadcast over an (n, d) state array (constant vol qualifies).
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    if not t > 0.0:
        raise DomainError("t must be positive")
    d = model.dimension
    A = model.drift_matrix()
    s = model.substeps
    h = t / s
    sqh = math.sqrt(h)
    X = np.zeros((n_samples, d))
    Z = np.zeros((n_samples, d))
    for _ in range(s):
        dw = rng.standard_normal((n_samples, d)) * sqh
        if model.vol is not None:
            sig = model.vol(X)
            noise = dw @ sig.T if np.ndim(sig) == 2 else np.asarray(sig) * dw
        else:
            noise = 0.0
        drift_x = X @ A.T
        if model.drift_bounded is not None:
            drift_x = drift_x + np.asarray(model.drift_bounded(X), dtype=float)
        X = X + drift_x * h + noise
        Z = Z + (Z @ A.T) * h + noise
    _check_finite_state(Z, "in noise component")
    return np.max(np.abs(Z), axis=1)
