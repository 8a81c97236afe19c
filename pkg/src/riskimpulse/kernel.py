"""Frozen-noise Monte Carlo transition kernel.

For every grid state the kernel stores N sampled one-step outcomes
(terminal state, reward integral), drawn once and reused across all
Bellman evaluations.  Freezing the common random numbers turns the
Bellman operator into a deterministic map, so value iteration converges
instead of chattering at Monte Carlo noise scale.

Terminals are stored raw; continuation values interpolate the grid
function linearly at the terminal, clamping to the boundary node outside
[-L, L].  The clamp fraction is recorded: a large value signals a
mis-sized truncation interval.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .entropic import RiskParams, effective_sample_size, entropic_utility, \
    entropic_utility_rows, esscher_weights
from .errors import DomainError, NumericalError
from .norms import GridFunction, StateGrid, _aligned
from .processes import derive_stream, sample_segment

_MAGIC = "riskimpulse-kernel-v1"


@dataclass(frozen=True, eq=False)
class FrozenKernel:
    """Per-state frozen samples of (terminal, reward integral)."""

    grid: StateGrid
    delta: float
    terminals: np.ndarray          # (n_states, n_samples)
    reward_integrals: np.ndarray   # (n_states, n_samples)
    seed: int
    model_tag: str = ""
    reward_tag: str = ""

    def __post_init__(self):
        t = np.asarray(self.terminals, dtype=float)
        r = np.asarray(self.reward_integrals, dtype=float)
        if t.ndim != 2 or t.shape[0] != self.grid.n or t.shape[1] < 1:
            raise DomainError(f"terminals shape {t.shape} invalid for grid of {self.grid.n}")
        if r.shape != t.shape:
            raise DomainError("reward_integrals shape must match terminals")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(r)):
            raise DomainError("kernel samples must be finite")

    @property
    def n_samples(self) -> int:
        return self.terminals.shape[1]

    @property
    def clamp_fraction(self) -> float:
        """Fraction of terminals outside the grid range (clamped at evaluation)."""
        pts = self.grid.points
        out = (self.terminals < pts[0]) | (self.terminals > pts[-1])
        return float(np.mean(out))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.model_tag.encode())
        h.update(self.reward_tag.encode())
        h.update(f"{self.seed}:{self.delta!r}:{self.n_samples}".encode())
        h.update(self.grid.content_hash().encode())
        return h.hexdigest()[:16]


def _reward_values(reward: Callable, states: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(reward(states), dtype=float)
        if vals.shape == states.shape:
            return vals
    except Exception:
        pass
    return np.asarray([reward(s) for s in states], dtype=float)


def build_kernel(
    model,
    grid: StateGrid,
    reward: Callable,
    delta: float,
    n_samples: int,
    seed: int,
    model_tag: str = "model",
    reward_tag: str = "reward",
    threads: int = 1,
) -> FrozenKernel:
    """Draw n_samples segments per grid node with streams (seed, node, rep).

    Reward integrals use trapezoid quadrature over the segment's recorded
    sub-step states.  The build is deterministic given its inputs and
    independent of the thread count.
    """
    if n_samples < 1:
        raise DomainError(f"n_samples must be >= 1, got {n_samples}")
    n = grid.n
    terminals = np.empty((n, n_samples))
    integrals = np.empty((n, n_samples))

    def fill_state(i: int):
        x0 = grid.points[i]
        for j in range(n_samples):
            rng = derive_stream(seed, i, j)
            try:
                seg = sample_segment(model, x0, delta, rng)
            except NumericalError as err:
                raise NumericalError(
                    str(err), state_index=i, replication_index=j
                ) from err
            terminals[i, j] = seg.terminal
            integrals[i, j] = np.trapezoid(_reward_values(reward, seg.states), seg.times)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_state, range(n)))
    else:
        for i in range(n):
            fill_state(i)
    return FrozenKernel(
        grid=grid, delta=float(delta), terminals=terminals,
        reward_integrals=integrals, seed=int(seed),
        model_tag=model_tag, reward_tag=reward_tag,
    )


def interpolate_grid_function(grid: StateGrid, g: GridFunction, x) -> np.ndarray:
    """Linear interpolation of g at x, clamped to the boundary nodes outside."""
    gv = _aligned(g, grid)
    return np.interp(x, grid.points, gv)


def kernel_entropic_value(
    kernel: FrozenKernel, state_index: int, g: GridFunction, params: RiskParams
) -> float:
    """Entropic utility of (reward integral + g at terminal) at one state."""
    if not 0 <= state_index < kernel.grid.n:
        raise DomainError(f"state_index {state_index} out of range [0, {kernel.grid.n})")
    vals = kernel.reward_integrals[state_index] + interpolate_grid_function(
        kernel.grid, g, kernel.terminals[state_index]
    )
    return entropic_utility(vals, params)


def stay_values(kernel: FrozenKernel, g: GridFunction, params: RiskParams) -> np.ndarray:
    """kernel_entropic_value for every state at once (same arithmetic row-wise)."""
    cont = np.interp(kernel.terminals, kernel.grid.points, _aligned(g, kernel.grid))
    return entropic_utility_rows(kernel.reward_integrals + cont, params)


def esscher_ess(
    kernel: FrozenKernel, state_index: int, g: GridFunction, params: RiskParams
) -> float:
    """Effective sample size of the tilted empirical measure at one state.

    Reported as a diagnostic: strongly negative gamma can concentrate the
    Esscher weights onto few frozen samples, and there is no claimed bound
    on the resulting bias.
    """
    if not 0 <= state_index < kernel.grid.n:
        raise DomainError(f"state_index {state_index} out of range [0, {kernel.grid.n})")
    vals = kernel.reward_integrals[state_index] + interpolate_grid_function(
        kernel.grid, g, kernel.terminals[state_index]
    )
    n = vals.size
    w = esscher_weights(vals, np.full(n, 1.0 / n), params.gamma)
    return effective_sample_size(w)


def save_kernel(kernel: FrozenKernel, path) -> None:
    """Binary kernel file: one JSON header line, then little-endian f8 arrays.

    Array order: grid points, grid weights, shift-set indices (i8),
    terminals, reward integrals (both row-major in grid order).
    """
    header = {
        "magic": _MAGIC,
        "model_tag": kernel.model_tag,
        "reward_tag": kernel.reward_tag,
        "seed": kernel.seed,
        "grid_hash": kernel.grid.content_hash(),
        "delta": kernel.delta,
        "n_states": kernel.grid.n,
        "n_samples": kernel.n_samples,
        "n_shift": int(kernel.grid.shift_set_indices.size),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(kernel.grid.points.astype("<f8").tobytes())
        fh.write(kernel.grid.weight_values.astype("<f8").tobytes())
        fh.write(kernel.grid.shift_set_indices.astype("<i8").tobytes())
        fh.write(np.ascontiguousarray(kernel.terminals, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(kernel.reward_integrals, dtype="<f8").tobytes())


def load_kernel(path) -> FrozenKernel:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("magic") != _MAGIC:
            raise DomainError(f"not a kernel file: {path}")
        n = header["n_states"]
        n_samples = header["n_samples"]
        n_shift = header["n_shift"]

        def read(count, dtype):
            raw = fh.read(count * np.dtype(dtype).itemsize)
            return np.frombuffer(raw, dtype=dtype, count=count)

        points = read(n, "<f8").astype(float)
        weights = read(n, "<f8").astype(float)
        shift_idx = read(n_shift, "<i8").astype(int)
        terminals = read(n * n_samples, "<f8").astype(float).reshape(n, n_samples)
        integrals = read(n * n_samples, "<f8").astype(float).reshape(n, n_samples)
    grid = StateGrid(points=points, weight_values=weights, shift_set_indices=shift_idx)
    kernel = FrozenKernel(
        grid=grid, delta=float(header["delta"]), terminals=terminals,
        reward_integrals=integrals, seed=int(header["seed"]),
        model_tag=header["model_tag"], reward_tag=header["reward_tag"],
    )
    if kernel.grid.content_hash() != header["grid_hash"]:
        raise DomainError(f"kernel file grid hash mismatch: {path}")
    return kernel
