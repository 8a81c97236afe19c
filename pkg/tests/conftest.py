"""Shared fixtures: the desk-scale default problem and small fast variants.

The default kernel (201 nodes x 2000 samples) takes ~25 s to build, so it
is session-scoped and shared by the acceptance suite and the
default-scale regression tests.
"""

from pathlib import Path

import numpy as np
import pytest

import riskimpulse as ri

REPO_ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = REPO_ROOT / "configs"

DELTA = 0.5
GAMMA = -0.5
KERNEL_SEED = 42
SIM_SEED = 4242
VERIFY_SEED = 777


def peak_reward(x):
    return 1.0 / (1.0 + np.asarray(x) ** 2)


def affine_cost(x, xi):
    return -0.3 - 0.1 * abs(x - xi)


@pytest.fixture(scope="session")
def default_grid():
    return ri.StateGrid.uniform(5.0, 201, shift_targets=np.linspace(-1, 1, 21))


@pytest.fixture(scope="session")
def default_problem(default_grid):
    return ri.ImpulseProblem.for_grid(
        default_grid, peak_reward, affine_cost, -0.3,
        np.linspace(-1, 1, 21), DELTA,
    )


@pytest.fixture(scope="session")
def default_model():
    return ri.DiffusionModel.ornstein_uhlenbeck(1.0, 1.0, substeps=16)


@pytest.fixture(scope="session")
def default_params():
    return ri.RiskParams(GAMMA)


@pytest.fixture(scope="session")
def default_kernel(default_model, default_grid):
    return ri.build_kernel(default_model, default_grid, peak_reward,
                           DELTA, 2000, KERNEL_SEED)


@pytest.fixture(scope="session")
def default_solution(default_kernel, default_problem, default_params):
    return ri.solve_fixed_point(default_kernel, default_problem,
                                default_params, tol=1e-9, max_iter=500)


# -- small variants for unit tests ------------------------------------------

@pytest.fixture(scope="session")
def small_grid():
    return ri.StateGrid.uniform(5.0, 51, shift_targets=np.linspace(-0.8, 0.8, 5))


@pytest.fixture(scope="session")
def small_problem(small_grid):
    return ri.ImpulseProblem.for_grid(
        small_grid, peak_reward, affine_cost, -0.3,
        np.linspace(-0.8, 0.8, 5), DELTA,
    )


@pytest.fixture(scope="session")
def small_kernel(small_grid):
    model = ri.DiffusionModel.ornstein_uhlenbeck(1.0, 1.0, substeps=8)
    return ri.build_kernel(model, small_grid, peak_reward, DELTA, 300, 7)


@pytest.fixture(scope="session")
def flow_kernel(small_grid):
    """Deterministic kernel (zero volatility): single-atom one-step laws."""
    model = ri.DiffusionModel.ornstein_uhlenbeck(1.0, 0.0, substeps=256)
    return ri.build_kernel(model, small_grid, peak_reward, DELTA, 3, 7)
