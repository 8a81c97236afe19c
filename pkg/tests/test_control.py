import numpy as np
import pytest

import riskimpulse as ri
from riskimpulse import (DomainError, ImpulseProblem, RandomShiftPolicy,
                         RiskParams, StationaryPolicy, derive_stream,
                         estimate_longrun_value, extract_policy,
                         omega_moment_path, simulate_controlled, stay_policy)

PARAMS = RiskParams(-0.5)


def one_reward(x):
    return np.ones_like(np.asarray(x, dtype=float))


def zero_reward(x):
    return 0.0 * np.asarray(x, dtype=float)


@pytest.fixture
def ou_model():
    return ri.DiffusionModel.ornstein_uhlenbeck(1.0, 1.0, substeps=8)


class TestExtractPolicy:
    def test_zero_reward_stays_everywhere(self, small_grid, small_kernel):
        problem = ImpulseProblem.for_grid(small_grid, zero_reward,
                                          lambda x, xi: -1.0, -1.0,
                                          [0.0], 0.5)
        zero_k = ri.FrozenKernel(grid=small_grid, delta=0.5,
                                 terminals=small_kernel.terminals,
                                 reward_integrals=small_kernel.reward_integrals * 0.0,
                                 seed=0)
        sol = ri.solve_fixed_point(zero_k, problem, PARAMS, tol=1e-10)
        pol = extract_policy(sol, zero_k, problem, PARAMS)
        assert pol.n_shift_states == 0

    def test_policy_invariant_under_constant_w_shift(self, small_kernel, small_problem):
        sol = ri.solve_fixed_point(small_kernel, small_problem, PARAMS, tol=1e-9)
        step_a = ri.bellman_apply(small_kernel, sol.w, small_problem, PARAMS)
        step_b = ri.bellman_apply(small_kernel, sol.w + 11.0, small_problem, PARAMS)
        assert np.array_equal(step_a.shift_flag, step_b.shift_flag)
        assert np.array_equal(step_a.target_index, step_b.target_index)

    def test_fingerprint_mismatch_rejected(self, small_kernel, small_problem,
                                           small_grid):
        sol = ri.solve_fixed_point(small_kernel, small_problem, PARAMS, tol=1e-9)
        other = ImpulseProblem.for_grid(small_grid, zero_reward,
                                        lambda x, xi: -0.4, -0.4, [0.0], 0.5)
        with pytest.raises(DomainError):
            extract_policy(sol, small_kernel, other, PARAMS)

    def test_shift_region_at_extremes(self, default_solution, default_kernel,
                                      default_problem, default_params,
                                      default_grid):
        # peaked reward with central targets: intervene only far from 0;
        # regression band for the pinned seed
        pol = extract_policy(default_solution, default_kernel, default_problem,
                             default_params)
        flags = pol.shift_flag.astype(bool)
        stay_pts = default_grid.points[~flags]
        assert stay_pts.min() == pytest.approx(-2.15, abs=1e-9)
        assert stay_pts.max() == pytest.approx(2.10, abs=1e-9)
        assert np.all(np.abs(default_grid.points[flags]) >= 2.05)


class TestSimulateControlled:
    def test_stay_policy_unit_reward_exact(self, small_grid, ou_model):
        problem = ImpulseProblem.for_grid(small_grid, one_reward,
                                          lambda x, xi: -1.0, -1.0, [0.0], 0.5)
        run = simulate_controlled(ou_model, stay_policy(small_grid), problem,
                                  0.0, 20, derive_stream(1, 0))
        assert np.allclose(run.z_values, 0.5 * np.arange(1, 21), atol=1e-10)
        assert run.shifts_applied == 0

    def test_always_shift_unit_cost_exact(self, small_grid, ou_model):
        problem = ImpulseProblem.for_grid(small_grid, zero_reward,
                                          lambda x, xi: -1.0, -1.0, [0.0], 0.5)
        center = int(np.argmin(np.abs(small_grid.points)))
        pol = StationaryPolicy(grid=small_grid,
                               shift_flag=np.ones(small_grid.n, dtype=np.int8),
                               target_index=np.full(small_grid.n, center))
        run = simulate_controlled(ou_model, pol, problem, 0.0, 15,
                                  derive_stream(2, 0))
        assert np.allclose(run.z_values, -np.arange(1, 16), atol=1e-12)
        assert run.shifts_applied == 15

    def test_determinism(self, small_grid, small_problem, ou_model):
        pol = stay_policy(small_grid)
        a = simulate_controlled(ou_model, pol, small_problem, 0.3, 10,
                                derive_stream(3, 1))
        b = simulate_controlled(ou_model, pol, small_problem, 0.3, 10,
                                derive_stream(3, 1))
        assert np.array_equal(a.z_values, b.z_values)
        assert np.array_equal(a.states, b.states)


class TestEstimateLongRun:
    def test_stay_unit_reward_deterministic(self, small_grid, ou_model):
        problem = ImpulseProblem.for_grid(small_grid, one_reward,
                                          lambda x, xi: -1.0, -1.0, [0.0], 0.5)
        est = estimate_longrun_value(ou_model, stay_policy(small_grid), problem,
                                     0.0, 30, 10, PARAMS, seed=5)
        assert est.J_hat == pytest.approx(1.0, abs=1e-10)
        assert est.stderr == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(est.per_horizon, 1.0, atol=1e-10)

    def test_always_shift_zero_reward(self, small_grid, ou_model):
        problem = ImpulseProblem.for_grid(small_grid, zero_reward,
                                          lambda x, xi: -1.0, -1.0, [0.0], 0.5)
        center = int(np.argmin(np.abs(small_grid.points)))
        pol = StationaryPolicy(grid=small_grid,
                               shift_flag=np.ones(small_grid.n, dtype=np.int8),
                               target_index=np.full(small_grid.n, center))
        est = estimate_longrun_value(ou_model, pol, problem, 0.0, 20, 5,
                                     PARAMS, seed=6)
        assert est.J_hat == pytest.approx(-2.0, abs=1e-10)  # -1 per step of 0.5

    def test_nreps_validation(self, small_grid, small_problem, ou_model):
        with pytest.raises(DomainError):
            estimate_longrun_value(ou_model, stay_policy(small_grid),
                                   small_problem, 0.0, 5, 1, PARAMS, seed=7)

    def test_omega_moment_path_bounded(self, small_grid, small_problem, ou_model):
        est = estimate_longrun_value(ou_model, stay_policy(small_grid),
                                     small_problem, 0.0, 60, 40, PARAMS, seed=8)
        path = omega_moment_path(est, np.abs, PARAMS)
        n = path.size
        assert np.all(np.isfinite(path))
        assert np.max(path[n // 2:]) <= 2.0 * np.max(path[: n // 2])


class TestRandomShiftBaseline:
    def test_shift_rate_close_to_probability(self, small_grid, small_problem,
                                             ou_model):
        pol = RandomShiftPolicy(grid=small_grid, shift_probability=0.1,
                                target_indices=small_problem.target_indices)
        est = estimate_longrun_value(ou_model, pol, small_problem, 0.0, 50, 50,
                                     PARAMS, seed=9)
        assert 0.05 <= est.mean_shifts_per_step <= 0.15

    def test_probability_validation(self, small_grid):
        with pytest.raises(DomainError):
            RandomShiftPolicy(grid=small_grid, shift_probability=1.5,
                              target_indices=np.array([0]))


class TestDefaultScaleRegression:
    def test_mean_shifts_per_step(self, default_kernel, default_problem,
                                  default_params, default_solution,
                                  default_grid):
        model = ri.DiffusionModel.ornstein_uhlenbeck(1.0, 1.0, substeps=16)
        pol = extract_policy(default_solution, default_kernel, default_problem,
                             default_params)
        est = estimate_longrun_value(model, pol, default_problem, 0.0, 100, 100,
                                     default_params, seed=4242)
        assert 0.0 < est.mean_shifts_per_step < 1.0
        assert est.mean_shifts_per_step == pytest.approx(0.0022, abs=0.004)
