import numpy as np
import pytest

import riskimpulse as ri
from riskimpulse import (DomainError, lambda_gamma_sweep,
                         verify_drift, verify_minorisation,
                         verify_noise_bound_example1)

EXP_HALF = 0.6065306597126334


def ou(sigma, substeps=16, dimension=1):
    return ri.DiffusionModel.ornstein_uhlenbeck(1.0, sigma, dimension=dimension,
                                                substeps=substeps)


STATES = np.linspace(-5, 5, 17)


class TestVerifyDrift:
    def test_deterministic_flow_certifies_exact_coefficient(self):
        est = verify_drift(ou(0.0, substeps=64), np.abs, [0.0, 0.5, 1.0, -0.5],
                           STATES, 0.5, 100, 777)
        assert est.certified
        # analytic decay e^{-0.5} ~ 0.6065: first grid coefficient above is 0.65
        assert est.b1_hat == pytest.approx(0.65)
        for g, m2 in est.M2_hat.items():
            assert m2 <= 1e-9
        for g, m1 in est.M1_hat.items():
            assert np.isfinite(m1)

    def test_reward_independent_and_repeatable(self):
        # drift concerns the uncontrolled process only: same inputs, same result
        a = verify_drift(ou(0.0, substeps=32), np.abs, [0.0], STATES, 0.5, 50, 3)
        b = verify_drift(ou(0.0, substeps=32), np.abs, [0.0], STATES, 0.5, 50, 3)
        assert a.b1_hat == b.b1_hat
        assert a.M2_hat == b.M2_hat
        assert np.array_equal(a.test_states, b.test_states)

    def test_noisy_flow_certifies_with_growing_offset(self):
        est = verify_drift(ou(1.0, substeps=8), np.abs, [0.0, 0.5, 1.0],
                           STATES, 0.5, 1500, 777)
        assert est.certified
        assert 0.0 < est.b1_hat < 1.0
        assert est.M2_hat[0.0] <= est.M2_hat[0.5] <= est.M2_hat[1.0]
        assert all(np.isfinite(v) for v in est.M1_hat.values())

    def test_unstable_matrix_rejected_at_construction(self):
        with pytest.raises(DomainError):
            ri.DiffusionModel(mean_reversion=np.array([[+1.0]]),
                              vol=None, dimension=1, substeps=32)

    def test_uncertified_report_not_exception(self):
        # growing deterministic map via bounded-drift trick: g(x) = +2 tanh(x)
        # overwhelms the weak mean reversion near the origin probes
        model = ri.DiffusionModel.ornstein_uhlenbeck(
            0.01, 0.0, substeps=16,
            drift_bounded=lambda x: 10.0 * np.tanh(x), drift_bound=10.0)
        est = verify_drift(model, np.abs, [0.0], np.linspace(-3, 3, 9),
                           0.5, 40, 5)
        assert not est.certified
        assert est.failure_reason


class TestNoiseBound:
    def test_zero_vol_trivial(self):
        chk = verify_noise_bound_example1(ou(0.0), 1.0, 0.5, 200, 1)
        assert chk.empirical_mgf == pytest.approx(1.0)
        assert chk.analytic_bound == pytest.approx(2.0)
        assert chk.satisfied

    def test_unit_vol_within_bound(self):
        chk = verify_noise_bound_example1(ou(1.0), 1.0, 0.5, 20000, 2)
        assert chk.satisfied
        assert chk.empirical_mgf <= 3.297442541400256 * (1 + 3 * chk.rel_stderr)

    def test_gamma_sweep_monotone_and_satisfied(self):
        prev = 0.0
        for g in (0.5, 1.0, 2.0):
            chk = verify_noise_bound_example1(ou(1.0), g, 0.5, 20000, 3)
            assert chk.satisfied
            assert chk.empirical_mgf >= prev
            prev = chk.empirical_mgf

    def test_gamma_validation(self):
        with pytest.raises(DomainError):
            verify_noise_bound_example1(ou(1.0), -0.5, 0.5, 100, 1)


class TestMinorisation:
    def test_identical_probes_full_mass(self):
        # identical laws: the bin-wise min only loses binomial noise
        est = verify_minorisation(ou(1.0, substeps=8), np.abs, 1.0, 0.5, 32,
                                  4000, 11, probe_states=np.zeros(5),
                                  bin_range=(-5.0, 5.0), shift_range=(-1.0, 1.0))
        assert est.certified
        assert 0.8 <= est.d_hat <= 1.0

    def test_disjoint_supports_fail(self):
        # deterministic flow maps distinct probes to distinct atoms
        est = verify_minorisation(ou(0.0, substeps=16), np.abs, 3.0, 0.5, 64,
                                  200, 12, probe_states=np.linspace(-3, 3, 5),
                                  bin_range=(-5.0, 5.0))
        assert not est.certified
        assert est.d_hat == 0.0

    def test_dhat_non_increasing_in_radius(self):
        # nested probe sets share stream indices, so the bin-wise min over a
        # superset is pointwise smaller and d_hat cannot grow with R
        base = [-1.0, -0.5, 0.0, 0.5, 1.0]
        probe_sets = {1.0: base, 2.0: base + [-2.0, 2.0],
                      3.0: base + [-2.0, 2.0, -3.0, 3.0]}
        vals = []
        for R in (1.0, 2.0, 3.0):
            est = verify_minorisation(ou(1.0, substeps=8), np.abs, R, 0.5, 64,
                                      2000, 13, probe_states=probe_sets[R],
                                      bin_range=(-5.0, 5.0))
            vals.append(est.d_hat)
        assert vals[0] >= vals[1] >= vals[2]

    def test_probe_validation(self):
        with pytest.raises(DomainError):
            verify_minorisation(ou(1.0), np.abs, 1.0, 0.5, 32, 100, 1,
                                probe_states=[0.0, 0.1],
                                bin_range=(-5.0, 5.0))
        with pytest.raises(DomainError):
            verify_minorisation(ou(1.0), np.abs, 1.0, 0.5, 32, 100, 1,
                                probe_states=[0.0, 0.1, 0.2, 0.3, 2.0],
                                bin_range=(-5.0, 5.0))


class TestLambdaGammaSweep:
    def test_single_gamma(self, small_kernel, small_problem):
        res = lambda_gamma_sweep(lambda: small_kernel, small_problem, [-0.5],
                                 tol=1e-9)
        assert len(res.pairs) == 1
        assert res.max_adjacent_jump == 0.0

    def test_nondecreasing_on_small_problem(self, small_kernel, small_problem):
        res = lambda_gamma_sweep(lambda: small_kernel, small_problem,
                                 [-2.0, -1.0, -0.5, -0.1], tol=1e-9)
        lams = [lam for _, lam in res.pairs]
        assert all(b >= a - 1e-8 for a, b in zip(lams, lams[1:]))

    def test_constant_reward_gamma_invariant(self, small_grid):
        # deterministic one-step law + constant reward: entropic = mean for
        # every gamma, so the gain does not move along the sweep
        model = ri.DiffusionModel.ornstein_uhlenbeck(1.0, 0.0, substeps=64)
        k = ri.build_kernel(model, small_grid,
                            lambda x: np.ones_like(np.asarray(x, float)),
                            0.5, 3, 21)
        problem = ri.ImpulseProblem.for_grid(
            small_grid, lambda x: np.ones_like(np.asarray(x, float)),
            lambda x, xi: -50.0, -50.0, [0.0], 0.5)
        res = lambda_gamma_sweep(lambda: k, problem, [-2.0, -1.0, -0.1],
                                 tol=1e-10)
        lams = [lam for _, lam in res.pairs]
        assert max(lams) - min(lams) <= 1e-9
        assert lams[0] == pytest.approx(0.5, abs=1e-9)

    def test_gamma_ordering_validation(self, small_kernel, small_problem):
        with pytest.raises(DomainError):
            lambda_gamma_sweep(lambda: small_kernel, small_problem,
                               [-0.5, -1.0], tol=1e-9)
        with pytest.raises(DomainError):
            lambda_gamma_sweep(lambda: small_kernel, small_problem,
                               [-0.5, 0.5], tol=1e-9)
