import math

import numpy as np
import pytest

from dampedmodes.averaged import (AveragedState, functional_F, grad_F, integrate_averaged,
                                  lyapunov_violations, rhs_averaged, stationary_profile,
                                  verify_averaged_identities)
from dampedmodes.errors import InvalidArgument
from dampedmodes.spectral import ModeSet


class TestFunctional:
    def test_zero(self):
        assert functional_F([0.0, 0.0]) == 0.0

    def test_single_stationary_amplitude(self):
        # -1/3 + 1/9 + 1/18
        assert functional_F([2 / math.sqrt(3)]) == pytest.approx(-1 / 6, rel=1e-14)

    def test_two_unit_modes(self):
        assert functional_F([1.0, 1.0]) == pytest.approx(-0.1875, rel=1e-15)

    def test_rows(self):
        rows = np.array([[1.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(functional_F(rows), [-0.1875, 0.0])


class TestGradient:
    def test_zero(self):
        assert not np.any(grad_F(np.zeros(4)))

    @pytest.mark.parametrize("j", [1, 2, 3, 7, 50])
    def test_vanishes_on_stationary_profile(self, j):
        rho = stationary_profile(ModeSet(tuple(range(j)))).vector(j + 3)
        assert np.max(np.abs(grad_F(rho))) < 1e-14

    def test_central_differences(self):
        rng = np.random.default_rng(3)
        h = 1e-5
        rho = rng.uniform(0, 2, 8)
        fd = np.array([(functional_F(rho + h * e) - functional_F(rho - h * e)) / (2 * h)
                       for e in np.eye(8)])
        np.testing.assert_allclose(grad_F(rho), fd, rtol=1e-6, atol=1e-9)

    def test_rhs_is_exact_negation(self):
        rho = np.array([0.3, 1.7, 0.0, 2.2])
        assert np.array_equal(rhs_averaged(rho), -grad_F(rho))


class TestStationaryProfile:
    def test_single(self):
        p = stationary_profile(ModeSet((0,)))
        assert p.amplitude == pytest.approx(1.1547005383792515)
        assert p.energy == pytest.approx(4 / 3)

    def test_three(self):
        p = stationary_profile(ModeSet((0, 4, 9)))
        assert p.amplitude == pytest.approx(2 / math.sqrt(7))
        assert p.energy == pytest.approx(12 / 7)
        assert p.amplitude**2 * 3 == pytest.approx(p.energy)

    def test_empty(self):
        p = stationary_profile(ModeSet(()))
        assert p.energy == 0.0 and not p.defined and math.isnan(p.amplitude)
        assert not np.any(p.vector(3))

    def test_amplitude_decreasing_in_j(self):
        amps = [stationary_profile(ModeSet(tuple(range(j)))).amplitude for j in range(1, 20)]
        assert all(a > b for a, b in zip(amps, amps[1:]))


class TestIntegrateAveraged:
    def test_single_mode_limit(self):
        traj = integrate_averaged([1.0, 0.0, 0.0], 60.0)
        assert abs(traj.rho[-1, 0] - 2 / math.sqrt(3)) < 1e-6
        assert np.all(traj.rho[:, 1:] == 0.0)

    def test_pair_limit(self):
        traj = integrate_averaged([1.0, 1.0], 60.0)
        np.testing.assert_allclose(traj.rho[-1], 2 / math.sqrt(5), atol=1e-6)
        assert abs(traj.rescaled_energy[-1] - 1.6) < 1e-6

    def test_zero_stays_zero(self):
        traj = integrate_averaged([0.0, 0.0], 10.0)
        assert not np.any(traj.rho)

    def test_uniform_in_s_and_nonnegative(self):
        traj = integrate_averaged([0.4, 1.3, 0.01], 20.0, count=401)
        np.testing.assert_allclose(np.diff(traj.s), 0.05)
        assert np.all(traj.rho >= 0)

    def test_functional_nonincreasing(self):
        traj = integrate_averaged([0.1, 2.5, 0.7, 1.1], 40.0)
        assert lyapunov_violations(traj, 1e-12).size == 0

    def test_early_stop_fills_samples(self):
        traj = integrate_averaged([1.0], 60.0)
        assert traj.meta["stopped_at"] is not None and traj.meta["stopped_at"] < 60.0
        assert traj.rho[-1, 0] == traj.rho[-2, 0]

    def test_early_stop_can_be_disabled(self):
        traj = integrate_averaged([1.0], 30.0, stop_rhs=0.0)
        assert traj.meta["stopped_at"] is None

    @pytest.mark.parametrize("kwargs", [{"s_end": 0.0}, {"tol": 0.5}])
    def test_invalid(self, kwargs):
        args = {"s_end": 10.0, **kwargs}
        with pytest.raises(InvalidArgument):
            integrate_averaged([1.0], **args)

    def test_negative_amplitude(self):
        with pytest.raises(InvalidArgument):
            AveragedState([-0.1])

    def test_quotients_bounded_by_one(self):
        # Q_{h,k}(0) <= 1 stays <= 1 and increases toward 1
        traj = integrate_averaged([1.5, 0.2, 0.9], 30.0)
        Q = traj.rho[:, 1:] / traj.rho[:, [0]]
        assert np.all(Q <= 1 + 1e-12)
        assert np.all(np.diff(Q, axis=0) >= -1e-12)


class TestIdentities:
    def test_pair_fine_sampling(self):
        traj = integrate_averaged([1.0, 1.0], 60.0, count=15001)
        rep = verify_averaged_identities(traj)
        assert rep.r_residual < 1e-5
        assert rep.q_residual < 1e-5
        assert rep.window_ok

    def test_residual_falls_with_spacing(self):
        coarse = verify_averaged_identities(integrate_averaged([2.0, 0.5], 20.0, count=1001))
        fine = verify_averaged_identities(integrate_averaged([2.0, 0.5], 20.0, count=2001))
        assert coarse.r_residual / fine.r_residual > 3.5

    def test_single_mode_skips_quotient(self):
        rep = verify_averaged_identities(integrate_averaged([1.0], 30.0))
        assert rep.q_residual is None
        assert any("quotient" in n for n in rep.notices)

    @pytest.mark.parametrize("rho0", [[1.0], [0.2, 0.2, 0.2], [3.0, 0.1, 0.0, 1.0]])
    def test_trailing_window(self, rho0):
        assert verify_averaged_identities(integrate_averaged(rho0, 60.0)).window_ok

    def test_rejects_modal_trajectory(self, single_1e3):
        with pytest.raises(InvalidArgument):
            verify_averaged_identities(single_1e3)


def test_truncation_law_equal_mass():
    for n in (10, 100, 200):
        traj = integrate_averaged(np.ones(n), 60.0)
        assert abs(traj.rescaled_energy[-1] - 4 * n / (2 * n + 1)) < 1e-6


def test_bernoulli_quotient_consistency():
    """The quotient Q = rho_2/rho_1 solves Q' = (rho_1**2/8) Q (1 - Q**2); with z = Q
    and alpha = rho_1**2/8 that is the Bernoulli equation with beta = gamma = 0."""
    from dampedmodes.oscillatory import ScalarHarnessSpec, bernoulli_harness

    traj = integrate_averaged([1.2, 0.3], 40.0, count=4001, stop_rhs=0.0)
    s = traj.s
    alpha = lambda t: float(np.interp(t, s, traj.rho[:, 0] ** 2 / 8))
    q0 = traj.rho[0, 1] / traj.rho[0, 0]
    res = bernoulli_harness(ScalarHarnessSpec(z0=q0, alpha=alpha, step=0.01), 40.0)
    Q = traj.rho[:, 1] / traj.rho[:, 0]
    assert res.final == pytest.approx(Q[-1], abs=1e-4)
    assert res.final == pytest.approx(1.0, abs=1e-3)
