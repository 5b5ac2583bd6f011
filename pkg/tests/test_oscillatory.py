import math

import numpy as np
import pytest
from scipy import integrate as sint
from scipy.special import sici

from dampedmodes.averaged import integrate_averaged
from dampedmodes.errors import InvalidArgument
from dampedmodes.oscillatory import (ADVERSARY_SCHEDULES, OscillatoryForcing, PhaseFunction,
                                     ScalarHarnessSpec, TrigCorrections,
                                     average_convergence_exponent, bernoulli_harness,
                                     bernoulli_threshold, osc_bound_sweep, osc_integral,
                                     osc_product_integral, product_bound_check, prop_R_harness,
                                     semi_integrability_probe, series_bound_check, time_average)


class TestOscIntegral:
    def test_matches_cosine_integral(self):
        value, bound = osc_integral(1.0, PhaseFunction.zero(), 0.0, 30.0)
        # int_1^{e^30} cos(x)/x dx = Ci(e^30) - Ci(1)
        expected = sici(math.exp(30.0))[1] - sici(1.0)[1]
        assert value == pytest.approx(expected, abs=1e-10)
        assert value == pytest.approx(-0.33740, abs=1e-5)
        assert abs(value) <= bound == 3.0

    def test_adaptive_quadrature_oracle_on_short_range(self):
        value, _ = osc_integral(2.0, PhaseFunction.linear(0.7, 0.3), 0.5, 3.0)
        ref, _ = sint.quad(lambda x: math.cos(2 * math.exp(x) + 0.7 * x + 0.3), 0.5, 3.0,
                           limit=2000, epsabs=1e-13)
        assert value == pytest.approx(ref, abs=1e-10)

    def test_bound_formula(self):
        assert osc_integral(10.0, PhaseFunction.zero(), 0.0, 5.0)[1] == pytest.approx(0.3)
        b0 = osc_integral(10.0, PhaseFunction.zero(), 0.0, 5.0)[1]
        b1 = osc_integral(10.0, PhaseFunction.zero(), math.log(10), 5.0)[1]
        assert b1 == pytest.approx(b0 / 10)

    def test_lipschitz_enters_bound(self):
        _, bound = osc_integral(1.0, PhaseFunction.linear(2.0), 0.0, 1.0)
        assert bound == pytest.approx(5.0)

    def test_empty_interval(self):
        assert osc_integral(1.0, PhaseFunction.zero(), 2.0, 2.0)[0] == 0.0

    def test_very_long_range(self):
        value, bound = osc_integral(1.0, PhaseFunction.zero(), 0.0, 1000.0)
        assert value == pytest.approx(-sici(1.0)[1], abs=1e-9)

    @pytest.mark.parametrize("args", [(0.0, 0.0, 1.0), (-1.0, 0.0, 1.0), (1.0, 2.0, 1.0),
                                      (1.0, -1.0, 1.0)])
    def test_invalid(self, args):
        alpha, t, s = args
        with pytest.raises(InvalidArgument):
            osc_integral(alpha, PhaseFunction.zero(), t, s)

    def test_phase_violating_its_lipschitz_bound(self):
        bad = PhaseFunction(lambda t: t * t, lambda t: 2 * t, 1.0)
        with pytest.raises(InvalidArgument):
            osc_integral(1.0, bad, 0.0, 3.0)

    def test_product_integral_with_constant_weight(self):
        a = osc_product_integral(3.0, PhaseFunction.zero(), lambda x: 1.0 + 0 * x, 0.0, 4.0, 1e-11)
        b, _ = osc_integral(3.0, PhaseFunction.zero(), 0.0, 4.0)
        assert a == pytest.approx(b, abs=1e-10)


class TestOscBoundSweep:
    def test_no_violations(self):
        res = osc_bound_sweep(seed=0)
        assert res.cases == 256
        assert res.violations == 0
        assert res.max_ratio < 1

    def test_seed_reproducible(self):
        a = osc_bound_sweep(seed=5, cases_per_alpha=4)
        b = osc_bound_sweep(seed=5, cases_per_alpha=4)
        assert a.records == b.records


class TestTrigCorrections:
    theta = np.linspace(-10, 10, 20001)

    def test_pointwise_bounds(self):
        assert np.max(np.abs(TrigCorrections.a(self.theta))) <= 0.5
        assert np.max(np.abs(TrigCorrections.b(self.theta))) <= 0.625
        th, tk = np.meshgrid(self.theta[::50], self.theta[::50])
        assert np.max(np.abs(TrigCorrections.c(th, tk))) <= 0.75

    @pytest.mark.parametrize("lh,lk", [(1.0, 2.0), (2.0, 1.0), (1.5, 1.5)])
    def test_forcing_expansions(self, lh, lk):
        s = np.linspace(0, 3, 301)
        th, tk = lh * np.exp(s) + 0.3, lk * np.exp(s) - 0.2
        np.testing.assert_allclose(TrigCorrections.a_forcing(lh, 0.3)(s), TrigCorrections.a(th),
                                   atol=1e-12)
        np.testing.assert_allclose(TrigCorrections.b_forcing(lh, 0.3)(s), TrigCorrections.b(th),
                                   atol=1e-12)
        np.testing.assert_allclose(TrigCorrections.c_forcing(lh, lk, 0.3, -0.2)(s),
                                   TrigCorrections.c(th, tk), atol=1e-12)

    def test_forcing_integral_matches_quadrature(self):
        f = TrigCorrections.b_forcing(1.3, 0.4)
        ref, _ = sint.quad(f, 0.0, 2.5, limit=500, epsabs=1e-13)
        assert f.integral(0.0, 2.5) == pytest.approx(ref, abs=1e-10)


class TestTimeAverages:
    def test_sin2(self):
        assert abs(time_average("sin2", 50, 1.0) - 0.5) < 0.02

    def test_sin4(self):
        assert abs(time_average("sin4", 50, 2.0) - 0.375) < 0.02

    def test_sin2sin2_distinct(self):
        assert abs(time_average("sin2sin2", 50, 1.0, 2.0) - 0.25) < 0.02

    def test_sin2sin2_equal_frequencies(self):
        v = time_average("sin2sin2", 50, 1.0, 1.0)
        assert abs(v - 0.375) < 0.02
        assert abs(v - 0.375) < abs(v - 0.25)

    def test_matches_direct_quadrature_at_small_T(self):
        T = 3.0
        ref, _ = sint.quad(lambda s: math.sin(math.exp(s)) ** 4, 0.0, T, limit=500)
        assert time_average("sin4", T, 1.0) == pytest.approx(ref / T, abs=1e-10)

    @pytest.mark.parametrize("kind,lam,mu", [("sin2", 1.0, None), ("sin4", 2.0, None),
                                             ("sin2sin2", 1.0, 2.0)])
    def test_rate_one_over_T(self, kind, lam, mu):
        assert average_convergence_exponent(kind, lam, mu) >= 0.8

    def test_short_window_rejected(self):
        with pytest.raises(InvalidArgument):
            time_average("sin2", 0.5)

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgument):
            time_average("cos2", 10.0)


class TestProbe:
    grid = np.linspace(0.0, 6.0, 25)

    def test_cos_exp(self):
        res = semi_integrability_probe(OscillatoryForcing(((1.0, 1.0, 0.0),)), self.grid, 8.0)
        assert res.classification == "exponential"
        assert res.constant <= 4.0
        assert np.all(res.envelope <= 4.0 * np.exp(-self.grid))

    def test_divergent(self):
        res = semi_integrability_probe(lambda t: 1 / (1 + t), self.grid, 200.0)
        assert res.classification == "not semi-integrable"

    def test_classical_semi_integrable(self):
        res = semi_integrability_probe(lambda t: np.cos(t) / (1 + t), np.linspace(0, 50, 26), 400.0,
                                       n_dense=400_001)
        assert res.classification == "semi-integrable"

    def test_pairs(self):
        res = semi_integrability_probe(OscillatoryForcing(((1.0, 1.0, 0.0),)), self.grid, 8.0)
        assert len(res.pairs()) == self.grid.size


@pytest.fixture(scope="module")
def averaged_pair_run():
    return integrate_averaged([1.4, 0.5], 12.0, count=1201, stop_rhs=0.0)


def _interp(traj, k):
    s = traj.s
    y = traj.rho[:, k] ** 2
    dy = np.gradient(y, s)
    return (lambda x: np.interp(x, s, y)), (lambda x: np.interp(x, s, dy))


class TestCompositeBounds:
    def test_product_with_trajectory_amplitude(self, averaged_pair_run):
        f, df = _interp(averaged_pair_run, 0)
        for g in (TrigCorrections.a_forcing(1.0), TrigCorrections.b_forcing(2.0),
                  TrigCorrections.c_forcing(1.0, 2.0)):
            chk = product_bound_check(g, f, df)
            assert chk.holds, chk

    def test_series_with_trajectory_amplitudes(self, averaged_pair_run):
        f0, df0 = _interp(averaged_pair_run, 0)
        f1, df1 = _interp(averaged_pair_run, 1)
        chk = series_bound_check([TrigCorrections.a_forcing(1.0), TrigCorrections.a_forcing(2.0)],
                                 [f0, f1], [df0, df1])
        assert chk.holds, chk


def logistic(t, z0, z_inf):
    return z_inf / (1 + (z_inf / z0 - 1) * math.exp(-t))


class TestPropR:
    def test_stated_example(self):
        spec = ScalarHarnessSpec(z0=1.0, z_inf=2.0, psi1=OscillatoryForcing(((1.0, 1.0, 0.0),)),
                                 psi2=lambda t: math.exp(-t))
        res = prop_R_harness(spec, 40.0)
        assert res.converged
        assert set(res.finals) == set(ADVERSARY_SCHEDULES)
        assert all(abs(v - 2.0) < 5e-3 for v in res.finals.values())
        assert not res.flags

    def test_logistic_oracle(self):
        final, converged = prop_R_harness(ScalarHarnessSpec(z0=1.0, z_inf=2.0), 10.0)
        assert final == pytest.approx(logistic(10.0, 1.0, 2.0), abs=1e-8)

    def test_equilibrium(self):
        final, _ = prop_R_harness(ScalarHarnessSpec(z0=2.0, z_inf=2.0), 20.0)
        assert final == 2.0

    def test_flags_non_decaying_perturbation(self):
        spec = ScalarHarnessSpec(z0=1.0, z_inf=2.0, psi2=lambda t: 0.5)
        res = prop_R_harness(spec, 20.0)
        assert any("psi2" in f for f in res.flags)
        assert not res.converged

    def test_flags_divergent_forcing(self):
        spec = ScalarHarnessSpec(z0=1.0, z_inf=2.0, psi1=lambda t: 1 / (1 + t))
        res = prop_R_harness(spec, 20.0)
        assert any("semi-integrability" in f for f in res.flags)

    def test_requires_target(self):
        with pytest.raises(InvalidArgument):
            prop_R_harness(ScalarHarnessSpec(z0=1.0), 10.0)


class TestBernoulli:
    def test_tends_to_one(self):
        res = bernoulli_harness(ScalarHarnessSpec(z0=3.0, alpha=lambda t: 1.0), 30.0)
        assert abs(res.final - 1.0) < 1e-6

    def test_closed_form(self):
        # alpha = 1, beta = gamma = 0: x = z**-2 obeys x' = -2x + 2
        res = bernoulli_harness(ScalarHarnessSpec(z0=3.0, alpha=lambda t: 1.0), 2.0)
        x = 1 + (1 / 9 - 1) * math.exp(-4.0)
        assert res.final == pytest.approx(x**-0.5, abs=1e-9)

    def test_threshold(self):
        t0 = bernoulli_threshold(1.0, 1.0)
        assert 74 * math.exp(-t0) < math.log(2)
        assert t0 == pytest.approx(math.log(74 / math.log(2)), abs=1e-9)
        assert t0 == pytest.approx(4.67, abs=0.01)
        assert bernoulli_threshold(0.0, 0.1) == 0.0

    def test_sup_after_threshold(self):
        spec = ScalarHarnessSpec(z0=1.0, alpha=lambda t: 1.0,
                                 beta=OscillatoryForcing(((1.0, 1.0, 0.0),)), L0=0.0, L1=1.0,
                                 L2=1.0, z_at_t0=1.0)
        final, t0, sup = bernoulli_harness(spec, 30.0)
        assert t0 == pytest.approx(4.6706, abs=1e-3)
        assert sup <= 2.0
        assert final == pytest.approx(1.0, abs=1e-3)

    def test_flags_nonpositive_alpha(self):
        res = bernoulli_harness(ScalarHarnessSpec(z0=1.0, alpha=lambda t: -1.0), 5.0)
        assert any("alpha" in f for f in res.flags)
