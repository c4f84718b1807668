"""Mortality law, annuity factors and the PDE boundary functions."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from rcla.mortality import (
    MortalityParams,
    alda_factor,
    deferred_factor_F,
    deferred_factor_Fprime,
    hazard_rate,
    spia_factor,
    survival_probability,
    tabulate_deferred_factors,
)
from rcla.special_functions import QuadratureSpec, simpson_integrate

P65 = MortalityParams(x=65)
P40 = MortalityParams(x=40)


class TestHazardAndSurvival:
    def test_hazard_at_modal_age(self):
        p = MortalityParams(x=65, lam=0.01)
        assert hazard_rate(p.m - p.x, p) == pytest.approx(0.01 + 1.0 / p.b, rel=1e-14)

    def test_constant_force_limit(self):
        p = MortalityParams(x=65, lam=0.05, m=1e6, b=9.5, max_age=1e6 + 100)
        assert hazard_rate(0.0, p) == pytest.approx(0.05, abs=1e-12)
        assert hazard_rate(30.0, p) == pytest.approx(0.05, abs=1e-12)

    def test_hazard_direct_formula(self):
        got = hazard_rate(0.0, P65)
        assert got == pytest.approx(math.exp(-21.3 / 9.5) / 9.5, rel=1e-14)

    def test_survival_at_zero(self):
        assert survival_probability(0.0, P65) == 1.0

    def test_survival_far_tail(self):
        assert survival_probability(200.0, P65) < 1e-10

    def test_survival_vs_hazard_quadrature(self):
        integral = simpson_integrate(lambda t: hazard_rate(t, P65), 0.0, 10.0,
                                     QuadratureSpec(panel_count=512))
        assert survival_probability(10.0, P65) == pytest.approx(math.exp(-integral), abs=1e-8)

    def test_monotone_nonincreasing(self):
        t = np.linspace(0.0, 60.0, 200)
        s = survival_probability(t, P65)
        assert np.all(np.diff(s) <= 0)
        assert np.all((s >= 0) & (s <= 1))


class TestAldaFactor:
    @pytest.mark.parametrize("x,tau,rho,ref", [
        (40, 0.0, 0.05, 16.9287), (40, 0.0, 0.03, 23.0144), (40, 10.0, 0.05, 9.1010),
        (65, 0.0, 0.05, 11.3828), (65, 10.0, 0.05, 4.0636), (65, 0.0, 0.03, 13.6601),
        (75, 20.0, 0.07, 0.0677), (50, 0.0, 0.03, 19.7483),
    ])
    def test_published_anchors(self, x, tau, rho, ref):
        assert alda_factor(tau, rho, MortalityParams(x=x)).value == pytest.approx(ref, abs=5e-4)

    def test_life_expectancy_at_65(self):
        # rho = 0 routes through the quadrature path; closed-form cross-checks
        # (b e^c E1(c)) pin the value at 18.6824 for m = 86.3
        got = alda_factor(0.0, 0.0, P65).value
        assert got == pytest.approx(18.682431, abs=1e-3)

    def test_closed_form_vs_quadrature(self):
        for x in (40, 50, 65, 75):
            p = MortalityParams(x=x)
            for tau in (0.0, 5.0, 10.0, 20.0):
                for rho in (0.03, 0.05, 0.07):
                    closed = alda_factor(tau, rho, p).value
                    direct = simpson_integrate(
                        lambda t: survival_probability(t, p) * np.exp(-rho * t),
                        tau, p.horizon + 20.0, QuadratureSpec(panel_count=8192))
                    assert closed == pytest.approx(direct, abs=1e-6)

    def test_actuarial_identity(self):
        # deferred factor = older immediate factor * survival * discount
        rng = np.random.default_rng(7)
        for _ in range(25):
            x = rng.uniform(35.0, 80.0)
            tau = rng.uniform(0.0, 20.0)
            rho = rng.uniform(0.005, 0.09)
            p = MortalityParams(x=x)
            lhs = alda_factor(tau, rho, p).value
            rhs = (spia_factor(rho, MortalityParams(x=x + tau))
                   * float(survival_probability(tau, p)) * math.exp(-rho * tau))
            assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_monotonicity(self):
        ages = [40, 50, 65, 75]
        taus = [0.0, 5.0, 10.0, 20.0]
        rhos = [0.03, 0.05, 0.07]
        vals = {(x, tau, rho): alda_factor(tau, rho, MortalityParams(x=x)).value
                for x in ages for tau in taus for rho in rhos}
        for tau in taus:
            for rho in rhos:
                for lo, hi in zip(ages, ages[1:]):
                    assert vals[(hi, tau, rho)] < vals[(lo, tau, rho)]
        for x in ages:
            for rho in rhos:
                for lo, hi in zip(taus, taus[1:]):
                    assert vals[(x, hi, rho)] < vals[(x, lo, rho)]
            for tau in taus:
                for lo, hi in zip(rhos, rhos[1:]):
                    assert vals[(x, tau, hi)] < vals[(x, tau, lo)]

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            alda_factor(-1.0, 0.05, P65)
        with pytest.raises(ValueError):
            alda_factor(0.0, -0.01, P65)


class TestDeferredFactors:
    def test_F_beyond_horizon_negligible(self):
        assert deferred_factor_F(P65.horizon + 1.0, 0.05, P65) < 1e-8

    def test_F_at_zero_is_spia(self):
        assert deferred_factor_F(0.0, 0.05, P65) == pytest.approx(11.3828, abs=5e-4)

    def test_F_matches_quadrature_at_random_points(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            xi = rng.uniform(0.0, 40.0)
            direct, _ = quad(lambda t: survival_probability(t, P65) * math.exp(-0.05 * t),
                             xi, P65.horizon + 10.0, limit=400)
            assert deferred_factor_F(xi, 0.05, P65) == pytest.approx(direct, abs=1e-6)

    def test_Fprime_at_zero(self):
        assert deferred_factor_Fprime(0.0, 0.05, P65) == -1.0

    def test_Fprime_bounds_and_sign(self):
        for xi in np.linspace(0.0, 50.0, 23):
            v = deferred_factor_Fprime(float(xi), 0.05, P65)
            assert -1.0 <= v < 0.0

    def test_second_derivative_relation(self):
        # F'' = -(lambda_xi + rho) F', checked by central differences on F'
        h = 1e-4
        for xi in (1.0, 7.0, 19.0, 33.0):
            fpp = (deferred_factor_Fprime(xi + h, 0.05, P65)
                   - deferred_factor_Fprime(xi - h, 0.05, P65)) / (2.0 * h)
            expected = -(float(hazard_rate(xi, P65)) + 0.05) * deferred_factor_Fprime(xi, 0.05, P65)
            assert fpp == pytest.approx(expected, rel=1e-6)

    def test_constant_hazard_closed_form(self):
        lam, rho = 0.04, 0.03
        p = MortalityParams(x=65, lam=lam, m=1e6, b=9.5, max_age=1e6 + 100)
        for xi in (0.0, 3.0, 11.0):
            got = deferred_factor_F(xi, rho, p)
            assert got == pytest.approx(math.exp(-(lam + rho) * xi) / (lam + rho), rel=1e-9)

    def test_boundary_ratio_ode(self):
        # d/dt (F/F') = 1 + (lambda_t + rho) F/F', by central differences
        rho = 0.05
        h = 1e-4

        def ratio(t):
            return deferred_factor_F(t, rho, P65) / deferred_factor_Fprime(t, rho, P65)

        for t in (0.5, 5.0, 14.0, 27.0):
            lhs = (ratio(t + h) - ratio(t - h)) / (2.0 * h)
            rhs = 1.0 + (float(hazard_rate(t, P65)) + rho) * ratio(t)
            assert lhs == pytest.approx(rhs, abs=1e-6 * max(1.0, abs(rhs)) * 10)

    def test_tabulation_matches_pointwise(self):
        times = np.linspace(0.0, 60.0, 301)
        F, Fp = tabulate_deferred_factors(times, 0.05, P65)
        for i in (0, 17, 150, 288, 300):
            assert F[i] == pytest.approx(deferred_factor_F(float(times[i]), 0.05, P65), abs=1e-10)
            assert Fp[i] == pytest.approx(deferred_factor_Fprime(float(times[i]), 0.05, P65), abs=1e-12)

    def test_tabulation_rho_zero(self):
        times = np.linspace(0.0, 30.0, 31)
        F, _ = tabulate_deferred_factors(times, 0.0, P65)
        assert F[0] == pytest.approx(18.682431, abs=1e-3)


class TestParamsValidation:
    def test_invariants(self):
        with pytest.raises(ValueError):
            MortalityParams(x=-1.0)
        with pytest.raises(ValueError):
            MortalityParams(x=65, b=0.0)
        with pytest.raises(ValueError):
            MortalityParams(x=65, m=-5.0)
        with pytest.raises(ValueError):
            MortalityParams(x=65, lam=-0.01)
        with pytest.raises(ValueError):
            MortalityParams(x=65, max_age=60.0)
