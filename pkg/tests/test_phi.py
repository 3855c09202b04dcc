import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logphase.phi import (
    E,
    LogConstants,
    PhiParams,
    compute_log_constants,
    f_epsilon,
    f_epsilon_almost_increasing_constant,
    f_epsilon_critical_points,
    g_log,
    hlog_density,
    hlog_density_dt,
    hlog_eval,
    hlog_primitive,
    log_constants,
    log_growth_check,
    monotone_gap,
    quotient_frac_log_max,
    young_log_gap,
)

RNG = np.random.default_rng(20240911)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

class TestLogConstants:
    def test_values_and_residual(self):
        c = compute_log_constants(1e-12)
        assert 5.83 < c.t0 < 5.84
        assert 0.317 < c.kappa < 0.318
        assert abs(E * math.log(E + c.t0) - c.t0) <= 1e-12
        assert c.kappa == E / (E + c.t0)

    def test_g_identity_at_root(self):
        # g(t0) = t0 / ((e+t0) log(e+t0)) equals kappa once h(t0) = 0
        c = log_constants()
        assert abs(float(g_log(c.t0)) - c.kappa) < 1e-13

    @pytest.mark.parametrize("tol", [1e-6, 1e-8, 1e-10, 1e-12])
    def test_residual_shrinks_with_tol(self, tol):
        c = compute_log_constants(tol)
        assert abs(E * math.log(E + c.t0) - c.t0) <= tol

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            compute_log_constants(0.0)


# ---------------------------------------------------------------------------
# integrand / density
# ---------------------------------------------------------------------------

class TestIntegrand:
    def test_zero_at_zero(self):
        assert hlog_eval(PhiParams(2, 3, 1), 0.0) == 0.0

    def test_pure_power_reduction(self):
        assert hlog_eval(PhiParams(2, 2, 0), 1.0) == 1.0

    def test_closed_form(self):
        # t^p + mu t^q log(e+t) at p=2, q=3, mu=1, t=1
        expected = 1.0 + math.log(E + 1.0)
        assert hlog_eval(PhiParams(2, 3, 1), 1.0) == pytest.approx(expected, rel=1e-15)

    def test_zero_iff_zero(self):
        params = PhiParams(1.5, 2.5, 0.3)
        t = np.logspace(-12, 3, 50)
        assert np.all(hlog_eval(params, t) > 0.0)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            hlog_eval(PhiParams(2, 3, 1), -1.0)

    def test_strictly_increasing_and_convex(self):
        for _ in range(50):
            p = 1.0 + 2.0 * RNG.random() + 1e-9
            params = PhiParams(p, p + RNG.random(), RNG.random())
            t = np.sort(RNG.random(100) * 30.0)
            vals = hlog_eval(params, t)
            assert np.all(np.diff(vals) > 0.0)
            lam = RNG.random()
            t1, t2 = np.sort(RNG.random(2) * 20.0 + 1e-9)
            chord = lam * hlog_eval(params, t1) + (1 - lam) * hlog_eval(params, t2)
            mid = hlog_eval(params, lam * t1 + (1 - lam) * t2)
            assert mid <= chord + 1e-12 * max(chord, 1.0)

    def test_inc_dec_normalizations(self):
        kappa = log_constants().kappa
        grid = np.logspace(-8, 8, 5000)
        for _ in range(20):
            p = 1.0 + 2.0 * RNG.random() + 1e-9
            q = p + 2.0 * RNG.random()
            params = PhiParams(p, q, 2.0 * RNG.random())
            vals = hlog_eval(params, grid)
            inc = vals / grid ** p
            assert np.all(np.diff(inc) >= -1e-12 * np.max(inc))
            dec = vals / grid ** (q + kappa)
            assert np.all(np.diff(dec) <= 1e-12 * np.max(dec))


class TestDensity:
    def test_zero_limit(self):
        assert hlog_density(PhiParams(1.5, 2, 1), 0.0) == 0.0
        assert hlog_density(PhiParams(3, 4, 2), 0.0) == 0.0

    def test_laplacian_reduction(self):
        assert hlog_density(PhiParams(2, 2, 0), 3.0) == 3.0

    def test_closed_form(self):
        expected = 1.0 + (math.log(E + 1.0) + 1.0 / (3.0 * (E + 1.0)))
        assert hlog_density(PhiParams(2, 3, 1), 1.0) == pytest.approx(expected, rel=1e-15)

    def test_is_derivative_of_primitive(self):
        params = PhiParams(1.7, 2.6, 0.8)
        t = np.logspace(-3, 3, 200)
        h = 1e-7 * t
        fd = (hlog_primitive(params, t + h) - hlog_primitive(params, t - h)) / (2 * h)
        an = hlog_density(params, t)
        assert np.max(np.abs(fd - an) / np.abs(an)) < 1e-6

    def test_strictly_increasing(self):
        params = PhiParams(1.5, 3.0, 0.5)
        t = np.logspace(-6, 4, 1000)
        assert np.all(np.diff(hlog_density(params, t)) > 0.0)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            hlog_density(PhiParams(2, 3, 1), -0.1)


class TestDensityDerivative:
    def test_identity_density(self):
        assert hlog_density_dt(PhiParams(2, 2, 0), 5.0) == pytest.approx(1.0)

    def test_quadratic_density(self):
        # density t^2 for p = 3, mu = 0; derivative 2t
        assert hlog_density_dt(PhiParams(3, 3, 0), 2.0) == pytest.approx(4.0)

    @pytest.mark.parametrize("h", [1e-5, 1e-6])
    def test_fd_oracle(self, h):
        params = PhiParams(2, 3, 1)
        fd = (hlog_density(params, 1.0 + h) - hlog_density(params, 1.0 - h)) / (2 * h)
        an = hlog_density_dt(params, 1.0)
        assert an > 0.0
        assert abs(fd - an) / an < 1e-6

    def test_positive_everywhere(self):
        t = np.logspace(-8, 6, 500)
        for params in (PhiParams(1.3, 1.8, 0.4), PhiParams(2.6, 2.6, 0.5)):
            assert np.all(hlog_density_dt(params, t) > 0.0)

    def test_rejects_origin(self):
        with pytest.raises(ValueError):
            hlog_density_dt(PhiParams(1.5, 2, 1), 0.0)


# ---------------------------------------------------------------------------
# power/log ratio
# ---------------------------------------------------------------------------

class TestFEpsilon:
    def test_monotone_at_and_above_kappa(self):
        kappa = log_constants().kappa
        grid = np.logspace(-5, 5, 4000)
        for eps in (kappa, kappa + 1e-3, 0.5, 1.0, 3.0):
            vals = f_epsilon(eps, grid)
            assert np.all(np.diff(vals) >= -1e-12 * np.max(vals))

    def test_two_critical_points_below_kappa(self):
        c = log_constants()
        t1, t2 = f_epsilon_critical_points(0.1)
        assert t1 < c.t0 < t2
        assert abs(float(g_log(t1)) - 0.1) < 1e-12
        assert abs(float(g_log(t2)) - 0.1) < 1e-10
        # t1 is a local max, t2 a local min of f_eps
        assert f_epsilon(0.1, t1) > f_epsilon(0.1, 1.001 * t1)
        assert f_epsilon(0.1, t2) < f_epsilon(0.1, 1.001 * t2)

    def test_almost_increasing_constant(self):
        kappa = log_constants().kappa
        for eps in np.linspace(0.02, kappa * 0.95, 8):
            a_eps = f_epsilon_almost_increasing_constant(float(eps))
            assert a_eps >= 1.0
        assert f_epsilon_almost_increasing_constant(kappa + 0.01) == 1.0

    def test_almost_increasing_property_holds(self):
        # f(s) <= a_eps * f(t) for s < t, sampled
        eps = 0.12
        a_eps = f_epsilon_almost_increasing_constant(eps)
        grid = np.logspace(-4, 6, 800)
        vals = np.asarray(f_epsilon(eps, grid))
        running_min_after = np.minimum.accumulate(vals[::-1])[::-1]
        assert np.all(vals <= a_eps * running_min_after * (1 + 1e-12))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            f_epsilon(0.0, 1.0)
        with pytest.raises(ValueError):
            f_epsilon(0.5, 0.0)
        with pytest.raises(ValueError):
            f_epsilon_critical_points(0.5)  # above kappa


# ---------------------------------------------------------------------------
# inequality gaps
# ---------------------------------------------------------------------------

class TestYoungLogGap:
    def test_equality_at_s_equals_t(self):
        for t in (0.0, 0.3, 1.0, 17.0):
            for r in (1.5, 2.0, 4.0):
                assert abs(float(young_log_gap(t, t, r))) <= 1e-12 * max(1.0, t ** r)

    def test_closed_form_s0(self):
        # s = 0, t = 1, r = 2: gap = (1/2) log(e+1) + 1/(2(e+1))
        expected = 0.5 * math.log(E + 1.0) + 1.0 / (2.0 * (E + 1.0))
        assert float(young_log_gap(0.0, 1.0, 2.0)) == pytest.approx(expected, rel=1e-15)

    def test_random_sweep(self):
        s = RNG.random(200_000) * 100.0
        t = RNG.random(200_000) * 100.0
        r = 1.0 + 9.0 * RNG.random(200_000) + 1e-12
        assert float(np.min(young_log_gap(s, t, r))) >= -1e-12

    @given(
        st.floats(min_value=0.0, max_value=1e4),
        st.floats(min_value=0.0, max_value=1e4),
        st.floats(min_value=1.0 + 1e-9, max_value=50.0),
    )
    @settings(max_examples=300, deadline=None)
    def test_nonnegative_hypothesis(self, s, t, r):
        assert float(young_log_gap(s, t, r)) >= -1e-12 * max(1.0, s, t) ** r

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            young_log_gap(-1.0, 1.0, 2.0)
        with pytest.raises(ValueError):
            young_log_gap(1.0, 1.0, 1.0)


class TestMonotoneGap:
    def test_identical_arguments(self):
        xi = np.array([0.3, -1.2])
        assert float(monotone_gap(xi, xi, 2.5)) == 0.0

    def test_eta_zero_r2(self):
        # h == 1, r = 2: |xi|^2 - (1/2)|xi|^2 = (1/2)|xi|^2
        xi = np.array([2.0, 0.0])
        assert float(monotone_gap(xi, np.zeros(2), 2.0)) == pytest.approx(2.0)

    @pytest.mark.parametrize("r", [1.5, 2.0, 3.0])
    def test_random_sweep_with_log_weight(self, r):
        n = 100_000
        xi = RNG.standard_normal((n, 2)) * 4.0
        eta = RNG.standard_normal((n, 2)) * 4.0
        gaps = monotone_gap(xi, eta, r, h=lambda t: np.log(E + t))
        assert float(np.min(gaps)) >= -1e-12

    def test_domain_error(self):
        with pytest.raises(ValueError):
            monotone_gap(np.ones(2), np.zeros(2), 1.0)


class TestQuotientFracLogMax:
    def test_analytic_value(self):
        c = log_constants()
        argmax, vmax = quotient_frac_log_max(1.0001)
        assert argmax == c.t0
        assert vmax == pytest.approx(c.kappa / 1.0001, rel=1e-15)

    def test_large_q_scaling(self):
        _, v1 = quotient_frac_log_max(10.0)
        _, v2 = quotient_frac_log_max(1e6)
        assert v1 > v2 > 0.0
        assert v2 == pytest.approx(log_constants().kappa / 1e6)

    def test_grid_oracle(self):
        # independent grid maximization of t/(Q(e+t)log(e+t))
        grid = np.logspace(-6, 6, 1_000_000)
        for Q in (1.5, 3.0):
            oracle = float(np.max(grid / (Q * (E + grid) * np.log(E + grid))))
            _, vmax = quotient_frac_log_max(Q)
            assert abs(oracle - vmax) < 1e-8

    def test_invalid_q(self):
        with pytest.raises(ValueError):
            quotient_frac_log_max(1.0)


class TestLogGrowth:
    def test_origin_equality(self):
        # log(e) = 1 <= log(e) + log(e) = 2
        assert log_growth_check(0.0, 0.0)

    def test_specific_sum_case(self):
        # s = t = 1, q = 2: 4 log(e+2) <= 16 log(e+1)
        assert 4.0 * math.log(E + 2.0) <= 16.0 * math.log(E + 1.0)
        assert log_growth_check(1.0, 1.0, C=1.0, q=2.0)

    def test_random_sweep(self):
        x = RNG.random(300_000) * 1e3
        y = RNG.random(300_000) * 1e3
        assert log_growth_check(x, y, C=7.3, q=2.4)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            log_growth_check(-1.0, 0.0)
        with pytest.raises(ValueError):
            log_growth_check(1.0, 1.0, C=0.5)
