import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from postrobust.diagnostics import ks_distance
from postrobust.errors import InvalidInputError
from postrobust.heavytail import (
    CoefficientPrior,
    LptnDensity,
    ScalePrior,
    coefficient_prior_pdf,
    lemma_s1_bounds,
    lemma_s1_fuzz,
    lptn_cdf,
    lptn_log1p_abs_quantile,
    lptn_logpdf,
    lptn_pdf,
    lptn_quantile,
    lptn_sample,
    lptn_sf,
    scale_moment_check,
    scale_prior_logpdf,
    tail_ratio,
    verify_prior_bound,
)

E = math.e


def mp_pdf(z, gamma):
    """Arbitrary-precision reference density."""
    z = mpmath.mpf(z)
    g = mpmath.mpf(gamma)
    return (g / 2) / (1 + abs(z)) / (1 + mpmath.log(1 + abs(z))) ** (1 + g)


class TestDensity:
    def test_value_at_zero(self):
        for g in (0.5, 1.0, 2.0):
            assert lptn_pdf(0.0, LptnDensity(g)) == pytest.approx(g / 2, rel=1e-15)

    def test_value_at_e_minus_one(self):
        assert lptn_pdf(E - 1, LptnDensity(1.0)) == pytest.approx(1.0 / (8.0 * E), rel=1e-14)
        assert lptn_pdf(E - 1, LptnDensity(1.0)) == pytest.approx(0.045985, abs=5e-7)

    def test_symmetry(self):
        d = LptnDensity(2.0)
        assert lptn_pdf(-5.0, d) == lptn_pdf(5.0, d)

    @pytest.mark.parametrize("z", [0.0, 0.3, 7.5, 1e3, 1e12, 1e100, 1e300])
    @pytest.mark.parametrize("g", [0.05, 1.0, 4.0])
    def test_logpdf_matches_mpmath(self, z, g):
        ref = float(mpmath.log(mp_pdf(z, g)))
        assert lptn_logpdf(z, LptnDensity(g)) == pytest.approx(ref, rel=1e-13, abs=1e-13)

    def test_exp_logpdf_equals_pdf(self):
        d = LptnDensity(1.3)
        z = np.concatenate([-np.geomspace(1e-8, 1e150, 200), np.geomspace(1e-8, 1e150, 200)])
        p = lptn_pdf(z, d)
        mask = p > 1e-300
        np.testing.assert_allclose(np.exp(lptn_logpdf(z, d))[mask], p[mask], rtol=1e-12)

    def test_no_overflow_at_1e300(self):
        assert np.isfinite(lptn_logpdf(1e300, LptnDensity(0.5)))

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            lptn_pdf(np.inf, LptnDensity(1.0))
        with pytest.raises(InvalidInputError):
            lptn_logpdf(np.nan, LptnDensity(1.0))

    @pytest.mark.parametrize("g", [0.0, -1.0, np.inf, np.nan])
    def test_bad_gamma(self, g):
        with pytest.raises(InvalidInputError):
            LptnDensity(g)

    @pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
    def test_integrates_to_one_over_float_range(self, g):
        # quadrature of the library pdf over |z| <= 1e300 (in s = log1p z)
        # against the closed-form antiderivative; the remainder is the
        # closed-form tail beyond the float range
        d = LptnDensity(g)
        smax = math.log1p(1e300)
        half, _ = integrate.quad(lambda s: math.exp(lptn_logpdf(math.expm1(s), d) + s), 0, smax,
                                 epsabs=1e-14, epsrel=1e-13, limit=500)
        assert 2 * half == pytest.approx(lptn_cdf(1e300, d) - lptn_cdf(-1e300, d), abs=1e-8)
        assert 2 * half + 2 * lptn_sf(1e300, d) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
    def test_integrates_to_one_mpmath(self, g):
        # arbitrary precision reaches beyond the float range
        mpmath.mp.dps = 30
        try:
            half = mpmath.quad(lambda s: mp_pdf(mpmath.expm1(s), g) * mpmath.exp(s), [0, 1, 10, 100, 1e4, mpmath.inf])
        finally:
            mpmath.mp.dps = 15
        assert float(2 * half) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
    def test_cdf_is_antiderivative(self, g):
        d = LptnDensity(g)
        for z in (0.1, 1.0, 30.0, 1e6):
            num, _ = integrate.quad(lambda s: lptn_pdf(math.expm1(s), d) * math.exp(s), 0, math.log1p(z),
                                    epsabs=1e-14, epsrel=1e-13)
            assert lptn_cdf(z, d) - 0.5 == pytest.approx(num, abs=1e-10)


class TestCdfQuantile:
    def test_cdf_examples(self):
        d = LptnDensity(1.0)
        assert lptn_cdf(0.0, d) == 0.5
        assert lptn_cdf(E - 1, d) == pytest.approx(0.75, abs=1e-15)
        assert lptn_cdf(1e300, d) > 0.99
        assert lptn_cdf(-(E - 1), d) == pytest.approx(0.25, abs=1e-15)

    def test_cdf_limits_and_monotone(self):
        d = LptnDensity(0.7)
        z = np.linspace(-1e6, 1e6, 10001)
        c = lptn_cdf(z, d)
        assert np.all(np.diff(c) >= 0)
        assert lptn_sf(1e300, d) < 0.01 and lptn_sf(1e300, d) > 0

    def test_quantile_examples(self):
        d = LptnDensity(1.0)
        assert lptn_quantile(0.5, d) == 0.0
        assert lptn_quantile(0.75, d) == pytest.approx(E - 1, rel=1e-14)
        assert lptn_quantile(0.25, d) == pytest.approx(-(E - 1), rel=1e-14)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
    def test_quantile_domain(self, u):
        with pytest.raises(InvalidInputError):
            lptn_quantile(u, LptnDensity(1.0))

    @pytest.mark.parametrize("g", [1.0, 2.0])
    def test_round_trip(self, g):
        d = LptnDensity(g)
        u = np.linspace(0.001, 0.999, 1000)
        assert np.max(np.abs(lptn_cdf(lptn_quantile(u, d), d) - u)) <= 1e-10

    def test_round_trip_small_gamma_finite_region(self):
        # for gamma = 0.5 the upper quantiles overflow float64; check where finite
        d = LptnDensity(0.5)
        u = np.linspace(0.001, 0.999, 1000)
        q = lptn_quantile(u, d)
        fin = np.isfinite(q)
        assert fin.sum() > 900
        assert np.max(np.abs(lptn_cdf(q[fin], d) - u[fin])) <= 1e-10
        # the log representation never overflows and inverts exactly
        lq = lptn_log1p_abs_quantile(u, d)
        tail = 0.5 * (1.0 + lq) ** (-d.gamma)
        back = np.where(u >= 0.5, 1.0 - tail, tail)
        assert np.max(np.abs(back - u)) <= 1e-10

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 1 - 1e-6), st.floats(0.8, 5.0))
    def test_round_trip_property(self, u, g):
        d = LptnDensity(g)
        q = lptn_quantile(u, d)
        if np.isfinite(q):
            assert abs(lptn_cdf(q, d) - u) <= 1e-10


class TestSampling:
    def test_ks_against_cdf(self):
        d = LptnDensity(1.0)
        x = lptn_sample(100_000, d, rng_seed=2024)
        assert ks_distance(x, lambda t: lptn_cdf(np.where(np.isfinite(t), t, np.sign(t) * 1e308), d)) < 0.01

    def test_ks_matches_scipy(self):
        d = LptnDensity(2.0)
        x = lptn_sample(5000, d, rng_seed=3)
        ours = ks_distance(x, lambda t: lptn_cdf(t, d))
        ref = stats.kstest(x, lambda t: lptn_cdf(t, d)).statistic
        assert ours == pytest.approx(ref, abs=1e-12)

    def test_single_draw(self):
        x = lptn_sample(1, LptnDensity(3.0), rng_seed=0)
        assert x.shape == (1,) and np.isfinite(x[0])

    def test_deterministic(self):
        d = LptnDensity(1.0)
        np.testing.assert_array_equal(lptn_sample(100, d, 9), lptn_sample(100, d, 9))

    def test_bad_n(self):
        with pytest.raises(InvalidInputError):
            lptn_sample(0, LptnDensity(1.0), 0)


class TestTailRatio:
    def test_identity(self):
        d = LptnDensity(1.0)
        for y in (-1e9, -3.0, 0.0, 2.5, 1e12):
            assert tail_ratio(y, 0.0, 1.0, d) == pytest.approx(1.0, abs=1e-15)

    def test_value_at_1e12(self):
        r = tail_ratio(1e12, 3.0, 2.0, LptnDensity(1.0))
        assert abs(r - 1) < 0.15
        # independent evaluation
        ref = mp_pdf((1e12 - 3) / 2, 1) / 2 / mp_pdf(1e12, 1)
        assert r == pytest.approx(float(ref), rel=1e-12)

    def test_monotone_approach(self):
        d = LptnDensity(1.0)
        err = [abs(tail_ratio(10.0 ** k, 3.0, 2.0, d) - 1) for k in range(4, 13)]
        assert all(b < a for a, b in zip(err, err[1:]))
        assert err[-1] < abs(tail_ratio(1e6, 3.0, 2.0, d) - 1)

    def test_sigma_positive(self):
        with pytest.raises(InvalidInputError):
            tail_ratio(1.0, 0.0, 0.0, LptnDensity(1.0))


class TestRatioBounds:
    def test_identity_case(self):
        rec = lemma_s1_bounds(10.0, 0.0, 1.0, LptnDensity(1.0))
        assert rec.passed
        assert all(c.applicable for c in rec.checks)

    def test_direct_case(self):
        g = 0.5
        rec = lemma_s1_bounds(100.0, 30.0, 5.0, LptnDensity(g))
        assert rec.passed
        by = {c.name: c for c in rec.checks}
        # part (iii) right-hand side by hand
        assert by["iii"].rhs == pytest.approx((g / 2) / 5.0 / (1 + 70.0 / 5.0), rel=1e-13)
        # part (iv) bound by hand: (g / 2^(3+g)) / (|y| (log|y|)^(1+g))
        assert by["iv"].lhs == pytest.approx(g / 2 ** (3 + g) / (100 * math.log(100) ** (1 + g)), rel=1e-12)

    def test_inapplicable_parts_skipped(self):
        rec = lemma_s1_bounds(0.5, 0.4, 1.0, LptnDensity(1.0))
        by = {c.name: c for c in rec.checks}
        assert not by["ii"].applicable and by["ii"].passed is None
        assert not by["iv"].applicable
        assert rec.passed

    def test_fuzz_zero_failures(self):
        out = lemma_s1_fuzz(100_000, seed=0)
        assert out["failures"] == 0
        for part in ("ii", "iii", "iv"):
            assert out["parts"][part]["applicable"] > 1000

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(1e-3, 1e3), st.floats(0.05, 5.0))
    def test_inequalities_natural_scale(self, y, mu, sigma, g):
        # plain-float evaluation of the three inequalities, independent of the log-space code
        f = lambda z: (g / 2) / (1 + abs(z)) / (1 + math.log1p(abs(z))) ** (1 + g)
        scaled = f((y - mu) / sigma) / sigma
        slack = 1 + 1e-9
        assert scaled <= (g / 2) / sigma / (1 + abs(y - mu) / sigma) * slack
        if abs(y - mu) >= abs(y) / 2 and abs(y) >= 1:
            bound = 4 * (1 + math.log(3)) ** (1 + g) * (1 + math.log1p(sigma)) ** (1 + g)
            assert scaled / f(y) <= bound * slack
        if abs(y) >= 2 * E:
            assert f(y) * slack >= (g / 2 ** (3 + g)) / (abs(y) * math.log(abs(y)) ** (1 + g))


class TestCoefficientPrior:
    def test_scalar_example(self):
        cp = CoefficientPrior.per_coordinate([1.0])
        assert coefficient_prior_pdf([0.0], 1.0, cp) == pytest.approx(0.5)

    def test_two_dim_example(self):
        cp = CoefficientPrior.per_coordinate([1.0, 1.0])
        assert coefficient_prior_pdf([0.0, 0.0], 2.0, cp) == pytest.approx(1.0 / 16.0)

    def test_integrates_per_coordinate(self):
        cp = CoefficientPrior.per_coordinate([2.0])
        val, _ = integrate.quad(lambda b: coefficient_prior_pdf([b], 3.0, cp), -np.inf, np.inf,
                                epsabs=1e-12, epsrel=1e-12, points=None, limit=400)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_integrates_multivariate_2d(self):
        cp = CoefficientPrior.multivariate(3.0, 2)
        # polar coordinates with r = tan(t) to reach infinity
        f = lambda t: 2 * math.pi * math.tan(t) / math.cos(t) ** 2 * coefficient_prior_pdf(
            [math.tan(t), 0.0], 1.5, cp)
        val, _ = integrate.quad(f, 0, math.pi / 2, epsabs=1e-12, limit=400)
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_integrates_per_coordinate_3d(self):
        cp = CoefficientPrior.per_coordinate([0.5, 1.0, 3.0])
        # factorises, so the 3-D integral is the product of 1-D integrals
        tot = 1.0
        for k, nu in enumerate(cp.nu):
            one = CoefficientPrior.per_coordinate([nu])
            v, _ = integrate.quad(lambda b: coefficient_prior_pdf([b], 0.7, one), -np.inf, np.inf,
                                  epsabs=1e-12, limit=400)
            tot *= v
        assert tot == pytest.approx(1.0, abs=1e-6)
        b = np.array([0.3, -1.2, 4.0])
        prod = np.prod([coefficient_prior_pdf([b[k]], 0.7, CoefficientPrior.per_coordinate([cp.nu[k]]))
                        for k in range(3)])
        assert coefficient_prior_pdf(b, 0.7, cp) == pytest.approx(prod, rel=1e-13)

    def test_multivariate_matches_scipy(self):
        cp = CoefficientPrior.multivariate(2.5, 2)
        b = np.array([0.4, -2.0])
        ref = stats.multivariate_t(loc=[0, 0], shape=np.eye(2) * 1.7 ** 2, df=2.5).pdf(b)
        assert coefficient_prior_pdf(b, 1.7, cp) == pytest.approx(ref, rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            coefficient_prior_pdf([0.0, 1.0], 1.0, CoefficientPrior.per_coordinate([1.0]))

    @pytest.mark.parametrize("nus", [[0.0], [-1.0], [1.0, np.nan]])
    def test_invalid_nu(self, nus):
        with pytest.raises(InvalidInputError):
            CoefficientPrior.per_coordinate(nus)


class TestPriorBound:
    def test_per_coordinate_exact(self):
        cert = verify_prior_bound(CoefficientPrior.per_coordinate([1.0, 2.0]), search_grid=20_000)
        assert cert.certified and cert.exact
        assert cert.M == pytest.approx(0.5)
        assert cert.nu_star == 1.0

    def test_multivariate_2d(self):
        cert = verify_prior_bound(CoefficientPrior.multivariate(2.0, 2), search_grid=50_000)
        assert cert.certified
        assert cert.nu_star == pytest.approx(1.0)
        assert 0 < cert.M < np.inf

    def test_multivariate_1d_is_cauchy(self):
        cp = CoefficientPrior.multivariate(1.0, 1)
        cert = verify_prior_bound(cp, search_grid=20_000)
        assert cert.certified and cert.nu_star == 1.0
        # Cauchy 1/(pi(1+b^2)) against (1+|b|)^-2: ratio (1+|b|)^2/(pi(1+b^2)) peaks at |b| = 1
        assert cert.M == pytest.approx(2.0 / math.pi, rel=1e-6)
        assert coefficient_prior_pdf([0.0], 1.0, cp) == pytest.approx(stats.cauchy.pdf(0.0), rel=1e-14)


class TestScalePrior:
    def test_half_cauchy_rules(self):
        sp = ScalePrior.half_cauchy(1.0)
        ok = scale_moment_check(sp, 0.5)
        bad = scale_moment_check(sp, 1.5)
        assert ok.finite and ok.agree
        assert not bad.finite and bad.agree

    def test_log_normal_always_finite(self):
        chk = scale_moment_check(ScalePrior.log_normal(0.0, 1.0), 3.0)
        assert chk.finite and chk.agree

    @pytest.mark.parametrize("rho,finite", [(0.5, True), (1.9, True), (2.5, False)])
    def test_inverse_gamma(self, rho, finite):
        chk = scale_moment_check(ScalePrior.inverse_gamma(2.0, 1.0), rho)
        assert chk.finite is finite
        assert chk.agree

    @pytest.mark.parametrize("sp", [ScalePrior.half_cauchy(2.0), ScalePrior.inverse_gamma(3.0, 2.0),
                                    ScalePrior.log_normal(0.5, 0.8)])
    def test_proper(self, sp):
        val, _ = integrate.quad(lambda u: math.exp(scale_prior_logpdf(math.exp(u), sp) + u), -50, 50,
                                limit=400, epsabs=1e-12)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_matches_scipy(self):
        s = np.array([0.1, 1.0, 7.0])
        np.testing.assert_allclose(np.exp(scale_prior_logpdf(s, ScalePrior.half_cauchy(2.0))),
                                   stats.halfcauchy(scale=2.0).pdf(s), rtol=1e-13)
        np.testing.assert_allclose(np.exp(scale_prior_logpdf(s, ScalePrior.inverse_gamma(3.0, 2.0))),
                                   stats.invgamma(3.0, scale=2.0).pdf(s), rtol=1e-12)
        np.testing.assert_allclose(np.exp(scale_prior_logpdf(s, ScalePrior.log_normal(0.5, 0.8))),
                                   stats.lognorm(0.8, scale=math.exp(0.5)).pdf(s), rtol=1e-12)

    @pytest.mark.parametrize("fam,params", [("half_cauchy", (0.0,)), ("inverse_gamma", (1.0,)),
                                            ("log_normal", (0.0, -1.0)), ("gamma", (1.0,))])
    def test_invalid(self, fam, params):
        with pytest.raises(InvalidInputError):
            ScalePrior(fam, params)
