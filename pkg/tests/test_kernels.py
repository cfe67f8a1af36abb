"""Scalar primitives: frozen high-precision values, quadrature oracles,
distributional checks on the truncated-normal sampler."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from sparseprobit import kernels
from sparseprobit.errors import DomainError
from sparseprobit.kernels import TruncationSide

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# Frozen from 50-digit arithmetic (mpmath), independent of scipy.
LOG_PHI_M10 = -53.231285150512470578
LAMBDA_M8 = 8.1213681122361126807
TMEAN_1P5_POS = 1.6387897504588507562
TMEAN_M8_POS = 0.12136811223611268065
E2_M1_POS = 0.47486472383901879091
RESID_M2_POS = 5.7464310656456817346


def trunc_density(z, m, side):
    k = side.k
    norm = stats.norm.cdf(k * m)
    pdf = stats.norm.pdf(z - m) / norm
    return np.where(k * np.asarray(z) > 0, pdf, 0.0)


def quad_moment(m, side, power, center=0.0):
    k = side.k
    lo, hi = (0.0, np.inf) if k > 0 else (-np.inf, 0.0)
    val, _ = integrate.quad(lambda z: (z - center) ** power * trunc_density(z, m, side),
                            lo, hi, limit=300)
    return val


class TestLogStdNormalCdf:
    def test_at_zero(self):
        assert kernels.log_std_normal_cdf(0.0) == pytest.approx(math.log(0.5), rel=1e-15)

    def test_upper_limit(self):
        assert abs(kernels.log_std_normal_cdf(40.0)) < 1e-15

    def test_deep_tail_frozen_value(self):
        assert kernels.log_std_normal_cdf(-10.0) == pytest.approx(LOG_PHI_M10, rel=1e-12)

    def test_monotone_and_finite_down_to_minus_38(self):
        grid = np.linspace(-38, 8, 2000)
        vals = kernels.log_std_normal_cdf(grid)
        assert np.all(np.isfinite(vals))
        assert np.all(np.diff(vals) >= 0)

    def test_rejects_nan(self):
        with pytest.raises(DomainError):
            kernels.log_std_normal_cdf(float("nan"))


class TestInverseMills:
    def test_at_zero(self):
        assert kernels.inverse_mills(0.0) == pytest.approx(SQRT_2_OVER_PI, rel=1e-14)

    def test_right_tail_equals_density(self):
        assert kernels.inverse_mills(30.0) == pytest.approx(stats.norm.pdf(30.0), rel=1e-12)

    def test_frozen_left_tail_value(self):
        assert kernels.inverse_mills(-8.0) == pytest.approx(LAMBDA_M8, rel=1e-10)

    def test_strictly_decreasing(self):
        grid = np.linspace(-30, 30, 3001)
        vals = kernels.inverse_mills(grid)
        assert np.all(np.diff(vals) < 0)

    def test_extreme_negative_asymptote(self):
        # lambda(t) ~ -t for very negative t, and must stay finite.
        for t in (-50.0, -100.0, -300.0):
            lam = kernels.inverse_mills(t)
            assert np.isfinite(lam)
            assert lam == pytest.approx(-t, rel=1e-2)
            assert lam > -t  # lambda(t) > -t always

    def test_rejects_inf(self):
        with pytest.raises(DomainError):
            kernels.inverse_mills(np.inf)


class TestTruncatedMoments:
    def test_mean_at_zero_both_sides(self):
        assert kernels.trunc_norm_mean(0.0, TruncationSide.POSITIVE) == \
            pytest.approx(SQRT_2_OVER_PI, rel=1e-14)
        assert kernels.trunc_norm_mean(0.0, TruncationSide.NON_POSITIVE) == \
            pytest.approx(-SQRT_2_OVER_PI, rel=1e-14)

    def test_mean_frozen_values(self):
        assert kernels.trunc_norm_mean(1.5, TruncationSide.POSITIVE) == \
            pytest.approx(TMEAN_1P5_POS, rel=1e-12)
        assert kernels.trunc_norm_mean(-8.0, TruncationSide.POSITIVE) == \
            pytest.approx(TMEAN_M8_POS, rel=1e-10)

    def test_second_moment_at_zero(self):
        z_bar = kernels.trunc_norm_mean(0.0, TruncationSide.POSITIVE)
        assert kernels.trunc_norm_second_moment(0.0, z_bar) == pytest.approx(1.0)

    def test_second_moment_direct_formula(self):
        z_bar = kernels.trunc_norm_mean(2.0, TruncationSide.POSITIVE)
        assert kernels.trunc_norm_second_moment(2.0, z_bar) == \
            pytest.approx(1.0 + 2.0 * z_bar, rel=1e-15)

    def test_second_moment_quadrature_frozen(self):
        z_bar = kernels.trunc_norm_mean(-1.0, TruncationSide.POSITIVE)
        assert kernels.trunc_norm_second_moment(-1.0, z_bar) == \
            pytest.approx(E2_M1_POS, rel=1e-12)

    def test_residual_var_at_zero(self):
        assert kernels.trunc_norm_residual_var(0.0, TruncationSide.POSITIVE) == \
            pytest.approx(1.0, rel=1e-14)

    def test_residual_var_formula(self):
        lam3 = kernels.inverse_mills(3.0)
        assert kernels.trunc_norm_residual_var(3.0, TruncationSide.POSITIVE) == \
            pytest.approx(1.0 - 3.0 * lam3, rel=1e-13)

    def test_residual_var_quadrature_frozen(self):
        assert kernels.trunc_norm_residual_var(-2.0, TruncationSide.POSITIVE) == \
            pytest.approx(RESID_M2_POS, rel=1e-12)

    @pytest.mark.parametrize("side", list(TruncationSide))
    def test_mean_matches_quadrature_on_grid(self, side):
        for m in np.linspace(-8, 8, 33):
            expected = quad_moment(m, side, 1)
            assert kernels.trunc_norm_mean(m, side) == pytest.approx(expected, abs=1e-8)

    @pytest.mark.parametrize("side", list(TruncationSide))
    def test_second_moment_identity_on_grid(self, side):
        for m in np.linspace(-6, 6, 25):
            z_bar = kernels.trunc_norm_mean(m, side)
            expected = quad_moment(m, side, 2)
            assert kernels.trunc_norm_second_moment(m, z_bar) == \
                pytest.approx(expected, abs=1e-8)

    def test_mean_sign_matches_side(self):
        for m in np.linspace(-20, 20, 81):
            assert kernels.trunc_norm_mean(m, TruncationSide.POSITIVE) > 0
            assert kernels.trunc_norm_mean(m, TruncationSide.NON_POSITIVE) < 0


class TestSampler:
    def test_mean_at_zero(self):
        rng = np.random.default_rng(0)
        draws = kernels.sample_trunc_norm(rng, np.zeros(10**6), TruncationSide.POSITIVE)
        se = draws.std() / 1000.0
        assert abs(draws.mean() - SQRT_2_OVER_PI) < 4 * se

    def test_deep_tail_positive(self):
        rng = np.random.default_rng(1)
        draws = kernels.sample_trunc_norm(rng, np.full(10**5, -8.0),
                                          TruncationSide.POSITIVE)
        assert np.all(draws > 0)
        se = draws.std() / math.sqrt(10**5)
        assert abs(draws.mean() - TMEAN_M8_POS) < 4 * se

    def test_non_positive_side_sign(self):
        rng = np.random.default_rng(2)
        draws = kernels.sample_trunc_norm(rng, np.full(10**4, 6.0),
                                          TruncationSide.NON_POSITIVE)
        assert np.all(draws <= 0)

    def test_extreme_locations_no_hang_no_saturation(self):
        rng = np.random.default_rng(3)
        for m in (-30.0, 30.0):
            d = kernels.sample_trunc_norm(rng, np.full(2000, m), TruncationSide.POSITIVE)
            assert np.all(d > 0)
            assert np.all(np.isfinite(d))
            assert d.std() > 0  # not glued to the boundary

    def test_seed_determinism(self):
        a = kernels.sample_trunc_norm(np.random.default_rng(42), np.linspace(-9, 9, 100),
                                      TruncationSide.POSITIVE)
        b = kernels.sample_trunc_norm(np.random.default_rng(42), np.linspace(-9, 9, 100),
                                      TruncationSide.POSITIVE)
        np.testing.assert_array_equal(a, b)

    def test_scalar_interface(self):
        rng = np.random.default_rng(5)
        val = kernels.sample_trunc_norm(rng, 1.3, TruncationSide.POSITIVE)
        assert isinstance(val, float) and val > 0

    @pytest.mark.parametrize("m", [-1.5, 0.0, 2.0, -7.0])
    def test_goodness_of_fit(self, m):
        # DKW-style sup-distance bound at the 1e-3 level.
        n = 10**6
        rng = np.random.default_rng(int(abs(m) * 100) + 7)
        draws = np.sort(kernels.sample_trunc_norm(rng, np.full(n, m),
                                                  TruncationSide.POSITIVE))
        cdf = (stats.norm.cdf(draws - m) - stats.norm.cdf(-m)) / stats.norm.cdf(m)
        emp_hi = np.arange(1, n + 1) / n
        emp_lo = np.arange(0, n) / n
        sup = max(np.max(np.abs(cdf - emp_hi)), np.max(np.abs(cdf - emp_lo)))
        crit = math.sqrt(math.log(2.0 / 1e-3) / (2.0 * n))
        assert sup < crit

    def test_rejects_nonfinite_location(self):
        with pytest.raises(DomainError):
            kernels.sample_trunc_norm(np.random.default_rng(0), np.nan,
                                      TruncationSide.POSITIVE)


class TestLogitExpit:
    def test_expit_zero(self):
        assert kernels.expit(0.0) == 0.5

    def test_logit_half(self):
        assert kernels.logit(0.5) == 0.0

    def test_inverse_pair(self):
        assert kernels.expit(kernels.logit(0.2)) == pytest.approx(0.2, abs=1e-14)

    def test_saturation(self):
        assert kernels.expit(40.0) == pytest.approx(1.0, abs=1e-15)
        assert kernels.expit(-40.0) == pytest.approx(0.0, abs=1e-17)
        assert kernels.expit(-40.0) > 0.0

    def test_logit_domain(self):
        for bad in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(DomainError):
                kernels.logit(bad)

    @given(st.floats(min_value=1e-12, max_value=1 - 1e-12))
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_property(self, p):
        assert kernels.expit(kernels.logit(p)) == pytest.approx(p, rel=1e-9)


class TestTruncationSide:
    def test_sign_bijection(self):
        assert TruncationSide.from_outcome(1).k == 1
        assert TruncationSide.from_outcome(0).k == -1
        assert TruncationSide.from_outcome(1) is TruncationSide.POSITIVE
