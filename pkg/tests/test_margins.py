import math
import warnings

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from tailmst.margins import (ArmaGarchParams, ConvergenceError, MarginalFit, arma_garch_loglik,
                             filter_with_params, fit_arma_garch, garch_filter, marginal_table,
                             pit_uniformity_check, skewt_cdf, skewt_logpdf, skewt_pdf,
                             skewt_quantile, skewt_rvs)
from tailmst.simulate import simulate_arma_garch

TRUE = ArmaGarchParams(mu0=0.01, ar=0.2, ma=-0.1, omega=0.05, alpha=0.10, beta=0.85, nu=7.0, xi=0.9)


def numeric_cdf(x, nu, xi):
    """Distribution function by integrating the density (independent of skewt_cdf)."""
    val, _ = integrate.quad(skewt_pdf, -np.inf, x, args=(nu, xi), epsabs=1e-13, epsrel=1e-13)
    return val


class TestSkewT:
    def test_median_of_symmetric_case(self):
        assert skewt_cdf(0.0, 5.0, 1.0) == pytest.approx(0.5, abs=1e-15)

    def test_upper_limit(self):
        assert skewt_cdf(1e12, 5.0, 0.7) == pytest.approx(1.0, abs=1e-12)
        assert skewt_cdf(np.inf, 5.0, 1.3) == 1.0

    def test_skew_moves_mass_right(self):
        skewed, symmetric = skewt_cdf(-1.0, 5.0, 1.5), skewt_cdf(-1.0, 5.0, 1.0)
        assert skewed < symmetric
        assert skewed == pytest.approx(numeric_cdf(-1.0, 5.0, 1.5), abs=1e-10)
        assert symmetric == pytest.approx(numeric_cdf(-1.0, 5.0, 1.0), abs=1e-10)

    @pytest.mark.parametrize("nu, xi", [(3.5, 0.8), (5.0, 1.0), (8.0, 1.3), (30.0, 0.6)])
    def test_standardized(self, nu, xi):
        mass = integrate.quad(skewt_pdf, -np.inf, np.inf, args=(nu, xi))[0]
        mean = integrate.quad(lambda x: x * skewt_pdf(x, nu, xi), -np.inf, np.inf)[0]
        second = integrate.quad(lambda x: x * x * skewt_pdf(x, nu, xi), -np.inf, np.inf,
                                limit=200)[0]
        assert mass == pytest.approx(1.0, abs=1e-9)
        assert mean == pytest.approx(0.0, abs=1e-8)
        assert second == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("x", [-3.0, -0.4, 0.0, 0.2, 2.5])
    def test_cdf_matches_integrated_density(self, x):
        assert skewt_cdf(x, 4.5, 0.75) == pytest.approx(numeric_cdf(x, 4.5, 0.75), abs=1e-10)

    def test_logpdf_is_log_of_pdf(self):
        x = np.linspace(-4, 4, 9)
        np.testing.assert_allclose(np.exp(skewt_logpdf(x, 6.0, 1.2)), skewt_pdf(x, 6.0, 1.2))

    def test_quantile_examples(self):
        assert skewt_quantile(0.5, 6.0, 1.0) == pytest.approx(0.0, abs=1e-14)
        assert skewt_cdf(skewt_quantile(0.05, 4.0, 0.8), 4.0, 0.8) == pytest.approx(0.05, abs=1e-10)
        q = skewt_quantile(0.01, 4.0, 1.0)
        oracle = optimize.brentq(lambda x: numeric_cdf(x, 4.0, 1.0) - 0.01, -20, 0, xtol=1e-12)
        assert q == pytest.approx(oracle, abs=1e-8)
        assert q < 0 and abs(q) > 2.326

    @pytest.mark.parametrize("nu, xi", [(2.5, 0.5), (4.0, 0.8), (10.0, 1.0), (50.0, 2.0)])
    def test_inverse_identities(self, nu, xi):
        u = np.linspace(0.005, 0.995, 100)
        np.testing.assert_allclose(skewt_cdf(skewt_quantile(u, nu, xi), nu, xi), u, atol=1e-10)
        x = np.linspace(-5, 5, 100)
        np.testing.assert_allclose(skewt_quantile(skewt_cdf(x, nu, xi), nu, xi), x, atol=1e-8)

    def test_cdf_strictly_increasing(self):
        x = np.linspace(-8, 8, 2001)
        assert (np.diff(skewt_cdf(x, 3.0, 1.4)) > 0).all()

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, np.nan])
    def test_quantile_domain(self, u):
        with pytest.raises(ValueError):
            skewt_quantile(u, 5.0, 1.0)

    @pytest.mark.parametrize("nu, xi", [(2.0, 1.0), (5.0, 0.0), (np.inf, 1.0)])
    def test_shape_domain(self, nu, xi):
        with pytest.raises(ValueError):
            skewt_cdf(0.0, nu, xi)

    def test_sampler_moments(self, rng):
        x = skewt_rvs(400_000, 8.0, 0.85, rng)
        assert x.mean() == pytest.approx(0.0, abs=0.01)
        assert x.var() == pytest.approx(1.0, abs=0.02)
        assert stats.kstest(x, lambda v: skewt_cdf(v, 8.0, 0.85)).pvalue > 0.001


class TestFilter:
    def test_constant_variance_without_arch(self, rng):
        p = ArmaGarchParams(0.0, 0.3, 0.2, 0.5, 0.0, 0.0, 6.0, 1.0)
        _, h, _ = garch_filter(p, rng.normal(size=50))
        np.testing.assert_allclose(h, 0.5)

    def test_zero_mean(self, rng):
        r = rng.normal(size=50)
        p = ArmaGarchParams(0.0, 0.0, 0.0, 0.1, 0.1, 0.8, 6.0, 1.0)
        mu, h, eps = garch_filter(p, r)
        np.testing.assert_array_equal(mu, 0.0)
        np.testing.assert_allclose(eps, r / np.sqrt(h))

    def test_hand_recursion(self):
        p = ArmaGarchParams(0.0, 0.0, 0.0, 0.1, 0.1, 0.8, 6.0, 1.0)
        _, h, _ = garch_filter(p, np.array([2.0, 0.0, 1.0]), presample=1.0)
        assert h[0] == 1.0
        assert h[1] == pytest.approx(1.3, abs=1e-15)
        assert h[2] == pytest.approx(0.1 + 0.8 * 1.3, abs=1e-15)

    def test_residual_identity(self, rng):
        r = simulate_arma_garch(TRUE, 300, rng)
        mu, h, eps = garch_filter(TRUE, r)
        assert (h > 0).all()
        np.testing.assert_allclose(eps, (r - mu) / np.sqrt(h), rtol=1e-12)

    def test_presample_policies(self, rng):
        r = rng.normal(size=100)
        assert garch_filter(TRUE, r)[1][0] == pytest.approx(TRUE.unconditional_variance)
        assert garch_filter(TRUE, r, "sample")[1][0] == pytest.approx(np.var(r))
        with pytest.raises(ValueError):
            garch_filter(TRUE, r, presample=-1.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            garch_filter(ArmaGarchParams(0, 0, 0, 0.1, 0.5, 0.5, 6, 1), np.ones(10))
        with pytest.raises(ValueError):
            garch_filter(TRUE, np.array([]))


class TestLikelihood:
    def test_equals_sum_of_log_densities(self, rng):
        r = simulate_arma_garch(TRUE, 200, rng)
        _, h, eps = garch_filter(TRUE, r)
        manual = np.sum(skewt_logpdf(eps, TRUE.nu, TRUE.xi) - 0.5 * np.log(h))
        assert arma_garch_loglik(TRUE, r) == pytest.approx(manual, rel=1e-12)

    @pytest.mark.parametrize("presample", ["unconditional", "sample"])
    def test_gradient_central_differences(self, rng, presample):
        r = simulate_arma_garch(TRUE, 500, rng)
        _, g = arma_garch_loglik(TRUE, r, presample, grad=True)
        x0 = TRUE.as_array()
        for k in range(8):
            step = 1e-6 * max(abs(x0[k]), 1e-2)
            up, dn = x0.copy(), x0.copy()
            up[k] += step
            dn[k] -= step
            fd = (arma_garch_loglik(ArmaGarchParams(*up), r, presample)
                  - arma_garch_loglik(ArmaGarchParams(*dn), r, presample)) / (2 * step)
            assert g[k] == pytest.approx(fd, rel=1e-4, abs=1e-6), k


class TestFit:
    def test_recovers_parameters(self):
        r = simulate_arma_garch(TRUE, 2000, np.random.default_rng(0))
        fit = fit_arma_garch(r)
        assert fit.converged
        assert abs(fit.params.alpha - TRUE.alpha) <= 0.08
        assert abs(fit.params.beta - TRUE.beta) <= 0.08
        assert abs(fit.params.persistence - TRUE.persistence) <= 0.05
        assert fit.loglik == pytest.approx(arma_garch_loglik(fit.params, r), abs=1e-8)
        assert fit.nobs == 2000

    def test_white_noise_has_low_persistence(self):
        x = skewt_rvs(2000, 8.0, 1.0, np.random.default_rng(0)) * 0.02
        fit = fit_arma_garch(x)
        assert fit.params.persistence < 0.2

    def test_fit_invariants(self, rng):
        r = simulate_arma_garch(TRUE, 400, rng)
        fit = fit_arma_garch(r)
        assert fit.params.persistence < 1
        assert ((fit.pit > 0) & (fit.pit < 1)).all()
        assert (fit.cond_var > 0).all()
        np.testing.assert_allclose(fit.std_resid, (r - fit.cond_mean) / np.sqrt(fit.cond_var))

    def test_is_deterministic(self, rng):
        r = simulate_arma_garch(TRUE, 300, rng)
        a, b = fit_arma_garch(r), fit_arma_garch(r)
        np.testing.assert_array_equal(a.params.as_array(), b.params.as_array())

    def test_constant_series(self):
        with pytest.raises(ValueError, match="variance"):
            fit_arma_garch(np.full(100, 0.01))

    def test_too_short(self, rng):
        with pytest.raises(ValueError):
            fit_arma_garch(rng.normal(size=59))

    def test_non_convergence_is_reported(self, rng):
        r = simulate_arma_garch(TRUE, 300, rng)
        with pytest.raises(ConvergenceError):
            fit_arma_garch(r, maxiter=1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_arma_garch(r, maxiter=1, strict=False)
        assert not fit.converged

    def test_marginal_table(self, rng):
        r = simulate_arma_garch(TRUE, 200, rng)
        table = marginal_table({"X": filter_with_params(TRUE, r)})
        assert list(table["ticker"]) == ["X"]
        assert {"alpha", "beta", "loglik", "ks_stat"} <= set(table.columns)


class TestPitUniformity:
    def test_degenerate(self):
        assert pit_uniformity_check(np.full(100, 0.5)) == pytest.approx(0.5)

    def test_exact_grid(self):
        t = 400
        grid = (np.arange(1, t + 1) - 0.5) / t
        assert pit_uniformity_check(grid) == pytest.approx(0.5 / t)

    def test_accepts_fit(self, rng):
        fit = filter_with_params(TRUE, simulate_arma_garch(TRUE, 200, rng))
        assert isinstance(fit, MarginalFit)
        assert pit_uniformity_check(fit) == fit.ks_stat

    def test_correctly_specified_model_passes(self):
        t, passed = 2000, 0
        for seed in range(50):
            fit = fit_arma_garch(simulate_arma_garch(TRUE, t, np.random.default_rng(100 + seed)))
            passed += pit_uniformity_check(fit) < 1.36 / math.sqrt(t)
        assert passed >= 45
