import numpy as np
import pytest

from hfsv.errors import DomainError, GridError
from hfsv.model import ContinuousParams, InitialConditions, discretize
from hfsv.simulate import (
    MicrostructureSpec,
    apply_microstructure,
    simulate_path,
    subsample,
    true_integrated_variance,
)

P_BENCH = ContinuousParams(
    mu_hat=1.7e-12, theta_hat=5.6e-7, alpha_hat=-13.0, tau_sq_hat=1.3e-7, rho=0.0, xi_sq=2.5e-7
)
INIT = InitialConditions(eta=np.log(100.0), kappa_sq=1e-4)
DAY_MS = 23_400_000


def ar1_mean_se(theta_d, stat_var, n):
    # standard error of the sample mean of a stationary AR(1)
    return np.sqrt(stat_var * (1.0 + theta_d) / ((1.0 - theta_d) * n))


class TestSimulatePath:
    def test_deterministic_given_seed(self):
        a = simulate_path(P_BENCH, 1000, 3_600_000, INIT, seed=5)
        b = simulate_path(P_BENCH, 1000, 3_600_000, INIT, seed=5)
        assert np.array_equal(a.log_S, b.log_S)
        assert np.array_equal(a.log_sigma, b.log_sigma)
        assert np.array_equal(a.Y, b.Y)
        c = simulate_path(P_BENCH, 1000, 3_600_000, INIT, seed=6)
        assert not np.array_equal(a.log_S, c.log_S)

    def test_degenerate_volatility(self):
        # vanishing vol-of-vol pins the log volatility at its level and the
        # increments become iid normal with variance exp(2 alpha_d)
        p = ContinuousParams(
            mu_hat=0.0, theta_hat=5.6e-7, alpha_hat=-13.0, tau_sq_hat=1e-30, rho=0.0
        )
        path = simulate_path(p, 1000, 100_000_000, INIT, seed=11)
        d = discretize(p, 1000)
        assert np.max(np.abs(path.log_sigma - d.alpha_d)) < 1e-10
        incr = np.diff(path.log_S)
        assert np.var(incr) == pytest.approx(np.exp(2.0 * d.alpha_d), rel=0.05)

    def test_leverage_correlation_recovered(self):
        # reconstruct the generator's own innovation pairs and correlate them
        p = ContinuousParams(
            mu_hat=0.0, theta_hat=5.6e-7, alpha_hat=-13.0, tau_sq_hat=1.3e-7, rho=0.9
        )
        path = simulate_path(p, 1000, 10**9, INIT, seed=3)
        d = discretize(p, 1000)
        h = path.log_sigma
        e1 = (np.diff(path.log_S) - d.mu_d) / np.exp(h[1:])
        e2 = (h[2:] - d.alpha_d - d.theta_d * (h[1:-1] - d.alpha_d)) / d.tau_d
        corr = np.corrcoef(e1[:-1], e2)[0, 1]
        assert corr == pytest.approx(0.9, abs=0.02)

    def test_level_matches_stationary_mean_over_one_day(self):
        path = simulate_path(P_BENCH, 1000, DAY_MS, INIT, seed=12)
        d = discretize(P_BENCH, 1000)
        se = ar1_mean_se(d.theta_d, d.stationary_var, path.n_points - 1)
        assert abs(path.log_sigma[1:].mean() - d.alpha_d) < 3.0 * se

    def test_stationarity_moments_long_run(self):
        path = simulate_path(P_BENCH, 1000, 10**9, INIT, seed=21)
        d = discretize(P_BENCH, 1000)
        n = path.n_points - 1
        h = path.log_sigma[1:]
        se_mean = ar1_mean_se(d.theta_d, d.stationary_var, n)
        assert abs(h.mean() - d.alpha_d) < 3.0 * se_mean
        n_eff = n * (1.0 - d.theta_d) / (1.0 + d.theta_d)
        se_var = d.stationary_var * np.sqrt(2.0 / n_eff)
        assert abs(h.var() - d.stationary_var) < 3.0 * se_var

    def test_horizon_shorter_than_step_rejected(self):
        with pytest.raises(DomainError):
            simulate_path(P_BENCH, 1000, 500, INIT, seed=0)


class TestMicrostructure:
    def test_none_mode_is_identity(self):
        path = simulate_path(P_BENCH, 1000, 3_600_000, INIT, seed=1)
        out = apply_microstructure(path, MicrostructureSpec(mode="none"), seed=2)
        assert np.array_equal(out.Y, out.log_S)

    def test_bid_ask_noise_variance(self):
        # price-level noise = uniform spread bounce + tick rounding; their
        # variances add: spread^2/12 + tick^2/12
        path = simulate_path(P_BENCH, 1000, DAY_MS, INIT, seed=7)
        spec = MicrostructureSpec(mode="bid_ask", spread=0.1, tick=0.01)
        noisy = apply_microstructure(path, spec, seed=8)
        price_noise = np.exp(noisy.Y) - np.exp(noisy.log_S)
        expected = (0.1**2 + 0.01**2) / 12.0
        assert np.var(price_noise) == pytest.approx(expected, rel=0.05)
        # the a-priori noise-scale rule is deliberately conservative: it uses
        # the full spread over twice the price, three times the actual var
        assert spec.implied_xi_sq(100.0) == pytest.approx(2.5e-7, rel=1e-12)

    def test_log_noise_variance_scale(self):
        path = simulate_path(P_BENCH, 1000, DAY_MS, INIT, seed=7)
        spec = MicrostructureSpec(mode="bid_ask", spread=0.1, tick=0.01)
        noisy = apply_microstructure(path, spec, seed=8)
        zeta = noisy.Y - noisy.log_S
        expected = ((0.1**2 + 0.01**2) / 12.0) * np.mean(np.exp(-2.0 * noisy.log_S))
        assert np.var(zeta) == pytest.approx(expected, rel=0.05)

    def test_rounding_only_noise_on_grid_price_is_zero(self):
        p = ContinuousParams(
            mu_hat=0.0, theta_hat=5.6e-7, alpha_hat=-40.0, tau_sq_hat=1e-30, rho=0.0
        )
        anchored = InitialConditions(eta=np.log(100.0), kappa_sq=1e-30)
        path = simulate_path(p, 1000, 100_000, anchored, seed=4)
        # price is 100.000... to within 1e-9, already on the cent grid
        out = apply_microstructure(
            path, MicrostructureSpec(mode="bid_ask", spread=0.0, tick=0.01), seed=5
        )
        assert np.max(np.abs(out.Y - out.log_S)) < 1e-9

    def test_gaussian_mode_variance(self):
        path = simulate_path(P_BENCH, 1000, DAY_MS, INIT, seed=9)
        out = apply_microstructure(path, MicrostructureSpec(mode="gaussian", xi_sq=2.5e-7), seed=10)
        assert np.var(out.Y - out.log_S) == pytest.approx(2.5e-7, rel=0.05)

    def test_double_contamination_rejected(self):
        path = simulate_path(P_BENCH, 1000, 3_600_000, INIT, seed=1)
        noisy = apply_microstructure(path, MicrostructureSpec(mode="gaussian", xi_sq=1e-7), seed=2)
        with pytest.raises(DomainError):
            apply_microstructure(noisy, MicrostructureSpec(mode="none"), seed=3)

    def test_noise_variance_invariant_under_subsampling(self):
        path = simulate_path(P_BENCH, 1000, DAY_MS, INIT, seed=13)
        noisy = apply_microstructure(
            path, MicrostructureSpec(mode="bid_ask", spread=0.1, tick=0.01), seed=14
        )
        full_var = np.var(noisy.Y - noisy.log_S)
        for delta in (5_000, 15_000):
            series = subsample(noisy, delta)
            sub_var = np.var(series.Y - series.true_log_S)
            se = full_var * np.sqrt(2.0 / series.n_obs)
            assert abs(sub_var - full_var) < 3.0 * se


class TestSubsample:
    def test_identity_at_simulation_period(self):
        path = simulate_path(P_BENCH, 1000, 3_600_000, INIT, seed=1)
        series = subsample(path, 1000)
        assert np.array_equal(series.Y, path.Y)
        assert series.n_obs == path.n_points - 1

    def test_five_minute_day_has_79_points(self):
        path = simulate_path(P_BENCH, 1000, DAY_MS, INIT, seed=1)
        series = subsample(path, 300_000)
        assert len(series.Y) == 79
        assert series.n_obs == 78

    def test_non_nesting_grid_rejected(self):
        path = simulate_path(P_BENCH, 1000, 3_600_000, INIT, seed=1)
        with pytest.raises(GridError):
            subsample(path, 1500)

    def test_true_latents_carried_on_continuous_scale(self):
        path = simulate_path(P_BENCH, 1000, 3_600_000, INIT, seed=1)
        series = subsample(path, 60_000)
        assert series.true_log_vol is not None
        np.testing.assert_allclose(
            series.true_log_vol, path.log_sigma[::60] - 0.5 * np.log(1000.0)
        )


class TestTrueIntegratedVariance:
    def test_constant_volatility(self):
        p = ContinuousParams(
            mu_hat=0.0, theta_hat=5.6e-7, alpha_hat=-13.0, tau_sq_hat=1e-30, rho=0.0
        )
        path = simulate_path(p, 1000, 1_000_000, INIT, seed=2)
        d = discretize(p, 1000)
        n = path.n_points - 1
        iv = true_integrated_variance(path, 1000)
        assert iv == pytest.approx(n * np.exp(2.0 * d.alpha_d), rel=1e-9)

    def test_stationary_lognormal_band(self):
        # day-level IV concentrates well inside a +-3 sd band of the
        # stationary log-variance law; allow <=1% escapes over 200 seeds
        d = discretize(P_BENCH, 1000)
        centre = np.exp(2.0 * P_BENCH.alpha_hat) * DAY_MS
        factor = np.exp(3.0 * np.sqrt(2.0 * 0.11607142857142858))
        inside = 0
        n_seeds = 200
        for seed in range(n_seeds):
            path = simulate_path(P_BENCH, 1000, DAY_MS, INIT, seed=seed)
            iv = true_integrated_variance(path, 300_000)
            inside += centre / factor <= iv <= centre * factor
        assert inside >= int(0.99 * n_seeds)

    def test_grid_refinement_consistency(self):
        # the same latent realisation summed at 500 ms and at 1000 ms are two
        # Riemann sums of one integral; they must agree to well under 1%
        path = simulate_path(P_BENCH, 500, DAY_MS, INIT, seed=17)
        fine = true_integrated_variance(path, 1000)
        h = path.log_sigma
        coarse = 2.0 * float(np.sum(np.exp(2.0 * h[2 : path.n_points : 2])))
        assert abs(coarse - fine) / fine < 0.01

    def test_non_nesting_grid_rejected(self):
        path = simulate_path(P_BENCH, 1000, 3_600_000, INIT, seed=1)
        with pytest.raises(GridError):
            true_integrated_variance(path, 2500)
