import numpy as np
import pytest

from partialprobit.data import DesignMatrices
from partialprobit.errors import DataError, NumericalError
from partialprobit.estimator import (FitOptions, chi2_sf, clustered_covariance,
                                     fit_biprobit_partial, fit_probit,
                                     lr_test_rho)
from partialprobit.likelihood import probit_loglik
from partialprobit.normals import std_normal_quantile
from partialprobit.optimize import minimize_bfgs

from oracles import grid_maximize


def small_market(seed=0, n=4000, rho=0.4):
    """Simulated partial-observability sample with a clean exclusion."""
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n)          # invite-only covariate
    d = rng.standard_normal(n)          # shared covariate
    w = rng.standard_normal(n)          # accept-only covariate
    x_i = np.column_stack([np.ones(n), q, d])
    x_a = np.column_stack([np.ones(n), w, d])
    b_i = np.array([0.3, 0.7, -0.4])
    b_a = np.array([0.1, 0.6, -0.3])
    e1 = rng.standard_normal(n)
    e2 = rho * e1 + np.sqrt(1 - rho * rho) * rng.standard_normal(n)
    z = ((x_i @ b_i + e1 > 0) & (x_a @ b_a + e2 > 0)).astype(float)
    return DesignMatrices(
        x_invite=x_i, x_accept=x_a, z=z, cluster_id=np.arange(n) // 8,
        invite_names=["const", "q", "d"], accept_names=["const", "w", "d"])


class TestMinimizeBfgs:
    def test_quadratic(self):
        a = np.diag([1.0, 4.0, 9.0])
        b = np.array([1.0, -2.0, 3.0])

        def fg(x):
            return 0.5 * x @ a @ x - b @ x, a @ x - b
        r = minimize_bfgs(fg, np.zeros(3))
        assert r.converged
        np.testing.assert_allclose(r.x, np.linalg.solve(a, b), atol=1e-7)

    def test_rosenbrock(self):
        def fg(v):
            x, y = v
            f = (1 - x) ** 2 + 100 * (y - x * x) ** 2
            g = np.array([-2 * (1 - x) - 400 * x * (y - x * x),
                          200 * (y - x * x)])
            return f, g
        r = minimize_bfgs(fg, np.array([-1.2, 1.0]), max_iter=2000)
        assert r.converged
        np.testing.assert_allclose(r.x, [1.0, 1.0], atol=1e-6)

    def test_non_finite_start_reported(self):
        r = minimize_bfgs(lambda x: (np.nan, x), np.array([1.0]))
        assert not r.converged and r.status == "non_finite_at_start"

    def test_gradient_norm_at_optimum(self):
        def fg(x):
            return float(np.sum(np.cosh(x))), np.sinh(x)
        r = minimize_bfgs(fg, np.array([2.0, -3.0]), gtol=1e-10)
        assert r.converged
        assert np.max(np.abs(r.gradient)) <= 1e-10


class TestFitProbit:
    def test_intercept_only_closed_form(self):
        z = np.array([1.0] * 130 + [0.0] * 370)
        fit = fit_probit(np.ones((500, 1)), z)
        assert fit.converged
        assert fit.params[0] == pytest.approx(std_normal_quantile(z.mean()),
                                              abs=1e-8)

    def test_two_parameter_vs_grid_oracle(self):
        rng = np.random.default_rng(29)
        n = 800
        x = np.column_stack([np.ones(n), rng.standard_normal(n)])
        z = (x @ np.array([-0.3, 0.8])
             + rng.standard_normal(n) > 0).astype(float)
        fit = fit_probit(x, z)
        assert fit.converged
        oracle = grid_maximize(lambda b: probit_loglik(b, x, z).value,
                               lo=[-2.0, -2.0], hi=[2.0, 2.0], levels=8)
        np.testing.assert_allclose(fit.params, oracle, atol=1e-4)

    def test_no_variation_error(self):
        with pytest.raises(DataError, match="no variation"):
            fit_probit(np.ones((50, 1)), np.ones(50))

    def test_rank_deficiency_error(self):
        x = np.column_stack([np.ones(60), np.ones(60)])
        z = np.array([1.0, 0.0] * 30)
        with pytest.raises(DataError, match="rank"):
            fit_probit(x, z)

    def test_gradient_tolerance_honored(self):
        z = np.array([1.0] * 40 + [0.0] * 60)
        fit = fit_probit(np.ones((100, 1)), z,
                         FitOptions(gradient_tolerance=1e-10))
        assert fit.gradient_inf_norm <= 1e-10


class TestFitBiprobitPartial:
    def test_recovery_within_sampling_error(self):
        design = small_market(seed=1, n=20000, rho=0.4)
        fit = fit_biprobit_partial(design, FitOptions(n_starts=3, seed=1))
        assert fit.converged
        truth = np.array([0.3, 0.7, -0.4, 0.1, 0.6, -0.3, 0.4])
        np.testing.assert_array_less(np.abs(fit.params - truth),
                                     4.0 * fit.std_errors)

    def test_exclusion_guard(self):
        design = small_market()
        shared = DesignMatrices(design.x_invite, design.x_invite.copy(),
                                design.z, design.cluster_id,
                                design.invite_names, design.invite_names)
        with pytest.raises(DataError, match="exclusion"):
            fit_biprobit_partial(shared)

    def test_start_log_is_complete(self):
        design = small_market(n=1500)
        fit = fit_biprobit_partial(design, FitOptions(n_starts=4, seed=2),
                                   compute_covariance=False)
        assert len(fit.start_log) == 4
        assert all(len(entry) == 3 for entry in fit.start_log)

    def test_best_start_wins(self):
        design = small_market(n=1500)
        fit = fit_biprobit_partial(design, FitOptions(n_starts=5, seed=3),
                                   compute_covariance=False)
        converged_lls = [ll for _, ll, st in fit.start_log if st == "converged"]
        assert fit.loglik == pytest.approx(max(converged_lls), abs=1e-6)

    def test_gradient_norm_small_at_optimum(self):
        design = small_market(n=1500)
        fit = fit_biprobit_partial(design, FitOptions(n_starts=1),
                                   compute_covariance=False)
        assert fit.gradient_inf_norm <= 1e-8

    def test_multi_start_determinism(self):
        design = small_market(n=1500)
        opts = FitOptions(n_starts=4, seed=9)
        a = fit_biprobit_partial(design, opts, compute_covariance=False)
        b = fit_biprobit_partial(design, opts, compute_covariance=False)
        assert a.params.tobytes() == b.params.tobytes()
        assert a.loglik == b.loglik
        assert a.start_log == b.start_log

    def test_fix_rho_at_zero(self):
        design = small_market(n=3000, rho=0.0, seed=4)
        free = fit_biprobit_partial(design, FitOptions(n_starts=1),
                                    compute_covariance=False)
        restr = fit_biprobit_partial(design, FitOptions(n_starts=1,
                                                        fix_rho_at_zero=True),
                                     compute_covariance=False)
        assert restr.fixed_rho and restr.rho_hat == 0.0
        assert "rho" not in restr.param_names
        # truth has rho = 0, so the restriction barely costs likelihood
        lr = lr_test_rho(free, restr)
        assert lr.statistic < 9.0

    def test_unrestricted_dominates_restricted(self):
        design = small_market(n=3000, seed=5)
        free = fit_biprobit_partial(design, FitOptions(n_starts=2, seed=5),
                                    compute_covariance=False)
        restr = fit_biprobit_partial(
            design, FitOptions(n_starts=2, seed=5, fix_rho_at_zero=True),
            compute_covariance=False)
        assert free.loglik >= restr.loglik - 1e-8


class TestClusteredCovariance:
    def test_singleton_clusters_equal_robust(self):
        design = small_market(n=2500, seed=6)
        fit = fit_biprobit_partial(design, FitOptions(n_starts=1),
                                   compute_covariance=False)
        singles = clustered_covariance(fit, design, np.arange(design.n_obs))
        from partialprobit.estimator import _fd_information, _score_and_total
        scores, total, at = _score_and_total(fit, design)
        h = _fd_information(total, at)
        h_inv = np.linalg.inv(h)
        n = design.n_obs
        robust = h_inv @ (scores.T @ scores) @ h_inv * (n / (n - 1.0))
        robust = 0.5 * (robust + robust.T)
        jac = np.ones(robust.shape[0])
        jac[-1] = 1.0 - fit.rho_hat ** 2
        robust *= np.outer(jac, jac)
        np.testing.assert_allclose(singles, robust, atol=1e-10)

    def test_duplication_invariance(self):
        design = small_market(n=1200, seed=7)
        fit = fit_biprobit_partial(design, FitOptions(n_starts=1),
                                   compute_covariance=False)
        cov = clustered_covariance(fit, design, design.cluster_id)
        dup = DesignMatrices(
            np.vstack([design.x_invite, design.x_invite]),
            np.vstack([design.x_accept, design.x_accept]),
            np.concatenate([design.z, design.z]),
            np.concatenate([design.cluster_id, design.cluster_id]),
            design.invite_names, design.accept_names)
        fit2 = fit_biprobit_partial(dup, FitOptions(n_starts=1),
                                    compute_covariance=False)
        np.testing.assert_allclose(fit2.params, fit.params, atol=1e-8)
        cov2 = clustered_covariance(fit2, dup, dup.cluster_id)
        np.testing.assert_allclose(cov2, cov, atol=1e-8)

    def test_requires_convergence(self):
        design = small_market(n=800)
        fit = fit_biprobit_partial(design, FitOptions(n_starts=1),
                                   compute_covariance=False)
        fit.converged = False
        with pytest.raises(DataError, match="converged"):
            clustered_covariance(fit, design, design.cluster_id)

    def test_needs_two_clusters(self):
        design = small_market(n=800)
        fit = fit_biprobit_partial(design, FitOptions(n_starts=1),
                                   compute_covariance=False)
        with pytest.raises(DataError, match="two clusters"):
            clustered_covariance(fit, design, np.zeros(design.n_obs))

    def test_singular_information_reported(self):
        design = small_market(n=800, seed=8)
        fit = fit_biprobit_partial(design, FitOptions(n_starts=1),
                                   compute_covariance=False)
        # a design with a duplicated column makes the information singular
        bad = DesignMatrices(
            np.column_stack([design.x_invite, design.x_invite[:, 1]]),
            design.x_accept, design.z, design.cluster_id,
            design.invite_names + ["q2"], design.accept_names)
        from partialprobit.likelihood import ParameterVector
        fit.invite_names = bad.invite_names
        fit.theta_hat = ParameterVector(
            np.append(fit.theta_hat.beta_invite, 0.0),
            fit.theta_hat.beta_accept, fit.theta_hat.rho_z)
        with pytest.raises(NumericalError, match="condition"):
            clustered_covariance(fit, bad, bad.cluster_id)


class TestChi2AndLr:
    def test_chi2_sf_oracle_values(self):
        # frozen from scipy.stats.chi2.sf before the build
        assert chi2_sf(3.841458820694124, 1) == pytest.approx(0.05, abs=1e-12)
        assert chi2_sf(21.767, 1) == pytest.approx(3.078498848364998e-06,
                                                   rel=1e-9)

    def test_lr_fixture_arithmetic(self):
        design = small_market(n=800)
        free = fit_biprobit_partial(design, FitOptions(n_starts=1),
                                    compute_covariance=False)
        restr = fit_biprobit_partial(
            design, FitOptions(n_starts=1, fix_rho_at_zero=True),
            compute_covariance=False)
        restr.loglik = free.loglik - 10.8835
        lr = lr_test_rho(free, restr)
        assert lr.statistic == pytest.approx(21.767, abs=1e-10)
        assert lr.df == 1

    def test_identical_logliks(self):
        design = small_market(n=800)
        free = fit_biprobit_partial(design, FitOptions(n_starts=1),
                                    compute_covariance=False)
        restr = fit_biprobit_partial(
            design, FitOptions(n_starts=1, fix_rho_at_zero=True),
            compute_covariance=False)
        restr.loglik = free.loglik
        lr = lr_test_rho(free, restr)
        assert lr.statistic == 0.0
        assert lr.p_value == 1.0

    def test_role_check(self):
        design = small_market(n=800)
        free = fit_biprobit_partial(design, FitOptions(n_starts=1),
                                    compute_covariance=False)
        restr = fit_biprobit_partial(
            design, FitOptions(n_starts=1, fix_rho_at_zero=True),
            compute_covariance=False)
        with pytest.raises(DataError, match="free-rho"):
            lr_test_rho(restr, free)

    def test_inconsistent_fits_rejected(self):
        design = small_market(n=800)
        free = fit_biprobit_partial(design, FitOptions(n_starts=1),
                                    compute_covariance=False)
        restr = fit_biprobit_partial(
            design, FitOptions(n_starts=1, fix_rho_at_zero=True),
            compute_covariance=False)
        restr.loglik = free.loglik + 5.0
        with pytest.raises(DataError, match="exceeds"):
            lr_test_rho(free, restr)
