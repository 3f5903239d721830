"""Maximum-likelihood fitting, cluster-robust covariance, and the rho = 0 LR test.

The partial-observability likelihood can be multimodal (identification rests
solely on the exclusion restriction), so the bivariate fit is run from
several starting points: the first start stacks two univariate probit fits,
the rest perturb it. Every start's outcome is logged; non-convergence is a
reported status, never a silent fallback.

Optimization is carried out on the per-observation average log-likelihood,
so the gradient tolerance is sample-size free; reported log-likelihoods are
on the sum scale of the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc

from .data import DesignMatrices
from .errors import DataError, NumericalError
from .likelihood import (ParameterVector, biprobit_loglik, biprobit_scores,
                         probit_loglik, probit_scores)
from .optimize import minimize_bfgs

_TIE_TOL = 1e-8


@dataclass
class FitOptions:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-8
    n_starts: int = 10
    start_perturbation_scale: float = 0.5
    fix_rho_at_zero: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.gradient_tolerance <= 0 or self.max_iterations <= 0:
            raise DataError("tolerances and iteration caps must be positive")
        if self.n_starts < 1:
            raise DataError("n_starts must be at least 1")


@dataclass
class FitResult:
    model: str                      # "probit" or "biprobit"
    param_names: list[str]
    params: np.ndarray              # reporting space: betas, then rho if free
    loglik: float
    n_obs: int
    converged: bool
    status: str
    covariance: np.ndarray | None = None
    std_errors: np.ndarray | None = None
    n_clusters: int | None = None
    theta_hat: ParameterVector | None = None
    rho_hat: float | None = None
    fixed_rho: bool = False
    invite_names: list[str] | None = None
    accept_names: list[str] | None = None
    start_log: list = field(default_factory=list)   # (start, loglik, status)
    n_starts_converged_to_best: int = 0
    seed: int | None = None
    gradient_inf_norm: float | None = None


@dataclass
class LrTestResult:
    statistic: float
    df: int
    p_value: float


def chi2_sf(x: float, df: int) -> float:
    """Chi-square survival function via the regularized incomplete gamma."""
    if x < 0:
        raise DataError("chi-square statistic must be nonnegative")
    return float(gammaincc(df / 2.0, x / 2.0))


def _check_rank(x, what):
    rank = np.linalg.matrix_rank(x)
    if rank < x.shape[1]:
        raise DataError(f"{what} design matrix is rank deficient "
                        f"(rank {rank} < {x.shape[1]} columns)")


def _check_outcome(z):
    if np.all(z == z[0]):
        raise DataError("outcome has no variation")


def fit_probit(x, z, options: FitOptions | None = None, cluster_id=None,
               names=None) -> FitResult:
    """Univariate probit MLE of z on the columns of ``x`` (intercept included)."""
    options = options or FitOptions()
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_outcome(z)
    _check_rank(x, "probit")
    n, k = x.shape

    def fun_grad(beta):
        r = probit_loglik(beta, x, z, want_gradient=True)
        return -r.value / n, -r.gradient / n

    opt = minimize_bfgs(fun_grad, np.zeros(k), gtol=options.gradient_tolerance,
                        max_iter=options.max_iterations)
    loglik = -opt.f * n
    fit = FitResult(
        model="probit",
        param_names=list(names) if names else [f"x{j}" for j in range(k)],
        params=opt.x,
        loglik=loglik,
        n_obs=n,
        converged=opt.converged,
        status=opt.status,
        gradient_inf_norm=float(np.max(np.abs(opt.gradient))),
        seed=options.seed,
    )
    if opt.converged:
        if cluster_id is None:
            cluster_id = np.arange(n)
        cov = clustered_covariance(fit, (x, z), cluster_id)
        fit.covariance = cov
        fit.std_errors = np.sqrt(np.diag(cov))
        fit.n_clusters = len(np.unique(np.asarray(cluster_id)))
    return fit


def _starts_for(start1, options):
    starts = [start1]
    if options.n_starts > 1:
        rng = np.random.Generator(np.random.Philox(key=options.seed))
        for _ in range(options.n_starts - 1):
            starts.append(start1 + options.start_perturbation_scale
                          * rng.standard_normal(len(start1)))
    return starts


def fit_biprobit_partial(design: DesignMatrices, options: FitOptions | None = None,
                         compute_covariance: bool = True) -> FitResult:
    """Maximize the partial-observability likelihood by multi-start BFGS.

    Start 1 fits each equation's coefficients by a univariate probit of z on
    that equation's covariates with rho_z = 0; the remaining starts are seeded
    Gaussian perturbations of it. The best converged optimum wins; ties
    (within 1e-8 in log-likelihood) break toward the smaller parameter norm,
    then the lower start index.
    """
    options = options or FitOptions()
    if set(design.invite_names) == set(design.accept_names):
        raise DataError("exclusion restriction violated: the two equations "
                        "share all columns")
    _check_outcome(design.z)
    _check_rank(design.x_invite, "invite")
    _check_rank(design.x_accept, "accept")
    n = design.n_obs
    k_i = design.x_invite.shape[1]
    k_a = design.x_accept.shape[1]
    fix_rho = options.fix_rho_at_zero

    def pack(v) -> ParameterVector:
        if fix_rho:
            return ParameterVector(v[:k_i], v[k_i:], 0.0)
        return ParameterVector.from_flat(v, k_i, k_a)

    def fun_grad(v):
        r = biprobit_loglik(pack(v), design, want_gradient=True)
        g = r.gradient[:-1] if fix_rho else r.gradient
        return -r.value / n, -g / n

    def probit_start(x):
        r = minimize_bfgs(
            lambda b: tuple(-c / n for c in _probit_pair(b, x, design.z)),
            np.zeros(x.shape[1]), gtol=max(options.gradient_tolerance, 1e-7),
            max_iter=options.max_iterations)
        return r.x

    start1 = np.concatenate([probit_start(design.x_invite),
                             probit_start(design.x_accept)]
                            + ([] if fix_rho else [[0.0]]))
    starts = _starts_for(start1, options)

    results, start_log = [], []
    for idx, s0 in enumerate(starts, start=1):
        opt = minimize_bfgs(fun_grad, s0, gtol=options.gradient_tolerance,
                            max_iter=options.max_iterations)
        results.append(opt)
        start_log.append((idx, -opt.f * n, opt.status))

    converged = [(i, r) for i, r in enumerate(results) if r.converged]
    if not converged:
        return FitResult(
            model="biprobit",
            param_names=_biprobit_names(design, fix_rho),
            params=np.full(k_i + k_a + (0 if fix_rho else 1), np.nan),
            loglik=float("nan"), n_obs=n, converged=False,
            status="no_start_converged", fixed_rho=fix_rho,
            invite_names=design.invite_names, accept_names=design.accept_names,
            start_log=start_log, seed=options.seed)

    best_ll = max(-r.f * n for _, r in converged)
    tied = [(i, r) for i, r in converged if (-r.f * n) >= best_ll - _TIE_TOL]
    tied.sort(key=lambda ir: (float(np.linalg.norm(ir[1].x)), ir[0]))
    best_idx, best = tied[0]
    theta = pack(best.x)

    params = best.x if fix_rho else np.concatenate([best.x[:-1], [theta.rho]])
    fit = FitResult(
        model="biprobit",
        param_names=_biprobit_names(design, fix_rho),
        params=params,
        loglik=-best.f * n,
        n_obs=n,
        converged=True,
        status="converged",
        theta_hat=theta,
        rho_hat=theta.rho,
        fixed_rho=fix_rho,
        invite_names=design.invite_names,
        accept_names=design.accept_names,
        start_log=start_log,
        n_starts_converged_to_best=len(tied),
        seed=options.seed,
        gradient_inf_norm=float(np.max(np.abs(best.gradient))),
    )
    if compute_covariance:
        cov = clustered_covariance(fit, design, design.cluster_id)
        fit.covariance = cov
        fit.std_errors = np.sqrt(np.maximum(np.diag(cov), 0.0))
        fit.n_clusters = len(np.unique(design.cluster_id))
    return fit


def _probit_pair(beta, x, z):
    r = probit_loglik(beta, x, z, want_gradient=True)
    return r.value, r.gradient


def _biprobit_names(design, fix_rho):
    names = [f"invite:{n}" for n in design.invite_names] \
        + [f"accept:{n}" for n in design.accept_names]
    if not fix_rho:
        names.append("rho")
    return names


def _score_and_total(fit, design):
    """Per-observation scores and a total-score callable at arbitrary params.

    Both live on the internal (rho_z) scale for biprobit fits.
    """
    if fit.model == "probit":
        x, z = design

        def total(beta):
            return probit_loglik(beta, x, z, want_gradient=True).gradient

        return probit_scores(fit.params, x, z), total, fit.params

    k_i = len(fit.invite_names)
    k_a = len(fit.accept_names)
    theta = fit.theta_hat

    if fit.fixed_rho:
        def total(v):
            pv = ParameterVector(v[:k_i], v[k_i:], 0.0)
            return biprobit_loglik(pv, design, want_gradient=True).gradient[:-1]
        scores = biprobit_scores(theta, design)[:, :-1]
        at = np.concatenate([theta.beta_invite, theta.beta_accept])
    else:
        def total(v):
            pv = ParameterVector.from_flat(v, k_i, k_a)
            return biprobit_loglik(pv, design, want_gradient=True).gradient
        scores = biprobit_scores(theta, design)
        at = theta.to_flat()
    return scores, total, at


def _fd_information(total_score, at):
    """Observed information: minus the central-difference Jacobian of the score."""
    k = len(at)
    eps = np.finfo(float).eps ** (1.0 / 3.0)
    jac = np.empty((k, k))
    for j in range(k):
        h = eps * (1.0 + abs(at[j]))
        up = at.copy(); up[j] += h
        dn = at.copy(); dn[j] -= h
        jac[:, j] = (total_score(up) - total_score(dn)) / (2.0 * h)
    h_info = -0.5 * (jac + jac.T)
    return h_info


def clustered_covariance(fit: FitResult, design, cluster_id) -> np.ndarray:
    """Sandwich covariance with scores summed within clusters.

    H^-1 (sum_g s_g s_g') H^-1 with H the observed information from a
    finite-difference Jacobian of the analytic score, and the small-sample
    factor G/(G-1). For biprobit fits, ``design`` is the DesignMatrices used
    in estimation; for probit fits, pass the (x, z) pair. The returned matrix
    is on the reporting scale (rho, not rho_z).
    """
    if not fit.converged:
        raise DataError("covariance requires a converged fit")
    scores, total_score, at = _score_and_total(fit, design)

    cluster_id = np.asarray(cluster_id)
    if len(cluster_id) != scores.shape[0]:
        raise DataError("cluster_id length does not match the sample")
    _, codes = np.unique(cluster_id, return_inverse=True)
    n_clusters = codes.max() + 1
    if n_clusters < 2:
        raise DataError("clustered covariance needs at least two clusters")
    s_g = np.zeros((n_clusters, scores.shape[1]))
    np.add.at(s_g, codes, scores)
    meat = s_g.T @ s_g

    h_info = _fd_information(total_score, at)
    cond = np.linalg.cond(h_info)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(
            f"information matrix is numerically singular (condition number "
            f"{cond:.3e})")
    h_inv = np.linalg.inv(h_info)
    cov = h_inv @ meat @ h_inv * (n_clusters / (n_clusters - 1.0))
    cov = 0.5 * (cov + cov.T)

    if fit.model == "biprobit" and not fit.fixed_rho:
        # Delta method rho = tanh(rho_z) on the last coordinate.
        jac = np.ones(cov.shape[0])
        jac[-1] = 1.0 - fit.rho_hat ** 2
        cov = cov * np.outer(jac, jac)
    return cov


def lr_test_rho(fit_unrestricted: FitResult, fit_restricted: FitResult
                ) -> LrTestResult:
    """Likelihood-ratio test that the error correlation is zero (1 df)."""
    if fit_unrestricted.fixed_rho or not fit_restricted.fixed_rho:
        raise DataError("pass the free-rho fit first and the rho = 0 fit second")
    if not (fit_unrestricted.converged and fit_restricted.converged):
        raise DataError("the LR test requires two converged fits")
    if (fit_unrestricted.n_obs != fit_restricted.n_obs
            or fit_unrestricted.invite_names != fit_restricted.invite_names
            or fit_unrestricted.accept_names != fit_restricted.accept_names):
        raise DataError("the two fits use different designs")
    diff = fit_unrestricted.loglik - fit_restricted.loglik
    if diff < -_TIE_TOL:
        raise DataError("restricted loglik exceeds unrestricted; the fits are "
                        "inconsistent (swapped roles?)")
    stat = max(0.0, 2.0 * diff)
    return LrTestResult(statistic=stat, df=1, p_value=chi2_sf(stat, 1))
