"""Log-likelihoods for the partial-observability model and the probit baseline.

The joint seminar probability is p = F(x_I'b_I, x_A'b_A; rho) with F the
bivariate standard normal CDF; the sample log-likelihood sums
z*ln(p) + (1-z)*ln(1-p) over dyads. The correlation is carried through the
unconstrained Fisher-z parameter rho_z with rho = tanh(rho_z), so every
parameter vector maps to a valid correlation.

All evaluations are pure folds over rows using numpy's pairwise summation,
so results do not depend on row chunking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .data import DesignMatrices
from .errors import DomainError
from .normals import RHO_CAP, _bvn_cdf_raw, bvn_pdf, std_normal_pdf

# Probabilities are clamped before logs; guards quadrature round-off at
# extreme linear indices.
_P_LO = 1e-12
_P_HI = 1.0 - 1e-12


@dataclass
class ParameterVector:
    """Coefficients of both equations plus the unconstrained correlation."""
    beta_invite: np.ndarray
    beta_accept: np.ndarray
    rho_z: float = 0.0

    def __post_init__(self):
        self.beta_invite = np.asarray(self.beta_invite, dtype=float)
        self.beta_accept = np.asarray(self.beta_accept, dtype=float)
        self.rho_z = float(self.rho_z)

    @property
    def rho(self) -> float:
        return float(np.tanh(self.rho_z))

    @property
    def n_params(self) -> int:
        return len(self.beta_invite) + len(self.beta_accept) + 1

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.beta_invite, self.beta_accept, [self.rho_z]])

    @classmethod
    def from_flat(cls, flat, k_invite: int, k_accept: int) -> "ParameterVector":
        flat = np.asarray(flat, dtype=float)
        if len(flat) != k_invite + k_accept + 1:
            raise DomainError("flat parameter vector has wrong length")
        return cls(flat[:k_invite], flat[k_invite:k_invite + k_accept],
                   float(flat[-1]))

    def named(self, invite_names, accept_names) -> dict:
        """Map coefficient names to values, keyed by equation."""
        if len(invite_names) != len(self.beta_invite) or \
                len(accept_names) != len(self.beta_accept):
            raise DomainError("name lists do not match coefficient lengths")
        return {
            "beta_invite": dict(zip(invite_names, map(float, self.beta_invite))),
            "beta_accept": dict(zip(accept_names, map(float, self.beta_accept))),
            "rho": self.rho,
        }


@dataclass
class LoglikResult:
    value: float
    gradient: np.ndarray | None
    n_obs: int


def seminar_prob(xi, xa, rho):
    """P(Z = 1) at invite index ``xi``, accept index ``xa``, correlation rho."""
    from .normals import bvn_cdf
    return bvn_cdf(xi, xa, rho)


def _check_theta(theta, design):
    if len(theta.beta_invite) != design.x_invite.shape[1]:
        raise DomainError("beta_invite length does not match the invite matrix")
    if len(theta.beta_accept) != design.x_accept.shape[1]:
        raise DomainError("beta_accept length does not match the accept matrix")
    if not np.all(np.isfinite(theta.to_flat())):
        raise DomainError("non-finite parameter")


def biprobit_loglik(theta: ParameterVector, design: DesignMatrices,
                    want_gradient: bool = False) -> LoglikResult:
    """Partial-observability log-likelihood and (optionally) its analytic score.

    The score uses dF/da = phi(a) * Phi((b - rho*a)/sqrt(1-rho^2)), its
    mirror image in b, and dF/drho = bivariate density at (a, b), chained
    through rho = tanh(rho_z).
    """
    _check_theta(theta, design)
    a = design.x_invite @ theta.beta_invite
    b = design.x_accept @ theta.beta_accept
    rho = float(np.clip(theta.rho, -RHO_CAP, RHO_CAP))
    z = design.z

    p = np.clip(_bvn_cdf_raw(a, b, rho), _P_LO, _P_HI)
    value = float(np.sum(z * np.log(p) + (1.0 - z) * np.log1p(-p)))
    gradient = None
    if want_gradient:
        w = z / p - (1.0 - z) / (1.0 - p)
        s = np.sqrt(1.0 - rho * rho)
        dp_da = std_normal_pdf(a) * ndtr((b - rho * a) / s)
        dp_db = std_normal_pdf(b) * ndtr((a - rho * b) / s)
        dp_drho = bvn_pdf(a, b, rho)
        g_i = design.x_invite.T @ (w * dp_da)
        g_a = design.x_accept.T @ (w * dp_db)
        g_rz = float(np.sum(w * dp_drho)) * (1.0 - rho * rho)
        gradient = np.concatenate([g_i, g_a, [g_rz]])
    return LoglikResult(value, gradient, len(z))


def biprobit_scores(theta: ParameterVector, design: DesignMatrices) -> np.ndarray:
    """Per-observation score matrix (n x k), last column is d/d rho_z."""
    _check_theta(theta, design)
    a = design.x_invite @ theta.beta_invite
    b = design.x_accept @ theta.beta_accept
    rho = float(np.clip(theta.rho, -RHO_CAP, RHO_CAP))
    p = np.clip(_bvn_cdf_raw(a, b, rho), _P_LO, _P_HI)
    w = design.z / p - (1.0 - design.z) / (1.0 - p)
    s = np.sqrt(1.0 - rho * rho)
    dp_da = std_normal_pdf(a) * ndtr((b - rho * a) / s)
    dp_db = std_normal_pdf(b) * ndtr((a - rho * b) / s)
    dp_drho = bvn_pdf(a, b, rho) * (1.0 - rho * rho)
    return np.column_stack([
        design.x_invite * (w * dp_da)[:, None],
        design.x_accept * (w * dp_db)[:, None],
        w * dp_drho,
    ])


def probit_loglik(beta, x, z, want_gradient: bool = False) -> LoglikResult:
    """Univariate probit log-likelihood for the robustness baseline."""
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape[1] != len(beta) or x.shape[0] != len(z):
        raise DomainError("probit dimensions do not agree")
    if not np.all(np.isfinite(beta)):
        raise DomainError("non-finite parameter")
    xb = x @ beta
    value = float(np.sum(z * log_ndtr(xb) + (1.0 - z) * log_ndtr(-xb)))
    gradient = None
    if want_gradient:
        logpdf = -0.5 * xb * xb - 0.5 * np.log(2.0 * np.pi)
        lam = np.where(z > 0.5, np.exp(logpdf - log_ndtr(xb)),
                       -np.exp(logpdf - log_ndtr(-xb)))
        gradient = x.T @ lam
    return LoglikResult(value, gradient, len(z))


def probit_scores(beta, x, z) -> np.ndarray:
    """Per-observation probit score matrix (n x k)."""
    beta = np.asarray(beta, dtype=float)
    xb = np.asarray(x) @ beta
    logpdf = -0.5 * xb * xb - 0.5 * np.log(2.0 * np.pi)
    lam = np.where(np.asarray(z) > 0.5, np.exp(logpdf - log_ndtr(xb)),
                   -np.exp(logpdf - log_ndtr(-xb)))
    return np.asarray(x) * lam[:, None]
