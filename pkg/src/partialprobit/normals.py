"""Standard normal and bivariate normal kernels.

Everything here is pure and reentrant. The bivariate rectangle probability
uses the Drezner-Wesolowsky reduction with a 20-point Gauss-Legendre rule
(the classic BVND scheme), which is deterministic and accurate to roughly
5e-15 over the ranges the estimator visits. A slow adaptive-quadrature
oracle lives in the test suite, not here.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError

# Clamps applied to returned probabilities so downstream logs stay finite.
PROB_FLOOR = 1e-300
PROB_CEIL = 1.0 - 1e-16

# The quadrature degrades at |rho| = 1; the tanh transform used by the
# estimator never reaches the boundary, so a hard cap is safe.
RHO_CAP = 0.9999

_SQRT_2PI = np.sqrt(2.0 * np.pi)

# 20-point Gauss-Legendre rule on (-1, 1); positive half of the nodes.
_GL_W = np.array([
    0.017614007139152118, 0.040601429800386941, 0.062672048334109064,
    0.083276741576704749, 0.101930119817240435, 0.118194531961518417,
    0.131688638449176627, 0.142096109318382051, 0.149172986472603747,
    0.152753387130725851,
])
_GL_X = np.array([
    0.993128599185094925, 0.963971927277913791, 0.912234428251325906,
    0.839116971822218823, 0.746331906460150793, 0.636053680726515025,
    0.510867001950827098, 0.373706088715419561, 0.227785851141645078,
    0.076526521133497334,
])


def std_normal_pdf(x):
    """Density of the standard normal at ``x`` (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("std_normal_pdf requires finite input")
    out = np.exp(-0.5 * arr * arr) / _SQRT_2PI
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def std_normal_cdf(x):
    """Phi(x); accepts +-inf, rejects NaN."""
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError("std_normal_cdf received NaN")
    out = ndtr(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("std_normal_quantile requires 0 < p < 1")
    out = ndtri(arr)
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def _bvnu_finite(h, k, r):
    """P(X > h, Y > k) for finite h, k arrays and scalar |r| <= RHO_CAP."""
    # Beyond |12| the rectangle probability matches its limit to < 1e-33;
    # clipping keeps every exponent in the tail reduction finite.
    h = np.clip(np.asarray(h, dtype=float), -12.0, 12.0)
    k = np.clip(np.asarray(k, dtype=float), -12.0, 12.0)
    tp = 2.0 * np.pi
    hk = h * k

    if abs(r) < 0.925:
        if r == 0.0:
            return ndtr(-h) * ndtr(-k)
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * np.arcsin(r)
        bvn = np.zeros_like(hk)
        for w, x in zip(_GL_W, _GL_X):
            for sn in (np.sin(asr * (1.0 - x)), np.sin(asr * (1.0 + x))):
                bvn += w * np.exp((sn * hk - hs) / (1.0 - sn * sn))
        return np.clip(bvn * asr / tp + ndtr(-h) * ndtr(-k), 0.0, 1.0)

    # |r| >= 0.925: Drezner-Wesolowsky tail reduction.
    if r < 0.0:
        k = -k
        hk = -hk
    a_sq = (1.0 - r) * (1.0 + r)
    a = np.sqrt(a_sq)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 16.0
    asr = -0.5 * (bs / a_sq + hk)
    bvn = np.where(
        asr > -100.0,
        a * np.exp(np.maximum(asr, -745.0))
        * (1.0 - c * (bs - a_sq) * (1.0 - d * bs / 5.0) / 3.0
           + c * d * a_sq * a_sq / 5.0),
        0.0,
    )
    b = np.sqrt(bs)
    with np.errstate(over="ignore"):
        tail = np.exp(np.minimum(-0.5 * hk, 700.0)) * _SQRT_2PI * ndtr(-b / a) * b \
            * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
    bvn = bvn - np.where(-hk < 100.0, tail, 0.0)
    half = a / 2.0
    for w, x in zip(_GL_W, _GL_X):
        for sgn in (-1.0, 1.0):
            xs = (half * (sgn * x + 1.0)) ** 2
            rs = np.sqrt(1.0 - xs)
            asr_i = -0.5 * (bs / xs + hk)
            term = np.exp(np.maximum(asr_i, -745.0)) * (
                np.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
                - (1.0 + c * xs * (1.0 + d * xs))
            )
            bvn = bvn + np.where(asr_i > -100.0, half * w * term, 0.0)
    bvn = -bvn / tp
    if r > 0.0:
        p = bvn + ndtr(-np.maximum(h, k))
    else:
        # Phi(k) - Phi(h) evaluated in whichever tail keeps precision.
        diff = np.where(h < 0.0, ndtr(k) - ndtr(h), ndtr(-h) - ndtr(-k))
        p = -bvn + np.where(k > h, diff, 0.0)
    return np.clip(p, 0.0, 1.0)


def _bvn_cdf_raw(a, b, rho):
    """P(X <= a, Y <= b), vectorized over a, b; scalar rho, no input checks."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rho = float(np.clip(rho, -RHO_CAP, RHO_CAP))
    h = -a
    k = -b
    if np.all(np.isfinite(h)) and np.all(np.isfinite(k)):
        return _bvnu_finite(h, k, rho)
    h, k = np.broadcast_arrays(h, k)
    p = np.zeros(h.shape)
    # P(X > h, Y > k): infinities collapse to a marginal or a constant.
    lo_h = np.isneginf(h)
    lo_k = np.isneginf(k)
    p = np.where(lo_h & lo_k, 1.0, p)
    p = np.where(lo_h & ~lo_k & np.isfinite(k), ndtr(-k), p)
    p = np.where(lo_k & ~lo_h & np.isfinite(h), ndtr(-h), p)
    fin = np.isfinite(h) & np.isfinite(k)
    if np.any(fin):
        p = np.where(fin, _bvnu_finite(np.where(fin, h, 0.0),
                                       np.where(fin, k, 0.0), rho), p)
    return p


def bvn_cdf(a, b, rho):
    """Standard bivariate normal rectangle probability P(X <= a, Y <= b).

    ``a`` and ``b`` may be scalars or arrays (broadcast together) and may be
    +-inf; ``rho`` must lie strictly inside (-1, 1) and is capped at
    |rho| = 0.9999 internally. The result is clamped away from exact 0 and 1
    so that downstream logarithms stay finite.
    """
    if np.any(np.isnan(np.asarray(a, dtype=float))) or \
            np.any(np.isnan(np.asarray(b, dtype=float))):
        raise DomainError("bvn_cdf received NaN")
    rho = float(rho)
    if np.isnan(rho) or abs(rho) >= 1.0:
        raise DomainError(f"correlation must lie in (-1, 1), got {rho!r}")
    p = np.clip(_bvn_cdf_raw(a, b, rho), PROB_FLOOR, PROB_CEIL)
    scalar = np.isscalar(a) and np.isscalar(b)
    return float(p) if scalar else p


def bvn_pdf(a, b, rho):
    """Standard bivariate normal density at (a, b) with correlation rho."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rho = float(np.clip(rho, -RHO_CAP, RHO_CAP))
    s2 = 1.0 - rho * rho
    q = (a * a - 2.0 * rho * a * b + b * b) / s2
    return np.exp(-0.5 * q) / (2.0 * np.pi * np.sqrt(s2))
