"""Independent oracles used to freeze expected values.

Everything here deliberately avoids the package's own computational paths:
the bivariate rectangle probability comes from adaptive quadrature over the
density, distances from a different great-circle formula, and optimizers are
replaced by grid refinement.
"""

import numpy as np
from math import atan2, cos, radians, sin, sqrt
from scipy.integrate import dblquad, quad
from scipy.special import ndtr

EARTH_RADIUS_KM = 6371.0088


def bvn_quad(a, b, rho):
    """Rectangle probability by adaptive quadrature: the inner normal integral
    is exact, the outer dimension is integrated adaptively."""
    s = sqrt(1.0 - rho * rho)

    def integrand(x):
        return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi) * ndtr((b - rho * x) / s)

    lo = min(a, 0.0) - 40.0
    value, _ = quad(integrand, lo, a, epsabs=1e-14, epsrel=1e-12, limit=300)
    return value


def bvn_dblquad(a, b, rho):
    """Fully 2-D adaptive quadrature over the bivariate density (slow)."""
    s2 = 1.0 - rho * rho
    norm = 1.0 / (2.0 * np.pi * sqrt(s2))

    def density(y, x):
        return norm * np.exp(-0.5 * (x * x - 2.0 * rho * x * y + y * y) / s2)

    lo_x = min(a, 0.0) - 12.0
    lo_y = min(b, 0.0) - 12.0
    value, _ = dblquad(density, lo_x, a, lo_y, b, epsabs=1e-11)
    return value


def great_circle_km(lat1, lon1, lat2, lon2):
    """Great-circle distance via the atan2 form (not the haversine form)."""
    p1, p2 = radians(lat1), radians(lat2)
    dl = radians(lon2 - lon1)
    y = sqrt((cos(p2) * sin(dl)) ** 2
             + (cos(p1) * sin(p2) - sin(p1) * cos(p2) * cos(dl)) ** 2)
    x = sin(p1) * sin(p2) + cos(p1) * cos(p2) * cos(dl)
    return EARTH_RADIUS_KM * atan2(y, x)


def fd_gradient(fun, x, rel_step=None):
    """Central finite differences with per-coordinate steps h*(1+|x_j|)."""
    x = np.asarray(x, dtype=float)
    h0 = rel_step or float(np.finfo(float).eps) ** (1.0 / 3.0)
    g = np.empty_like(x)
    for j in range(len(x)):
        h = h0 * (1.0 + abs(x[j]))
        up = x.copy(); up[j] += h
        dn = x.copy(); dn[j] -= h
        g[j] = (fun(up) - fun(dn)) / (2.0 * h)
    return g


def grid_maximize(fun, lo, hi, levels=6, points=41):
    """Nested grid refinement maximizer over a box (independent of BFGS)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    best = None
    for _ in range(levels):
        axes = [np.linspace(lo[d], hi[d], points) for d in range(len(lo))]
        grids = np.meshgrid(*axes, indexing="ij")
        flat = np.column_stack([g.ravel() for g in grids])
        values = np.array([fun(p) for p in flat])
        best = flat[int(np.argmax(values))]
        span = (hi - lo) / (points - 1)
        lo = best - 2.0 * span
        hi = best + 2.0 * span
    return best
