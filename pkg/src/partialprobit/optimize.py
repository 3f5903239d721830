"""Quasi-Newton minimizer: BFGS with Armijo backtracking.

Written in-package so multi-start estimation is bit-for-bit deterministic
across platforms and library versions. Minimizes a smooth function given a
fused value-and-gradient callable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class OptResult:
    x: np.ndarray
    f: float
    gradient: np.ndarray
    n_iter: int
    converged: bool
    status: str


def minimize_bfgs(fun_grad, x0, gtol: float = 1e-8, max_iter: int = 500,
                  armijo_c1: float = 1e-4, backtrack: float = 0.5,
                  max_backtracks: int = 50) -> OptResult:
    """Minimize ``fun_grad`` (returns (f, g)) from ``x0``.

    Convergence: infinity-norm of the gradient <= gtol. A failed line search
    or non-finite objective is reported through ``status``, never silently.
    """
    x = np.array(x0, dtype=float)
    n = len(x)
    f, g = fun_grad(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        return OptResult(x, f, g, 0, False, "non_finite_at_start")
    h_inv = np.eye(n)
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) <= gtol:
            return OptResult(x, f, g, it - 1, True, "converged")
        d = -h_inv @ g
        slope = float(g @ d)
        if slope >= 0.0:
            # Curvature information went bad; restart from steepest descent.
            h_inv = np.eye(n)
            d = -g
            slope = float(g @ d)
        alpha = 1.0
        f_new = g_new = None
        for _ in range(max_backtracks):
            x_try = x + alpha * d
            f_try, g_try = fun_grad(x_try)
            if np.isfinite(f_try) and f_try <= f + armijo_c1 * alpha * slope:
                f_new, g_new = f_try, g_try
                break
            alpha *= backtrack
        if f_new is None:
            converged = bool(np.max(np.abs(g)) <= gtol)
            return OptResult(x, f, g, it, converged,
                             "converged" if converged else "line_search_failure")
        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            hy = h_inv @ y
            yhy = float(y @ hy)
            h_inv += ((sy + yhy) / sy ** 2) * np.outer(s, s) \
                - (np.outer(hy, s) + np.outer(s, hy)) / sy
        x = x + s
        f, g = f_new, g_new
        if not np.all(np.isfinite(g)):
            return OptResult(x, f, g, it, False, "non_finite_gradient")
    converged = bool(np.max(np.abs(g)) <= gtol)
    return OptResult(x, f, g, max_iter, converged,
                     "converged" if converged else "max_iterations")
