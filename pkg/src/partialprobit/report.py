"""Serialization of fit results: JSON reports and a paper-style text table."""

from __future__ import annotations

import json

import numpy as np

from .errors import DataError
from .estimator import FitResult, LrTestResult, chi2_sf


def _coef_rows(fit: FitResult):
    rows = []
    for j, name in enumerate(fit.param_names):
        est = float(fit.params[j])
        se = float(fit.std_errors[j]) if fit.std_errors is not None else None
        zstat = est / se if se not in (None, 0.0) else None
        # two-sided normal p-value, written as chi-square(1) of z^2
        pval = chi2_sf(zstat * zstat, 1) if zstat is not None else None
        rows.append({"name": name, "estimate": est, "std_error": se,
                     "z": zstat, "p": pval})
    return rows


def fit_to_dict(fit: FitResult, lr: LrTestResult | None = None) -> dict:
    out = {
        "model": fit.model,
        "converged": fit.converged,
        "status": fit.status,
        "loglik": fit.loglik,
        "n_obs": fit.n_obs,
        "n_clusters": fit.n_clusters,
        "coefficients": _coef_rows(fit) if fit.converged else [],
        "rho": fit.rho_hat,
        "fixed_rho": fit.fixed_rho,
        "invite_names": fit.invite_names,
        "accept_names": fit.accept_names,
        "seed": fit.seed,
        "start_log": [{"start": s, "loglik": ll, "status": st}
                      for s, ll, st in fit.start_log],
        "n_starts_converged_to_best": fit.n_starts_converged_to_best,
    }
    if lr is not None:
        out["lr_test_rho"] = {"statistic": lr.statistic, "df": lr.df,
                              "p_value": lr.p_value}
    return out


def fit_to_json(fit: FitResult, lr: LrTestResult | None = None) -> str:
    return json.dumps(fit_to_dict(fit, lr), indent=2, sort_keys=True)


def write_fit_json(fit: FitResult, path, lr: LrTestResult | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(fit_to_json(fit, lr))
        fh.write("\n")


def load_fit_dict(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read fit report {path}: {exc}") from exc


def params_from_fit_dict(d: dict) -> dict:
    """Extract {"beta_invite": {...}, "beta_accept": {...}, "rho": r} from a report."""
    beta_i, beta_a = {}, {}
    for row in d.get("coefficients", []):
        name = row["name"]
        if name == "rho":
            continue
        eqn, _, coef = name.partition(":")
        (beta_i if eqn == "invite" else beta_a)[coef] = row["estimate"]
    return {"beta_invite": beta_i, "beta_accept": beta_a,
            "rho": d.get("rho") or 0.0}


def _panel(lines, title, names, prefix, rows):
    lines.append(title)
    for name in names:
        row = rows[f"{prefix}:{name}"]
        se = "" if row["std_error"] is None else f"({row['std_error']:.3f})"
        lines.append(f"  {name:<22s}{row['estimate']:>10.3f}  {se}")


def fit_report_text(fit: FitResult, lr: LrTestResult | None = None) -> str:
    """Two-panel table (invite, accept) with loglik, N, and the rho = 0 test."""
    if fit.model != "biprobit":
        lines = ["Univariate probit"]
        for row in _coef_rows(fit):
            se = "" if row["std_error"] is None else f"({row['std_error']:.3f})"
            lines.append(f"  {row['name']:<22s}{row['estimate']:>10.3f}  {se}")
        lines.append(f"  {'Log pseudolikelihood':<22s}{fit.loglik:>12.3f}")
        lines.append(f"  {'Observations':<22s}{fit.n_obs:>12d}")
        return "\n".join(lines) + "\n"
    if not fit.converged:
        return ("Bivariate probit with partial observability: NOT CONVERGED\n"
                + "\n".join(f"  start {s}: loglik {ll:.6f} ({st})"
                            for s, ll, st in fit.start_log) + "\n")
    rows = {r["name"]: r for r in _coef_rows(fit)}
    lines = ["Bivariate probit with partial observability"]
    _panel(lines, "Probability to invite", fit.invite_names, "invite", rows)
    _panel(lines, "Probability to accept", fit.accept_names, "accept", rows)
    if not fit.fixed_rho:
        row = rows["rho"]
        se = "" if row["std_error"] is None else f"({row['std_error']:.3f})"
        lines.append(f"  {'rho':<22s}{row['estimate']:>10.3f}  {se}")
    lines.append(f"  {'Log pseudolikelihood':<22s}{fit.loglik:>12.3f}")
    lines.append(f"  {'Observations':<22s}{fit.n_obs:>12d}")
    if lr is not None:
        lines.append(f"  {'Test rho=0':<22s}{lr.statistic:>12.3f}"
                     f"   (p = {lr.p_value:.4f})")
    return "\n".join(lines) + "\n"
