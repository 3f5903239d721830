"""Probability predictions and counterfactual ratio queries.

Parameters come either from a fitted model or from an explicit coefficient
map, so published coefficient tables can be queried without refitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError
from .normals import PROB_FLOOR, bvn_cdf, std_normal_cdf

EQUATIONS = ("invite", "accept", "seminar")


@dataclass
class RatioQuery:
    equation: str
    baseline: dict
    counterfactual: dict
    parameters: dict       # {"beta_invite": {...}, "beta_accept": {...}, "rho": r}


def _index(beta: dict, covariates: dict, equation: str) -> float:
    missing = [k for k in beta if k != "const" and k not in covariates]
    if missing:
        raise DataError(f"{equation} query is missing covariate value(s): "
                        f"{sorted(missing)}")
    return beta.get("const", 0.0) + sum(
        beta[k] * float(covariates[k]) for k in beta if k != "const")


def predict(equation: str, covariates: dict, parameters: dict) -> float:
    """Invite/accept marginal probability or the joint seminar probability."""
    if equation not in EQUATIONS:
        raise DomainError(f"equation must be one of {EQUATIONS}")
    beta_i = parameters.get("beta_invite", {})
    beta_a = parameters.get("beta_accept", {})
    if equation == "invite":
        return float(std_normal_cdf(_index(beta_i, covariates, "invite")))
    if equation == "accept":
        return float(std_normal_cdf(_index(beta_a, covariates, "accept")))
    rho = float(parameters.get("rho", 0.0))
    return float(bvn_cdf(_index(beta_i, covariates, "invite"),
                         _index(beta_a, covariates, "accept"), rho))


def prob_ratio(query: RatioQuery) -> dict:
    """Counterfactual-to-baseline probability ratio with both probabilities."""
    p_base = predict(query.equation, query.baseline, query.parameters)
    p_cf = predict(query.equation, query.counterfactual, query.parameters)
    if p_base <= PROB_FLOOR:
        raise DomainError(
            "baseline probability underflows the representable floor; rescale "
            "the baseline covariates")
    return {"ratio": p_cf / p_base, "baseline_prob": p_base,
            "counterfactual_prob": p_cf}
