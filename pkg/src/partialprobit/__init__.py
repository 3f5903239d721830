"""Bivariate probit with partial observability for two-sided seminar markets."""

from .data import (DepartmentRecord, DesignMatrices, DyadRow, ScholarRecord,
                   build_design, build_dyads, career_age, haversine_km,
                   load_departments, load_scholars, load_seminars)
from .errors import (DataError, DomainError, NumericalError,
                     PartialProbitError, SpecError)
from .estimator import (FitOptions, FitResult, LrTestResult, chi2_sf,
                        clustered_covariance, fit_biprobit_partial, fit_probit,
                        lr_test_rho)
from .likelihood import (LoglikResult, ParameterVector, biprobit_loglik,
                         probit_loglik, seminar_prob)
from .normals import (bvn_cdf, bvn_pdf, std_normal_cdf, std_normal_pdf,
                      std_normal_quantile)
from .queries import RatioQuery, predict, prob_ratio
from .simulate import (McReport, SimConfig, SimOutput, gen_population,
                       monte_carlo, simulate_dyads, simulate_market)

__version__ = "0.1.0"

__all__ = [
    "DepartmentRecord", "DesignMatrices", "DyadRow", "ScholarRecord",
    "build_design", "build_dyads", "career_age", "haversine_km",
    "load_departments", "load_scholars", "load_seminars",
    "DataError", "DomainError", "NumericalError", "PartialProbitError",
    "SpecError",
    "FitOptions", "FitResult", "LrTestResult", "chi2_sf",
    "clustered_covariance", "fit_biprobit_partial", "fit_probit", "lr_test_rho",
    "LoglikResult", "ParameterVector", "biprobit_loglik", "probit_loglik",
    "seminar_prob",
    "bvn_cdf", "bvn_pdf", "std_normal_cdf", "std_normal_pdf",
    "std_normal_quantile",
    "RatioQuery", "predict", "prob_ratio",
    "McReport", "SimConfig", "SimOutput", "gen_population", "monte_carlo",
    "simulate_dyads", "simulate_market",
]
