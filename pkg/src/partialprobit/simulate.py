"""Synthetic two-sided seminar markets drawn from the structural model.

The generator produces department and scholar rosters, crosses them with the
same pipeline used for real data, draws correlated latent shocks, and applies
the threshold rules: an invitation is issued when the invite index plus its
shock is positive, accepted when the accept index plus its shock is positive,
and only the product of the two indicators is observable.

Randomness comes from counter-based Philox streams keyed by (seed, domain,
entity index): domain 1 for departments, 2 for scholars, 3 for a scholar's
dyad shocks, so growing the roster leaves existing entities' draws unchanged.
Shocks use the Cholesky form e2 = rho*e1 + sqrt(1-rho^2)*eta.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import (DEFAULT_REFERENCE_YEAR, MIN_DEPARTMENT_SIZE,
                   DepartmentRecord, ScholarRecord, build_design, build_dyads)
from .errors import DataError
from .estimator import FitOptions, fit_biprobit_partial, lr_test_rho

_DOMAIN_DEPT = 1
_DOMAIN_SCHOLAR = 2
_DOMAIN_SHOCK = 3


def _stream(seed: int, domain: int, index: int) -> np.random.Generator:
    key = np.array([np.uint64(seed & (2**64 - 1)),
                    np.uint64((domain << 48) | index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class SimConfig:
    """Full description of a synthetic seminar market.

    Defaults give 41 x 5000 - 5000 = 200,000 dyads with roster magnitudes
    loosely matching the real-data setting (23% female share, 61% with a
    citations profile, skewed quality).
    """
    n_departments: int = 41
    n_scholars: int = 5000
    true_beta_invite: dict = field(default_factory=lambda: {
        "const": -1.0, "affiliation_quality": 0.5, "dept_size": 0.3,
        "female": 0.0, "distance": -0.4})
    true_beta_accept: dict = field(default_factory=lambda: {
        "const": -1.0, "dept_quality": 0.6, "affiliation_quality": -0.2,
        "distance": -0.3})
    true_rho: float = 0.3
    quality_log_mean: float = 3.0
    quality_log_sd: float = 1.0
    size_min: int = 5
    size_max: int = 15
    female_share: float = 0.23
    lat_range: tuple = (36.0, 40.0)
    lon_range: tuple = (-100.0, -96.0)
    career_age_min: int = 1
    career_age_max: int = 40
    citations_log_mean: float = 4.0
    citations_log_sd: float = 1.0
    profile_share: float = 0.61
    reference_year: int = DEFAULT_REFERENCE_YEAR
    seed: int = 0

    def __post_init__(self):
        if self.n_departments < 1 or self.n_scholars < 1:
            raise DataError("roster sizes must be positive")
        for share in (self.female_share, self.profile_share):
            if not 0.0 <= share <= 1.0:
                raise DataError("shares must lie in [0, 1]")
        if not -1.0 < self.true_rho < 1.0:
            raise DataError("true_rho must lie in (-1, 1)")
        if self.size_min < MIN_DEPARTMENT_SIZE or self.size_max < self.size_min:
            raise DataError(
                f"department size range must sit within the inclusion rule "
                f"(minimum {MIN_DEPARTMENT_SIZE})")
        if self.career_age_min < 1 or self.career_age_max < self.career_age_min:
            raise DataError("career-age range invalid")
        if self.quality_log_sd <= 0 or self.citations_log_sd <= 0:
            raise DataError("log-scale dispersions must be positive")
        if "const" not in self.true_beta_invite or "const" not in self.true_beta_accept:
            raise DataError("coefficient maps must include 'const'")

    @property
    def invite_spec(self) -> list:
        return [k for k in self.true_beta_invite if k != "const"]

    @property
    def accept_spec(self) -> list:
        return [k for k in self.true_beta_accept if k != "const"]

    def truth_vector(self):
        """Truth on the reporting scale, ordered like fit params."""
        names = ([f"invite:{n}" for n in ["const"] + self.invite_spec]
                 + [f"accept:{n}" for n in ["const"] + self.accept_spec]
                 + ["rho"])
        values = ([self.true_beta_invite["const"]]
                  + [self.true_beta_invite[k] for k in self.invite_spec]
                  + [self.true_beta_accept["const"]]
                  + [self.true_beta_accept[k] for k in self.accept_spec]
                  + [self.true_rho])
        return names, np.array(values)

    @classmethod
    def from_json(cls, path) -> "SimConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read simulation config {path}: {exc}") from exc
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise DataError(f"unknown SimConfig fields: {sorted(unknown)}")
        for key in ("lat_range", "lon_range"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def gen_population(config: SimConfig):
    """Draw department and scholar rosters from the configured distributions."""
    departments = []
    for i in range(config.n_departments):
        rng = _stream(config.seed, _DOMAIN_DEPT, i)
        departments.append(DepartmentRecord(
            dept_id=f"D{i:05d}",
            name=f"Department {i}",
            quality_index=float(np.exp(config.quality_log_mean
                                       + config.quality_log_sd
                                       * rng.standard_normal())),
            n_professors=int(rng.integers(config.size_min, config.size_max + 1)),
            latitude=float(rng.uniform(*config.lat_range)),
            longitude=float(rng.uniform(*config.lon_range)),
        ))
    scholars = []
    for j in range(config.n_scholars):
        rng = _stream(config.seed, _DOMAIN_SCHOLAR, j)
        affiliation = int(rng.integers(0, config.n_departments))
        female = bool(rng.uniform() < config.female_share)
        has_profile = bool(rng.uniform() < config.profile_share)
        age = int(rng.integers(config.career_age_min, config.career_age_max + 1))
        citations = int(round(float(np.exp(config.citations_log_mean
                                           + config.citations_log_sd
                                           * rng.standard_normal())) * age))
        scholars.append(ScholarRecord(
            scholar_id=f"S{j:06d}",
            name=f"Scholar {j}",
            affiliation_dept_id=f"D{affiliation:05d}",
            female=female,
            citations_total=citations if has_profile else None,
            first_pub_year=(config.reference_year - age + 1) if has_profile else None,
        ))
    return departments, scholars


@dataclass
class SimOutput:
    departments: list
    scholars: list
    dyads: list                 # DyadRow, z filled in
    design: object              # DesignMatrices aligned with dyads
    latent_invite: np.ndarray   # I indicator per dyad (oracle use only)
    latent_accept: np.ndarray   # A indicator per dyad
    shocks: np.ndarray          # (n, 2) latent disturbances

    def seminar_events(self):
        when = f"{DEFAULT_REFERENCE_YEAR}-06-15"
        return [(r.dept_id, r.scholar_id, when) for r in self.dyads if r.z == 1]

    def write_csvs(self, out_dir):
        """Write the three pipeline CSVs (round-trips through the data module)."""
        import os
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "departments.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["dept_id", "name", "quality_index", "n_professors",
                        "latitude", "longitude"])
            for d in self.departments:
                w.writerow([d.dept_id, d.name, repr(d.quality_index),
                            d.n_professors, repr(d.latitude), repr(d.longitude)])
        with open(os.path.join(out_dir, "scholars.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["scholar_id", "name", "affiliation_dept_id", "female",
                        "citations_total", "first_pub_year"])
            for s in self.scholars:
                w.writerow([s.scholar_id, s.name, s.affiliation_dept_id,
                            int(s.female),
                            "" if s.citations_total is None else s.citations_total,
                            "" if s.first_pub_year is None else s.first_pub_year])
        with open(os.path.join(out_dir, "seminars.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["dept_id", "scholar_id", "date", "title"])
            for dept_id, scholar_id, when in self.seminar_events():
                w.writerow([dept_id, scholar_id, when, ""])


def simulate_dyads(departments, scholars, beta_invite: dict, beta_accept: dict,
                   rho: float, seed: int,
                   reference_year: int = DEFAULT_REFERENCE_YEAR) -> SimOutput:
    """Draw observed outcomes for the full dyad cross of a population.

    ``beta_invite`` / ``beta_accept`` are named coefficient maps including
    'const'; names must match the covariate transform table.
    """
    for m in (beta_invite, beta_accept):
        if "const" not in m:
            raise DataError("coefficient maps must include 'const'")
    invite_spec = [k for k in beta_invite if k != "const"]
    accept_spec = [k for k in beta_accept if k != "const"]

    dyads = build_dyads(departments, scholars, (), reference_year)
    design = build_design(dyads, invite_spec, accept_spec)
    if design.n_obs != len(dyads):
        raise DataError("simulated covariates are missing for some dyads; the "
                        "chosen coefficient names need fully observed covariates")
    b_i = np.array([beta_invite["const"]] + [beta_invite[k] for k in invite_spec])
    b_a = np.array([beta_accept["const"]] + [beta_accept[k] for k in accept_spec])
    a = design.x_invite @ b_i
    b = design.x_accept @ b_a

    n_d = len(departments)
    scholar_ids = sorted(s.scholar_id for s in scholars)
    scholar_pos = {sid: j for j, sid in enumerate(scholar_ids)}
    dept_ids = sorted(d.dept_id for d in departments)
    dept_pos = {did: i for i, did in enumerate(dept_ids)}

    # One shock stream per scholar: a (n_departments, 2) block, so adding
    # scholars never disturbs existing draws.
    eps1_mat = np.empty((n_d, len(scholars)))
    eta_mat = np.empty((n_d, len(scholars)))
    for sid, j in scholar_pos.items():
        rng = _stream(seed, _DOMAIN_SHOCK, j)
        block = rng.standard_normal((n_d, 2))
        eps1_mat[:, j] = block[:, 0]
        eta_mat[:, j] = block[:, 1]

    rows_d = np.array([dept_pos[r.dept_id] for r in dyads])
    rows_s = np.array([scholar_pos[r.scholar_id] for r in dyads])
    eps1 = eps1_mat[rows_d, rows_s]
    eps2 = rho * eps1 + np.sqrt(1.0 - rho * rho) * eta_mat[rows_d, rows_s]

    invited = (a + eps1 > 0.0).astype(int)
    accepted = (b + eps2 > 0.0).astype(int)
    z = invited * accepted
    for r, zi in zip(dyads, z):
        r.z = int(zi)
    design.z = z.astype(float)
    return SimOutput(departments, scholars, dyads, design,
                     invited, accepted, np.column_stack([eps1, eps2]))


def simulate_market(config: SimConfig) -> SimOutput:
    """gen_population + simulate_dyads under a single config."""
    departments, scholars = gen_population(config)
    return simulate_dyads(departments, scholars, config.true_beta_invite,
                          config.true_beta_accept, config.true_rho, config.seed,
                          config.reference_year)


@dataclass
class McReport:
    param_names: list
    truth: np.ndarray
    estimates: np.ndarray        # (n_replications, k), NaN rows for failures
    std_errors: np.ndarray
    bias: np.ndarray
    mc_se: np.ndarray
    rmse: np.ndarray
    coverage: np.ndarray | None  # share of 95% intervals covering truth
    lr_statistics: np.ndarray | None
    lr_rejection_rate: float | None
    n_replications: int
    n_failures: int
    degenerate: bool             # single replication: MC SEs are zero

    def to_dict(self) -> dict:
        return {
            "param_names": list(self.param_names),
            "truth": self.truth.tolist(),
            "bias": self.bias.tolist(),
            "mc_se": self.mc_se.tolist(),
            "rmse": self.rmse.tolist(),
            "coverage": None if self.coverage is None else self.coverage.tolist(),
            "lr_rejection_rate": self.lr_rejection_rate,
            "n_replications": self.n_replications,
            "n_failures": self.n_failures,
            "degenerate": self.degenerate,
        }


def _rep_seed(base_seed: int, replication: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=(replication,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def monte_carlo(config: SimConfig, n_replications: int,
                options: FitOptions | None = None, do_lr_test: bool = True,
                compute_coverage: bool = True) -> McReport:
    """Repeated simulate-then-fit study with independent sub-seeds.

    A replication whose fit fails (exception or non-convergence) is recorded
    as a failure, not fatal. Results are aggregated in replication order, so
    the report is deterministic.
    """
    if n_replications < 1:
        raise DataError("n_replications must be at least 1")
    options = options or FitOptions(n_starts=1)
    names, truth = config.truth_vector()
    k = len(truth)
    estimates = np.full((n_replications, k), np.nan)
    ses = np.full((n_replications, k), np.nan)
    lr_stats = np.full(n_replications, np.nan) if do_lr_test else None
    n_failures = 0
    for r in range(n_replications):
        rep_cfg_seed = _rep_seed(config.seed, r)
        rep_config = SimConfig(**{**asdict(config), "seed": rep_cfg_seed})
        try:
            sim = simulate_market(rep_config)
            rep_opts = FitOptions(**{**asdict_options(options),
                                     "seed": rep_cfg_seed,
                                     "fix_rho_at_zero": False})
            fit = fit_biprobit_partial(sim.design, rep_opts,
                                       compute_covariance=compute_coverage)
            if not fit.converged:
                raise DataError(f"replication {r}: {fit.status}")
            estimates[r] = fit.params
            if compute_coverage and fit.std_errors is not None:
                ses[r] = fit.std_errors
            if do_lr_test:
                restr_opts = FitOptions(**{**asdict_options(options),
                                           "seed": rep_cfg_seed,
                                           "fix_rho_at_zero": True})
                fit0 = fit_biprobit_partial(sim.design, restr_opts,
                                            compute_covariance=False)
                if not fit0.converged:
                    raise DataError(f"replication {r} (restricted): {fit0.status}")
                lr_stats[r] = lr_test_rho(fit, fit0).statistic
        except Exception:
            n_failures += 1
            estimates[r] = np.nan
            ses[r] = np.nan
            if do_lr_test:
                lr_stats[r] = np.nan

    ok = ~np.isnan(estimates[:, 0])
    n_ok = int(ok.sum())
    if n_ok == 0:
        raise DataError("every replication failed")
    est_ok = estimates[ok]
    bias = est_ok.mean(axis=0) - truth
    mc_se = (est_ok.std(axis=0, ddof=1) / np.sqrt(n_ok)
             if n_ok > 1 else np.zeros(k))
    rmse = np.sqrt(((est_ok - truth) ** 2).mean(axis=0))
    coverage = None
    if compute_coverage:
        crit95 = 1.959963984540054
        hit = np.abs(est_ok - truth) <= crit95 * ses[ok]
        if names[-1] == "rho":
            # Correlation intervals are built on the Fisher-z scale (the
            # rho-scale Wald interval misbehaves near the +-1 boundary).
            r = np.clip(est_ok[:, -1], -1 + 1e-12, 1 - 1e-12)
            se_z = ses[ok][:, -1] / (1.0 - r * r)
            lo = np.tanh(np.arctanh(r) - crit95 * se_z)
            hi = np.tanh(np.arctanh(r) + crit95 * se_z)
            hit[:, -1] = (lo <= truth[-1]) & (truth[-1] <= hi)
        coverage = hit.mean(axis=0)
    lr_rate = None
    if do_lr_test:
        crit = 3.841458820694124  # chi-square(1) 95th percentile
        lr_rate = float((lr_stats[ok] > crit).mean())
    return McReport(names, truth, estimates, ses, bias, mc_se, rmse, coverage,
                    lr_stats, lr_rate, n_replications, n_failures,
                    degenerate=(n_ok == 1))


def asdict_options(options: FitOptions) -> dict:
    return {f: getattr(options, f) for f in FitOptions.__dataclass_fields__}
