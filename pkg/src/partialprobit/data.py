"""Dyadic sample construction for the two-sided seminar market.

Rosters of departments and scholars are crossed into (department, scholar)
dyads, own-department pairs are excluded, and the observed outcome z is set
from the seminar-event file. Covariate transforms (logs of quality and
distance, citations per career year) are applied when the design matrices
are built, so the dyad table itself keeps raw measurements.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .errors import DataError, DomainError, SpecError

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0088
DEFAULT_REFERENCE_YEAR = 2018
MIN_DEPARTMENT_SIZE = 5


@dataclass
class DepartmentRecord:
    dept_id: str
    name: str
    quality_index: float
    n_professors: int
    latitude: float
    longitude: float
    held_seminar_in_year: bool = False


@dataclass
class ScholarRecord:
    scholar_id: str
    name: str
    affiliation_dept_id: str
    female: bool
    citations_total: int | None = None
    first_pub_year: int | None = None
    presented_in_year: bool = False


@dataclass(slots=True)
class DyadRow:
    """One (department, scholar) pair of the estimation sample.

    Quality fields are raw (untransformed) measurements; ``affiliation_quality``
    and the citation fields are None when the underlying data are missing.
    """
    dept_id: str
    scholar_id: str
    z: int
    distance_km: float
    dept_quality: float
    dept_size: int
    female: int
    affiliation_quality: float | None
    citations_total: int | None
    career_age: int | None


@dataclass
class DesignMatrices:
    x_invite: np.ndarray
    x_accept: np.ndarray
    z: np.ndarray
    cluster_id: np.ndarray
    invite_names: list[str]
    accept_names: list[str]
    n_dropped: int = 0

    def __post_init__(self):
        n = len(self.z)
        if not (self.x_invite.shape[0] == self.x_accept.shape[0] == n
                == len(self.cluster_id)):
            raise DataError("design components have inconsistent row counts")

    @property
    def n_obs(self) -> int:
        return len(self.z)


def career_age(first_pub_year: int, reference_year: int) -> int:
    """Career age: reference year minus year of earliest publication, plus one."""
    if first_pub_year > reference_year:
        raise DomainError(
            f"first publication year {first_pub_year} is after the reference "
            f"year {reference_year}")
    return reference_year - first_pub_year + 1


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometers on a sphere of radius 6371.0088 km."""
    for lat in (lat1, lat2):
        if not -90.0 <= lat <= 90.0:
            raise DomainError(f"latitude {lat} outside [-90, 90]")
    for lon in (lon1, lon2):
        if not -180.0 <= lon <= 180.0:
            raise DomainError(f"longitude {lon} outside [-180, 180]")
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2) - math.radians(lon1)
    h = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def _haversine_km_vec(lat1, lon1, lat2, lon2):
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dp / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def _read_csv(path, required_columns):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file, header row required")
        missing = [c for c in required_columns if c not in reader.fieldnames]
        if missing:
            raise DataError(f"{path}: missing required columns {missing}")
        # Line numbers are 1-based and include the header.
        return [(i, row) for i, row in enumerate(reader, start=2)]


def _parse(row, col, kind, lineno, path, allow_blank=False):
    raw = (row.get(col) or "").strip()
    if raw == "":
        if allow_blank:
            return None
        raise DataError(f"{path}:{lineno}: column '{col}' is blank")
    try:
        return kind(raw)
    except ValueError as exc:
        raise DataError(
            f"{path}:{lineno}: column '{col}' has malformed value {raw!r}") from exc


def _parse_flag(row, col, lineno, path):
    raw = (row.get(col) or "").strip()
    if raw not in ("0", "1"):
        raise DataError(f"{path}:{lineno}: column '{col}' must be 0 or 1, got {raw!r}")
    return raw == "1"


def load_departments(path) -> list[DepartmentRecord]:
    """Load departments.csv, enforcing the sample-inclusion invariants.

    Any violating row aborts the load; the error message carries a
    line-numbered report of every offending row.
    """
    rows = _read_csv(path, ["dept_id", "name", "quality_index", "n_professors",
                            "latitude", "longitude"])
    records, seen, problems = [], {}, []
    for lineno, row in rows:
        dept_id = _parse(row, "dept_id", str, lineno, path)
        if dept_id in seen:
            raise DataError(
                f"{path}:{lineno}: duplicate dept_id '{dept_id}' "
                f"(first seen on line {seen[dept_id]})")
        seen[dept_id] = lineno
        quality = _parse(row, "quality_index", float, lineno, path)
        n_prof = _parse(row, "n_professors", int, lineno, path)
        lat = _parse(row, "latitude", float, lineno, path)
        lon = _parse(row, "longitude", float, lineno, path)
        if quality <= 0:
            problems.append(f"line {lineno}: quality_index must be positive")
        if n_prof < MIN_DEPARTMENT_SIZE:
            problems.append(
                f"line {lineno}: department '{dept_id}' has {n_prof} professors; "
                f"inclusion rule requires at least {MIN_DEPARTMENT_SIZE}")
        if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
            problems.append(f"line {lineno}: coordinates out of range")
        records.append(DepartmentRecord(dept_id, row.get("name", ""), quality,
                                        n_prof, lat, lon))
    if problems:
        raise DataError(f"{path}: invalid rows:\n" + "\n".join(problems))
    return records


def load_scholars(path, reference_year: int = DEFAULT_REFERENCE_YEAR
                  ) -> list[ScholarRecord]:
    """Load scholars.csv; citation fields may be blank (no Google Scholar profile)."""
    rows = _read_csv(path, ["scholar_id", "name", "affiliation_dept_id", "female",
                            "citations_total", "first_pub_year"])
    records, seen, problems = [], {}, []
    for lineno, row in rows:
        scholar_id = _parse(row, "scholar_id", str, lineno, path)
        if scholar_id in seen:
            raise DataError(
                f"{path}:{lineno}: duplicate scholar_id '{scholar_id}' "
                f"(first seen on line {seen[scholar_id]})")
        seen[scholar_id] = lineno
        female = _parse_flag(row, "female", lineno, path)
        citations = _parse(row, "citations_total", int, lineno, path, allow_blank=True)
        first_pub = _parse(row, "first_pub_year", int, lineno, path, allow_blank=True)
        if citations is not None and citations < 0:
            problems.append(f"line {lineno}: citations_total must be nonnegative")
        if first_pub is not None and first_pub > reference_year:
            problems.append(
                f"line {lineno}: first_pub_year {first_pub} is after the "
                f"reference year {reference_year}")
        records.append(ScholarRecord(
            scholar_id, row.get("name", ""),
            _parse(row, "affiliation_dept_id", str, lineno, path),
            female, citations, first_pub))
    if problems:
        raise DataError(f"{path}: invalid rows:\n" + "\n".join(problems))
    return records


def load_seminars(path) -> list[tuple[str, str, date]]:
    """Load seminars.csv as (dept_id, scholar_id, date) events."""
    rows = _read_csv(path, ["dept_id", "scholar_id", "date"])
    events = []
    for lineno, row in rows:
        raw = (row.get("date") or "").strip()
        try:
            when = date.fromisoformat(raw)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: date {raw!r} is not ISO-8601") from exc
        events.append((_parse(row, "dept_id", str, lineno, path),
                       _parse(row, "scholar_id", str, lineno, path), when))
    return events


def build_dyads(departments, scholars, seminars=(),
                reference_year: int = DEFAULT_REFERENCE_YEAR) -> list[DyadRow]:
    """Cross departments with scholars, excluding own-department pairs.

    ``seminars`` are (dept_id, scholar_id, date) events; pairs that appear get
    z = 1. Repeated events for the same pair collapse to a single z = 1 with a
    warning (the outcome is binary). Events by scholars absent from the roster
    are dropped with a warning; events naming an unknown department are an
    error. Output is sorted by (dept_id, scholar_id) so construction is
    deterministic.
    """
    departments = sorted(departments, key=lambda d: d.dept_id)
    scholars = sorted(scholars, key=lambda s: s.scholar_id)
    dept_index = {d.dept_id: d for d in departments}
    if len(dept_index) != len(departments):
        raise DataError("duplicate dept_id in departments")
    scholar_index = {s.scholar_id: s for s in scholars}

    matched = set()
    dropped_scholars = set()
    duplicates = 0
    for dept_id, scholar_id, _when in seminars:
        if dept_id not in dept_index:
            raise DataError(f"seminar event references unknown dept_id '{dept_id}'")
        if scholar_id not in scholar_index:
            dropped_scholars.add(scholar_id)
            continue
        key = (dept_id, scholar_id)
        if key in matched:
            duplicates += 1
        matched.add(key)
        dept_index[dept_id].held_seminar_in_year = True
        scholar_index[scholar_id].presented_in_year = True
    if duplicates:
        log.warning("%d repeated (department, scholar) seminar events collapsed "
                    "to z = 1", duplicates)
    if dropped_scholars:
        log.warning("dropped seminar events for %d presenters absent from the "
                    "scholar roster: %s", len(dropped_scholars),
                    ", ".join(sorted(dropped_scholars)))

    # Vectorized pairwise distances; scholars sit at their affiliation.
    d_lat = np.array([d.latitude for d in departments])
    d_lon = np.array([d.longitude for d in departments])
    s_lat = np.array([dept_index[s.affiliation_dept_id].latitude
                      if s.affiliation_dept_id in dept_index else np.nan
                      for s in scholars])
    s_lon = np.array([dept_index[s.affiliation_dept_id].longitude
                      if s.affiliation_dept_id in dept_index else np.nan
                      for s in scholars])

    rows = []
    for di, dept in enumerate(departments):
        dist = _haversine_km_vec(d_lat[di], d_lon[di], s_lat, s_lon)
        for si, sch in enumerate(scholars):
            if sch.affiliation_dept_id == dept.dept_id:
                continue
            affil = dept_index.get(sch.affiliation_dept_id)
            age = (career_age(sch.first_pub_year, reference_year)
                   if sch.first_pub_year is not None else None)
            rows.append(DyadRow(
                dept_id=dept.dept_id,
                scholar_id=sch.scholar_id,
                z=1 if (dept.dept_id, sch.scholar_id) in matched else 0,
                distance_km=float(dist[si]) if affil is not None else float("nan"),
                dept_quality=dept.quality_index,
                dept_size=dept.n_professors,
                female=int(sch.female),
                affiliation_quality=affil.quality_index if affil else None,
                citations_total=sch.citations_total,
                career_age=age,
            ))
    return rows


def _col_distance(r):
    return math.log1p(r.distance_km) if not math.isnan(r.distance_km) else math.nan


# Covariate name -> per-row transform. Quality enters in logs, distance as
# ln(1 + km) so colocated institutions stay finite, citations per career year
# as ln(1 + c/age). The table is the single source of truth for build_design
# and the simulator.
COVARIATE_TRANSFORMS = {
    "affiliation_quality": lambda r: (math.log(r.affiliation_quality)
                                      if r.affiliation_quality is not None else math.nan),
    "citations_quality": lambda r: (math.log1p(r.citations_total / r.career_age)
                                    if r.citations_total is not None
                                    and r.career_age is not None else math.nan),
    "dept_quality": lambda r: math.log(r.dept_quality),
    "dept_size": lambda r: float(r.dept_size),
    "female": lambda r: float(r.female),
    "distance": _col_distance,
    "career_age": lambda r: (float(r.career_age)
                             if r.career_age is not None else math.nan),
}

# The paper's two quality proxies, as ready-made covariate specifications.
SPEC_PRESETS = {
    "affiliation": (
        ["affiliation_quality", "dept_size", "female", "distance"],
        ["dept_quality", "affiliation_quality", "distance"],
    ),
    "citations": (
        ["citations_quality", "dept_size", "female", "distance"],
        ["dept_quality", "citations_quality", "distance", "career_age"],
    ),
}


def _check_spec(names, which):
    if "const" in names:
        raise SpecError(f"{which} spec must not list 'const'; the intercept is "
                        "added automatically")
    unknown = [n for n in names if n not in COVARIATE_TRANSFORMS]
    if unknown:
        raise SpecError(f"unknown covariate name(s) in {which} spec: {unknown}")
    if len(set(names)) != len(names):
        raise SpecError(f"{which} spec repeats a covariate")


def build_design(dyads, invite_spec, accept_spec,
                 drop_missing: bool = False) -> DesignMatrices:
    """Assemble invite/accept design matrices from a dyad sample.

    Each equation gets an intercept column named 'const'. The exclusion
    restriction is enforced: the two covariate sets must differ by at least
    one name. Rows with a missing required covariate are dropped (and counted)
    when ``drop_missing`` is set, otherwise they are an error.
    """
    _check_spec(invite_spec, "invite")
    _check_spec(accept_spec, "accept")
    if set(invite_spec) == set(accept_spec):
        raise SpecError(
            "exclusion restriction violated: invite and accept covariate sets "
            "are identical; at least one covariate must appear in only one "
            "equation")

    needed = list(dict.fromkeys(list(invite_spec) + list(accept_spec)))
    cols = {name: np.array([COVARIATE_TRANSFORMS[name](r) for r in dyads])
            for name in needed}
    z = np.array([r.z for r in dyads], dtype=float)
    cluster = np.array([r.scholar_id for r in dyads], dtype=object)

    keep = np.ones(len(z), dtype=bool)
    for name in needed:
        keep &= ~np.isnan(cols[name])
    n_dropped = int((~keep).sum())
    if n_dropped and not drop_missing:
        raise DataError(
            f"{n_dropped} rows have missing covariates; pass drop_missing=True "
            "to drop them")
    if n_dropped:
        log.info("dropped %d rows with missing covariates", n_dropped)

    def matrix(names):
        return np.column_stack(
            [np.ones(int(keep.sum()))] + [cols[n][keep] for n in names])

    return DesignMatrices(
        x_invite=matrix(invite_spec),
        x_accept=matrix(accept_spec),
        z=z[keep],
        cluster_id=cluster[keep],
        invite_names=["const"] + list(invite_spec),
        accept_names=["const"] + list(accept_spec),
        n_dropped=n_dropped,
    )


DYAD_CSV_COLUMNS = ["dept_id", "scholar_id", "z", "distance_km", "dept_quality",
                    "dept_size", "female", "affiliation_quality",
                    "citations_total", "career_age"]


def write_dyads_csv(dyads, path):
    """Write the dyad sample with full-precision floats (deterministic bytes)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(DYAD_CSV_COLUMNS)
        for r in dyads:
            w.writerow([
                r.dept_id, r.scholar_id, r.z, repr(r.distance_km),
                repr(r.dept_quality), r.dept_size, r.female,
                "" if r.affiliation_quality is None else repr(r.affiliation_quality),
                "" if r.citations_total is None else r.citations_total,
                "" if r.career_age is None else r.career_age,
            ])


def read_dyads_csv(path) -> list[DyadRow]:
    rows = _read_csv(path, DYAD_CSV_COLUMNS)
    out = []
    for lineno, row in rows:
        out.append(DyadRow(
            dept_id=_parse(row, "dept_id", str, lineno, path),
            scholar_id=_parse(row, "scholar_id", str, lineno, path),
            z=_parse(row, "z", int, lineno, path),
            distance_km=_parse(row, "distance_km", float, lineno, path),
            dept_quality=_parse(row, "dept_quality", float, lineno, path),
            dept_size=_parse(row, "dept_size", int, lineno, path),
            female=_parse(row, "female", int, lineno, path),
            affiliation_quality=_parse(row, "affiliation_quality", float, lineno,
                                       path, allow_blank=True),
            citations_total=_parse(row, "citations_total", int, lineno, path,
                                   allow_blank=True),
            career_age=_parse(row, "career_age", int, lineno, path,
                              allow_blank=True),
        ))
    return out
