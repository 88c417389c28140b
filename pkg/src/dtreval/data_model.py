"""Longitudinal cohort schema and validation.

Canonical representation is long format: one row per patient-day with columns
``id``, ``k`` (day index), ``a`` (treatment, absorbing), ``y`` (event of
interest), ``z`` (competing event), ``at_risk`` plus real-valued covariate
columns.  Day indices run 0..K per patient; events can occur from day 1
onward (day 0 is the inclusion day).  Rows after the first terminal event are
dropped at ingest, so each patient series ends either at its event day or at
the horizon.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import GapError, OrderError, SchemaError

CORE_COLUMNS = ("id", "k", "a", "y", "z")

DEFAULT_SCHEMA = {
    "id": "id",
    "time": "time",
    "treatment": "treatment",
    "event_death": "event_death",
    "event_discharge": "event_discharge",
}


@dataclass(frozen=True)
class Violation:
    patient_id: object
    day: int
    rule: str

    def __str__(self) -> str:
        return f"patient {self.patient_id}, day {self.day}: {self.rule}"


@dataclass(frozen=True)
class Cohort:
    """Validated long-format cohort, immutable after construction.

    data: frame with canonical columns, sorted by (id, k).
    horizon: largest day index K present in the data (or imposed at ingest).
    covariates: names of the covariate columns.
    v_columns: baseline covariates designated for subgroup analysis; must be
        constant within each patient.
    """

    data: pd.DataFrame
    horizon: int
    covariates: tuple[str, ...]
    v_columns: tuple[str, ...] = ()

    @property
    def patient_ids(self) -> np.ndarray:
        return self.data["id"].unique()

    @property
    def n_patients(self) -> int:
        return self.data["id"].nunique()

    def subset(self, patient_ids) -> "Cohort":
        keep = self.data["id"].isin(np.asarray(patient_ids))
        return dataclasses.replace(self, data=self.data.loc[keep].reset_index(drop=True))

    def resample(self, patient_ids) -> "Cohort":
        """Bootstrap view: one copy per listed id, duplicates relabelled."""
        parts = []
        groups = dict(tuple(self.data.groupby("id", sort=False)))
        for j, pid in enumerate(patient_ids):
            g = groups[pid].copy()
            g["id"] = f"b{j}"
            parts.append(g)
        data = pd.concat(parts, ignore_index=True)
        return dataclasses.replace(self, data=data)

    def baseline(self) -> pd.DataFrame:
        """One row per patient: the day-0 record."""
        return self.data.loc[self.data["k"] == 0].reset_index(drop=True)


def _check_binary(series: pd.Series, name: str) -> np.ndarray:
    vals = pd.to_numeric(series, errors="coerce")
    if vals.isna().any() or not vals.isin((0, 1)).all():
        raise SchemaError(f"column {name!r} must contain only 0/1 values")
    return vals.to_numpy(dtype=np.int64)


def _vectorized_screen_clean(data: pd.DataFrame) -> bool:
    """True when no ordering rule is violated anywhere; whole-array screen so
    the per-patient diagnostic loop only runs on bad input."""
    df = data.sort_values(["id", "k"], kind="mergesort")
    ids = df["id"].to_numpy()
    k = df["k"].to_numpy()
    y = df["y"].to_numpy()
    z = df["z"].to_numpy()
    a = df["a"].to_numpy()
    new = np.ones(len(df), dtype=bool)
    new[1:] = ids[1:] != ids[:-1]
    cont = np.empty(len(df), dtype=bool)
    cont[new] = k[new] == 0
    within = ~new
    cont[within] = k[within.nonzero()[0]] == k[within.nonzero()[0] - 1] + 1
    if not cont.all():
        return False
    if ((k == 0) & ((y == 1) | (z == 1))).any():
        return False
    if ((y == 1) & (z == 1)).any():
        return False
    idx = within.nonzero()[0]
    if (y[idx] < y[idx - 1]).any() or (z[idx] < z[idx - 1]).any():
        return False
    # treatment monotone while no terminal event has happened yet
    event = (y == 1) | (z == 1)
    grp = np.cumsum(new) - 1
    cum = np.cumsum(event)
    starts = new.nonzero()[0]
    base = cum[starts] - event[starts]
    prior_event = cum - event - base[grp]
    bad = (~new) & (prior_event == 0) & np.concatenate([[False], a[1:] < a[:-1]])
    return not bad.any()


def validate_ordering(data: pd.DataFrame) -> list[Violation]:
    """Diagnostic pass over a canonical frame; returns all rule violations.

    Checked per patient: absorbing y and z, mutually exclusive terminal
    events, monotone treatment up to the event day, contiguous day indices
    from 0, no events at day 0.
    """
    if _vectorized_screen_clean(data):
        return []
    violations: list[Violation] = []
    for pid, g in data.groupby("id", sort=False):
        g = g.sort_values("k")
        k = g["k"].to_numpy()
        y = g["y"].to_numpy()
        z = g["z"].to_numpy()
        a = g["a"].to_numpy()
        if len(np.unique(k)) != len(k):
            violations.append(Violation(pid, int(k[0]), "duplicate day index"))
            continue
        if k[0] != 0 or not np.array_equal(k, np.arange(k[0], k[0] + len(k))):
            violations.append(Violation(pid, int(k[0]), "day indices not contiguous from 0"))
            continue
        if y[0] == 1 or z[0] == 1:
            violations.append(Violation(pid, 0, "terminal event at day 0"))
        if np.any(np.diff(y) < 0):
            day = int(k[np.argmin(np.diff(y)) + 1])
            violations.append(Violation(pid, day, "event-of-interest indicator not absorbing"))
        if np.any(np.diff(z) < 0):
            day = int(k[np.argmin(np.diff(z)) + 1])
            violations.append(Violation(pid, day, "competing-event indicator not absorbing"))
        both = np.flatnonzero((y == 1) & (z == 1))
        if both.size:
            first_y = np.flatnonzero(y == 1)
            first_z = np.flatnonzero(z == 1)
            if first_y.size and first_z.size and first_y[0] == first_z[0]:
                violations.append(Violation(pid, int(k[both[0]]), "simultaneous terminal events"))
            else:
                violations.append(
                    Violation(pid, int(k[both[0]]), "second terminal event after absorbing state")
                )
        event_idx = np.flatnonzero((y == 1) | (z == 1))
        stop = event_idx[0] + 1 if event_idx.size else len(k)
        da = np.diff(a[:stop])
        if np.any(da < 0):
            day = int(k[np.argmin(da) + 1])
            violations.append(Violation(pid, day, "treatment withdrawal"))
    return violations


def from_frame(
    data: pd.DataFrame,
    covariates: tuple[str, ...] | list[str],
    horizon: int | None = None,
    v_columns: tuple[str, ...] | list[str] = (),
) -> Cohort:
    """Validate and normalize a canonical frame into a Cohort.

    Rows after the first terminal event are truncated; ``at_risk`` is
    (re)derived.  Raises OrderError/GapError on invariant violations and
    SchemaError on missing columns or covariate values.
    """
    covariates = tuple(covariates)
    v_columns = tuple(v_columns)
    for col in CORE_COLUMNS + covariates:
        if col not in data.columns:
            raise SchemaError(f"missing column {col!r}")
    df = data.loc[:, list(CORE_COLUMNS + covariates)].copy()
    df["k"] = pd.to_numeric(df["k"], errors="coerce")
    if df["k"].isna().any() or (df["k"] < 0).any() or (df["k"] % 1 != 0).any():
        raise SchemaError("column 'k' must contain non-negative integers")
    df["k"] = df["k"].astype(np.int64)
    for col in ("a", "y", "z"):
        df[col] = _check_binary(df[col], col)
    for col in covariates:
        df[col] = pd.to_numeric(df[col], errors="coerce")
        if df[col].isna().any():
            raise SchemaError(f"missing values in covariate column {col!r}")
    df = df.sort_values(["id", "k"], kind="mergesort").reset_index(drop=True)

    violations = validate_ordering(df)
    gap_rules = ("duplicate day index", "day indices not contiguous from 0")
    gaps = [v for v in violations if v.rule in gap_rules]
    if gaps:
        raise GapError("; ".join(str(v) for v in gaps))
    if violations:
        raise OrderError("; ".join(str(v) for v in violations))

    # Truncate at the first event day; later frozen rows carry no information.
    ev = (df["y"] + df["z"]).to_numpy()
    prior_events = (
        pd.Series(ev).groupby(df["id"], sort=False).cumsum().to_numpy() - ev
    )
    df = df.loc[prior_events == 0].reset_index(drop=True)

    df["at_risk"] = ((df["y"] == 0) & (df["z"] == 0)).astype(np.int64)
    for col in v_columns:
        if col not in covariates:
            raise SchemaError(f"v column {col!r} is not a covariate column")
        if (df.groupby("id", sort=False)[col].nunique() > 1).any():
            raise SchemaError(f"v column {col!r} is not constant within patients")
    k_max = int(df["k"].max()) if len(df) else 0
    if horizon is not None:
        if horizon < k_max:
            df = df.loc[df["k"] <= horizon].reset_index(drop=True)
        k_max = int(horizon)
    return Cohort(data=df, horizon=k_max, covariates=covariates, v_columns=v_columns)


def ingest(
    source: str | Path,
    schema: dict | None = None,
    covariates: tuple[str, ...] | list[str] = (),
    horizon: int | None = None,
    v_columns: tuple[str, ...] | list[str] = (),
) -> Cohort:
    """Read a long-format CSV into a validated Cohort.

    ``schema`` maps logical names (id, time, treatment, event_death,
    event_discharge) to actual column names.  Day indices are shifted so the
    earliest observed day becomes 0 (tables indexed from day 1 are accepted
    as-is).
    """
    user_mapped = set(schema or {})
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    path = Path(source)
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    try:
        raw = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise SchemaError(f"empty input file: {path}") from None
    if raw.columns.duplicated().any():
        dupes = raw.columns[raw.columns.duplicated()].tolist()
        raise SchemaError(f"duplicate columns in input: {dupes}")
    rename = {}
    fill_zero = []
    # event columns may be absent entirely (e.g. a treatment-history-only
    # table); they then default to "no event observed"
    optional = {"event_death", "event_discharge"}
    explicit = user_mapped
    for logical, canonical in (
        ("id", "id"),
        ("time", "k"),
        ("treatment", "a"),
        ("event_death", "y"),
        ("event_discharge", "z"),
    ):
        actual = schema[logical]
        if actual not in raw.columns:
            if logical in optional and logical not in explicit:
                fill_zero.append(canonical)
                continue
            raise SchemaError(f"mapped column {actual!r} (for {logical!r}) not in input")
        rename[actual] = canonical
    data = raw.rename(columns=rename)
    for canonical in fill_zero:
        data[canonical] = 0
    for col in covariates:
        if col not in data.columns:
            raise SchemaError(f"covariate column {col!r} not in input")
    data["k"] = pd.to_numeric(data["k"], errors="coerce")
    if data["k"].isna().any():
        raise SchemaError("time column must be numeric")
    data["k"] = data["k"] - data["k"].min()
    return from_frame(data, covariates=covariates, horizon=horizon, v_columns=v_columns)


def emit(cohort: Cohort, path: str | Path) -> None:
    """Write a cohort back to CSV in the canonical layout (time column 0-based).

    ``ingest`` with the canonical schema round-trips this file exactly.
    """
    out = cohort.data.rename(
        columns={
            "k": "time",
            "a": "treatment",
            "y": "event_death",
            "z": "event_discharge",
        }
    ).drop(columns=["at_risk"])
    out.to_csv(path, index=False)


CANONICAL_SCHEMA = {
    "id": "id",
    "time": "time",
    "treatment": "treatment",
    "event_death": "event_death",
    "event_discharge": "event_discharge",
}
