"""Shared fixtures: a small two-patient ICU-style table and weighting helpers.

The two-patient fixture is the worked hand example used throughout the unit
tests: five observation days per patient, a pH covariate, treatment started
on day 3 by both patients, no terminal events, and externally supplied
treatment probabilities so every weight is checkable by hand.
"""

import numpy as np
import pandas as pd
import pytest

from dtreval import (
    Cohort,
    attach_treatment_probability,
    build_extended,
    compatibility_probability,
    compute_ipcw,
    from_frame,
)


def make_frame(patients):
    """Assemble a canonical long frame from per-patient column dicts.

    Each entry supplies ``id`` plus equal-length sequences for a/y/z and any
    covariates; ``k`` defaults to 0..len-1.
    """
    parts = []
    for p in patients:
        p = dict(p)
        pid = p.pop("id")
        n = len(p["a"])
        rec = {"id": pid, "k": p.pop("k", list(range(n)))}
        rec["a"] = p.pop("a")
        rec["y"] = p.pop("y", [0] * n)
        rec["z"] = p.pop("z", [0] * n)
        rec.update(p)
        parts.append(pd.DataFrame(rec))
    return pd.concat(parts, ignore_index=True)


TWO_PATIENT_PH = {
    1: [7.29, 7.24, 7.08, 7.29, 7.29],
    2: [7.30, 7.29, 7.19, 7.32, 7.32],
}
TWO_PATIENT_PTREAT = {
    1: [0.01, 0.05, 0.40, 1.0, 1.0],
    2: [0.13, 0.11, 0.48, 1.0, 1.0],
}


@pytest.fixture
def two_patient_cohort() -> Cohort:
    frame = make_frame(
        [
            {"id": pid, "a": [0, 0, 1, 1, 1], "ph": TWO_PATIENT_PH[pid]}
            for pid in (1, 2)
        ]
    )
    return from_frame(frame, covariates=("ph",))


@pytest.fixture
def two_patient_probs() -> pd.DataFrame:
    rows = [
        {"id": pid, "k": k, "p_treat": p}
        for pid in (1, 2)
        for k, p in enumerate(TWO_PATIENT_PTREAT[pid])
    ]
    return pd.DataFrame(rows)


def weighted_with_known_ps(cohort, regimes, probs, **ipcw_kwargs):
    """Extended dataset with weights computed from supplied probabilities."""
    ext = build_extended(cohort, regimes)
    ext = attach_treatment_probability(ext, probs)
    ext = compatibility_probability(ext)
    return compute_ipcw(ext, **ipcw_kwargs)


def patient_series(ext, regime_id, pid, col):
    frame = ext.slice(regime_id)
    return frame.loc[frame["id"] == pid].sort_values("k")[col].to_numpy()
