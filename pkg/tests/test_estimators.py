"""Weighted hazards, cumulative-incidence assembly and the pooled MSM."""

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtreval import (
    EmptyRiskSetError,
    MsmOptions,
    SingularDesignError,
    StartDayRule,
    aj_cuminc,
    aj_hazards,
    assemble_cuminc,
    compat_censored_cuminc,
    from_frame,
    msm_cuminc,
    msm_fit,
    observed_cuminc,
    proportion_treated,
)
from tests.conftest import make_frame, weighted_with_known_ps

NEVER = StartDayRule(start=99, id="never")


def unit_weight_extended(patients, regimes=None):
    """Extended data where every weight is exactly 1 (p equals the action)."""
    cohort = from_frame(make_frame(patients), covariates=())
    probs = cohort.data[["id", "k", "a"]].rename(columns={"a": "p_treat"})
    probs["p_treat"] = probs["p_treat"].astype(float)
    return cohort, weighted_with_known_ps(cohort, regimes or [NEVER], probs)


def test_single_death_hazard():
    # Four untreated patients, one dies on day 1, the rest leave the data
    # event-free after day 2.
    patients = [{"id": 1, "a": [0, 0], "y": [0, 1]}]
    patients += [{"id": j, "a": [0, 0, 0]} for j in (2, 3, 4)]
    _, ext = unit_weight_extended(patients)
    pair = aj_hazards(ext, "never")
    np.testing.assert_allclose(pair.h1, [0.25, 0.0])
    np.testing.assert_allclose(pair.h2, [0.0, 0.0])
    np.testing.assert_allclose(pair.mass2, [4.0, 3.0])
    curve = aj_cuminc(pair, "never")
    np.testing.assert_allclose(curve.cif, [0.0, 0.25, 0.25])
    assert curve.value == 0.25


def test_same_day_discharge_precedes_death():
    # Day 1: one discharge, one death, two event-free.  The discharge leaves
    # the death risk set, so h2 = 1/4 but h1 = 1/3.
    patients = [
        {"id": 1, "a": [0, 0], "z": [0, 1]},
        {"id": 2, "a": [0, 0], "y": [0, 1]},
        {"id": 3, "a": [0, 0]},
        {"id": 4, "a": [0, 0]},
    ]
    _, ext = unit_weight_extended(patients)
    pair = aj_hazards(ext, "never")
    assert pair.h2[0] == pytest.approx(0.25)
    assert pair.h1[0] == pytest.approx(1 / 3)
    # cif_1 = h1 * (1 - h2) = 1/3 * 3/4 = 1/4: exactly the observed death.
    curve = aj_cuminc(pair, "never")
    assert curve.cif[1] == pytest.approx(0.25)


def test_weighted_hazard_by_hand():
    # Doubling one patient's weight must match duplicating the patient.
    patients = [
        {"id": 1, "a": [0, 0], "y": [0, 1]},
        {"id": 2, "a": [0, 0]},
    ]
    cohort, ext = unit_weight_extended(patients)
    doubled = ext.with_columns(
        w=np.where(ext.data["id"] == 1, 2.0, 1.0),
        w_prev=np.where(ext.data["id"] == 1, 2.0, 1.0),
    )
    pair = aj_hazards(doubled, "never")
    assert pair.h1[0] == pytest.approx(2 / 3)


def test_certain_discharge_blocks_death():
    np.testing.assert_allclose(
        assemble_cuminc([0.5, 0.5], [1.0, 1.0]), [0.0, 0.0, 0.0]
    )


def test_constant_hazard_closed_form():
    # With h1 = h2 = 0.5 on one day: cif_1 = .5 * .5 = .25.
    np.testing.assert_allclose(assemble_cuminc([0.5], [0.5]), [0.0, 0.25])
    # Pure event-of-interest process: cif_k = 1 - (1-h)^k.
    h = np.full(6, 0.2)
    np.testing.assert_allclose(
        assemble_cuminc(h, np.zeros(6)), 1 - 0.8 ** np.arange(7), rtol=1e-12
    )


def test_assembly_matches_product_limit_oracle():
    # Independent computation of the same target: running product-limit
    # survival with stepwise allocation of the event-of-interest mass.
    rng = np.random.default_rng(19)
    for _ in range(50):
        K = rng.integers(1, 12)
        h1 = rng.uniform(0, 0.3, size=K)
        h2 = rng.uniform(0, 0.3, size=K)
        surv, cif = 1.0, [0.0]
        for k in range(K):
            cif.append(cif[-1] + surv * (1 - h2[k]) * h1[k])
            surv *= (1 - h1[k]) * (1 - h2[k])
        np.testing.assert_allclose(assemble_cuminc(h1, h2), cif, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(
    hazards=st.lists(
        st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=15
    )
)
def test_cuminc_properties(hazards):
    h1 = np.array([h[0] for h in hazards])
    h2 = np.array([h[1] for h in hazards])
    cif = assemble_cuminc(h1, h2)
    comp = assemble_cuminc(h2 * 0 + h2, h1 * 0)  # competing mass bound below
    assert cif[0] == 0.0
    assert (np.diff(cif) >= -1e-12).all()
    assert cif[-1] <= 1 + 1e-12
    # Both causes together cannot exceed total probability.
    other = np.concatenate([[0.0], np.cumsum(
        h2 * np.concatenate([[1.0], np.cumprod((1 - h1) * (1 - h2))])[:-1]
    )])
    assert cif[-1] + other[-1] <= 1 + 1e-9


def test_empty_risk_set_raises():
    patients = [{"id": 1, "a": [0, 0], "y": [0, 1]}]
    cohort = from_frame(make_frame(patients), covariates=())
    probs = cohort.data[["id", "k"]].assign(p_treat=0.5)
    always = StartDayRule(0)  # nobody follows it: zero weight everywhere
    ext = weighted_with_known_ps(cohort, [always], probs)
    ext = ext.with_columns(w=0.0, w_prev=0.0)
    with pytest.raises(EmptyRiskSetError):
        aj_hazards(ext, always.id)


def test_observed_and_naive_curves(two_patient_cohort, two_patient_probs):
    obs = observed_cuminc(two_patient_cohort)
    np.testing.assert_allclose(obs.cif, np.zeros(5))  # nobody had an event
    ext = weighted_with_known_ps(
        two_patient_cohort, [StartDayRule(2)], two_patient_probs
    )
    naive = compat_censored_cuminc(ext, "start_day2")
    np.testing.assert_allclose(naive.cif, np.zeros(5))
    assert naive.estimator == "naive"


def simulated_extended(n=300, seed=0, regimes=None):
    from dtreval import (
        PipelineOptions,
        PropensityOptions,
        generate_observational,
        null_effect,
        weighted_extended,
    )

    spec = null_effect(n=n, horizon=6, seed=seed)
    cohort = generate_observational(spec)
    opts = PipelineOptions(ps=PropensityOptions(covariates=("severity",)))
    regimes = regimes or [StartDayRule(0), StartDayRule(3), StartDayRule(99, id="never")]
    ext, _ = weighted_extended(cohort, regimes, opts)
    return cohort, ext


def test_saturated_msm_matches_weighted_hazards():
    cohort, ext = simulated_extended(n=400, seed=2)
    fits = msm_fit(ext, MsmOptions(saturated=True))
    for rid in ext.regime_ids:
        aj = aj_cuminc(aj_hazards(ext, rid), rid)
        msm = msm_cuminc(fits, rid, marginalize_over=cohort)
        np.testing.assert_allclose(msm.cif, aj.cif, atol=1e-8)


def test_msm_without_v_profile_equals_marginal():
    cohort, ext = simulated_extended(n=300, seed=4)
    # Small samples can separate the unpenalized spline fit; a tiny ridge
    # keeps this mechanical equality check well posed.
    fits = msm_fit(ext, MsmOptions(ridge=1e-6))
    for rid in ext.regime_ids:
        a = msm_cuminc(fits, rid, marginalize_over=cohort)
        b = msm_cuminc(fits, rid)  # no V columns: profile argument unused
        np.testing.assert_allclose(a.cif, b.cif)


def test_msm_score_at_optimum():
    from dtreval.basis import regime_time_design
    from dtreval.logistic import weighted_score

    _, ext = simulated_extended(n=300, seed=5)
    fits = msm_fit(ext, MsmOptions(saturated=True))
    assert fits.event_fit.gradient_norm <= 1e-8
    assert fits.competing_fit.gradient_norm <= 1e-8


def test_msm_zero_mass_column_raises():
    # A regime whose prescribed path nobody follows leaves all-zero weights
    # in its cells: the design has no mass and the fit must refuse.
    patients = [{"id": i, "a": [0, 0, 0]} for i in range(5)]
    cohort = from_frame(make_frame(patients), covariates=())
    probs = cohort.data[["id", "k"]].assign(p_treat=0.0)
    regimes = [NEVER, StartDayRule(0)]
    ext = weighted_with_known_ps(cohort, regimes, probs, ps_floor=0.0)
    with pytest.raises(SingularDesignError):
        msm_fit(ext, MsmOptions(saturated=True))


def test_proportion_treated_extremes():
    patients = [{"id": i, "a": [0, 0, 0]} for i in range(4)]
    patients += [{"id": 10 + i, "a": [1, 1, 1]} for i in range(4)]
    cohort = from_frame(make_frame(patients), covariates=())
    probs = cohort.data[["id", "k"]].assign(p_treat=0.5)
    regimes = [NEVER, StartDayRule(0)]
    ext = weighted_with_known_ps(cohort, regimes, probs)
    never = proportion_treated(ext, "never")
    always = proportion_treated(ext, "start_day0")
    never_def = never.loc[never["defined"]]
    always_def = always.loc[always["defined"]]
    assert np.allclose(never_def["proportion_treated"], 0.0)
    assert np.allclose(always_def["proportion_treated"], 1.0)
