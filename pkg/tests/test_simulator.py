"""Synthetic cohort generator and its forced-regime Monte Carlo oracle."""

import dataclasses

import numpy as np
import pandas as pd
import pytest

from dtreval import (
    DgpSpec,
    NAMED_SPECS,
    StartDayRule,
    ThresholdRule,
    baseline_only,
    coin_flip,
    confounded_feedback,
    forced_cohort,
    generate_observational,
    null_effect,
    observed_cuminc,
    true_counterfactual_cif,
    true_treatment_prevalence,
)
from dtreval.logistic import expit

NEVER = StartDayRule(start=99, id="never")


def test_generated_cohort_is_valid():
    cohort = generate_observational(baseline_only(n=500, horizon=8, seed=1))
    data = cohort.data
    assert cohort.horizon == 8
    assert cohort.covariates == ("severity", "frail")
    assert cohort.v_columns == ("frail",)
    assert (data.groupby("id")["k"].min() == 0).all()
    # Construction already passed the full ordering validation inside
    # from_frame; double-check a couple of invariants directly.
    assert ((data["y"] + data["z"]) <= 1).all()
    assert (data.loc[data["k"] == 0, ["y", "z"]] == 0).all().all()


def test_bit_reproducible():
    a = generate_observational(confounded_feedback(n=400, horizon=6, seed=9))
    b = generate_observational(confounded_feedback(n=400, horizon=6, seed=9))
    pd.testing.assert_frame_equal(a.data, b.data)
    c = generate_observational(confounded_feedback(n=400, horizon=6, seed=10))
    assert not a.data.equals(c.data)


def test_forced_stream_independent_of_observational():
    spec = null_effect(n=300, horizon=5, seed=2)
    obs = generate_observational(spec)
    forced = forced_cohort(spec, NEVER, m=300)
    assert not obs.data.equals(forced.data)


def test_empty_cohort():
    cohort = generate_observational(null_effect(n=0, horizon=5, seed=0))
    assert cohort.n_patients == 0
    assert len(cohort.data) == 0


def test_constant_hazard_closed_form_cif():
    # With severity effects and treatment off, both event draws are constant
    # Bernoulli hazards, so the death curve has a closed form.
    spec = DgpSpec(
        n=50000, horizon=8, seed=11,
        t0=-30.0, t_sev=0.0, treat_effect=0.0,
        g_sev=0.0, g_treat=0.0, c_sev=0.0, c_treat=0.0,
    )
    h_z = expit(spec.g0)
    h_y = expit(spec.c0)
    cohort = generate_observational(spec)
    cif = observed_cuminc(cohort).cif
    surv = np.cumprod(np.full(8, (1 - h_z) * (1 - h_y)))
    expect = np.concatenate([[0.0], np.cumsum((1 - h_z) * h_y * np.r_[1.0, surv[:-1]])])
    # Each day's increment is a binomial proportion over >= 30k survivors.
    assert np.max(np.abs(cif - expect)) < 3 * np.sqrt(h_y / 50000)


def test_oracle_standard_error_shrinks_with_m():
    spec = confounded_feedback(n=10, horizon=6, seed=5)
    rule = ThresholdRule("severity", 1.0, direction="above")
    big = true_counterfactual_cif(spec, rule, m=200000).cif
    reps_small = [
        true_counterfactual_cif(dataclasses.replace(spec, seed=s), rule, m=2000).cif[-1]
        for s in range(20)
    ]
    sd_small = np.std(reps_small)
    # Root-m scaling: the large run is ~10x more precise than each small one.
    assert abs(np.mean(reps_small) - big[-1]) < 3 * sd_small / np.sqrt(20) + 0.01
    assert sd_small < 0.05


def test_null_effect_every_regime_shares_truth():
    spec = null_effect(n=10, horizon=8, seed=3)
    curves = [
        true_counterfactual_cif(spec, r, m=50000).cif[-1]
        for r in (NEVER, StartDayRule(0), ThresholdRule("severity", 0.5, direction="above"))
    ]
    se = np.sqrt(0.25 / 50000)
    assert np.ptp(curves) < 6 * se


def test_forced_prevalence_extremes():
    spec = null_effect(n=10, horizon=5, seed=6)
    prev_never = true_treatment_prevalence(spec, NEVER, m=2000)
    prev_always = true_treatment_prevalence(spec, StartDayRule(0), m=2000)
    assert np.nanmax(prev_never) == 0.0
    assert np.nanmin(prev_always) == 1.0


def test_named_specs_registry():
    assert set(NAMED_SPECS) == {
        "confounded-feedback", "baseline-only", "null-effect", "coin-flip"
    }
    for factory in NAMED_SPECS.values():
        spec = factory(n=50, horizon=4, seed=0)
        cohort = generate_observational(spec)
        assert cohort.n_patients <= 50 and cohort.n_patients > 0


def test_coin_flip_initiation_rate():
    spec = coin_flip(n=5000, horizon=3, seed=8)
    cohort = generate_observational(spec)
    data = cohort.data
    first_day = data.loc[data["k"] == 0]
    rate = first_day["a"].mean()
    assert rate == pytest.approx(expit(spec.t0), abs=3 * np.sqrt(0.25 / 5000))
