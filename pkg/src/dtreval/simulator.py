"""Synthetic discrete-time cohorts with treatment-confounder feedback.

The generator follows the within-day order used everywhere else in the
package: competing event first, then the event of interest, then the updated
covariate, then the treatment decision.  Ground-truth counterfactual curves
come from re-running the same laws with the treatment draw replaced by the
regime's prescription.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from . import data_model
from .data_model import Cohort
from .estimators import IncidenceCurve
from .logistic import expit
from .regimes import Regime

SEVERITY = "severity"
FRAILTY = "frail"


@dataclass(frozen=True)
class DgpSpec:
    """Coefficients of the data-generating laws.

    Transition: severity_k = rho * severity_{k-1} + drift + treat_effect * a_{k-1} + N(0, noise_sd).
    Treatment (while untreated, at risk): logit p = t0 + t_sev * severity_k + t_day * k + t_frail * frail.
    Event laws at day k (on day k-1 information):
      discharge: logit = g0 + g_sev * severity + g_treat * a
      death:     logit = c0 + c_sev * severity + c_treat * a
    """

    n: int
    horizon: int
    seed: int = 0
    severity_mean: float = 0.0
    severity_sd: float = 1.0
    frail_prob: float | None = None
    rho: float = 0.8
    drift: float = 0.0
    treat_effect: float = -0.8
    noise_sd: float = 0.6
    t0: float = -2.0
    t_sev: float = 1.2
    t_day: float = 0.0
    t_frail: float = 0.0
    g0: float = -2.0
    g_sev: float = -0.6
    g_treat: float = -0.3
    c0: float = -2.8
    c_sev: float = 0.9
    c_treat: float = -0.9

    @property
    def covariates(self) -> tuple[str, ...]:
        if self.frail_prob is not None:
            return (SEVERITY, FRAILTY)
        return (SEVERITY,)

    @property
    def v_columns(self) -> tuple[str, ...]:
        return (FRAILTY,) if self.frail_prob is not None else ()


def confounded_feedback(n: int, horizon: int = 10, seed: int = 0) -> DgpSpec:
    """Severity drives both treatment and events; treatment feeds back.

    Coefficients are tuned so that compatibility censoring without weighting
    visibly biases severity-threshold regimes while weighting recovers truth.
    """
    return DgpSpec(n=n, horizon=horizon, seed=seed, t_sev=1.6, c_sev=1.2, t0=-1.5)


def baseline_only(n: int, horizon: int = 10, seed: int = 0) -> DgpSpec:
    """Treatment depends on a baseline frailty flag only; severity still
    drives the events, so weighting is needed but stabilizes to 1."""
    return DgpSpec(
        n=n,
        horizon=horizon,
        seed=seed,
        frail_prob=0.4,
        t_sev=0.0,
        t_frail=1.5,
        t0=-1.8,
    )


def null_effect(n: int, horizon: int = 10, seed: int = 0) -> DgpSpec:
    """Treatment has no effect on events or severity: every regime shares the
    same true value."""
    return DgpSpec(n=n, horizon=horizon, seed=seed, treat_effect=0.0, g_treat=0.0, c_treat=0.0)


def coin_flip(n: int, horizon: int = 10, seed: int = 0) -> DgpSpec:
    """Treatment initiation by a fair coin, independent of everything."""
    return DgpSpec(n=n, horizon=horizon, seed=seed, t0=0.0, t_sev=0.0, t_day=0.0)


NAMED_SPECS = {
    "confounded-feedback": confounded_feedback,
    "baseline-only": baseline_only,
    "null-effect": null_effect,
    "coin-flip": coin_flip,
}


def _rng(spec: DgpSpec, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=spec.seed, counter=[stream, 0, 0, 0]))


def _simulate(spec: DgpSpec, regime: Regime | None, n: int, stream: int) -> pd.DataFrame:
    """Vectorized trajectory simulation; `regime` forces the treatment draw."""
    rng = _rng(spec, stream)
    sev = rng.normal(spec.severity_mean, spec.severity_sd, size=n)
    frail = (
        (rng.random(n) < spec.frail_prob).astype(np.int64)
        if spec.frail_prob is not None
        else np.zeros(n, dtype=np.int64)
    )
    if regime is not None:
        state = regime.start_state(n)

    def draw_action(k):
        if regime is not None:
            cov = {SEVERITY: sev}
            if spec.frail_prob is not None:
                cov[FRAILTY] = frail
            return regime.step(state, cov, k)
        eta = spec.t0 + spec.t_sev * sev + spec.t_day * k + spec.t_frail * frail
        return (rng.random(n) < expit(eta)).astype(np.int64)

    a = np.where(draw_action(0) == 1, 1, 0)
    alive = np.ones(n, dtype=bool)
    ids = np.arange(n)
    records = [
        pd.DataFrame({"id": ids, "k": 0, "a": a, "y": 0, "z": 0, SEVERITY: sev, FRAILTY: frail})
    ]
    for k in range(1, spec.horizon + 1):
        # event draws use day k-1 severity/treatment; discharge goes first
        eta_z = spec.g0 + spec.g_sev * sev + spec.g_treat * a
        z_draw = rng.random(n) < expit(eta_z)
        eta_y = spec.c0 + spec.c_sev * sev + spec.c_treat * a
        y_draw = rng.random(n) < expit(eta_y)
        z_k = alive & z_draw
        y_k = alive & ~z_draw & y_draw
        event = z_k | y_k
        noise = rng.normal(0.0, spec.noise_sd, size=n)
        new_sev = spec.rho * sev + spec.drift + spec.treat_effect * a + noise
        sev = np.where(alive & ~event, new_sev, sev)
        new_a = draw_action(k)
        a = np.where(alive & ~event, np.maximum(a, new_a), a)
        present = alive
        if present.any():
            records.append(
                pd.DataFrame(
                    {
                        "id": ids[present],
                        "k": k,
                        "a": a[present],
                        "y": y_k[present].astype(np.int64),
                        "z": z_k[present].astype(np.int64),
                        SEVERITY: sev[present],
                        FRAILTY: frail[present],
                    }
                )
            )
        alive = alive & ~event
        if not alive.any():
            break
    frame = pd.concat(records, ignore_index=True)
    if spec.frail_prob is None:
        frame = frame.drop(columns=[FRAILTY])
    return frame.sort_values(["id", "k"], kind="mergesort").reset_index(drop=True)


def generate_observational(spec: DgpSpec) -> Cohort:
    """Sample the observational cohort; reproducible given the seed."""
    if spec.n == 0:
        empty = pd.DataFrame(
            {c: pd.Series(dtype=t) for c, t in
             [("id", np.int64), ("k", np.int64), ("a", np.int64), ("y", np.int64),
              ("z", np.int64), *[(c, float) for c in spec.covariates]]}
        )
        return data_model.from_frame(empty, covariates=spec.covariates,
                                     horizon=spec.horizon, v_columns=spec.v_columns)
    frame = _simulate(spec, regime=None, n=spec.n, stream=0)
    return data_model.from_frame(
        frame, covariates=spec.covariates, horizon=spec.horizon, v_columns=spec.v_columns
    )


def forced_cohort(spec: DgpSpec, regime: Regime, m: int, stream: int = 1) -> Cohort:
    """Counterfactual cohort with treatment set by the regime's rule."""
    forced = replace(spec, n=m)
    frame = _simulate(forced, regime=regime, n=m, stream=stream)
    return data_model.from_frame(
        frame, covariates=spec.covariates, horizon=spec.horizon, v_columns=spec.v_columns
    )


def true_counterfactual_cif(spec: DgpSpec, regime: Regime, m: int) -> IncidenceCurve:
    """Monte Carlo ground truth: empirical death incidence under the forced
    regime.  Standard error scales as m^(-1/2)."""
    cohort = forced_cohort(spec, regime, m)
    data = cohort.data
    deaths = data.loc[data["y"] == 1, "k"].to_numpy()
    counts = np.bincount(deaths, minlength=spec.horizon + 1).astype(float)
    counts[0] = 0.0
    return IncidenceCurve(regime_id=regime.id, cif=np.cumsum(counts) / m, estimator="oracle")


def true_treatment_prevalence(spec: DgpSpec, regime: Regime, m: int) -> np.ndarray:
    """Per-day treated fraction among still-at-risk patients under the forced
    regime; NaN once nobody is at risk."""
    cohort = forced_cohort(spec, regime, m)
    data = cohort.data.loc[cohort.data["at_risk"] == 1]
    num = np.bincount(data["k"], weights=data["a"], minlength=spec.horizon + 1)
    den = np.bincount(data["k"], minlength=spec.horizon + 1)
    return np.divide(num, den, out=np.full(spec.horizon + 1, np.nan), where=den > 0)
