"""Time-dependent propensity model and per-row compatibility probabilities.

The treatment-initiation model is a pooled logistic regression fitted on
original-cohort rows that are still at risk and untreated so far, with a
spline time trend plus configured covariates.  Predicted probabilities are
then turned into the per-row probability of remaining compatible with each
regime: rows with prior treatment get probability 1 (the action is forced),
terminal-event rows get probability 1 (no action is taken that day).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .basis import NaturalCubicSpline, TimeBasis, spline_from_quantiles
from .data_model import Cohort
from .errors import EmptyRiskSetError
from .logistic import LogisticFit, SolverOptions, fit_weighted_logistic
from .regimes import ExtendedDataset


@dataclass
class PropensityOptions:
    covariates: tuple[str, ...] = ()
    spline: TimeBasis | None = None
    n_interior_knots: int = 3
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 100


@dataclass(frozen=True)
class PropensityModel:
    fit: LogisticFit
    spline: TimeBasis
    covariates: tuple[str, ...]

    def design(self, days, cov_frame: pd.DataFrame) -> np.ndarray:
        blocks = [np.ones((len(days), 1)), self.spline.evaluate(days)]
        if self.covariates:
            blocks.append(cov_frame.loc[:, list(self.covariates)].to_numpy(dtype=float))
        return np.column_stack(blocks)

    def summary(self) -> dict:
        out = self.fit.summary()
        if isinstance(self.spline, NaturalCubicSpline):
            out["spline"] = {"knots": list(self.spline.knots), "boundary": list(self.spline.boundary)}
        return out


def _eligible_mask(data: pd.DataFrame) -> np.ndarray:
    prev_a = data.groupby("id", sort=False)["a"].shift(1, fill_value=0)
    return ((data["at_risk"] == 1) & (prev_a == 0)).to_numpy()


def fit_propensity(cohort: Cohort, options: PropensityOptions) -> PropensityModel:
    """Fit P(treatment starts at day k | at risk, untreated so far).

    The fit uses one row per patient-day from the original cohort, never the
    extended dataset, so each patient contributes once regardless of how many
    regimes are under comparison.
    """
    data = cohort.data
    eligible = _eligible_mask(data)
    if not eligible.any():
        raise EmptyRiskSetError("no at-risk, still-untreated rows to fit the propensity model")
    rows = data.loc[eligible]
    spline = options.spline
    if spline is None:
        spline = spline_from_quantiles(
            rows["k"].to_numpy(), options.n_interior_knots, (0.0, float(cohort.horizon))
        )
    names = ["intercept", *spline.column_names(), *options.covariates]
    model = PropensityModel(
        fit=LogisticFit(np.zeros(len(names)), False, 0, np.inf, options.ridge),
        spline=spline,
        covariates=tuple(options.covariates),
    )
    X = model.design(rows["k"].to_numpy(), rows)
    fit = fit_weighted_logistic(
        X,
        rows["a"].to_numpy(),
        options=SolverOptions(tol=options.tol, max_iter=options.max_iter, ridge=options.ridge),
        column_names=tuple(names),
    )
    return PropensityModel(fit=fit, spline=spline, covariates=tuple(options.covariates))


def treatment_probability(cohort: Cohort, model: PropensityModel) -> pd.Series:
    """Per cohort row: P(A_k = 1 | history), with forced branches applied.

    Rows with treatment already initiated get probability 1; terminal-event
    rows get 1 (placeholder, the compatibility step ignores them anyway).
    """
    data = cohort.data
    p = np.ones(len(data))
    eligible = _eligible_mask(data)
    if eligible.any():
        rows = data.loc[eligible]
        p[eligible] = model.fit.predict_proba(model.design(rows["k"].to_numpy(), rows))
    return pd.Series(p, index=data.index, name="p_treat")


def attach_treatment_probability(
    extended: ExtendedDataset, p_treat: pd.DataFrame | pd.Series, cohort: Cohort | None = None
) -> ExtendedDataset:
    """Merge a per-(patient, day) treatment probability onto the extended data.

    Accepts either the Series returned by ``treatment_probability`` (aligned
    with the cohort frame; pass the cohort) or a frame with columns
    (id, k, p_treat).
    """
    if isinstance(p_treat, pd.Series):
        if cohort is None:
            raise ValueError("cohort is required to align a probability series")
        lookup = cohort.data[["id", "k"]].copy()
        lookup["p_treat"] = p_treat.to_numpy()
    else:
        lookup = p_treat.loc[:, ["id", "k", "p_treat"]]
    merged = extended.data.drop(columns=["p_treat"], errors="ignore").merge(
        lookup, on=["id", "k"], how="left", validate="many_to_one"
    )
    if merged["p_treat"].isna().any():
        raise ValueError("treatment probability missing for some (patient, day) rows")
    return ExtendedDataset(
        data=merged,
        regime_ids=extended.regime_ids,
        horizon=extended.horizon,
        covariates=extended.covariates,
        v_columns=extended.v_columns,
    )


def compatibility_probability(extended: ExtendedDataset) -> ExtendedDataset:
    """Fill ``ps``: the probability of the prescribed action, per row.

    ps = p^d (1-p)^(1-d) on at-risk rows of still-compatible paths, 1 on
    terminal-event rows and 1 on rows already past a deviation (the value is
    never used there; pinning it avoids 0/0 in the weight product).
    """
    data = extended.data
    if "p_treat" not in data.columns:
        raise ValueError("treatment probability not attached; run attach_treatment_probability")
    p = data["p_treat"].to_numpy(dtype=float)
    d = data["d"].to_numpy()
    ps = np.where(d == 1, p, 1.0 - p)
    ps = np.where(data["at_risk"].to_numpy() == 1, ps, 1.0)
    ps = np.where(data["compat_prev"].to_numpy() == 1, ps, 1.0)
    return extended.with_columns(ps=ps)


def fill_compatibility(
    extended: ExtendedDataset, cohort: Cohort, model: PropensityModel
) -> ExtendedDataset:
    """Convenience: predict, merge and factorize in one pass."""
    p = treatment_probability(cohort, model)
    return compatibility_probability(attach_treatment_probability(extended, p, cohort))
