"""Counterfactual cumulative incidence estimators.

Two routes to the same target: the weighted nonparametric hazard ratios
(Aalen-Johansen assembly) and pooled logistic hazard models fitted by
weighted score equations.  Both feed the same discrete-time assembly

    cif_k = sum_{l<=k} h1_l (1 - h2_l) prod_{j<l} (1 - h1_j)(1 - h2_j)

with the competing event ordered before the event of interest within a day.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .basis import TimeBasis, regime_time_design, spline_from_quantiles
from .data_model import Cohort
from .errors import EmptyRiskSetError, SingularDesignError
from .logistic import LogisticFit, SolverOptions, fit_weighted_logistic
from .regimes import ExtendedDataset


@dataclass(frozen=True)
class HazardPair:
    """Per-day cause-specific hazards for days 1..K (index 0 = day 1)."""

    h1: np.ndarray
    h2: np.ndarray
    mass1: np.ndarray
    mass2: np.ndarray
    defined: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.h1)


@dataclass(frozen=True)
class IncidenceCurve:
    """Cumulative incidence over days 0..K; cif[0] == 0 by construction."""

    regime_id: str
    cif: np.ndarray
    estimator: str
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    v_descriptor: str = ""

    @property
    def days(self) -> np.ndarray:
        return np.arange(len(self.cif))

    @property
    def value(self) -> float:
        """Probability of the event of interest by the horizon."""
        return float(self.cif[-1])

    def to_frame(self) -> pd.DataFrame:
        out = pd.DataFrame(
            {"regime": self.regime_id, "day": self.days, "cif": self.cif, "estimator": self.estimator}
        )
        out["lower"] = self.lower if self.lower is not None else np.nan
        out["upper"] = self.upper if self.upper is not None else np.nan
        return out


def assemble_cuminc(h1: np.ndarray, h2: np.ndarray) -> np.ndarray:
    """Discrete-time assembly; returns length K+1 with leading zero."""
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    surv = np.concatenate([[1.0], np.cumprod((1.0 - h1) * (1.0 - h2))])
    terms = h1 * (1.0 - h2) * surv[:-1]
    return np.concatenate([[0.0], np.cumsum(terms)])


def _hazards_from_frame(frame: pd.DataFrame, weight: np.ndarray, horizon: int) -> HazardPair:
    k = frame["k"].to_numpy()
    y = frame["y"].to_numpy(dtype=float)
    z = frame["z"].to_numpy(dtype=float)
    sel = (k >= 1) & (k <= horizon)
    k, y, z, weight = k[sel], y[sel], z[sel], weight[sel]
    idx = k - 1
    num1 = np.bincount(idx, weights=y * (1 - z) * weight, minlength=horizon)
    den1 = np.bincount(idx, weights=(1 - z) * weight, minlength=horizon)
    num2 = np.bincount(idx, weights=z * weight, minlength=horizon)
    den2 = np.bincount(idx, weights=weight, minlength=horizon)
    defined1 = den1 > 0
    defined2 = den2 > 0
    h1 = np.divide(num1, den1, out=np.zeros(horizon), where=defined1)
    h2 = np.divide(num2, den2, out=np.zeros(horizon), where=defined2)
    return HazardPair(h1=h1, h2=h2, mass1=den1, mass2=den2, defined=defined1 & defined2)


def aj_hazards(
    extended: ExtendedDataset,
    regime_id: str,
    v_filter: dict | None = None,
    weight_col: str = "w",
) -> HazardPair:
    """Weighted cause-specific hazards for one regime.

    Rows past a terminal event are absent by normalization, so the risk-set
    conditions reduce to: deaths exclude same-day discharges; both exclude
    nothing else.  The weight is the previous-day path weight.  Days with an
    empty weighted risk set get hazard 0 (curve stays flat).
    """
    frame = extended.slice(regime_id)
    if v_filter:
        for col, val in v_filter.items():
            frame = frame.loc[frame[col] == val]
    prev = "w_prev" if weight_col == "w" else f"{weight_col}_prev"
    if prev not in frame.columns:
        raise ValueError(f"{prev!r} not computed; run the weighting pass")
    pair = _hazards_from_frame(frame, frame[prev].to_numpy(dtype=float), extended.horizon)
    if pair.mass2[0] <= 0:
        raise EmptyRiskSetError(f"regime {regime_id!r}: empty weighted risk set at day 1")
    return pair


def aj_cuminc(hazards: HazardPair, regime_id: str = "", estimator: str = "aalen_johansen") -> IncidenceCurve:
    return IncidenceCurve(regime_id=regime_id, cif=assemble_cuminc(hazards.h1, hazards.h2), estimator=estimator)


def compat_censored_cuminc(extended: ExtendedDataset, regime_id: str) -> IncidenceCurve:
    """Naive comparison curve: censor at incompatibility but do not reweight."""
    frame = extended.slice(regime_id)
    pair = _hazards_from_frame(
        frame, frame["compat_prev"].to_numpy(dtype=float), extended.horizon
    )
    return IncidenceCurve(regime_id=regime_id, cif=assemble_cuminc(pair.h1, pair.h2), estimator="naive")


def observed_cuminc(cohort: Cohort, regime_id: str = "obs") -> IncidenceCurve:
    """Unweighted curve under the observed standard of care."""
    pair = _hazards_from_frame(cohort.data, np.ones(len(cohort.data)), cohort.horizon)
    return IncidenceCurve(regime_id=regime_id, cif=assemble_cuminc(pair.h1, pair.h2), estimator="obs")


@dataclass
class MsmOptions:
    time_basis: TimeBasis | None = None
    n_interior_knots: int = 3
    saturated: bool = False
    ridge: float = 0.0
    tol: float = 1e-8
    max_iter: int = 100
    weight_col: str = "w"


@dataclass(frozen=True)
class MsmFitPair:
    event_fit: LogisticFit
    competing_fit: LogisticFit
    regime_order: tuple[str, ...]
    time_basis: TimeBasis | None
    v_columns: tuple[str, ...]
    saturated: bool
    horizon: int

    def _design(self, regime_id: str, days: np.ndarray, v_row: dict | None) -> np.ndarray:
        v_frame = None
        if self.v_columns:
            v_frame = pd.DataFrame({c: np.full(len(days), (v_row or {})[c]) for c in self.v_columns})
        X, _ = regime_time_design(
            np.full(len(days), regime_id, dtype=object),
            days,
            self.regime_order,
            self.time_basis,
            v_frame=v_frame,
            saturated=self.saturated,
        )
        return X

    def hazards(self, regime_id: str, v_row: dict | None = None) -> HazardPair:
        days = np.arange(1, self.horizon + 1)
        X = self._design(regime_id, days, v_row)
        h1 = self.event_fit.predict_proba(X)
        h2 = self.competing_fit.predict_proba(X)
        ones = np.ones(self.horizon, dtype=bool)
        return HazardPair(h1=h1, h2=h2, mass1=ones.astype(float), mass2=ones.astype(float), defined=ones)


def _msm_rows(extended: ExtendedDataset, weight_col: str):
    data = extended.data
    prev = "w_prev" if weight_col == "w" else f"{weight_col}_prev"
    if prev not in data.columns:
        raise ValueError(f"{prev!r} not computed; run the weighting pass")
    base = (data["k"] >= 1) & (data["compat_prev"] == 1)
    # Past-event rows are truncated away, so presence at day k already implies
    # no event through day k-1; the same-day-discharge exclusion applies only
    # to the event-of-interest model.
    rows1 = data.loc[base & (data["z"] == 0)]
    rows2 = data.loc[base]
    return rows1, rows2, prev


def msm_fit(extended: ExtendedDataset, options: MsmOptions | None = None) -> MsmFitPair:
    """Fit the two pooled hazard models by weighted logistic regression.

    Regressors: intercept, regime dummies, time basis, regime x time
    interactions and V columns (or saturated regime x day cells).  The fits
    solve the weighted score equations exactly, so the score max-norm at the
    optimum is below the solver tolerance.
    """
    opts = options or MsmOptions()
    rows1, rows2, prev = _msm_rows(extended, opts.weight_col)
    basis = opts.time_basis
    if basis is None and not opts.saturated:
        basis = spline_from_quantiles(
            rows2["k"].to_numpy(), opts.n_interior_knots, (0.0, float(extended.horizon))
        )
    fits = []
    for rows, response_col in ((rows1, "y"), (rows2, "z")):
        v_frame = rows.loc[:, list(extended.v_columns)] if extended.v_columns else None
        X, names = regime_time_design(
            rows["regime"].to_numpy(),
            rows["k"].to_numpy(),
            extended.regime_ids,
            basis,
            v_frame=v_frame,
            saturated=opts.saturated,
        )
        wt = rows[prev].to_numpy(dtype=float)
        col_mass = (X * X).T @ wt
        if np.any(col_mass == 0):
            dead = [n for n, m in zip(names, col_mass) if m == 0]
            raise SingularDesignError(
                f"no weighted observations for design columns: {', '.join(dead)}"
            )
        fit = fit_weighted_logistic(
            X,
            rows[response_col].to_numpy(dtype=float),
            weights=wt,
            options=SolverOptions(
                tol=opts.tol,
                max_iter=opts.max_iter,
                ridge=opts.ridge,
                intercept_index=None if opts.saturated else 0,
            ),
            column_names=tuple(names),
        )
        fits.append(fit)
    return MsmFitPair(
        event_fit=fits[0],
        competing_fit=fits[1],
        regime_order=extended.regime_ids,
        time_basis=basis,
        v_columns=extended.v_columns,
        saturated=opts.saturated,
        horizon=extended.horizon,
    )


def msm_cuminc(
    fits: MsmFitPair,
    regime_id: str,
    v_profile: dict | None = None,
    marginalize_over: Cohort | None = None,
) -> IncidenceCurve:
    """Model-based incidence curve for one regime.

    With V columns and no explicit profile, the marginal curve averages the
    per-patient profile curves over the cohort's baseline V distribution.
    """
    if not fits.v_columns or v_profile is not None:
        pair = fits.hazards(regime_id, v_profile)
        cif = assemble_cuminc(pair.h1, pair.h2)
    else:
        if marginalize_over is None:
            raise ValueError("marginalization cohort required when V columns are set")
        baseline = marginalize_over.baseline()
        # one model evaluation per distinct V profile, weighted by frequency
        profiles = (
            baseline.groupby(list(fits.v_columns), sort=False).size().reset_index(name="n_prof")
        )
        curves = np.zeros(fits.horizon + 1)
        for _, row in profiles.iterrows():
            profile = {c: row[c] for c in fits.v_columns}
            pair = fits.hazards(regime_id, profile)
            curves += row["n_prof"] * assemble_cuminc(pair.h1, pair.h2)
        cif = curves / len(baseline)
    return IncidenceCurve(regime_id=regime_id, cif=cif, estimator="msm",
                          v_descriptor=str(v_profile) if v_profile else "")


def proportion_treated(
    extended: ExtendedDataset, regime_id: str, weight_col: str = "w"
) -> pd.DataFrame:
    """Weighted per-day treated fraction among still-at-risk compatible rows.

    Ratio of the weight-sum of treated rows to the weight-sum of all rows
    still compatible through the day, using previous-day weights; days with
    zero mass are marked undefined.
    """
    frame = extended.slice(regime_id)
    prev = "w_prev" if weight_col == "w" else f"{weight_col}_prev"
    frame = frame.loc[(frame["at_risk"] == 1) & (frame["compat"] == 1)]
    k = frame["k"].to_numpy()
    wt = frame[prev].to_numpy(dtype=float)
    horizon = extended.horizon + 1
    num = np.bincount(k, weights=frame["a"].to_numpy() * wt, minlength=horizon)
    den = np.bincount(k, weights=wt, minlength=horizon)
    defined = den > 0
    prop = np.divide(num, den, out=np.full(horizon, np.nan), where=defined)
    return pd.DataFrame(
        {"regime": regime_id, "day": np.arange(horizon), "proportion_treated": prop, "defined": defined}
    )
