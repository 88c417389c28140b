"""Inverse-probability-of-compatibility weights and diagnostics.

Unstabilized weight on a path: compat_k divided by the running product of
per-day compatibility probabilities.  Terminal-event rows have probability 1,
so the weight freezes at its last at-risk value; incompatible rows get 0.
Stabilized weights multiply in a numerator that may depend only on the
regime, time and baseline covariates V.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .basis import TimeBasis, spline_from_quantiles
from .errors import PositivityError
from .logistic import LogisticFit, SolverOptions, fit_weighted_logistic
from .regimes import ExtendedDataset


def compute_ipcw(
    extended: ExtendedDataset,
    ps_floor: float = 1e-6,
    truncate_quantile: float | None = None,
) -> ExtendedDataset:
    """Fill ``w`` (and ``w_prev``) from the ``ps`` column.

    Raises PositivityError if any compatibility probability on a
    still-compatible path falls below ``ps_floor``.  Optional truncation caps
    positive weights at their per-day quantile.
    """
    data = extended.data
    if "ps" not in data.columns:
        raise ValueError("ps column not filled; run the propensity pass first")
    ps = data["ps"].to_numpy(dtype=float)
    live = data["compat_prev"].to_numpy() == 1
    if np.any(ps[live] < ps_floor):
        bad = data.loc[live & (ps < ps_floor), ["id", "regime", "k"]].head(5)
        raise PositivityError(
            f"compatibility probability below floor {ps_floor:g} on a compatible path; "
            f"first offenders:\n{bad.to_string(index=False)}"
        )
    grp = [data["id"], data["regime"]]
    cumdenom = pd.Series(ps, index=data.index).groupby(grp, sort=False).cumprod()
    w = data["compat"].to_numpy() / cumdenom.to_numpy()
    truncated = np.zeros(len(data), dtype=bool)
    if truncate_quantile is not None:
        wseries = pd.Series(w, index=data.index)
        positive = wseries > 0
        caps = (
            wseries[positive]
            .groupby(data.loc[positive, "k"], sort=False)
            .transform(lambda s: s.quantile(truncate_quantile))
        )
        capped = np.minimum(wseries[positive], caps)
        truncated[positive.to_numpy()] = (capped < wseries[positive]).to_numpy()
        wseries[positive] = capped
        w = wseries.to_numpy()
    out = extended.with_columns(w=w, w_truncated=truncated)
    w_prev = (
        pd.Series(w, index=data.index)
        .groupby(grp, sort=False)
        .shift(1, fill_value=1.0)
    )
    return out.with_columns(w_prev=w_prev.to_numpy())


@dataclass
class StabilizationOptions:
    time_basis: TimeBasis | None = None
    n_interior_knots: int = 3
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 100
    saturated: bool = False


def compute_stabilized(
    extended: ExtendedDataset, options: StabilizationOptions | None = None
) -> tuple[ExtendedDataset, dict[str, LogisticFit]]:
    """Fill ``sw`` = numerator(d, k, V) * w.

    The numerator is, per regime, a logistic regression of the
    prescribed-action indicator 1{a_k = d_k} on a time basis and the V
    columns, fitted over at-risk rows of still-compatible paths.  Fitting per
    regime keeps the full (regime x time, regime x V) flexibility of a
    function of (d, k, V); the per-row numerator is the running product of
    the predicted probabilities (1 on event rows and past deviations).
    """
    opts = options or StabilizationOptions()
    data = extended.data
    if "w" not in data.columns:
        raise ValueError("unstabilized weights not computed; run compute_ipcw first")
    # fit over every still-compatible at-risk row (treated ones included):
    # the model then estimates the conditional probability of remaining
    # compatible, so the mean of sw among compatible rows telescopes to ~1
    rows_mask = (data["at_risk"] == 1) & (data["compat_prev"] == 1)
    factor = np.ones(len(data))
    fits: dict[str, LogisticFit] = {}
    for rid in extended.regime_ids:
        sub_mask = rows_mask & (data["regime"] == rid)
        rows = data.loc[sub_mask]
        if not len(rows):
            continue
        days = rows["k"].to_numpy()
        if opts.saturated:
            uniq = np.unique(days)
            time_block = (days[:, None] == uniq[None, :]).astype(float)
            time_names = [f"day{day}" for day in uniq]
            parts = [time_block]
            names = list(time_names)
            intercept_index = None
        else:
            basis = opts.time_basis or spline_from_quantiles(
                days, opts.n_interior_knots, (0.0, float(extended.horizon))
            )
            time_block = basis.evaluate(days)
            time_names = [f"t{j}" for j in range(basis.n_basis)]
            parts = [np.ones((len(rows), 1)), time_block]
            names = ["intercept"] + time_names
            intercept_index = 0
        # V enters with full time interaction so e.g. a one-off decision at
        # day 0 followed by forced continuation is representable
        for col in extended.v_columns:
            v = rows[col].to_numpy(dtype=float)
            if not opts.saturated:
                parts.append(v[:, None])
                names.append(col)
            parts.append(v[:, None] * time_block)
            names.extend(f"{col}:{t}" for t in time_names)
        X = np.hstack(parts)
        response = (rows["a"] == rows["d"]).to_numpy(dtype=float)
        fit = fit_weighted_logistic(
            X,
            response,
            options=SolverOptions(
                tol=opts.tol,
                max_iter=opts.max_iter,
                ridge=opts.ridge,
                intercept_index=intercept_index,
            ),
            column_names=tuple(names),
        )
        fits[rid] = fit
        factor[sub_mask.to_numpy()] = fit.predict_proba(X)
    numer = (
        pd.Series(factor, index=data.index)
        .groupby([data["id"], data["regime"]], sort=False)
        .cumprod()
    )
    sw = numer.to_numpy() * data["w"].to_numpy()
    out = extended.with_columns(sw=sw, sw_numerator=numer.to_numpy())
    sw_prev = (
        pd.Series(sw, index=out.data.index)
        .groupby([out.data["id"], out.data["regime"]], sort=False)
        .shift(1, fill_value=1.0)
    )
    return out.with_columns(sw_prev=sw_prev.to_numpy()), fits


def weight_diagnostics(
    extended: ExtendedDataset, weight_col: str = "w"
) -> pd.DataFrame:
    """Per (regime, day) weight summary suitable for linear/log-scale plots."""
    data = extended.data
    if weight_col not in data.columns:
        raise ValueError(f"{weight_col!r} not computed")
    w = data[weight_col]
    records = []
    for (rid, day), g in data.groupby(["regime", "k"], sort=True):
        pos = g[weight_col][g[weight_col] > 0]
        rec = {
            "regime": rid,
            "day": int(day),
            "n_rows": len(g),
            "n_zero": int((g[weight_col] == 0).sum()),
            "n_truncated": int(g["w_truncated"].sum()) if "w_truncated" in g else 0,
        }
        for stat, value in (
            ("min", pos.min()),
            ("q25", pos.quantile(0.25)),
            ("median", pos.quantile(0.5)),
            ("mean", pos.mean()),
            ("q75", pos.quantile(0.75)),
            ("q99", pos.quantile(0.99)),
            ("max", pos.max()),
        ):
            rec[stat] = float(value) if len(pos) else np.nan
        records.append(rec)
    return pd.DataFrame.from_records(records)
