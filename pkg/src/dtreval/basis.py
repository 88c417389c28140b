"""Time-trend bases for the pooled regressions.

The default is a natural cubic spline in the day index (truncated-power
construction, linear beyond the boundary knots).  A per-day dummy encoding
is also provided; with regime interactions it saturates the hazard models,
which is what the estimator-equivalence checks exploit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TimeBasis:
    n_basis: int

    def evaluate(self, days) -> np.ndarray:
        """(len(days), n_basis) design block, finite everywhere."""
        raise NotImplementedError

    def column_names(self) -> list[str]:
        raise NotImplementedError


@dataclass(frozen=True)
class NaturalCubicSpline(TimeBasis):
    """Natural cubic spline basis without intercept column.

    Columns: the identity term plus one curvature term per interior knot.
    With no interior knots this degrades to a linear trend.
    """

    knots: tuple[float, ...]
    boundary: tuple[float, float]

    def __post_init__(self):
        lo, hi = self.boundary
        if not hi > lo:
            raise ValueError(f"boundary knots must be increasing, got {self.boundary}")
        inner = tuple(sorted(self.knots))
        if any(not (lo < t < hi) for t in inner):
            raise ValueError("interior knots must lie strictly inside the boundary")
        object.__setattr__(self, "knots", inner)

    @property
    def n_basis(self) -> int:
        return 1 + len(self.knots)

    def evaluate(self, days) -> np.ndarray:
        x = np.asarray(days, dtype=float)
        all_knots = np.array([self.boundary[0], *self.knots, self.boundary[1]])
        m = len(all_knots)
        out = np.empty((x.size, self.n_basis))
        out[:, 0] = x
        if m > 2:
            def d(j):
                num = np.maximum(x - all_knots[j], 0.0) ** 3 - np.maximum(
                    x - all_knots[-1], 0.0
                ) ** 3
                return num / (all_knots[-1] - all_knots[j])

            d_last = d(m - 2)
            for j in range(m - 2):
                out[:, 1 + j] = d(j) - d_last
        return out

    def column_names(self) -> list[str]:
        return [f"s{j}" for j in range(self.n_basis)]


def spline_from_quantiles(days, n_interior: int, boundary: tuple[float, float]) -> NaturalCubicSpline:
    """Interior knots at equally spaced quantiles of the observed days.

    Duplicate or boundary-coincident knots (short follow-up, few distinct
    days) are dropped, shrinking the basis rather than failing.
    """
    days = np.asarray(days, dtype=float)
    lo, hi = boundary
    if n_interior > 0 and days.size:
        qs = np.linspace(0, 1, n_interior + 2)[1:-1]
        knots = np.quantile(days, qs)
        knots = np.unique(knots[(knots > lo) & (knots < hi)])
    else:
        knots = np.array([])
    return NaturalCubicSpline(knots=tuple(knots), boundary=(float(lo), float(hi)))


@dataclass(frozen=True)
class DayDummies(TimeBasis):
    """One indicator column per day in 1..horizon (day `first` is reference)."""

    horizon: int
    first: int = 1

    @property
    def n_basis(self) -> int:
        return self.horizon - self.first

    def evaluate(self, days) -> np.ndarray:
        x = np.asarray(days, dtype=np.int64)
        out = np.zeros((x.size, self.n_basis))
        for j, day in enumerate(range(self.first + 1, self.horizon + 1)):
            out[:, j] = x == day
        return out

    def column_names(self) -> list[str]:
        return [f"day{day}" for day in range(self.first + 1, self.horizon + 1)]


def regime_time_design(
    regime_ids,
    days,
    regime_order: tuple[str, ...],
    time_basis: TimeBasis,
    v_frame=None,
    saturated: bool = False,
) -> tuple[np.ndarray, list[str]]:
    """Design matrix for the pooled hazard and numerator models.

    Default encoding: intercept, regime dummies (first regime is the
    reference), time-basis columns, regime x time interactions, then V
    columns.  ``saturated=True`` instead emits one indicator per
    (regime, day) cell and nothing else, so each cell is fit independently.
    """
    regime_ids = np.asarray(regime_ids)
    days = np.asarray(days)
    if saturated:
        cols = []
        names = []
        uniq_days = np.unique(days)
        v_cols = list(v_frame.columns) if v_frame is not None else []
        v_mat = v_frame.to_numpy(dtype=float) if v_cols else None
        for rid in regime_order:
            for day in uniq_days:
                cell = ((regime_ids == rid) & (days == day)).astype(float)
                cols.append(cell)
                names.append(f"cell[{rid},{int(day)}]")
                # V enters per cell, keeping the blocks orthogonal so each
                # (regime, day) stratum is still fit independently
                for j, vc in enumerate(v_cols):
                    cols.append(cell * v_mat[:, j])
                    names.append(f"cell[{rid},{int(day)}]:{vc}")
        return np.column_stack(cols), names

    blocks = [np.ones((len(days), 1))]
    names = ["intercept"]
    dummies = []
    for rid in regime_order[1:]:
        dummies.append((regime_ids == rid).astype(float))
        names.append(f"regime[{rid}]")
    if dummies:
        blocks.append(np.column_stack(dummies))
    tb = time_basis.evaluate(days)
    blocks.append(tb)
    names.extend(time_basis.column_names())
    for i, rid in enumerate(regime_order[1:]):
        blocks.append(tb * dummies[i][:, None])
        names.extend(f"regime[{rid}]:{c}" for c in time_basis.column_names())
    if v_frame is not None and len(v_frame.columns):
        blocks.append(v_frame.to_numpy(dtype=float))
        names.extend(v_frame.columns)
    return np.column_stack(blocks), names
