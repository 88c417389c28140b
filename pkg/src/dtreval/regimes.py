"""Decision rules and the regime-cloned extended dataset.

A regime prescribes a treatment action from the observed history at each
day.  Threshold rules are sticky by default: once the trigger condition has
held on any day, treatment is prescribed from that day onward (cumulative-max
semantics), which matches the absorbing-treatment data invariant.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .data_model import Cohort
from .errors import RegimeEvalError


class Regime:
    """Deterministic decision rule with a label.

    Subclasses implement ``prescribe_cohort`` (vectorized over a canonical
    long frame) and, for simulator support, the stepping API
    ``start_state``/``step``.
    """

    id: str

    def prescribe_cohort(self, data: pd.DataFrame) -> np.ndarray:
        raise NotImplementedError

    def prescribe(self, history: pd.DataFrame, k: int) -> int:
        """Action at day k from a single-patient history through day k."""
        h = history.loc[history["k"] <= k]
        if h.empty:
            raise RegimeEvalError(f"history is empty through day {k}")
        return int(self.prescribe_cohort(h)[-1])

    # Vectorized stepping for forced-regime simulation: state is carried
    # across days, ``step`` maps current covariate arrays to actions.
    def start_state(self, n: int):
        raise NotImplementedError(f"regime {self.id!r} does not support stepping")

    def step(self, state, covariates: dict[str, np.ndarray], k: int) -> np.ndarray:
        raise NotImplementedError


class StickyConditionRule(Regime):
    """Prescribes 1 from the first day its trigger condition has ever held."""

    sticky: bool = True

    def condition(self, data: pd.DataFrame) -> np.ndarray:
        raise NotImplementedError

    def prescribe_cohort(self, data: pd.DataFrame) -> np.ndarray:
        cond = pd.Series(self.condition(data), index=data.index)
        if self.sticky:
            cond = cond.groupby(data["id"], sort=False).cummax()
        return cond.to_numpy(dtype=np.int64)

    def start_state(self, n: int):
        return np.zeros(n, dtype=bool)

    def step(self, state, covariates, k):
        frame = pd.DataFrame(covariates)
        frame["k"] = k
        cond = np.asarray(self.condition(frame), dtype=bool)
        if self.sticky:
            state |= cond
            return state.astype(np.int64)
        return cond.astype(np.int64)


@dataclass
class ThresholdRule(StickyConditionRule):
    """Treat once a covariate crosses a threshold (direction below/above)."""

    covariate: str
    threshold: float
    direction: str = "below"
    sticky: bool = True
    id: str = ""

    def __post_init__(self):
        if self.direction not in ("below", "above"):
            raise ValueError(f"direction must be 'below' or 'above', got {self.direction!r}")
        if not self.id:
            op = "<" if self.direction == "below" else ">"
            self.id = f"{self.covariate}{op}{self.threshold:g}"

    def condition(self, data: pd.DataFrame) -> np.ndarray:
        if self.covariate not in data.columns:
            raise RegimeEvalError(f"regime {self.id!r}: covariate {self.covariate!r} not in data")
        x = data[self.covariate].to_numpy(dtype=float)
        if self.direction == "below":
            if math.isinf(self.threshold) and self.threshold > 0:
                return np.ones(len(x), dtype=bool)
            return x < self.threshold
        if math.isinf(self.threshold) and self.threshold < 0:
            return np.ones(len(x), dtype=bool)
        return x > self.threshold


@dataclass
class AnyOfRule(StickyConditionRule):
    """Disjunction of trigger conditions (e.g. threshold OR clinical flag)."""

    members: list[StickyConditionRule] = field(default_factory=list)
    sticky: bool = True
    id: str = ""

    def __post_init__(self):
        if not self.members:
            raise ValueError("AnyOfRule requires at least one member rule")
        if not self.id:
            self.id = " | ".join(m.id for m in self.members)

    def condition(self, data: pd.DataFrame) -> np.ndarray:
        out = np.zeros(len(data), dtype=bool)
        for m in self.members:
            out |= np.asarray(m.condition(data), dtype=bool)
        return out


@dataclass
class FlagRule(StickyConditionRule):
    """Treat once a 0/1 covariate flag is set."""

    covariate: str
    sticky: bool = True
    id: str = ""

    def __post_init__(self):
        if not self.id:
            self.id = self.covariate

    def condition(self, data: pd.DataFrame) -> np.ndarray:
        if self.covariate not in data.columns:
            raise RegimeEvalError(f"regime {self.id!r}: covariate {self.covariate!r} not in data")
        return data[self.covariate].to_numpy(dtype=float) > 0.5


@dataclass
class StartDayRule(StickyConditionRule):
    """Treat everyone from a fixed day onward, regardless of covariates."""

    start: int = 0
    sticky: bool = True
    id: str = ""

    def __post_init__(self):
        if not self.id:
            self.id = f"start_day{self.start}"

    def condition(self, data: pd.DataFrame) -> np.ndarray:
        return data["k"].to_numpy() >= self.start


@dataclass
class FunctionRule(Regime):
    """Generic rule: fn(single-patient history frame, day) -> {0,1}.

    Evaluated patient by patient; slower than the condition-based rules.
    """

    fn: object = None
    id: str = "custom"

    def prescribe(self, history: pd.DataFrame, k: int) -> int:
        return int(self.fn(history.loc[history["k"] <= k], k))

    def prescribe_cohort(self, data: pd.DataFrame) -> np.ndarray:
        out = np.empty(len(data), dtype=np.int64)
        pos = 0
        for _, g in data.groupby("id", sort=False):
            g = g.reset_index(drop=True)
            for i in range(len(g)):
                out[pos + i] = int(self.fn(g.iloc[: i + 1], int(g["k"].iloc[i])))
            pos += len(g)
        return out


def threshold_grid(covariate: str, thresholds, direction: str = "below") -> list[ThresholdRule]:
    return [ThresholdRule(covariate=covariate, threshold=float(t), direction=direction) for t in thresholds]


def prescribed_action(regime: Regime, history: pd.DataFrame, k: int) -> int:
    return regime.prescribe(history, k)


@dataclass(frozen=True)
class ExtendedDataset:
    """Cohort cloned once per regime, with prescriptions and compatibility.

    data columns: the cohort columns plus ``regime`` (id), ``d`` (prescribed
    action), ``compat`` and ``compat_prev`` (compatibility at this day and
    the previous one), later ``p_treat``/``ps``/``w``/``sw``/``w_prev``
    filled by the propensity and weighting passes.
    """

    data: pd.DataFrame
    regime_ids: tuple[str, ...]
    horizon: int
    covariates: tuple[str, ...]
    v_columns: tuple[str, ...] = ()

    def with_columns(self, **cols) -> "ExtendedDataset":
        data = self.data.copy()
        for name, values in cols.items():
            data[name] = values
        return dataclasses.replace(self, data=data)

    def slice(self, regime_id: str) -> pd.DataFrame:
        return self.data.loc[self.data["regime"] == regime_id]


def build_extended(cohort: Cohort, regimes: list[Regime]) -> ExtendedDataset:
    """Clone the cohort per regime and propagate compatibility indicators.

    Compatibility at day k is compat(k-1) * 1{a_k = d_k} while at risk; on a
    terminal-event day it is carried forward unchanged (the day's action is
    never reached, so an event while compatible leaves the patient compatible
    for good).
    """
    if not regimes:
        raise ValueError("at least one regime is required")
    ids = [r.id for r in regimes]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate regime ids: {ids}")
    base = cohort.data
    parts = []
    for regime in regimes:
        g = base.copy()
        g["regime"] = regime.id
        g["d"] = regime.prescribe_cohort(base)
        match = np.where(g["at_risk"].to_numpy() == 1, (g["a"] == g["d"]).to_numpy(), True)
        compat = (
            pd.Series(match.astype(np.int64), index=g.index)
            .groupby(g["id"], sort=False)
            .cumprod()
        )
        g["compat"] = compat.to_numpy()
        g["compat_prev"] = (
            compat.groupby(g["id"], sort=False).shift(1, fill_value=1).to_numpy()
        )
        parts.append(g)
    data = pd.concat(parts, ignore_index=True)
    return ExtendedDataset(
        data=data,
        regime_ids=tuple(ids),
        horizon=cohort.horizon,
        covariates=cohort.covariates,
        v_columns=cohort.v_columns,
    )
