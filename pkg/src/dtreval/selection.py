"""Regime value computation, optimal-regime selection, the cross-validated
value benchmark and bootstrap confidence bands.

The weighting pipeline (propensity fit, compatibility probabilities, weights)
runs once on the full data by default; cross-validation folds only re-run the
estimation step.  A per-fold propensity refit is available for sensitivity
analysis.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .data_model import Cohort
from .errors import DtrError, EmptyRiskSetError, FoldError, NumericalError
from .estimators import (
    IncidenceCurve,
    MsmOptions,
    aj_cuminc,
    aj_hazards,
    msm_cuminc,
    msm_fit,
)
from .propensity import PropensityModel, PropensityOptions, fill_compatibility, fit_propensity
from .regimes import ExtendedDataset, Regime, build_extended
from .weights import StabilizationOptions, compute_ipcw, compute_stabilized

log = logging.getLogger(__name__)


@dataclass
class PipelineOptions:
    ps: PropensityOptions = field(default_factory=PropensityOptions)
    ps_floor: float = 1e-6
    truncate_quantile: float | None = None
    stabilize: bool = False
    stabilization: StabilizationOptions = field(default_factory=StabilizationOptions)
    estimator: str = "aj"
    msm: MsmOptions = field(default_factory=MsmOptions)

    @property
    def weight_col(self) -> str:
        return "sw" if self.stabilize else "w"


def weighted_extended(
    cohort: Cohort, regimes: list[Regime], options: PipelineOptions
) -> tuple[ExtendedDataset, PropensityModel]:
    """Full weighting pass: extended dataset with ps and weight columns."""
    model = fit_propensity(cohort, options.ps)
    ext = build_extended(cohort, regimes)
    ext = fill_compatibility(ext, cohort, model)
    ext = compute_ipcw(ext, ps_floor=options.ps_floor, truncate_quantile=options.truncate_quantile)
    if options.stabilize:
        ext, _ = compute_stabilized(ext, options.stabilization)
    return ext, model


def estimate_curves(
    extended: ExtendedDataset,
    options: PipelineOptions,
    patient_ids=None,
    cohort: Cohort | None = None,
) -> dict[str, IncidenceCurve]:
    """Per-regime incidence curves, optionally restricted to a patient set."""
    ext = extended
    if patient_ids is not None:
        keep = extended.data["id"].isin(np.asarray(patient_ids))
        ext = dataclasses.replace(extended, data=extended.data.loc[keep])
    if options.estimator == "aj":
        return {
            rid: aj_cuminc(aj_hazards(ext, rid, weight_col=options.weight_col), regime_id=rid)
            for rid in ext.regime_ids
        }
    if options.estimator == "msm":
        msm_opts = dataclasses.replace(options.msm, weight_col=options.weight_col)
        fits = msm_fit(ext, msm_opts)
        marg = cohort.subset(patient_ids) if (cohort is not None and patient_ids is not None) else cohort
        return {rid: msm_cuminc(fits, rid, marginalize_over=marg) for rid in ext.regime_ids}
    raise ValueError(f"unknown estimator {options.estimator!r}")


def regime_values(curves) -> dict[str, float]:
    """Horizon incidence per regime (lower is better)."""
    if isinstance(curves, dict):
        return {rid: c.value for rid, c in curves.items()}
    return {c.regime_id: c.value for c in curves}


def select_optimal(values: dict[str, float], order: tuple[str, ...] | None = None) -> tuple[str, bool]:
    """Regime with the lowest value; ties go to the earlier declared regime.

    Returns (regime_id, tie_flag).
    """
    if not values:
        raise ValueError("no regime values to select from")
    if any(not np.isfinite(v) for v in values.values()):
        raise ValueError(f"non-finite regime values: {values}")
    order = order or tuple(values.keys())
    best = min(values.values())
    winners = [rid for rid in order if rid in values and values[rid] == best]
    tie = len(winners) > 1
    if tie:
        log.info("value tie between %s; keeping %s (declaration order)", winners, winners[0])
    return winners[0], tie


@dataclass(frozen=True)
class FoldResult:
    fold: int
    selected_regime: str
    train_value: float
    test_value: float | None
    note: str = ""


@dataclass(frozen=True)
class CvReport:
    J: int
    folds: tuple[FoldResult, ...]
    cv_value: float
    in_sample_regime: str
    in_sample_value: float
    seed: int
    estimator: str

    @property
    def optimism(self) -> float:
        """Cross-validated value minus the in-sample value of the full-data
        selection; positive means the in-sample figure was optimistic."""
        return self.cv_value - self.in_sample_value

    def to_dict(self) -> dict:
        return {
            "J": self.J,
            "seed": self.seed,
            "estimator": self.estimator,
            "folds": [dataclasses.asdict(f) for f in self.folds],
            "cv_value": self.cv_value,
            "in_sample_regime": self.in_sample_regime,
            "in_sample_value": self.in_sample_value,
            "optimism": self.optimism,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), indent=2, **kwargs)


def _patient_strata(cohort: Cohort) -> pd.Series:
    last = cohort.data.groupby("id", sort=False).tail(1).set_index("id")
    status = np.where(last["y"] == 1, "died", np.where(last["z"] == 1, "discharged", "neither"))
    return pd.Series(status, index=last.index)


def make_folds(cohort: Cohort, J: int, seed: int, stratify: bool = True) -> list[np.ndarray]:
    """Patient-level partition into J folds with sizes differing by at most
    one; stratified by terminal status at the horizon unless disabled."""
    ids = np.array(sorted(cohort.patient_ids, key=str), dtype=object)
    if J < 2:
        raise ValueError("J must be at least 2")
    if len(ids) < J:
        raise ValueError(f"cohort has {len(ids)} patients, fewer than J={J}")
    rng = np.random.default_rng(seed)
    folds: list[list] = [[] for _ in range(J)]
    if stratify:
        strata = _patient_strata(cohort)
        offset = 0
        for _, members in sorted(
            ((s, ids[strata.loc[ids].to_numpy() == s]) for s in np.unique(strata.loc[ids])),
            key=lambda t: t[0],
        ):
            perm = rng.permutation(len(members))
            for i, j in enumerate(perm):
                folds[(offset + i) % J].append(members[j])
            offset += len(members)
    else:
        perm = rng.permutation(len(ids))
        for i, j in enumerate(perm):
            folds[i % J].append(ids[j])
    return [np.array(f, dtype=object) for f in folds]


def cross_validate(
    cohort: Cohort,
    regimes: list[Regime],
    options: PipelineOptions | None = None,
    J: int = 5,
    seed: int = 0,
    stratify: bool = True,
    refit_ps_per_fold: bool = False,
) -> CvReport:
    """J-fold cross-validated value of the selected optimal regime.

    Weights come from the full data by default; each fold selects the best
    regime on its training patients and evaluates that single regime on the
    held-out patients.  The report averages the defined test values.
    """
    options = options or PipelineOptions()
    folds = make_folds(cohort, J, seed, stratify=stratify)
    all_ids = np.array(sorted(cohort.patient_ids, key=str), dtype=object)
    full_ext, _ = weighted_extended(cohort, regimes, options)
    order = full_ext.regime_ids

    results: list[FoldResult] = []
    for j, test_ids in enumerate(folds):
        train_ids = np.array([i for i in all_ids if i not in set(test_ids)], dtype=object)
        if refit_ps_per_fold:
            fold_ext, _ = weighted_extended(cohort.subset(train_ids), regimes, options)
            test_ext, _ = weighted_extended(cohort, regimes, options)
        else:
            fold_ext = full_ext
            test_ext = full_ext
        train_curves = estimate_curves(fold_ext, options, patient_ids=train_ids, cohort=cohort)
        train_values = regime_values(train_curves)
        selected, _ = select_optimal(train_values, order)
        note = ""
        try:
            test_curves = estimate_curves(
                test_ext, options, patient_ids=test_ids, cohort=cohort
            )
            test_value = test_curves[selected].value
        except (EmptyRiskSetError, NumericalError) as exc:
            note = f"test value undefined: {exc}"
            log.warning("fold %d: %s", j, note)
            test_value = None
        results.append(
            FoldResult(
                fold=j,
                selected_regime=selected,
                train_value=train_values[selected],
                test_value=test_value,
                note=note,
            )
        )
    defined = [r.test_value for r in results if r.test_value is not None]
    if not defined:
        raise FoldError("no fold produced a defined test value")
    if len(defined) < len(results):
        log.warning("cv_value averages %d of %d folds", len(defined), len(results))
    cv_value = float(np.mean(defined))

    full_curves = estimate_curves(full_ext, options, cohort=cohort)
    full_values = regime_values(full_curves)
    in_regime, _ = select_optimal(full_values, order)
    return CvReport(
        J=J,
        folds=tuple(results),
        cv_value=cv_value,
        in_sample_regime=in_regime,
        in_sample_value=full_values[in_regime],
        seed=seed,
        estimator=options.estimator,
    )


def bootstrap_bands(
    cohort: Cohort,
    regimes: list[Regime],
    options: PipelineOptions | None = None,
    B: int = 200,
    level: float = 0.95,
    seed: int = 0,
    threads: int = 1,
    max_failure_fraction: float = 0.10,
) -> dict[str, IncidenceCurve]:
    """Patient-level nonparametric bootstrap percentile bands.

    The whole pipeline (propensity fit, weights, estimation) is re-run per
    replicate.  Replicates that fail numerically are dropped; more than
    ``max_failure_fraction`` failures is an error.
    """
    if B < 2:
        raise ValueError("B must be at least 2")
    options = options or PipelineOptions()
    ext, _ = weighted_extended(cohort, regimes, options)
    point = estimate_curves(ext, options, cohort=cohort)
    ids = np.array(sorted(cohort.patient_ids, key=str), dtype=object)
    seeds = np.random.SeedSequence(seed).spawn(B)

    def replicate(ss):
        rng = np.random.default_rng(ss)
        draw = ids[rng.integers(0, len(ids), size=len(ids))]
        boot = cohort.resample(draw)
        rext, _ = weighted_extended(boot, regimes, options)
        curves = estimate_curves(rext, options, cohort=boot)
        return {rid: c.cif for rid, c in curves.items()}

    samples: list[dict] = []
    failures = 0
    if threads > 1:
        from joblib import Parallel, delayed

        def safe(ss):
            try:
                return replicate(ss)
            except DtrError as exc:
                return exc

        outs = Parallel(n_jobs=threads)(delayed(safe)(ss) for ss in seeds)
        for out in outs:
            if isinstance(out, Exception):
                failures += 1
                log.warning("bootstrap replicate failed: %s", out)
            else:
                samples.append(out)
    else:
        for ss in seeds:
            try:
                samples.append(replicate(ss))
            except DtrError as exc:
                failures += 1
                log.warning("bootstrap replicate failed: %s", exc)
    if failures > max_failure_fraction * B:
        raise NumericalError(f"{failures} of {B} bootstrap replicates failed")

    alpha = 1.0 - level
    out: dict[str, IncidenceCurve] = {}
    for rid, curve in point.items():
        stack = np.vstack([s[rid] for s in samples])
        out[rid] = dataclasses.replace(
            curve,
            lower=np.quantile(stack, alpha / 2, axis=0),
            upper=np.quantile(stack, 1 - alpha / 2, axis=0),
        )
    return out
