"""Evaluation and selection of dynamic treatment regimes under competing risks.

Discrete-time longitudinal cohorts with two terminal events are turned into a
regime-expanded dataset, weighted by inverse probability of regime
compatibility, and summarized by cumulative-incidence curves (weighted
Aalen-Johansen or pooled-logistic marginal structural models).  Cross-validated
regime selection and patient-level bootstrap bands are layered on top, along
with a simulator whose forced-regime mode provides Monte Carlo ground truth.
"""

__version__ = "0.1.0"

from .basis import DayDummies, NaturalCubicSpline, spline_from_quantiles
from .data_model import Cohort, emit, from_frame, ingest, validate_ordering
from .errors import (
    ConfigError,
    DataError,
    DtrError,
    EmptyRiskSetError,
    FoldError,
    GapError,
    NumericalError,
    OrderError,
    PositivityError,
    RegimeEvalError,
    SchemaError,
    SeparationError,
    SingularDesignError,
)
from .estimators import (
    IncidenceCurve,
    MsmOptions,
    aj_cuminc,
    aj_hazards,
    assemble_cuminc,
    compat_censored_cuminc,
    msm_cuminc,
    msm_fit,
    observed_cuminc,
    proportion_treated,
)
from .logistic import LogisticFit, SolverOptions, fit_weighted_logistic
from .propensity import (
    PropensityModel,
    PropensityOptions,
    attach_treatment_probability,
    compatibility_probability,
    fill_compatibility,
    fit_propensity,
    treatment_probability,
)
from .regimes import (
    AnyOfRule,
    ExtendedDataset,
    FlagRule,
    FunctionRule,
    Regime,
    StartDayRule,
    StickyConditionRule,
    ThresholdRule,
    build_extended,
    prescribed_action,
    threshold_grid,
)
from .selection import (
    CvReport,
    FoldResult,
    PipelineOptions,
    bootstrap_bands,
    cross_validate,
    estimate_curves,
    make_folds,
    regime_values,
    select_optimal,
    weighted_extended,
)
from .simulator import (
    NAMED_SPECS,
    DgpSpec,
    baseline_only,
    coin_flip,
    confounded_feedback,
    forced_cohort,
    generate_observational,
    null_effect,
    true_counterfactual_cif,
    true_treatment_prevalence,
)
from .weights import (
    StabilizationOptions,
    compute_ipcw,
    compute_stabilized,
    weight_diagnostics,
)

__all__ = [name for name in dir() if not name.startswith("_")]
