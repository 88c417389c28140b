"""Command-line front end: simulate, estimate, crossval, bootstrap.

All subcommands read a single YAML (or JSON) config file and write CSV/JSON
artifacts plus a manifest into the output directory.  Exit codes: 0 success,
1 usage/config, 2 data validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import __version__
from .basis import DayDummies
from .data_model import emit, ingest
from .errors import ConfigError, DataError, DtrError, NumericalError
from .estimators import MsmOptions, observed_cuminc, proportion_treated
from .propensity import PropensityOptions
from .regimes import Regime, threshold_grid
from .selection import (
    PipelineOptions,
    bootstrap_bands,
    cross_validate,
    estimate_curves,
    weighted_extended,
)
from .simulator import NAMED_SPECS, DgpSpec, generate_observational
from .weights import StabilizationOptions, weight_diagnostics


def load_config(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p) as fh:
            cfg = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {p}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    return cfg


def build_regimes(cfg: dict) -> list[Regime]:
    spec = cfg.get("regimes")
    if not spec:
        raise ConfigError("config key 'regimes' is required")
    return threshold_grid(
        spec["covariate"], spec["thresholds"], direction=spec.get("direction", "below")
    )


def build_pipeline_options(cfg: dict) -> PipelineOptions:
    ps_cfg = cfg.get("ps", {})
    w_cfg = cfg.get("weights", {})
    msm_cfg = cfg.get("msm", {})
    ps = PropensityOptions(
        covariates=tuple(ps_cfg.get("covariates", cfg.get("covariates", []))),
        n_interior_knots=int(ps_cfg.get("n_interior_knots", 3)),
        ridge=float(ps_cfg.get("ridge", 1e-6)),
        tol=float(ps_cfg.get("tol", 1e-8)),
        max_iter=int(ps_cfg.get("max_iter", 100)),
    )
    estimator = cfg.get("estimator", "aj")
    if estimator not in ("aj", "msm", "both"):
        raise ConfigError(f"estimator must be aj, msm or both, got {estimator!r}")
    msm_time = msm_cfg.get("time_encoding", "spline")
    msm = MsmOptions(
        n_interior_knots=int(msm_cfg.get("n_interior_knots", 3)),
        saturated=msm_time == "day_dummies",
        ridge=float(msm_cfg.get("ridge", 0.0)),
    )
    return PipelineOptions(
        ps=ps,
        ps_floor=float(w_cfg.get("ps_floor", 1e-6)),
        truncate_quantile=w_cfg.get("truncate_quantile"),
        stabilize=bool(w_cfg.get("stabilize", False)),
        stabilization=StabilizationOptions(),
        estimator=estimator if estimator != "both" else "aj",
        msm=msm,
    )


def load_cohort(cfg: dict):
    if "input" not in cfg:
        raise ConfigError("config key 'input' is required")
    return ingest(
        cfg["input"],
        schema=cfg.get("schema"),
        covariates=tuple(cfg.get("covariates", [])),
        horizon=cfg.get("horizon"),
        v_columns=tuple(cfg.get("v_columns", [])),
    )


def write_manifest(outdir: Path, cfg: dict, command: str) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg.get("seed"),
        "config": cfg,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))


def _outdir(cfg: dict) -> Path:
    out = Path(cfg.get("output_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(cfg: dict) -> int:
    dgp_cfg = cfg.get("dgp")
    if dgp_cfg is None:
        raise ConfigError("config key 'dgp' is required for simulate")
    n = int(cfg.get("n", 1000))
    horizon = int(cfg.get("horizon", 30))
    seed = int(cfg.get("seed", 0))
    if isinstance(dgp_cfg, str):
        if dgp_cfg not in NAMED_SPECS:
            raise ConfigError(f"unknown dgp {dgp_cfg!r}; known: {sorted(NAMED_SPECS)}")
        spec = NAMED_SPECS[dgp_cfg](n=n, horizon=horizon, seed=seed)
    else:
        try:
            spec = DgpSpec(n=n, horizon=horizon, seed=seed, **dgp_cfg)
        except TypeError as exc:
            raise ConfigError(f"bad dgp parameters: {exc}") from None
    cohort = generate_observational(spec)
    outdir = _outdir(cfg)
    emit(cohort, outdir / "cohort.csv")
    write_manifest(outdir, cfg, "simulate")
    print(f"wrote {outdir / 'cohort.csv'} ({cohort.n_patients} patients, K={cohort.horizon})")
    return 0


def cmd_estimate(cfg: dict) -> int:
    cohort = load_cohort(cfg)
    regimes = build_regimes(cfg)
    options = build_pipeline_options(cfg)
    estimators = ["aj", "msm"] if cfg.get("estimator", "aj") == "both" else [options.estimator]
    outdir = _outdir(cfg)

    ext, model = weighted_extended(cohort, regimes, options)
    curve_frames = []
    for name in estimators:
        opts = dataclasses.replace(options, estimator=name)
        curves = estimate_curves(ext, opts, cohort=cohort)
        curve_frames.extend(c.to_frame() for c in curves.values())
    curve_frames.append(observed_cuminc(cohort).to_frame())
    pd.concat(curve_frames, ignore_index=True).to_csv(outdir / "curves.csv", index=False)

    weight_diagnostics(ext, weight_col=options.weight_col).to_csv(
        outdir / "weight_diagnostics.csv", index=False
    )
    pd.concat(
        [proportion_treated(ext, rid, weight_col=options.weight_col) for rid in ext.regime_ids],
        ignore_index=True,
    ).to_csv(outdir / "proportion_treated.csv", index=False)
    (outdir / "propensity_fit.json").write_text(json.dumps(model.summary(), indent=2))
    write_manifest(outdir, cfg, "estimate")
    print(f"wrote curves, weight diagnostics and proportion-treated files to {outdir}")
    return 0


def cmd_crossval(cfg: dict) -> int:
    cohort = load_cohort(cfg)
    regimes = build_regimes(cfg)
    options = build_pipeline_options(cfg)
    cv_cfg = cfg.get("crossval", {})
    J = int(cv_cfg.get("J", 5))
    if J > cohort.n_patients:
        raise ConfigError(f"J={J} exceeds the number of patients ({cohort.n_patients})")
    report = cross_validate(
        cohort,
        regimes,
        options=options,
        J=J,
        seed=int(cv_cfg.get("seed", cfg.get("seed", 0))),
        stratify=bool(cv_cfg.get("stratify", True)),
        refit_ps_per_fold=bool(cv_cfg.get("refit_ps", False)),
    )
    outdir = _outdir(cfg)
    (outdir / "cv_report.json").write_text(report.to_json())
    write_manifest(outdir, cfg, "crossval")
    print(f"{'fold':>4}  {'selected':<16} {'test value':>10}")
    for f in report.folds:
        tv = "undefined" if f.test_value is None else f"{f.test_value:.4f}"
        print(f"{f.fold:>4}  {f.selected_regime:<16} {tv:>10}")
    print(f"cv_value = {report.cv_value:.4f}")
    print(f"in-sample value ({report.in_sample_regime}) = {report.in_sample_value:.4f}")
    return 0


def cmd_bootstrap(cfg: dict, threads: int = 1) -> int:
    cohort = load_cohort(cfg)
    regimes = build_regimes(cfg)
    options = build_pipeline_options(cfg)
    b_cfg = cfg.get("bootstrap", {})
    curves = bootstrap_bands(
        cohort,
        regimes,
        options=options,
        B=int(b_cfg.get("B", 200)),
        level=float(b_cfg.get("level", 0.95)),
        seed=int(b_cfg.get("seed", cfg.get("seed", 0))),
        threads=threads,
    )
    outdir = _outdir(cfg)
    pd.concat([c.to_frame() for c in curves.values()], ignore_index=True).to_csv(
        outdir / "curves_bootstrap.csv", index=False
    )
    write_manifest(outdir, cfg, "bootstrap")
    print(f"wrote {outdir / 'curves_bootstrap.csv'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dtreval",
        description="Evaluate and select dynamic treatment regimes with competing risks",
    )
    parser.add_argument("--threads", type=int, default=1, help="worker cap for bootstrap replicates")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "estimate", "crossval", "bootstrap"):
        p = sub.add_parser(name)
        p.add_argument("config", help="YAML/JSON config file")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg)
        if args.command == "crossval":
            return cmd_crossval(cfg)
        return cmd_bootstrap(cfg, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, DtrError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
