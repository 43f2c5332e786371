"""Command-line interface.

Subcommands: ``simulate`` (replication study for a named setting), ``fit``
and ``tune`` (single dataset), ``vif`` and ``scale`` (correlation-matrix
diagnostics), and ``eval`` (repeated k-fold evaluation of an observed
dataset). ``COLLIN_WORKERS`` caps replication parallelism and
``COLLIN_BACKEND`` pins the kernel backend.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ._kernels import BACKEND
from .datagen import (GaussianPopulation, SETTINGS, canonical_setting,
                      compute_vif, load_correlation_matrix, scale_collinearity,
                      solve_scale_for_vif)
from .methods import METHOD_NAMES, MethodSpec, fit
from .model_core import LinearModel, load_dataset_csv, standardize_fit
from .optim import OptimizerConfig
from .simrunner import RunConfig, run_repeated_kfold, run_setting
from .tuner import tune

_METHOD_LOOKUP = {name.lower(): name for name in METHOD_NAMES}
_METHOD_LOOKUP["lrnn"] = "LR_NN"


def _parse_method(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    if key not in _METHOD_LOOKUP:
        raise SystemExit(f"unknown method {name!r}; choose from {', '.join(METHOD_NAMES)}")
    return _METHOD_LOOKUP[key]


def _parse_methods(arg: str):
    if arg.strip().lower() == "all":
        return [MethodSpec(m) for m in METHOD_NAMES]
    return [MethodSpec(_parse_method(m)) for m in arg.split(",") if m.strip()]


def _spec_from_args(args) -> MethodSpec:
    method = _parse_method(args.method)
    params = {}
    for name in ("c_l1", "c_l2", "delta", "k", "c_lae"):
        value = getattr(args, name, None)
        if value is not None:
            params[name] = value
    return MethodSpec(method).with_params(**params) if params else MethodSpec(method)


def _model_to_dict(model: LinearModel) -> dict:
    return {
        "intercept": model.intercept,
        "coefficients": dict(zip(model.feature_names, model.coefficients.tolist())),
    }


def _add_hyper_flags(p):
    p.add_argument("--c-l1", dest="c_l1", type=float)
    p.add_argument("--c-l2", dest="c_l2", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--c-lae", dest="c_lae", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collinsim",
        description="Risk-model fitting and simulation under multi-collinearity "
                    f"(kernel backend: {BACKEND})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the replication study for a setting")
    p.add_argument("--setting", required=True,
                   help=f"one of {', '.join(SETTINGS)} (or the triangle aliases)")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", default="all", help="'all' or a comma list")
    p.add_argument("--out", required=True)
    p.add_argument("--validation", type=int, default=10_000)

    p = sub.add_parser("fit", help="fit one method on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True)
    _add_hyper_flags(p)
    p.add_argument("--dose-names", dest="dose_names")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("tune", help="tune one method's hyperparameters")
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dose-names", dest="dose_names")
    p.add_argument("--out")

    p = sub.add_parser("vif", help="variance inflation factors of a correlation matrix")
    p.add_argument("--corr", required=True)

    p = sub.add_parser("scale", help="solve the off-diagonal scale for a target median VIF")
    p.add_argument("--corr", required=True)
    p.add_argument("--target-vif", dest="target_vif", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("eval", help="repeated k-fold evaluation on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--kfold", type=int, default=5)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--methods", default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dose-names", dest="dose_names")
    p.add_argument("--out")
    return parser


def cmd_simulate(args) -> int:
    config = RunConfig(
        setting=canonical_setting(args.setting),
        methods=_parse_methods(args.methods),
        n_reps=args.reps,
        n_validation=args.validation,
        base_seed=args.seed,
        output_dir=args.out,
    )
    reports = run_setting(config)
    for method, report in reports.items():
        summary = report.summary()
        auc = summary.get("auroc", {}).get("mean", float("nan"))
        print(f"{method}: mean AUROC {auc:.4f}, ExJacc {report.exjacc:.4f}")
    print(f"reports written to {config.output_dir}")
    return 0


def cmd_fit(args) -> int:
    data = load_dataset_csv(args.data, args.dose_names)
    spec = _spec_from_args(args)
    std = standardize_fit(data.X, data.feature_names)
    model = fit(spec, std.apply_dataset(data), OptimizerConfig(seed=args.seed))
    payload = _model_to_dict(model)
    print(json.dumps(payload, indent=2))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"model_{spec.method}.json", "w") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
    return 0


def cmd_tune(args) -> int:
    data = load_dataset_csv(args.data, args.dose_names)
    template = MethodSpec(_parse_method(args.method))
    trace_path = None
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        trace_path = out / f"tune_trace_{template.method}.csv"
    result = tune(template, data, args.seed, trace_path=trace_path)
    print(json.dumps({"best_params": result.best_params,
                      "n_trials": len(result.trials)}, indent=2))
    return 0


def cmd_vif(args) -> int:
    corr, names = load_correlation_matrix(args.corr)
    vifs, median = compute_vif(corr)
    for name, v in zip(names, vifs):
        print(f"{name},{v:.4f}")
    print(f"median,{median:.4f}")
    return 0


def cmd_scale(args) -> int:
    corr, names = load_correlation_matrix(args.corr)
    dummy = LinearModel(0.0, np.zeros(len(names)), names)
    population = GaussianPopulation(np.zeros(len(names)), corr, dummy,
                                    target_prevalence=0.5)
    s = solve_scale_for_vif(population, args.target_vif)
    scaled = scale_collinearity(population, s)
    _, median = compute_vif(scaled.covariance)
    print(f"scale,{s!r}")
    print(f"median_vif,{median!r}")
    if args.out:
        with open(args.out, "w") as f:
            f.write(",".join(names) + "\n")
            for row in scaled.covariance:
                f.write(",".join(repr(v) for v in row) + "\n")
    return 0


def cmd_eval(args) -> int:
    data = load_dataset_csv(args.data, args.dose_names)
    reports = run_repeated_kfold(data, _parse_methods(args.methods),
                                 k=args.kfold, n_reps=args.repeats,
                                 base_seed=args.seed, output_dir=args.out)
    for method, report in reports.items():
        summary = report.summary()
        auc = summary.get("auroc", {}).get("mean", float("nan"))
        print(f"{method}: mean AUROC {auc:.4f}, ExJacc {report.exjacc:.4f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "simulate": cmd_simulate,
        "fit": cmd_fit,
        "tune": cmd_tune,
        "vif": cmd_vif,
        "scale": cmd_scale,
        "eval": cmd_eval,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
