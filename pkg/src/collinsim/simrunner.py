"""Simulation engine and report emission.

``run_setting`` executes the replication loop for a named setting: sample a
development set, tune + fit every requested method, sample a fresh
validation set, score it, and aggregate percentile intervals plus the
selection-stability index over the fitted models. ``run_repeated_kfold``
is the analogous estimator for an observed dataset. All results are a pure
function of the :class:`RunConfig`; replications may execute in parallel
(``COLLIN_WORKERS``) without changing any emitted number.
"""

from __future__ import annotations

import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as M
from .datagen import SETTINGS, build_population, canonical_setting, sample
from .methods import MethodSpec, fit
from .model_core import Dataset, predict_risk, standardize_fit
from .optim import OptimizerConfig
from .tuner import tune

__all__ = ["RunConfig", "run_setting", "run_repeated_kfold", "emit_report"]

MAX_FAILED_FRACTION = 0.10
LOWESS_FRACTION = 2.0 / 3.0


@dataclass(frozen=True)
class RunConfig:
    """Everything a simulation run depends on."""

    setting: str
    methods: tuple
    n_reps: int = 100
    n_validation: int = 10_000
    base_seed: int = 0
    output_dir: Path = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    population_mc_n: int = 200_000

    def __post_init__(self):
        if self.n_reps < 2:
            raise ValueError("need at least 2 replications (selection stability "
                             "is a pairwise measure)")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.output_dir is not None:
            object.__setattr__(self, "output_dir", Path(self.output_dir))


def derive_seed(base_seed: int, *key) -> int:
    """Stable per-task seed material; distinct keys give distinct streams."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _worker_count() -> int:
    raw = os.environ.get("COLLIN_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _tune_and_fit(template: MethodSpec, dev: Dataset, seed_tune: int,
                  seed_fit: int, optimizer: OptimizerConfig, trace_path=None):
    """Tune on the raw development set (CV standardizes inside each fold),
    then fit on the fully standardized development set."""
    result = tune(template, dev, seed_tune, optimizer.with_seed(seed_tune),
                  trace_path=trace_path)
    spec = template.with_params(**result.best_params)
    std = standardize_fit(dev.X, dev.feature_names)
    model = fit(spec, std.apply_dataset(dev), optimizer.with_seed(seed_fit))
    return model, std, result


def _run_one_rep(args):
    (rep, config_setting, methods, n_dev, n_validation, base_seed, optimizer,
     population, trace_dir) = args
    dev = sample(population, n_dev, derive_seed(base_seed, 1, rep, 0))
    val = sample(population, n_validation, derive_seed(base_seed, 1, rep, 1))
    gt = population.ground_truth
    out = []
    for im, template in enumerate(methods):
        trace_path = None
        if trace_dir is not None:
            trace_path = Path(trace_dir) / f"rep{rep:04d}_{template.method}.csv"
        model, std, _ = _tune_and_fit(
            template, dev,
            derive_seed(base_seed, 1, rep, 2 + 2 * im),
            derive_seed(base_seed, 1, rep, 3 + 2 * im),
            optimizer,
            trace_path=trace_path,
        )
        p = predict_risk(model, std.apply(val.X))
        citl, cslope = M.calibration_intercept_slope(p, val.y)
        rec = M.ReplicationMetrics(
            rep=rep,
            method=template.method,
            auroc=M.auroc(p, val.y),
            citl=citl,
            cslope=cslope,
            r2_nagelkerke=M.nagelkerke_r2(p, val.y),
            coef_mse=M.coef_mse(model, gt),
            calibration_curve=M.lowess_curve(p, val.y, LOWESS_FRACTION),
        )
        out.append((rec, model))
    return rep, out


def run_setting(config: RunConfig):
    """Run the full replication loop for one named setting.

    Returns {method: MetricsReport}; when ``config.output_dir`` is set the
    report files are also written there. Failed replications are recorded
    and skipped; more than 10% failures aborts the run.
    """
    name = canonical_setting(config.setting)
    spec = SETTINGS[name]
    population = build_population(name, mc_n=config.population_mc_n,
                                  seed=derive_seed(config.base_seed, 0))
    trace_dir = None
    if config.output_dir is not None:
        trace_dir = Path(config.output_dir) / "tuning"
        trace_dir.mkdir(parents=True, exist_ok=True)
    jobs = [
        (rep, name, config.methods, spec.n_dev, config.n_validation,
         config.base_seed, config.optimizer, population, trace_dir)
        for rep in range(config.n_reps)
    ]
    results = {}
    failures = []
    workers = _worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = list(pool.map(_run_one_rep_safe, jobs))
        outcomes = futures
    else:
        outcomes = [_run_one_rep_safe(job) for job in jobs]
    # aggregation in replication order, independent of execution schedule
    outcomes.sort(key=lambda item: item[0])
    for rep, payload in outcomes:
        if isinstance(payload, Exception):
            failures.append((rep, payload))
            warnings.warn(f"replication {rep} failed and was excluded: {payload}")
            continue
        results[rep] = payload
    if len(failures) > MAX_FAILED_FRACTION * config.n_reps:
        raise RuntimeError(
            f"{len(failures)} of {config.n_reps} replications failed: "
            + "; ".join(f"rep {r}: {e}" for r, e in failures)
        )

    reports = {}
    models_by_method = {t.method: [] for t in config.methods}
    for template in config.methods:
        reports[template.method] = M.MetricsReport(template.method)
    for rep in sorted(results):
        for rec, model in results[rep]:
            reports[rec.method].per_rep.append(rec)
            models_by_method[rec.method].append(model)
    for method, report in reports.items():
        if len(models_by_method[method]) >= 2:
            report.exjacc = M.exjacc(models_by_method[method])
    if config.output_dir is not None:
        emit_report(reports, config.output_dir, models_by_method,
                    population.dose_mask, population.ground_truth.feature_names)
    return reports


def _run_one_rep_safe(args):
    rep = args[0]
    try:
        return _run_one_rep(args)
    except Exception as exc:  # recorded by the caller; >10% failures abort
        return rep, exc


def run_repeated_kfold(data: Dataset, methods, k: int = 5, n_reps: int = 100,
                       base_seed: int = 0, optimizer: OptimizerConfig | None = None,
                       output_dir=None):
    """Repeated k-fold evaluation of the methods on an observed dataset.

    Each repeat reshuffles the partition (re-drawn up to 100 times until
    every training split contains both classes). Metrics are computed per
    held-out fold and averaged into one value per repeat; coefficient MSE
    is omitted (no ground truth). Selection stability pools every fitted
    model across repeats and folds.
    """
    if data.n < k:
        raise ValueError(f"need at least k={k} rows")
    optimizer = optimizer or OptimizerConfig()
    methods = tuple(methods)
    reports = {t.method: M.MetricsReport(t.method) for t in methods}
    models_by_method = {t.method: [] for t in methods}

    for rep in range(n_reps):
        parts = _partition_with_both_classes(data, k, base_seed, rep)
        fold_vals = {t.method: [] for t in methods}
        pooled = {t.method: ([], []) for t in methods}  # predictions, outcomes
        for i, heldout in enumerate(parts):
            train_rows = np.concatenate([parts[j] for j in range(k) if j != i])
            train, test = data.subset(train_rows), data.subset(heldout)
            for im, template in enumerate(methods):
                model, std, _ = _tune_and_fit(
                    template, train,
                    derive_seed(base_seed, 2, rep, i, 2 * im),
                    derive_seed(base_seed, 2, rep, i, 2 * im + 1),
                    optimizer,
                )
                models_by_method[template.method].append(model)
                p = predict_risk(model, std.apply(test.X))
                if test.y.min() == test.y.max():
                    warnings.warn(f"rep {rep} fold {i}: single-class held-out fold skipped")
                    continue
                citl, cslope = M.calibration_intercept_slope(p, test.y)
                fold_vals[template.method].append(
                    (M.auroc(p, test.y), citl, cslope, M.nagelkerke_r2(p, test.y))
                )
                pooled[template.method][0].append(p)
                pooled[template.method][1].append(test.y)
        for template in methods:
            vals = np.array(fold_vals[template.method])
            if vals.size == 0:
                continue
            means = vals.mean(axis=0)
            p_all = np.concatenate(pooled[template.method][0])
            y_all = np.concatenate(pooled[template.method][1])
            reports[template.method].per_rep.append(M.ReplicationMetrics(
                rep=rep, method=template.method,
                auroc=float(means[0]), citl=float(means[1]),
                cslope=float(means[2]), r2_nagelkerke=float(means[3]),
                coef_mse=float("nan"),
                calibration_curve=M.lowess_curve(p_all, y_all, LOWESS_FRACTION),
            ))
    for method, report in reports.items():
        if len(models_by_method[method]) >= 2:
            report.exjacc = M.exjacc(models_by_method[method])
    if output_dir is not None:
        emit_report(reports, output_dir, models_by_method,
                    data.dose_mask, data.feature_names)
    return reports


def _partition_with_both_classes(data: Dataset, k: int, base_seed: int, rep: int):
    for attempt in range(100):
        rng = np.random.default_rng(derive_seed(base_seed, 3, rep, attempt))
        parts = np.array_split(rng.permutation(data.n), k)
        ok = True
        for i in range(k):
            train_rows = np.concatenate([parts[j] for j in range(k) if j != i])
            ytr = data.y[train_rows]
            if ytr.min() == ytr.max():
                ok = False
                break
        if ok:
            return parts
    raise RuntimeError(f"no shuffle with two-class training splits found in "
                       f"100 tries (rep {rep}, k={k})")


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def emit_report(reports: dict, output_dir, models_by_method: dict,
                dose_mask, feature_names):
    """Write raw per-replication metrics, the JSON summary with percentile
    intervals, calibration-curve points, and the mean-coefficient table
    (per-term mean and 2.5/97.5 percentiles plus negative/positive
    dose-coefficient sums and proportions at the 0.01 threshold)."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not reports:
        raise ValueError("reports must be nonempty")
    methods = list(reports)

    with open(out / "raw_metrics.csv", "w") as f:
        f.write("rep,method,auroc,citl,cslope,r2,coef_mse\n")
        reps = sorted({rec.rep for m in methods for rec in reports[m].per_rep})
        for rep in reps:
            for method in methods:
                for rec in reports[method].per_rep:
                    if rec.rep != rep:
                        continue
                    cm = "" if not np.isfinite(rec.coef_mse) else _fmt(rec.coef_mse)
                    f.write(f"{rep},{method},{_fmt(rec.auroc)},{_fmt(rec.citl)},"
                            f"{_fmt(rec.cslope)},{_fmt(rec.r2_nagelkerke)},{cm}\n")

    summary = {method: reports[method].summary() for method in methods}
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")

    for method in methods:
        with open(out / f"calibration_{method}.csv", "w") as f:
            f.write("rep,predicted,observed\n")
            for rec in reports[method].per_rep:
                if rec.calibration_curve is None:
                    continue
                for px, ox in rec.calibration_curve:
                    f.write(f"{rec.rep},{_fmt(px)},{_fmt(ox)}\n")

    dose_mask = np.asarray(dose_mask, dtype=bool)
    thr = M.SIGN_THRESHOLD
    with open(out / "coefficients.csv", "w") as f:
        f.write("method,term,mean,p2.5,p97.5\n")

        def emit_row(method, term, values):
            lo, hi = M.percentile_ci(values)
            f.write(f"{method},{term},{_fmt(np.mean(values))},{_fmt(lo)},{_fmt(hi)}\n")

        for method in methods:
            models = models_by_method.get(method, [])
            if len(models) < 2:
                continue
            B = np.array([m.coefficients for m in models])
            emit_row(method, "Intercept", np.array([m.intercept for m in models]))
            for j, name in enumerate(feature_names):
                emit_row(method, name, B[:, j])
            if dose_mask.any():
                D = B[:, dose_mask]
                emit_row(method, "sum_beta_neg", np.where(D < -thr, D, 0.0).sum(axis=1))
                emit_row(method, "sum_beta_pos", np.where(D > thr, D, 0.0).sum(axis=1))
                emit_row(method, "prop_beta_neg", (D < -thr).mean(axis=1))
                emit_row(method, "prop_beta_pos", (D > thr).mean(axis=1))
