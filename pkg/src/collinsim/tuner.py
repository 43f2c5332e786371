"""Hyperparameter tuning: Gaussian-process Bayesian optimization inside a
3-fold cross-validation loop with a held-out log-likelihood criterion.

The surrogate works in the normalized [0,1]^p cube (log-linear priors are
searched in log space, integers rounded after acquisition): a squared
exponential kernel with unit length-scale and 1e-6 observation noise,
expected-improvement acquisition maximized over seeded quasi-random
candidates, 5 quasi-random initial trials followed by 10 GP-guided ones.
These surrogate choices are defaults of this implementation, not part of
the tuning protocol itself.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr
from scipy.stats import qmc

from .losses import nll
from .methods import MethodSpec, fit, hyperparameter_space
from .model_core import Dataset, standardize_fit
from .optim import OptimizerConfig

__all__ = ["TuneResult", "TuningError", "tune", "cv_loglik"]

N_INITIAL = 5
N_GP_ITERATIONS = 10
N_CANDIDATES = 512
GP_LENGTH_SCALE = 1.0
GP_NOISE = 1e-6


class TuningError(RuntimeError):
    pass


@dataclass(frozen=True)
class TuneResult:
    """Outcome of a tuning run: the winning parameters and the full trial log."""

    best_params: dict
    trials: list  # (params dict, mean held-out log-likelihood)
    folds: int = 3


def _fold_indices(n: int, folds: int, seed: int):
    """Seeded shuffle split into `folds` index arrays (a partition)."""
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def cv_loglik(spec: MethodSpec, data: Dataset, folds: int = 3, seed: int = 0,
              config: OptimizerConfig | None = None) -> float:
    """Mean over folds of the summed held-out log-likelihood.

    Standardization is refit on every training fold and applied to its
    held-out fold. A fold whose training split contains a single outcome
    class is skipped with a warning; if every fold is skipped this raises.
    """
    if data.n < folds:
        raise ValueError(f"need at least {folds} rows, got {data.n}")
    config = config or OptimizerConfig()
    parts = _fold_indices(data.n, folds, seed)
    values = []
    for i, heldout in enumerate(parts):
        train_rows = np.concatenate([parts[j] for j in range(folds) if j != i])
        train = data.subset(train_rows)
        test = data.subset(heldout)
        if train.y.min() == train.y.max() or heldout.size == 0:
            warnings.warn(f"fold {i}: single-class training split, skipped")
            continue
        std = standardize_fit(train.X, train.feature_names)
        model = fit(spec, std.apply_dataset(train), config)
        values.append(-nll(model, std.apply_dataset(test)))
    if not values:
        raise TuningError("every fold had a single-class training split")
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# parameter transforms between native values and the unit cube
# ---------------------------------------------------------------------------

def _to_native(u, space):
    params = {}
    for uj, p in zip(u, space):
        if p.prior == "log":
            x = float(np.exp(np.log(p.low) + uj * (np.log(p.high) - np.log(p.low))))
        else:
            x = float(p.low + uj * (p.high - p.low))
        if p.integer:
            x = int(np.clip(round(x), p.low, p.high))
        params[p.name] = x
    return params


def _to_unit(params, space):
    u = np.empty(len(space))
    for j, p in enumerate(space):
        x = params[p.name]
        if p.prior == "log":
            u[j] = (np.log(x) - np.log(p.low)) / (np.log(p.high) - np.log(p.low))
        else:
            u[j] = (x - p.low) / (p.high - p.low) if p.high > p.low else 0.0
    return np.clip(u, 0.0, 1.0)


def _gp_posterior(U, ys, C):
    """SE-kernel GP posterior mean/variance at candidate points C."""
    def k(A, B):
        sq = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
        return np.exp(-0.5 * sq / GP_LENGTH_SCALE ** 2)

    K = k(U, U) + GP_NOISE * np.eye(U.shape[0])
    factor = cho_factor(K, lower=True)
    alpha = cho_solve(factor, ys)
    Kc = k(C, U)
    mu = Kc @ alpha
    var = 1.0 - np.sum(Kc * cho_solve(factor, Kc.T).T, axis=1)
    return mu, np.maximum(var, 1e-12)


def _expected_improvement(mu, var, best):
    sigma = np.sqrt(var)
    z = (mu - best) / sigma
    phi = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    return sigma * (z * ndtr(z) + phi)


def maximize_bayes(space, objective, seed: int, n_initial: int = N_INITIAL,
                   n_iterations: int = N_GP_ITERATIONS,
                   n_candidates: int = N_CANDIDATES):
    """GP-guided maximization of `objective(params_dict)` over the space.

    Returns the trial list [(params, value)]. Non-finite objective values
    are recorded but excluded from the surrogate.
    """
    p = len(space)
    sobol = qmc.Sobol(d=p, scramble=True, seed=seed)
    trials = []
    U_obs = []

    def evaluate(u):
        params = _to_native(u, space)
        try:
            value = float(objective(params))
        except Exception as exc:  # propagate as a diagnosable NaN trial
            warnings.warn(f"trial {params} failed: {exc}")
            value = np.nan
        trials.append((params, value))
        U_obs.append(_to_unit(params, space))

    # draw a power-of-two batch to keep the Sobol balance warning quiet
    n_batch = 1 << max(int(np.ceil(np.log2(max(n_initial, 1)))), 0)
    for u in sobol.random(n_batch)[:n_initial]:
        evaluate(u)
    for _ in range(n_iterations):
        C = sobol.random(n_candidates)
        ys = np.array([v for _, v in trials])
        ok = np.isfinite(ys)
        if not ok.any():
            # no signal yet: fall back to the next quasi-random point
            evaluate(C[0])
            continue
        U = np.asarray(U_obs)[ok]
        yv = ys[ok]
        sd = yv.std()
        ystd = (yv - yv.mean()) / (sd if sd > 0 else 1.0)
        mu, var = _gp_posterior(U, ystd, C)
        ei = _expected_improvement(mu, var, ystd.max())
        evaluate(C[int(np.argmax(ei))])
    return trials


def tune(spec_family: MethodSpec, data: Dataset, seed: int,
         config: OptimizerConfig | None = None, trace_path=None) -> TuneResult:
    """Tune one method's hyperparameters on a development set.

    Every trial evaluates the mean held-out log-likelihood over one fixed,
    seeded 3-fold partition. Methods without hyperparameters return an
    empty result immediately. When `trace_path` is given the trial log is
    written as CSV (trial_index, params..., mean_heldout_loglik).
    """
    space = hyperparameter_space(spec_family.method, data.d)
    if not space:
        return TuneResult({}, [])
    config = config or OptimizerConfig()

    def objective(params):
        return cv_loglik(spec_family.with_params(**params), data, 3, seed, config)

    trials = maximize_bayes(space, objective, seed)
    values = np.array([v for _, v in trials])
    if not np.isfinite(values).any():
        raise TuningError(
            "all tuning trials were non-finite: "
            + "; ".join(f"{p} -> {v}" for p, v in trials)
        )
    best_idx = int(np.nanargmax(values))
    result = TuneResult(dict(trials[best_idx][0]), trials)
    if trace_path is not None:
        _write_trace(trace_path, space, trials)
    return result


def _write_trace(path, space, trials):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["trial_index", *[p.name for p in space], "mean_heldout_loglik"])
        for i, (params, value) in enumerate(trials):
            writer.writerow([i, *[params[p.name] for p in space], repr(float(value))])
