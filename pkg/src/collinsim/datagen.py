"""The simulated data-generating mechanism.

Covers correlation-matrix ingestion, collinearity scaling (off-diagonal
multiplication that leaves the diagonal untouched), variance-inflation
diagnostics, multivariate-normal sampling with Bernoulli outcomes from a
ground-truth linear model, and slope/intercept recalibration that preserves
class separation (AUROC) and outcome prevalence when the collinearity of a
population is changed.

Eight named settings pair four transcribed predictor correlation matrices
(bundled under ``data/``) with Ridge ground-truth coefficient tables, in
low- and high-collinearity variants.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .model_core import Dataset, LinearModel, sigmoid

__all__ = [
    "GaussianPopulation",
    "SettingSpec",
    "SETTINGS",
    "SETTING_ALIASES",
    "load_correlation_matrix",
    "compute_vif",
    "scale_collinearity",
    "solve_scale_for_vif",
    "sample",
    "build_ground_truth",
    "recalibrate_ground_truth",
    "build_population",
    "bundled_correlation",
]

VIF_SOLVE_RTOL = 0.01          # relative tolerance of the bisection target
DIAG_PRESERVE_TOL = 1e-6       # clipping may not move the diagonal more than this
AUROC_MATCH_TOL = 0.002
PREVALENCE_MATCH_TOL = 0.002


@dataclass(frozen=True)
class GaussianPopulation:
    """A multivariate-normal predictor population with a ground-truth model.

    ``scale_factor`` records the cumulative off-diagonal multiplier applied
    to the covariance (1 = unscaled). ``dose_mask`` marks dose predictors
    for downstream datasets.
    """

    mean: np.ndarray
    covariance: np.ndarray
    ground_truth: LinearModel
    scale_factor: float = 1.0
    target_prevalence: float = 0.5
    dose_mask: np.ndarray = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.covariance, dtype=float)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ValueError(f"covariance shape {cov.shape} does not match mean length {d}")
        if np.max(np.abs(cov - cov.T)) > 1e-10:
            raise ValueError("covariance must be symmetric (within 1e-10)")
        min_eig = float(np.linalg.eigvalsh(cov).min())
        if min_eig < -1e-8:
            raise ValueError(f"covariance is indefinite (min eigenvalue {min_eig:.3e})")
        if self.ground_truth.d != d:
            raise ValueError("ground-truth dimension does not match the population")
        if not (0.0 < self.target_prevalence < 1.0):
            raise ValueError("target_prevalence must lie in (0, 1)")
        mask = self.dose_mask
        mask = np.zeros(d, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if mask.shape[0] != d:
            raise ValueError("dose_mask length mismatch")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "dose_mask", mask)

    @property
    def d(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class SettingSpec:
    """One row of the simulation design: sample size, dimension, events per
    variable and the collinearity level (median VIF) to reproduce."""

    name: str
    outcome_label: str
    n_dev: int
    d: int
    epv: float
    target_median_vif: float


# the eight simulation settings; *_hi marks the high-collinearity variants
SETTINGS = {
    "A": SettingSpec("A", "xerostomia", 592, 7, 23, 5),
    "A_hi": SettingSpec("A_hi", "xerostomia", 592, 7, 23, 43),
    "B": SettingSpec("B", "xerostomia", 592, 19, 8, 5),
    "B_hi": SettingSpec("B_hi", "xerostomia", 592, 19, 8, 43),
    "C": SettingSpec("C", "dysphagia", 592, 13, 6, 7),
    "C_hi": SettingSpec("C_hi", "dysphagia", 592, 13, 6, 43),
    "D": SettingSpec("D", "dysphagia", 592, 43, 2, 7),
    "D_hi": SettingSpec("D_hi", "dysphagia", 592, 43, 2, 43),
}

SETTING_ALIASES = {
    "A▵": "A_hi", "B▵": "B_hi", "C▵": "C_hi", "D▵": "D_hi",
}

_OUTCOME_PREVALENCE = {"xerostomia": 0.27, "dysphagia": 0.14}

# which bundled matrix + ground-truth table anchors each setting, and the
# VIF target when the matrix has to be rescaled first (None = use as-is)
_SETTING_BUILD = {
    "A": ("A", None),
    "A_hi": ("A", 43),
    "B": ("B_hi", 5),
    "B_hi": ("B_hi", None),
    "C": ("C", None),
    "C_hi": ("C", 43),
    "D": ("D_hi", 7),
    "D_hi": ("D_hi", None),
}


def canonical_setting(name: str) -> str:
    name = SETTING_ALIASES.get(name, name)
    if name not in SETTINGS:
        raise ValueError(f"unknown setting {name!r}; expected one of {sorted(SETTINGS)}")
    return name


# ---------------------------------------------------------------------------
# correlation-matrix handling
# ---------------------------------------------------------------------------

def load_correlation_matrix(path):
    """Read a correlation matrix from CSV: header row of names, then d data
    rows. The upper triangle may be left blank (lower-triangular input is
    mirrored); diagonals must be 1 and entries within [-1, 1].
    """
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        names = [c.strip() for c in next(reader)]
        rows = [[c.strip() for c in row] for row in reader if row]
    d = len(names)
    if len(rows) != d:
        raise ValueError(f"{path}: expected {d} data rows, found {len(rows)}")
    M = np.full((d, d), np.nan)
    for i, row in enumerate(rows):
        if len(row) > d:
            raise ValueError(f"{path}: row {i} has {len(row)} entries")
        for j, cell in enumerate(row):
            if cell != "":
                M[i, j] = float(cell)
    given = ~np.isnan(M)
    # mirror whichever triangle is present
    for i in range(d):
        for j in range(d):
            if np.isnan(M[i, j]) and given[j, i]:
                M[i, j] = M[j, i]
    if np.isnan(M).any():
        miss = np.argwhere(np.isnan(M))[0]
        raise ValueError(f"{path}: entry ({miss[0]},{miss[1]}) missing from both triangles")
    asym = float(np.max(np.abs(M - M.T)))
    if asym > 1e-9:
        raise ValueError(f"{path}: asymmetry {asym:.2e} exceeds 1e-9")
    if np.max(np.abs(np.diag(M) - 1.0)) > 1e-9:
        raise ValueError(f"{path}: diagonal entries must be 1")
    if np.max(np.abs(M)) > 1.0 + 1e-12:
        raise ValueError(f"{path}: correlation out of [-1, 1]")
    np.fill_diagonal(M, 1.0)
    return M, names


def bundled_correlation(key: str):
    """Bundled appendix correlation matrix for a base setting (A, B_hi, C, D_hi)."""
    ref = resources.files("collinsim").joinpath(f"data/corr_{key}.csv")
    with resources.as_file(ref) as path:
        return load_correlation_matrix(path)


def nearest_psd_correlation(M: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and rescale back to unit diagonal.

    Transcribed (rounded) correlation matrices can be slightly indefinite;
    this is the minimal repair that keeps them usable as covariances.
    """
    eigvals, eigvecs = np.linalg.eigh(M)
    if eigvals.min() >= 0:
        return M
    R = (eigvecs * np.maximum(eigvals, 0.0)) @ eigvecs.T
    scale = np.sqrt(np.diag(R))
    R = R / np.outer(scale, scale)
    R = (R + R.T) / 2.0
    np.fill_diagonal(R, 1.0)
    return R


# ---------------------------------------------------------------------------
# VIF and collinearity scaling
# ---------------------------------------------------------------------------

def compute_vif(covariance: np.ndarray):
    """Variance inflation factors from a (population) covariance matrix.

    VIF_j = 1 / (1 - R^2_j) where R^2_j comes from the linear regression of
    predictor j on all others, in closed form from the covariance. Returns
    (vif vector, median); a singular sub-regression yields +inf.
    """
    S = np.asarray(covariance, dtype=float)
    d = S.shape[0]
    if S.ndim != 2 or S.shape != (d, d) or d < 2:
        raise ValueError("need a square covariance with d >= 2")
    vif = np.empty(d)
    idx = np.arange(d)
    for j in range(d):
        others = idx != j
        S_oo = S[np.ix_(others, others)]
        s_oj = S[others, j]
        try:
            coef = np.linalg.solve(S_oo, s_oj)
        except np.linalg.LinAlgError:
            coef, *_ = np.linalg.lstsq(S_oo, s_oj, rcond=None)
        resid = S[j, j] - s_oj @ coef
        if resid <= S[j, j] * 1e-12:
            vif[j] = np.inf
        else:
            vif[j] = S[j, j] / resid
    return vif, float(np.median(vif))


def _scale_offdiagonal(cov: np.ndarray, s: float) -> np.ndarray:
    scaled = cov * s
    np.fill_diagonal(scaled, np.diag(cov))
    return scaled


def scale_collinearity(population: GaussianPopulation, s: float) -> GaussianPopulation:
    """Multiply the covariance off-diagonals by s, diagonal untouched.

    If scaling makes the matrix indefinite, eigenvalues are clipped at zero
    and the matrix reconstructed; an error is raised if that repair moves
    any diagonal entry by more than 1e-6 (advice: use a smaller s).
    """
    if s < 0:
        raise ValueError("scale factor must be nonnegative")
    cov = _scale_offdiagonal(population.covariance, s)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals.min() < 0:
        repaired = (eigvecs * np.maximum(eigvals, 0.0)) @ eigvecs.T
        repaired = (repaired + repaired.T) / 2.0
        drift = float(np.max(np.abs(np.diag(repaired) - np.diag(cov))))
        if drift > DIAG_PRESERVE_TOL:
            raise ValueError(
                f"eigenvalue clipping perturbs the diagonal by {drift:.2e} "
                f"(> {DIAG_PRESERVE_TOL}); use a smaller scale factor"
            )
        cov = repaired
    return replace(population, covariance=cov,
                   scale_factor=population.scale_factor * s)


def _max_safe_scale(cov: np.ndarray) -> float:
    """Largest off-diagonal multiplier keeping the matrix PSD.

    Scaling acts on the correlation as R_s = (1-s) I + s R, so the bound is
    1 / (1 - lambda_min(R)).
    """
    sd = np.sqrt(np.diag(cov))
    R = cov / np.outer(sd, sd)
    lam_min = float(np.linalg.eigvalsh(R).min())
    if lam_min >= 1.0:
        return 1e3
    return 1.0 / (1.0 - lam_min)


def solve_scale_for_vif(population: GaussianPopulation, target_median_vif: float) -> float:
    """Bisection for the off-diagonal scale that hits a target median VIF.

    Returns s such that the scaled matrix's median VIF is within 1% of the
    target, or the closest attainable value with a warning. A target of 1
    means independence (s = 0).
    """
    if target_median_vif < 1:
        raise ValueError("target median VIF must be at least 1")
    cov = population.covariance

    def med(s):
        scaled = _scale_offdiagonal(cov, s)
        if np.linalg.eigvalsh(scaled).min() < -1e-10:
            return np.inf
        return compute_vif(scaled)[1]

    if target_median_vif == 1.0:
        return 0.0
    s_hi = _max_safe_scale(cov) * (1.0 - 1e-9)
    med_hi = med(s_hi)
    while not np.isfinite(med_hi):
        s_hi *= 1.0 - 1e-6
        med_hi = med(s_hi)
    if med_hi < target_median_vif:
        warnings.warn(
            f"target median VIF {target_median_vif} unattainable; "
            f"closest achievable is {med_hi:.2f} at s={s_hi:.4f}"
        )
        return s_hi
    lo, hi = 0.0, s_hi
    s = s_hi
    for _ in range(200):
        s = (lo + hi) / 2.0
        m = med(s)
        if abs(m - target_median_vif) <= VIF_SOLVE_RTOL * target_median_vif:
            return s
        if m < target_median_vif:
            lo = s
        else:
            hi = s
    return s


# ---------------------------------------------------------------------------
# sampling and ground truth
# ---------------------------------------------------------------------------

def _symmetric_sqrt(cov: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(cov)
    return (eigvecs * np.sqrt(np.maximum(eigvals, 0.0))) @ eigvecs.T


def sample(population: GaussianPopulation, n: int, seed: int) -> Dataset:
    """Draw n observations: X multivariate normal via the symmetric square
    root of the covariance, y Bernoulli from the ground-truth risks."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    root = _symmetric_sqrt(population.covariance)
    X = population.mean + rng.standard_normal((n, population.d)) @ root.T
    gt = population.ground_truth
    p = sigmoid(X @ gt.coefficients + gt.intercept)
    y = (rng.random(n) < p).astype(float)
    return Dataset(X, y, gt.feature_names, population.dose_mask)


def _ground_truth_table():
    ref = resources.files("collinsim").joinpath("data/ground_truth.csv")
    table = {}
    with ref.open() as f:
        for row in csv.DictReader(f):
            key = (row["setting"], row["method"])
            table.setdefault(key, []).append((row["term"], float(row["value"])))
    return table


def build_ground_truth(source, method: str = "Ridge", config=None, seed: int = 0) -> LinearModel:
    """Ground-truth coefficients, either from the bundled coefficient tables
    (source = setting name) or by tuning + fitting Ridge on a reference
    dataset (source = Dataset)."""
    if isinstance(source, Dataset):
        from .optim import OptimizerConfig
        from .tuner import tune
        from .methods import MethodSpec, fit
        from .model_core import standardize_fit

        config = config or OptimizerConfig(seed=seed)
        template = MethodSpec(method)
        result = tune(template, source, seed, config)
        spec = template.with_params(**result.best_params)
        std = standardize_fit(source.X, source.feature_names)
        return fit(spec, std.apply_dataset(source), config)
    setting = canonical_setting(str(source))
    table = _ground_truth_table()
    key = (setting, method)
    if key not in table:
        known = sorted({k[1] for k in table})
        raise KeyError(f"no bundled coefficients for {key}; methods: {known}")
    terms = table[key]
    if terms[0][0] != "Intercept":
        raise ValueError("bundled table must start with the intercept")
    names = [t for t, _ in terms[1:]]
    values = np.array([v for _, v in terms[1:]])
    return LinearModel(terms[0][1], values, names)


def _weighted_auroc(scores: np.ndarray, p: np.ndarray) -> float:
    """Label-free AUROC estimate: probability-weighted pairwise comparison
    of scores, treating each observation's p as its chance of being a case.
    Tied scores count half; self-pairs are excluded."""
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    w = p[order]
    q = 1.0 - w
    starts = np.r_[0, np.flatnonzero(np.diff(s) != 0) + 1]
    Pg = np.add.reduceat(w, starts)
    Qg = np.add.reduceat(q, starts)
    Sg = np.add.reduceat(w * q, starts)
    q_below = np.concatenate([[0.0], np.cumsum(Qg)[:-1]])
    num = float(np.sum(Pg * q_below + 0.5 * (Pg * Qg - Sg)))
    den = float(w.sum()) * float(q.sum()) - float(np.sum(w * q))
    return num / den


def population_auroc(model: LinearModel, X: np.ndarray) -> float:
    """Monte-Carlo AUROC of a model on predictor draws X, marginalizing the
    label draw analytically."""
    z = X @ model.coefficients + model.intercept
    return _weighted_auroc(z, sigmoid(z))


def population_prevalence(model: LinearModel, X: np.ndarray) -> float:
    return float(np.mean(sigmoid(X @ model.coefficients + model.intercept)))


def _sample_X(population: GaussianPopulation, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    root = _symmetric_sqrt(population.covariance)
    return population.mean + rng.standard_normal((n, population.d)) @ root.T


def recalibrate_ground_truth(pop_before: GaussianPopulation,
                             pop_after: GaussianPopulation,
                             mc_n: int = 200_000, seed: int = 0) -> LinearModel:
    """Slope/intercept adjustment after collinearity scaling.

    Finds a slope multiplier a (bisection over [1e-3, 1e3] in log space) so
    the Monte-Carlo AUROC of (a*beta, beta0) on the scaled population
    matches the original population's AUROC within 0.002, then an intercept
    shift b so the prevalence matches within 0.002. AUROC is matched first
    because the subsequent intercept shift moves it only marginally.
    """
    if pop_before.d != pop_after.d:
        raise ValueError("populations must share the predictor dimension")
    if mc_n < 100_000:
        raise ValueError("mc_n must be at least 1e5")
    gt = pop_before.ground_truth
    X0 = _sample_X(pop_before, mc_n, seed)
    X1 = _sample_X(pop_after, mc_n, seed + 1)
    target_auroc = population_auroc(gt, X0)
    target_prev = population_prevalence(gt, X0)

    z1 = X1 @ gt.coefficients   # slope scaling acts on this score only
    order = np.argsort(z1, kind="stable")
    z_sorted = z1[order]

    def auroc_of(a):
        return _weighted_auroc(z_sorted, sigmoid(a * z_sorted + gt.intercept))

    lo, hi = np.log(1e-3), np.log(1e3)
    if not (auroc_of(np.exp(lo)) - target_auroc) * (auroc_of(np.exp(hi)) - target_auroc) <= 0:
        raise ValueError(
            f"target AUROC {target_auroc:.4f} unattainable for slope in [1e-3, 1e3]"
        )
    a = 1.0
    for _ in range(100):
        mid = (lo + hi) / 2.0
        a = np.exp(mid)
        diff = auroc_of(a) - target_auroc
        if abs(diff) <= AUROC_MATCH_TOL / 4:
            break
        if diff < 0:
            lo = mid
        else:
            hi = mid

    def prev_of(b):
        return float(np.mean(sigmoid(a * z_sorted + gt.intercept + b)))

    blo, bhi = -20.0, 20.0
    b = 0.0
    for _ in range(100):
        b = (blo + bhi) / 2.0
        diff = prev_of(b) - target_prev
        if abs(diff) <= PREVALENCE_MATCH_TOL / 4:
            break
        if diff < 0:
            blo = b
        else:
            bhi = b
    return LinearModel(gt.intercept + b, a * gt.coefficients, gt.feature_names)


# ---------------------------------------------------------------------------
# settings registry
# ---------------------------------------------------------------------------

def _dose_mask_from_names(names) -> np.ndarray:
    return np.array([not (n == "AGE" or "BSL" in n) for n in names])


def build_population(setting: str, mc_n: int = 200_000, seed: int = 0) -> GaussianPopulation:
    """Materialize a named setting: load its base correlation matrix, scale
    to the target median VIF when required, and attach the (possibly
    recalibrated) Ridge ground truth."""
    name = canonical_setting(setting)
    spec = SETTINGS[name]
    base_key, scale_target = _SETTING_BUILD[name]
    corr, names = bundled_correlation(base_key)
    corr = nearest_psd_correlation(corr)
    gt = build_ground_truth(base_key)
    if list(gt.feature_names) != names:
        raise RuntimeError(f"bundled names disagree for {base_key}")
    base = GaussianPopulation(
        mean=np.zeros(len(names)),
        covariance=corr,
        ground_truth=gt,
        target_prevalence=_OUTCOME_PREVALENCE[spec.outcome_label],
        dose_mask=_dose_mask_from_names(names),
    )
    if scale_target is None:
        return base
    s = solve_scale_for_vif(base, scale_target)
    scaled = scale_collinearity(base, s)
    recal = recalibrate_ground_truth(base, scaled, mc_n=mc_n, seed=seed)
    return replace(scaled, ground_truth=recal)
