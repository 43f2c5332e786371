"""collinsim: fitting, tuning and benchmarking binary risk models under
multi-collinearity, plus the simulation engine that evaluates them."""

from ._kernels import BACKEND as kernel_backend
from .datagen import (GaussianPopulation, SETTINGS, SettingSpec, build_ground_truth,
                      build_population, compute_vif, load_correlation_matrix,
                      recalibrate_ground_truth, sample, scale_collinearity,
                      solve_scale_for_vif)
from .losses import LatentSpec, PenaltySpec, nll, penalty, reconstruction_loss
from .methods import (METHOD_NAMES, MethodSpec, fit, fit_laelr, fit_pclr,
                      hyperparameter_space)
from .metrics import (MetricsReport, auroc, calibration_intercept_slope, coef_mse,
                      exjacc, lowess_curve, nagelkerke_r2, percentile_ci, sign)
from .model_core import (Dataset, LinearModel, StandardizationParams,
                         load_dataset_csv, predict_risk, sigmoid, standardize_fit)
from .optim import (MinimizeResult, NonFiniteLossError, OptimizerConfig, minimize,
                    minimize_dropout_stochastic, minimize_projected)
from .simrunner import RunConfig, emit_report, run_repeated_kfold, run_setting
from .tuner import TuneResult, cv_loglik, tune

__version__ = "0.1.0"
