"""Robust multiple-set linear canonical analysis based on S-estimators."""

from .blocks import BlockStructure
from .datagen import Contamination, ModelSpec, correlated_model, null_model, sample
from .exceptions import MslcaError
from .inference import (TestResult, gamma1_hat, kappa0_hat, kappa_variance_hat,
                        noncorrelation_test, test_statistic)
from .influence import (InfluenceContext, if_alpha, if_beta, if_bound, if_rho, if_scatter,
                        if_t, lambda_op)
from .loss import AsymptoticConstants, LossSpec, compute_constants, psi, tune_loss, xi
from .mslca import MslcaSolution, build_phi, build_t, fit_robust_mslca, solve_mslca
from .s_estimator import Dataset, SConfig, SEstimate, s_estimate

__version__ = "0.1.0"
