"""Linear fractional self-attracting diffusion: kernels, covariances, simulation and local times."""

__version__ = "0.1.0"

from .errors import DomainError, MethodError, NumericError, ResolutionError
from .fbm import FbmPath, HurstIndex, TimeGrid, fbm_covariance, fbm_matrix, generate_fbm
from .gausscov import covariance_matrix, cross_cov, l2_gap, lnd_exact, sigma2, sigma2_increment
from .kernel import ModelParams, eval_h, eval_h_limit, eval_weight, weight_table
from .quadrature import QuadratureSpec
from .simulate import (DriftSpec, PathSet, simulate, simulate_euler, simulate_gaussian_exact,
                       simulate_representation)

__all__ = [
    "DomainError", "MethodError", "NumericError", "ResolutionError",
    "FbmPath", "HurstIndex", "TimeGrid", "fbm_covariance", "fbm_matrix", "generate_fbm",
    "covariance_matrix", "cross_cov", "l2_gap", "lnd_exact", "sigma2", "sigma2_increment",
    "ModelParams", "eval_h", "eval_h_limit", "eval_weight", "weight_table",
    "QuadratureSpec", "DriftSpec", "PathSet", "simulate", "simulate_euler",
    "simulate_gaussian_exact", "simulate_representation",
]
