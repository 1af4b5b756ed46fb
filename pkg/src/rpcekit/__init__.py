"""Sparse and resampled polynomial chaos expansions."""

from .basis import design_matrix, enumerate_total_degree
from .bench import get_benchmark
from .pce import PceModel, build_rankers, build_sparse, load, save
from .prob import ExperimentalDesign, InputModel, gaussian, gumbel, lhs_sample, lognormal, uniform
from .regress import loo_path, ols_fit, r_squared
from .rpce import RpceConfig, rpce_rank
from .select import lars_rank, omp_rank
from .sobol import analytic_ishigami, indices_from_pce, mc_sobol

__version__ = "0.1.0"

__all__ = [
    "ExperimentalDesign", "InputModel", "PceModel", "RpceConfig", "analytic_ishigami", "build_rankers", "build_sparse",
    "design_matrix", "enumerate_total_degree", "gaussian", "get_benchmark", "gumbel", "indices_from_pce",
    "lars_rank", "lhs_sample", "load", "lognormal", "loo_path", "mc_sobol", "ols_fit", "omp_rank",
    "r_squared", "rpce_rank", "save", "uniform",
]
