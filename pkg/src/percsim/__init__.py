"""Continuum percolation simulation."""

__version__ = "0.1.0"

from .errors import (BracketError, CapExceededError, DegenerateInputError, DivergenceError, InfeasibleError,
                     PercsimError, QuadratureError, UnreachableError)
from .estimate import EstimateResult
from .point_processes import MarkDistribution, PointCloud, RngStream, Window, sample_ppp
from .pathloss import PathLoss, pathloss_inverse
from .graphs import SinrParams, SpatialGraph, boolean_graph, gilbert_graph, sinr_graph
from .environments import EnvironmentSpec, RenewalLaw, build_environment, normalize_environment, sample_cox
from .percolation import ModelConfig, crossing_probability, find_critical, gamma_sweep, parameter_sweep

__all__ = [
    "__version__", "BracketError", "CapExceededError", "DegenerateInputError", "DivergenceError",
    "InfeasibleError", "PercsimError", "QuadratureError", "UnreachableError", "EstimateResult",
    "MarkDistribution", "PointCloud", "RngStream", "Window", "sample_ppp", "PathLoss", "pathloss_inverse",
    "SinrParams", "SpatialGraph", "boolean_graph", "gilbert_graph", "sinr_graph", "EnvironmentSpec",
    "RenewalLaw", "build_environment", "normalize_environment", "sample_cox", "ModelConfig",
    "crossing_probability", "find_critical", "gamma_sweep", "parameter_sweep",
]
