"""Community structures on a content torus: equilibria, boundary dynamics and stability."""

from .community import (
    CommunityPairState,
    consumer_utility,
    optimal_content,
    producer_utility,
    triangle_integral,
)
from .config import ConfigError, RunConfig, load_config, parse_config
from .dynamics import LinearSystem, PerturbationState, Trajectory, integrate, linear_coefficients, linear_solution, rhs
from .equilibrium import EquilibriumSpec, best_response_audit, equilibrium_ld, is_equilibrium
from .model import InvalidParamsError, ModelParams, TorusInterval, TorusPoint
from .stability import StabilityVerdict, classify, instability_witness

__all__ = [
    "CommunityPairState", "ConfigError", "EquilibriumSpec", "InvalidParamsError", "LinearSystem",
    "ModelParams", "PerturbationState", "RunConfig", "StabilityVerdict", "TorusInterval", "TorusPoint",
    "Trajectory", "best_response_audit", "classify", "consumer_utility", "equilibrium_ld",
    "instability_witness", "integrate", "is_equilibrium", "linear_coefficients", "linear_solution",
    "load_config", "optimal_content", "parse_config", "producer_utility", "rhs", "triangle_integral",
]
