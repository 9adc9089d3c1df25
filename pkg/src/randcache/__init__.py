"""Random caching in backhaul-limited multi-antenna cellular networks.

Analysis, bounds, optimization and Monte Carlo validation of the successful
transmission probability and area spectrum efficiency.
"""

from .analytic import NetworkParams, StpBreakdown, stp_total, stp_total_upper, stp_total_upper_asymptotic
from .content import CachePlacement, ContentParams, FileAllocation
from .montecarlo import Estimate, SimConfig, simulate_ase, simulate_stp
from .optimize import OptimizerConfig, Solution, baseline_scheme, optimize_asymptotic, optimize_full
from .specfun import DomainError, NumericalError

__version__ = "0.1.0"

__all__ = [
    "NetworkParams",
    "StpBreakdown",
    "stp_total",
    "stp_total_upper",
    "stp_total_upper_asymptotic",
    "CachePlacement",
    "ContentParams",
    "FileAllocation",
    "Estimate",
    "SimConfig",
    "simulate_stp",
    "simulate_ase",
    "OptimizerConfig",
    "Solution",
    "baseline_scheme",
    "optimize_asymptotic",
    "optimize_full",
    "DomainError",
    "NumericalError",
]
