"""Electric-vehicle location-routing under ambient temperature."""

__version__ = "1.0.0"

from .feasibility import (InfeasibleError, Solution, check_solution, exact_solve_tiny,
                          load_solution, save_solution)
from .instance import Instance, build_instance, generate_instance, load_instance, save_instance
from .soc import ChargingModel, default_calibration, mu_params

__all__ = [
    "__version__",
    "ChargingModel",
    "InfeasibleError",
    "Instance",
    "Solution",
    "build_instance",
    "check_solution",
    "default_calibration",
    "exact_solve_tiny",
    "generate_instance",
    "load_instance",
    "load_solution",
    "mu_params",
    "save_instance",
    "save_solution",
]
