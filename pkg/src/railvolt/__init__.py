"""Charge-station deployment and battery schedule planning for
battery-electric freight corridors."""

from .domain import (
    Instance, Train, SolveConfig, Solution, Metrics,
    RailvoltError, InstanceError, DecodeError, InfeasibleError,
    charge_rate_at_soc, soc_after_charging, charge_time_for_target,
    validate_instance,
)
from .generator import GenSpec, generate_instance, illustrative_instance
from .model import build_pla_grid, build_model, solve_pla, decode_solution
from .fixalg import run_fix_algorithm, compute_benefit, compute_supply_demand
from .benders import run_benders, split_model, extra_feasibility_cuts
from .validator import (
    simulate_schedule, recompute_metrics, brute_force_best,
    ValidationReport,
)
from .reporting import run_batch, paired_t_test, sensitivity_compare
from .cli import main

__version__ = "0.1.0"

__all__ = [
    "Instance", "Train", "SolveConfig", "Solution", "Metrics",
    "RailvoltError", "InstanceError", "DecodeError", "InfeasibleError",
    "charge_rate_at_soc", "soc_after_charging", "charge_time_for_target",
    "validate_instance",
    "GenSpec", "generate_instance", "illustrative_instance",
    "build_pla_grid", "build_model", "solve_pla", "decode_solution",
    "run_fix_algorithm", "compute_benefit", "compute_supply_demand",
    "run_benders", "split_model", "extra_feasibility_cuts",
    "simulate_schedule", "recompute_metrics", "brute_force_best",
    "ValidationReport",
    "run_batch", "paired_t_test", "sensitivity_compare",
    "main",
    "__version__",
]
