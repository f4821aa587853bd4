"""Charging infrastructure sizing and charge scheduling for electric bus fleets
with depot solar panels and battery storage."""
from .benders import benders_solve, build_subproblem, solve_monolithic
from .cspmodel import (CostBreakdown, CspLp, PlanSolution, apply_ablation,
                       attribute_charge_sources, build_csp_lp, check_plan, extract_solution)
from .energy import (ScenarioEnergies, aggregate_scenarios, compute_scenario_energies,
                     deadhead_energy, solar_energy_per_min, trip_energy)
from .instance import (DeadheadMatrix, FleetParams, Instance, Location, Regression, Scenario,
                       Trip, cluster_terminals, generate_synthetic, load_instance, validate)
from .pipeline import RunConfig, compare_runs, run_pipeline
from .scheduler import (Rotation, compute_charging_opportunities, concurrent_scheduler,
                        is_rotation_charge_feasible)

__version__ = "0.1.0"

__all__ = [
    "CostBreakdown", "CspLp", "DeadheadMatrix", "FleetParams", "Instance", "Location",
    "PlanSolution", "Regression", "Rotation", "RunConfig", "Scenario", "ScenarioEnergies",
    "Trip", "aggregate_scenarios", "apply_ablation", "attribute_charge_sources",
    "benders_solve", "build_csp_lp", "build_subproblem", "check_plan", "cluster_terminals",
    "compare_runs", "compute_charging_opportunities", "compute_scenario_energies",
    "concurrent_scheduler", "deadhead_energy", "extract_solution", "generate_synthetic",
    "is_rotation_charge_feasible", "load_instance", "run_pipeline", "solar_energy_per_min",
    "solve_monolithic", "trip_energy", "validate",
]
