"""Embedded LP solver: bounded-variable revised simplex with duals and rays."""
from .model import (EQ, GE, LE, LpOutcome, LpStandardForm, Status, Tolerances, box_max,
                    dual_objective, farkas_value, primal_violation, ray_sign_violation)
from .mps import read_mps, write_mps
from .solver import duals_for_rows, solve

__all__ = [
    "EQ", "GE", "LE", "LpOutcome", "LpStandardForm", "Status", "Tolerances",
    "box_max", "dual_objective", "duals_for_rows", "farkas_value",
    "primal_violation", "ray_sign_violation", "read_mps", "solve", "write_mps",
]
