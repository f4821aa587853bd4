"""Linear program containers shared by the solver, presolve and MPS I/O.

An :class:`LpStandardForm` describes::

    min  c @ x
    s.t. A[i] @ x  (<= | >= | =)  rhs[i]
         lb <= x <= ub

with finite lower bounds and optional (``inf``) upper bounds.

Dual sign convention (minimisation): multipliers of ``>=`` rows are
non-negative, of ``<=`` rows non-positive, of ``=`` rows free.  The same
convention is used for infeasibility rays, so a ray ``y`` certifies
infeasibility when ``y @ rhs - max_{lb<=x<=ub} (y @ A) @ x > 0``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LE, GE, EQ = "L", "G", "E"


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"


@dataclass
class LpStandardForm:
    A: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    c: np.ndarray
    row_names: list[str] | None = None
    col_names: list[str] | None = None
    name: str = "LP"

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.senses = np.asarray(self.senses, dtype="<U1")
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.lb = np.asarray(self.lb, dtype=float).ravel()
        self.ub = np.asarray(self.ub, dtype=float).ravel()
        self.c = np.asarray(self.c, dtype=float).ravel()

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    def check(self) -> None:
        """Raise ``ValueError`` if dimensions or values are inconsistent."""
        m, n = self.A.shape
        if self.senses.shape != (m,) or self.rhs.shape != (m,):
            raise ValueError("row data does not match the constraint matrix")
        if self.lb.shape != (n,) or self.ub.shape != (n,) or self.c.shape != (n,):
            raise ValueError("column data does not match the constraint matrix")
        if not np.all(np.isin(self.senses, (LE, GE, EQ))):
            raise ValueError("row senses must be one of 'L', 'G', 'E'")
        if not np.all(np.isfinite(self.A.data)):
            raise ValueError("constraint matrix has non-finite coefficients")
        if not (np.all(np.isfinite(self.rhs)) and np.all(np.isfinite(self.c))):
            raise ValueError("rhs and objective must be finite")
        if not np.all(np.isfinite(self.lb)):
            raise ValueError("lower bounds must be finite")
        if np.any(np.isnan(self.ub)) or np.any(self.ub == -np.inf):
            raise ValueError("upper bounds must be finite or +inf")

    def copy(self) -> "LpStandardForm":
        return LpStandardForm(
            self.A.copy(), self.senses.copy(), self.rhs.copy(), self.lb.copy(),
            self.ub.copy(), self.c.copy(),
            None if self.row_names is None else list(self.row_names),
            None if self.col_names is None else list(self.col_names),
            self.name,
        )


@dataclass
class Tolerances:
    feas: float = 1e-9
    opt: float = 1e-9
    pivot: float = 1e-11


@dataclass
class LpOutcome:
    status: Status
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    ray: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def box_max(q: np.ndarray, lb: np.ndarray, ub: np.ndarray, zero: float = 1e-11) -> float:
    """``max q @ x`` over the box ``lb <= x <= ub`` (may be ``inf``).

    Coefficients within ``zero`` of 0 on columns without an upper bound are
    treated as round-off and dropped.
    """
    q = np.where(np.isinf(ub) & (np.abs(q) <= zero), 0.0, q)
    pos = q > 0
    if np.any(np.isinf(ub[pos])):
        return np.inf
    return float(q[pos] @ ub[pos] + q[~pos] @ lb[~pos])


def ray_sign_violation(lp: LpStandardForm, y: np.ndarray) -> float:
    """Largest violation of the sign conditions on a row multiplier vector."""
    bad = np.zeros_like(y)
    bad[lp.senses == GE] = np.maximum(-y[lp.senses == GE], 0.0)
    bad[lp.senses == LE] = np.maximum(y[lp.senses == LE], 0.0)
    return float(bad.max(initial=0.0))


def farkas_value(lp: LpStandardForm, y: np.ndarray) -> float:
    """Certificate value ``y @ rhs - max_box (y @ A) @ x``.

    Positive means no ``x`` in the box satisfies every row; the value is a
    lower bound on the ``y``-weighted row violation of any boxed point.
    Sign conditions on ``y`` are checked separately by
    :func:`ray_sign_violation`.
    """
    q = lp.A.T @ y
    return float(y @ lp.rhs) - box_max(q, lp.lb, lp.ub)


def dual_objective(lp: LpStandardForm, y: np.ndarray, d: np.ndarray,
                   zero: float = 1e-11) -> float:
    """Lagrangian dual value for row duals ``y`` and reduced costs ``d``."""
    d = np.where(np.isinf(lp.ub) & (np.abs(d) <= zero), 0.0, d)
    lo = d > 0
    hi = d < 0
    if np.any(np.isinf(lp.ub[hi])):
        return -np.inf
    return float(y @ lp.rhs + d[lo] @ lp.lb[lo] + d[hi] @ lp.ub[hi])


def row_activity(lp: LpStandardForm, x: np.ndarray) -> np.ndarray:
    return lp.A @ x


def primal_violation(lp: LpStandardForm, x: np.ndarray) -> float:
    """Maximum absolute violation of rows and bounds at ``x``."""
    act = lp.A @ x
    r = act - lp.rhs
    viol = np.where(lp.senses == LE, np.maximum(r, 0),
                    np.where(lp.senses == GE, np.maximum(-r, 0), np.abs(r)))
    bnd = np.maximum(lp.lb - x, 0) + np.maximum(x - lp.ub, 0)
    return float(max(viol.max(initial=0.0), bnd.max(initial=0.0)))
