"""Public solve entry point: presolve, simplex, postsolve."""
from __future__ import annotations

import numpy as np

from .model import (LpOutcome, LpStandardForm, Status, Tolerances, farkas_value,
                    ray_sign_violation)
from .presolve import presolve as _presolve
from .presolve import push_to_source_rows
from .simplex import simplex


def _trivial(lp: LpStandardForm) -> tuple:
    """Solve a row-free problem by putting every column at its cheapest bound."""
    x = np.where(lp.c < 0, lp.ub, lp.lb)
    if np.any(np.isinf(x)):
        return Status.UNBOUNDED, None, None, None, None, 0
    return Status.OPTIMAL, x, np.zeros(0), lp.c.copy(), None, 0


def solve(lp: LpStandardForm, tol: Tolerances | None = None,
          iteration_limit: int | None = None, presolve: bool = True) -> LpOutcome:
    """Solve ``lp`` and return an :class:`LpOutcome`.

    Optimal outcomes carry primal values, row duals and reduced costs; an
    infeasible outcome carries a Farkas ray over the original rows (see
    :mod:`solarbus.lpcore.model` for the sign convention).
    """
    lp.check()
    tol = tol or Tolerances()
    P = _presolve(lp, tol.feas) if presolve else None
    if P is not None and P.unbounded:
        return LpOutcome(Status.UNBOUNDED, info={"presolve": P.stats})
    work = P.lp if P is not None else lp
    if work.n_rows == 0:
        st, xr, yr, dr, rayr, its = _trivial(work)
    else:
        st, xr, yr, dr, rayr, its = simplex(work.A, work.senses, work.rhs, work.lb,
                                            work.ub, work.c, tol, iteration_limit)
    info = {"presolve": None if P is None else P.stats}
    m, n = lp.A.shape

    if st is Status.OPTIMAL:
        if P is None:
            x, y = xr, yr
        else:
            x = np.zeros(n)
            x[P.col_map] = xr
            for j, v in P.x_removed.items():
                x[j] = v
            y = np.zeros(m)
            y[P.row_map] = yr
            y = push_to_source_rows(lp, P, y, lp.c)
        d = lp.c - lp.A.T @ y
        return LpOutcome(st, x=x, duals=y, reduced_costs=d,
                         objective=float(lp.c @ x), iterations=its, info=info)
    if st is Status.INFEASIBLE:
        if P is None:
            ray = rayr
        else:
            ray = np.zeros(m)
            ray[P.row_map] = rayr
            ray = push_to_source_rows(lp, P, ray, np.zeros(n))
        scale = np.abs(ray).max(initial=0.0)
        if scale > 0:
            ray = ray / scale
        info["certificate"] = farkas_value(lp, ray)
        info["sign_violation"] = ray_sign_violation(lp, ray)
        return LpOutcome(st, ray=ray, iterations=its, info=info)
    return LpOutcome(st, iterations=its, info=info)


def duals_for_rows(outcome: LpOutcome) -> np.ndarray:
    """Row multipliers: optimal duals, or the Farkas ray when infeasible."""
    if outcome.status is Status.OPTIMAL:
        return outcome.duals
    if outcome.status is Status.INFEASIBLE:
        return outcome.ray
    raise ValueError(f"no row multipliers for a {outcome.status.value} outcome")
