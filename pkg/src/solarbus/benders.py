"""Multi-cut L-shaped decomposition of the charge scheduling LP.

The main problem holds the sizing variables and one recourse estimate
``zeta`` per scenario; each scenario's charging problem is solved with the
sizing fixed and returns either an optimality cut (from its duals) or a
feasibility cut (from a Farkas ray).
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .cspmodel import CspLp, PlanSolution, extract_solution
from .lpcore import (GE, LE, LpOutcome, LpStandardForm, Status, Tolerances, box_max,
                     dual_objective, farkas_value, ray_sign_violation, solve)


class SolveError(RuntimeError):
    """The model could not be solved to optimality; ``status`` says why."""

    def __init__(self, message: str, status: Status):
        super().__init__(message)
        self.status = status


class BendersError(SolveError):
    """Decomposition failed: infeasible model or a subproblem hit its limit."""


@dataclass
class Cut:
    """``coef @ x (+ zeta[scenario] for optimality cuts) >= rhs``."""

    kind: str               # "feasibility" or "optimality"
    scenario_id: int
    coef: np.ndarray
    rhs: float

    def slack(self, x: np.ndarray, zeta: float = 0.0) -> float:
        lhs = float(self.coef @ x) + (zeta if self.kind == "optimality" else 0.0)
        return lhs - self.rhs


@dataclass
class Subproblem:
    """One scenario's recourse LP at a fixed sizing ``x``.

    ``lp`` has the scenario's columns only; ``T`` holds the sizing
    coefficients that were moved to the right-hand side, so that
    ``lp.rhs == h - T @ x``.  The objective is not weighted by probability.
    """

    scenario_id: int
    position: int
    lp: LpStandardForm
    rows: np.ndarray
    cols: np.ndarray
    T: sp.csr_matrix
    h: np.ndarray
    x: np.ndarray


def build_subproblem(csp: CspLp, scenario_id: int, x_fixed) -> Subproblem:
    if scenario_id not in csp.scenario_ids:
        raise ValueError(f"scenario {scenario_id} is not part of the model")
    pos = csp.scenario_ids.index(scenario_id)
    x = np.asarray(x_fixed, dtype=float)
    first = csp.first_stage
    if x.shape != first.shape:
        raise ValueError(f"expected {first.size} first-stage values, got {x.shape}")
    if np.any(x < -1e-9):
        raise ValueError("first-stage values must be non-negative")
    rows, cols = csp.block_rows(pos), csp.block_cols(pos)
    A = csp.lp.A[rows]
    T = A[:, first].tocsr()
    W = A[:, cols].tocsr()
    h = csp.lp.rhs[rows]
    p = csp.probabilities[pos]
    lp = LpStandardForm(W, csp.lp.senses[rows], h - T @ x, csp.lp.lb[cols], csp.lp.ub[cols],
                        csp.lp.c[cols] / p, name=f"SUB{scenario_id}")
    return Subproblem(scenario_id, pos, lp, rows, cols, T, h, x)


def feasibility_cut(sub: Subproblem, ray: np.ndarray, tol: float = 1e-9) -> Cut:
    """Cut excluding sizings for which the ray proves the scenario infeasible."""
    y = np.asarray(ray, dtype=float)
    if ray_sign_violation(sub.lp, y) > 1e-7 or not farkas_value(sub.lp, y) > tol:
        raise ValueError("ray does not certify infeasibility of the subproblem")
    coef = sub.T.T @ y
    rhs = float(y @ sub.h) - box_max(sub.lp.A.T @ y, sub.lp.lb, sub.lp.ub)
    scale = max(np.abs(coef).max(initial=0.0), abs(rhs))
    return Cut("feasibility", sub.scenario_id, coef / scale, rhs / scale)


def optimality_cut(sub: Subproblem, outcome: LpOutcome) -> Cut:
    """Supporting hyperplane of the recourse function at the subproblem's sizing."""
    y, d = outcome.duals, outcome.reduced_costs
    base = LpStandardForm(sub.lp.A, sub.lp.senses, sub.h, sub.lp.lb, sub.lp.ub, sub.lp.c)
    rhs = dual_objective(base, y, d)
    if not np.isfinite(rhs):
        raise ValueError("duals do not give a finite bound")
    return Cut("optimality", sub.scenario_id, sub.T.T @ y, rhs)


@dataclass
class MainProblemState:
    tags: list[tuple]
    cost: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    scenario_ids: list[int]
    probabilities: np.ndarray
    implied: list[tuple[np.ndarray, float]] = field(default_factory=list)  # coef @ x <= rhs
    cuts: list[Cut] = field(default_factory=list)

    @classmethod
    def from_csp(cls, csp: CspLp) -> "MainProblemState":
        first = csp.first_stage
        tags = [csp.tags[i] for i in first]
        state = cls(tags, csp.lp.c[first].copy(), csp.lp.lb[first].copy(),
                    csp.lp.ub[first].copy(), list(csp.scenario_ids), csp.probabilities.copy())
        index = {t: i for i, t in enumerate(tags)}
        for t in tags:
            if t[0] == "d":
                row = np.zeros(len(tags))
                row[index[t]] = 1.0
                row[index[("c", t[1])]] = -1.0
                state.implied.append((row, 0.0))
        return state

    def lp(self) -> LpStandardForm:
        n, S = len(self.tags), len(self.scenario_ids)
        rows, senses, rhs = [], [], []
        for coef, r in self.implied:
            rows.append(np.concatenate([coef, np.zeros(S)]))
            senses.append(LE)
            rhs.append(r)
        for cut in self.cuts:
            zeta = np.zeros(S)
            if cut.kind == "optimality":
                zeta[self.scenario_ids.index(cut.scenario_id)] = 1.0
            rows.append(np.concatenate([cut.coef, zeta]))
            senses.append(GE)
            rhs.append(cut.rhs)
        A = sp.csr_matrix(np.array(rows).reshape(len(rows), n + S))
        return LpStandardForm(A, np.array(senses, dtype="<U1"), np.array(rhs, float),
                              np.concatenate([self.lb, np.zeros(S)]),
                              np.concatenate([self.ub, np.full(S, np.inf)]),
                              np.concatenate([self.cost, self.probabilities]), name="MAIN")


@dataclass
class IterationRecord:
    iteration: int
    lower_bound: float
    upper_bound: float
    cuts_feas: int
    cuts_opt: int
    statuses: dict[int, str]
    seconds: float


@dataclass
class BendersLog:
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    status: str = "running"
    cuts: list[Cut] = field(default_factory=list)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["iteration", "LB", "UB", "cuts_feas", "cuts_opt", "seconds"])
            for r in self.records:
                out.writerow([r.iteration, repr(r.lower_bound), repr(r.upper_bound),
                              r.cuts_feas, r.cuts_opt, f"{r.seconds:.6f}"])
        return path


def benders_solve(csp: CspLp, gap_tol: float = 1e-6, max_iters: int = 200,
                  tol: Tolerances | None = None,
                  iteration_limit: int | None = None) -> tuple[PlanSolution, BendersLog]:
    """Solve ``csp`` by decomposition.

    An optimality cut is added whenever a scenario's recourse exceeds its
    estimate by more than ``gap_tol``; all cuts of one sweep are added
    before the main problem is re-solved.  Raises :class:`BendersError` when
    the main problem becomes infeasible, a subproblem hits its iteration
    limit, or ``max_iters`` passes without a feasible sizing.
    """
    if not gap_tol > 0:
        raise ValueError("gap_tol must be positive")
    state = MainProblemState.from_csp(csp)
    log = BendersLog(cuts=state.cuts)
    S = len(csp.scenario_ids)
    ub = np.inf
    incumbent = None
    t0 = time.perf_counter()

    for it in range(1, max_iters + 1):
        main = solve(state.lp(), tol, iteration_limit)
        if main.status is Status.INFEASIBLE:
            log.status = "infeasible"
            raise BendersError("no sizing admits a feasible schedule in every scenario",
                               Status.INFEASIBLE)
        if not main.optimal:
            log.status = main.status.value
            raise BendersError(f"main problem ended {main.status.value}", main.status)
        n = len(state.tags)
        x, zeta = np.maximum(main.x[:n], 0.0), main.x[n:]
        lb = main.objective
        new, statuses, recourse, sols = [], {}, {}, {}
        for pos, sid in enumerate(csp.scenario_ids):
            sub = build_subproblem(csp, sid, x)
            out = solve(sub.lp, tol, iteration_limit)
            statuses[sid] = out.status.value
            if out.status is Status.INFEASIBLE:
                new.append(feasibility_cut(sub, out.ray))
            elif out.optimal:
                recourse[sid] = out.objective
                sols[sid] = (sub.cols, out.x)
                if out.objective - zeta[pos] > gap_tol:
                    new.append(optimality_cut(sub, out))
            else:
                log.status = out.status.value
                raise BendersError(f"scenario {sid} subproblem ended {out.status.value}",
                                   out.status)
        if len(recourse) == S:
            value = float(state.cost @ x) + float(
                sum(p * recourse[s] for p, s in zip(csp.probabilities, csp.scenario_ids)))
            if value < ub:
                ub, incumbent = value, (x.copy(), sols)
        state.cuts.extend(new)
        log.records.append(IterationRecord(
            it, lb, ub, sum(c.kind == "feasibility" for c in new),
            sum(c.kind == "optimality" for c in new), statuses, time.perf_counter() - t0))
        if not new:
            log.converged = True
            log.status = "optimal"
            break
    else:
        log.status = "iteration-limit"
        if incumbent is None:
            raise BendersError(f"no feasible sizing after {max_iters} iterations",
                               Status.ITERATION_LIMIT)

    x_full = np.zeros(csp.lp.n_cols)
    x_inc, sols = incumbent
    x_full[csp.first_stage] = x_inc
    for cols, xs in sols.values():
        x_full[cols] = xs
    plan = extract_solution(csp, x_full)
    plan.solver = "benders"
    return plan, log


def solve_monolithic(csp: CspLp, tol: Tolerances | None = None,
                     iteration_limit: int | None = None) -> PlanSolution:
    """Solve the full LP directly; raises :class:`SolveError` on failure."""
    out = solve(csp.lp, tol, iteration_limit)
    if not out.optimal:
        raise SolveError(f"monolithic solve ended {out.status.value}", out.status)
    plan = extract_solution(csp, out.x)
    plan.solver = "monolithic"
    return plan
