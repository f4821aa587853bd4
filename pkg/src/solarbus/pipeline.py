"""End-to-end run: instance -> schedules -> LP -> sizing and charge plan."""
from __future__ import annotations

import json
import logging
import traceback
from dataclasses import asdict, dataclass
from pathlib import Path

from . import reports
from .benders import SolveError, benders_solve, solve_monolithic
from .cspmodel import PlanConsistencyError, apply_ablation, attribute_charge_sources, build_csp_lp
from .energy import GRANULARITIES, compute_scenario_energies
from .instance import (cluster_terminals, filter_trips, generate_synthetic, instance_hash,
                       load_instance, validate)
from .lpcore import Status, write_mps
from .scheduler import TripInfeasibleError, compute_charging_opportunities, concurrent_scheduler

log = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_ITERATION_LIMIT = 0, 1, 2, 3, 4
SOLVERS = ("benders", "monolithic")
BREAKDOWN_FIELDS = ("capacity_cost", "panel_cost", "bess_cost", "avg_operational_cost", "total")


@dataclass
class RunConfig:
    instance: str | None = None
    granularity: str = "yearly"
    solver: str = "benders"
    gap_tol: float = 1e-6
    max_iters: int = 200
    no_res: bool = False
    no_temperature: bool = False
    cluster: bool = False
    cluster_radius_m: float = 500.0
    out: str = "run"
    seed: int | None = None
    export_mps: bool = False
    trip_cutoff_min: int | None = None
    # synthetic instance shape, used when no instance file is given
    n_trips: int = 8
    n_depots: int = 1
    n_scenarios: int = 2
    horizon_min: int = 120

    def problems(self) -> list[str]:
        out = []
        if not self.gap_tol > 0:
            out.append("gap_tol must be positive")
        if self.max_iters < 1:
            out.append("max_iters must be at least 1")
        if self.solver not in SOLVERS:
            out.append(f"solver must be one of {SOLVERS}")
        if self.granularity not in GRANULARITIES:
            out.append(f"granularity must be one of {GRANULARITIES}")
        if self.instance is None and self.seed is None:
            out.append("give an instance file or a seed for a synthetic instance")
        if self.instance is not None and not Path(self.instance).exists():
            out.append(f"instance file {self.instance} does not exist")
        if self.cluster_radius_m < 0:
            out.append("cluster radius must be non-negative")
        return out


@dataclass
class RunResult:
    exit_code: int
    out_dir: Path
    objective: float | None = None
    plan: object = None
    csp: object = None


class _StageError(Exception):
    def __init__(self, stage, code, message, details=None):
        super().__init__(message)
        self.stage, self.code, self.details = stage, code, details or []


def _write_error(out: Path, err: _StageError) -> None:
    reports.write_json({"stage": err.stage, "exit_code": err.code, "message": str(err),
                        "details": err.details}, out / "error.json")


def run_pipeline(config: RunConfig, echo=print) -> RunResult:
    """Run every stage and write the artifacts into ``config.out``.

    Failures write ``error.json`` and return a nonzero exit code: 2 for
    invalid input, 3 for an infeasible model, 4 for an iteration limit.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    stale = out / "error.json"
    if stale.exists():
        stale.unlink()
    try:
        return _run(config, out, echo)
    except _StageError as err:
        _write_error(out, err)
        echo(f"error in {err.stage}: {err}")
        return RunResult(err.code, out)
    except Exception as exc:  # keep the report machine readable
        err = _StageError("internal", EXIT_ERROR, f"{type(exc).__name__}: {exc}",
                          traceback.format_exc().splitlines()[-5:])
        _write_error(out, err)
        echo(f"error: {err}")
        return RunResult(EXIT_ERROR, out)


def _run(config: RunConfig, out: Path, echo) -> RunResult:
    bad = config.problems()
    if bad:
        raise _StageError("config", EXIT_INVALID, "invalid configuration", bad)
    try:
        if config.instance is not None:
            inst = load_instance(config.instance, config.granularity)
        else:
            inst = generate_synthetic(config.seed, config.n_trips, config.n_depots,
                                      config.n_scenarios, config.horizon_min)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise _StageError("load", EXIT_INVALID, f"cannot read instance: {exc}") from exc
    if config.trip_cutoff_min is not None:
        inst = filter_trips(inst, config.trip_cutoff_min)
    violations = validate(inst)
    if violations:
        raise _StageError("validate", EXIT_INVALID, f"{len(violations)} invariant violations",
                          [str(v) for v in violations])
    digest = instance_hash(inst)

    energies = compute_scenario_energies(inst)
    clusters = cluster_terminals(inst, config.cluster_radius_m) if config.cluster else None
    try:
        rotations, stations = concurrent_scheduler(inst, energies, clusters=clusters)
        opps = compute_charging_opportunities(rotations, stations, inst, clusters=clusters,
                                              energies=energies)
    except (TripInfeasibleError, ValueError) as exc:
        raise _StageError("schedule", EXIT_INFEASIBLE, str(exc)) from exc
    for sid, rots in rotations.items():
        reports.write_json([{"bus": r.bus_id, "depot": r.depot, "trips": r.trips} for r in rots],
                           out / f"rotations_{sid}.json")
    reports.write_json(sorted(stations), out / "stations.json")

    csp = build_csp_lp(inst, rotations, opps, energies)
    if config.no_temperature:
        csp = apply_ablation(csp, "no_temperature")
    if config.no_res:
        csp = apply_ablation(csp, "no_res")
    if config.export_mps:
        write_mps(csp.lp, out / "model.mps")

    status = "optimal"
    try:
        if config.solver == "benders":
            plan, blog = benders_solve(csp, config.gap_tol, config.max_iters)
            blog.write_csv(out / "benders_log.csv")
            status = blog.status
        else:
            plan = solve_monolithic(csp)
    except SolveError as exc:
        code = EXIT_ITERATION_LIMIT if exc.status is Status.ITERATION_LIMIT else EXIT_INFEASIBLE
        raise _StageError("solve", code, str(exc)) from exc
    except PlanConsistencyError as exc:
        raise _StageError("extract", EXIT_ERROR, str(exc)) from exc

    attribute_charge_sources(plan, csp)
    reports.write_json(reports.solution_doc(plan, csp, digest, status), out / "solution.json")
    reports.write_json(reports.cost_breakdown_doc(plan, digest), out / "cost_breakdown.json")
    reports.write_gantt(plan, csp, out / "gantt.csv")
    reports.write_bess_trace(plan, csp, out / "bess_trace.csv")
    reports.write_json({k: v for k, v in asdict(config).items()}, out / "config.json")
    echo(reports.format_breakdown(plan))
    if plan.violations:
        echo(f"warning: {len(plan.violations)} constraint violations, see solution.json")
    code = EXIT_ITERATION_LIMIT if status == "iteration-limit" else EXIT_OK
    return RunResult(code, out, plan.objective, plan, csp)


def compare_runs(run_a, run_b) -> dict:
    """Percentage change per cost row, ``100 * (B - A) / B``.

    Positive values mean run A is cheaper than run B (e.g. A with solar and
    storage, B without).  Rows where B is zero report ``None`` unless A is
    zero too.
    """
    docs = []
    for run in (run_a, run_b):
        path = Path(run) / "cost_breakdown.json"
        try:
            docs.append(json.loads(path.read_text()))
        except (OSError, ValueError) as exc:
            raise ValueError(f"cannot read {path}: {exc}") from exc
    a, b = docs
    if a.get("instance_hash") != b.get("instance_hash"):
        raise ValueError("runs were made on different instances")
    deltas = {}
    for name in BREAKDOWN_FIELDS:
        va, vb = float(a[name]), float(b[name])
        if vb != 0:
            deltas[name] = 100.0 * (vb - va) / vb
        else:
            deltas[name] = 0.0 if va == 0 else None
    return {"convention": "delta_pct = 100 * (B - A) / B", "run_a": str(run_a),
            "run_b": str(run_b), "instance_hash": a["instance_hash"],
            "a": {k: a[k] for k in BREAKDOWN_FIELDS}, "b": {k: b[k] for k in BREAKDOWN_FIELDS},
            "delta_pct": deltas}
