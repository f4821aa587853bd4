"""CSV/JSON artifacts written by a pipeline run."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .cspmodel import CspLp, PlanSolution

CHARGE_EPS = 1e-9


def _dump(obj, path: Path) -> Path:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return path


def gantt_rows(plan: PlanSolution, csp: CspLp):
    """``(scenario, bus, minute, activity)`` for every bus minute of the day.

    Activities: trip, deadhead, idle, charge_grid, charge_solar, charge_both.
    A charge is labelled by the origin of its energy, so battery energy that
    was bought from the grid counts as grid.
    """
    H = csp.instance.horizon
    opp = csp.opportunities
    split = plan.attribution.bus if plan.attribution else {}
    for sid in csp.scenario_ids:
        sp_ = plan.scenario(sid)
        for b in opp.buses(sid):
            day = opp.days[sid, b]
            label = ["idle"] * H
            for leg in day.legs:
                for t in range(leg.depart, leg.arrive):
                    label[t % H] = leg.kind
            for op in day.opportunities:
                for t in op.minutes:
                    grid, solar = split.get((sid, b, op.k, t),
                                            (sp_.w[b, op.k, t], sp_.wb[b, op.k, t]))
                    if grid > CHARGE_EPS and solar > CHARGE_EPS:
                        label[t] = "charge_both"
                    elif grid > CHARGE_EPS:
                        label[t] = "charge_grid"
                    elif solar > CHARGE_EPS:
                        label[t] = "charge_solar"
            for t in range(H):
                yield sid, b, t, label[t]


def write_gantt(plan: PlanSolution, csp: CspLp, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["scenario", "bus", "minute", "activity"])
        out.writerows(gantt_rows(plan, csp))
    return path


def write_bess_trace(plan: PlanSolution, csp: CspLp, path) -> Path:
    """Battery level and flows per location and minute (kWh, kWh/min)."""
    path = Path(path)
    att = plan.attribution
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["scenario", "location", "minute", "level", "inflow_grid",
                      "inflow_solar", "outflow", "outflow_grid", "outflow_solar"])
        for sp_ in plan.scenarios:
            sid = sp_.scenario_id
            for j in plan.locations:
                og = att.out_grid[sid, j] if att else None
                os_ = att.out_solar[sid, j] if att else None
                for t in range(csp.instance.horizon):
                    draw_g = og[t] if og is not None else 0.0
                    draw_s = os_[t] if os_ is not None else 0.0
                    out.writerow([sid, j, t, repr(float(sp_.s[j][t])), repr(float(sp_.g[j][t])),
                                  repr(float(sp_.solar[j][t])), repr(float(draw_g + draw_s)),
                                  repr(float(draw_g)), repr(float(draw_s))])
    return path


def cost_breakdown_doc(plan: PlanSolution, instance_hash: str) -> dict:
    doc = plan.breakdown.as_dict()
    doc.update({"objective": plan.objective, "instance_hash": instance_hash,
                "units": "currency per day"})
    return doc


def solution_doc(plan: PlanSolution, csp: CspLp, instance_hash: str, status: str) -> dict:
    opp = csp.opportunities
    scenarios = []
    for sp_ in plan.scenarios:
        sid = sp_.scenario_id
        buses = []
        for b in opp.buses(sid):
            tau = opp.tau[sid, b]
            buses.append({
                "bus": b,
                "depot": opp.days[sid, b].rotation.depot,
                "trips": list(opp.days[sid, b].rotation.trips),
                "levels": [sp_.e[b, k] for k in range(tau + 1)],
                "opportunities": [
                    {"k": k, "location": opp.loc[sid, b, k],
                     "minutes": [int(t) for t in opp.T[sid, b, k]],
                     "grid_kwh": sum(sp_.w[b, k, t] for t in opp.T[sid, b, k]),
                     "bess_kwh": sum(sp_.wb[b, k, t] for t in opp.T[sid, b, k])}
                    for k in range(1, tau + 1)],
            })
        scenarios.append({"id": sid, "probability": sp_.probability, "buses": buses,
                          "grid_to_bess_kwh": {j: float(sp_.g[j].sum()) for j in plan.locations},
                          "solar_kwh": {j: float(sp_.solar[j].sum()) for j in plan.locations}})
    return {
        "instance_hash": instance_hash,
        "status": status,
        "solver": plan.solver,
        "objective": plan.objective,
        "ablations": list(csp.ablations),
        "sizing": {j: {"grid_kw": plan.z[j], "panel_m2": plan.a[j], "bess_kwh": plan.c[j],
                       "bess_start_kwh": plan.d[j]} for j in plan.locations},
        "violations": plan.violations,
        "scenarios": scenarios,
    }


def write_json(doc: dict, path) -> Path:
    return _dump(doc, Path(path))


def format_breakdown(plan: PlanSolution) -> str:
    b = plan.breakdown
    rows = [("Contracted capacity cost", b.capacity_cost), ("Solar panel cost", b.panel_cost),
            ("BESS cost", b.bess_cost), ("Average operation cost", b.avg_operational_cost),
            ("Total (per day)", b.total)]
    width = max(len(r[0]) for r in rows)
    return "\n".join(f"{name:<{width}}  {value:14.6f}" for name, value in rows)
