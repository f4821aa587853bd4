"""Multi-scenario charge scheduling LP with solar panels and depot batteries.

First-stage columns (one per charging location ``j``): contracted grid
power ``z`` (kW), panel area ``a`` (m2), battery capacity ``c`` (kWh) and
the battery's start/end-of-day level ``d`` (kWh).  Second-stage columns per
scenario: grid->bus ``w`` and battery->bus ``wb`` flows for every charging
minute of every opportunity, grid->battery ``g`` and battery level ``s`` for
every location and minute, and bus levels ``e`` before each opportunity.
Flows are kWh per minute.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .energy import ScenarioEnergies, compute_scenario_energies, solar_energy_per_min
from .instance import Instance
from .lpcore import EQ, GE, LE, LpStandardForm
from .scheduler import Opportunities, segment_energies

FIRST_STAGE = ("z", "a", "c", "d")
ABLATIONS = ("no_res", "no_temperature")


class PlanConsistencyError(AssertionError):
    """Levels stored in a solution disagree with the levels implied by its flows."""


@dataclass
class CspLp:
    lp: LpStandardForm
    tags: list[tuple]
    directory: dict[tuple, int]
    row_tags: list[tuple]
    col_block: np.ndarray        # -1 first stage, else scenario position
    row_block: np.ndarray
    scenario_ids: list[int]
    probabilities: np.ndarray
    locations: tuple[str, ...]
    with_res: bool
    instance: Instance
    opportunities: Opportunities
    energies: ScenarioEnergies
    r: dict[tuple[int, int, int], float]
    amortization: tuple[float, float, float]
    rotations: dict | None = None
    ablations: tuple[str, ...] = ()

    @property
    def first_stage(self) -> np.ndarray:
        """Column indices of the first-stage vector, ordered z, a, c, d by location."""
        return np.flatnonzero(self.col_block == -1)

    def first_stage_tags(self) -> list[tuple]:
        return [self.tags[i] for i in self.first_stage]

    def block_rows(self, pos: int) -> np.ndarray:
        return np.flatnonzero(self.row_block == pos)

    def block_cols(self, pos: int) -> np.ndarray:
        return np.flatnonzero(self.col_block == pos)

    def solar(self, sid: int, j: str) -> np.ndarray:
        """Panel yield per m2 per minute at ``j`` in scenario ``sid``."""
        sc = self.instance.scenario(sid)
        return solar_energy_per_min(sc.gti[j], 1.0, self.instance.fleet.eta_pct)


class _Builder:
    def __init__(self):
        self.tags, self.lb, self.ub, self.cost, self.cblock = [], [], [], [], []
        self.directory = {}
        self.ri, self.ci, self.val = [], [], []
        self.senses, self.rhs, self.rtags, self.rblock = [], [], [], []

    def col(self, tag, cost=0.0, lb=0.0, ub=np.inf, block=-1) -> int:
        if tag in self.directory:
            raise ValueError(f"duplicate column {tag}")
        idx = len(self.tags)
        self.directory[tag] = idx
        self.tags.append(tag)
        self.lb.append(lb)
        self.ub.append(ub)
        self.cost.append(cost)
        self.cblock.append(block)
        return idx

    def row(self, tag, entries, sense, rhs, block):
        i = len(self.senses)
        for c, v in entries:
            self.ri.append(i)
            self.ci.append(c)
            self.val.append(v)
        self.senses.append(sense)
        self.rhs.append(rhs)
        self.rtags.append(tag)
        self.rblock.append(block)

    def finish(self, name) -> LpStandardForm:
        m, n = len(self.senses), len(self.tags)
        A = sp.coo_matrix((self.val, (self.ri, self.ci)), shape=(m, n)).tocsr()
        A.sum_duplicates()
        return LpStandardForm(A, np.array(self.senses, dtype="<U1"), np.array(self.rhs, float),
                              np.array(self.lb, float), np.array(self.ub, float),
                              np.array(self.cost, float), name=name)


def build_csp_lp(instance: Instance, rotations, opportunities: Opportunities,
                 energies: ScenarioEnergies, *, with_res: bool = True,
                 amortization: tuple[float, float, float] | None = None) -> CspLp:
    """Assemble the charge scheduling LP over all scenarios.

    ``amortization`` gives the day counts dividing the battery, grid
    capacity and panel prices; it defaults to the fleet's lifetimes.
    """
    f = instance.fleet
    H = instance.horizon
    J = tuple(opportunities.stations)
    known = set(instance.location_ids)
    for j in J:
        if j not in known:
            raise ValueError(f"charging location {j!r} is not a known location")
    for key, mins in opportunities.T.items():
        if key not in opportunities.loc:
            raise ValueError(f"opportunity {key} has no location")
        if opportunities.loc[key] not in J:
            raise ValueError(f"opportunity {key} at {opportunities.loc[key]!r}, not a station")
        if any(not 0 <= t < H for t in mins):
            raise ValueError(f"opportunity {key} has minutes outside the horizon")
    if rotations is not None:
        for sid, rots in rotations.items():
            if sorted(r.bus_id for r in rots) != opportunities.buses(sid):
                raise ValueError(f"rotations and opportunities disagree in scenario {sid}")

    L_bess, L_cap, L_panel = amortization or (f.bess_life_days, f.capacity_life_days,
                                              f.panel_life_days)
    B = _Builder()
    z = {j: B.col(("z", j), f.gamma_grid / L_cap) for j in J}
    if with_res:
        a = {j: B.col(("a", j), f.alpha_panel / L_panel) for j in J}
        c = {j: B.col(("c", j), f.pi_bess / L_bess) for j in J}
        d = {j: B.col(("d", j), 0.0) for j in J}

    sids = [sc.id for sc in instance.scenarios]
    probs = np.array([sc.probability for sc in instance.scenarios])
    eta = f.eta_pct
    r_all = {}
    for pos, sc in enumerate(instance.scenarios):
        s_id, p = sc.id, sc.probability
        buses = opportunities.buses(s_id)
        # bus-side columns
        w, wb, e = {}, {}, {}
        for b in buses:
            day = opportunities.days[s_id, b]
            r = segment_energies(day, energies)
            tau = opportunities.tau[s_id, b]
            e[b, 0] = B.col(("e", s_id, b, 0), 0.0, f.rho_min, np.inf, pos)
            for k in range(1, tau + 1):
                r_all[s_id, b, k] = r[k]
                for t in opportunities.T[s_id, b, k]:
                    w[b, k, t] = B.col(("w", s_id, b, k, t), p * float(sc.tariff[t]), block=pos)
                    if with_res:
                        wb[b, k, t] = B.col(("wb", s_id, b, k, t), p * f.solar_price, block=pos)
                e[b, k] = B.col(("e", s_id, b, k), 0.0, f.rho_min, np.inf, pos)
        g, s = {}, {}
        if with_res:
            for j in J:
                for t in range(H):
                    g[j, t] = B.col(("g", s_id, j, t), p * float(sc.tariff[t]), block=pos)
                    s[j, t] = B.col(("s", s_id, j, t), 0.0, block=pos)

        for b in buses:
            tau = opportunities.tau[s_id, b]
            for k in range(1, tau + 1):
                flows = [(w[b, k, t], 1.0) for t in opportunities.T[s_id, b, k]]
                if with_res:
                    flows += [(wb[b, k, t], 1.0) for t in opportunities.T[s_id, b, k]]
                B.row(("bus_level", s_id, b, k), [(e[b, k], 1.0), (e[b, k - 1], -1.0)]
                      + [(i, -v) for i, v in flows], EQ, -r_all[s_id, b, k], pos)
                B.row(("bus_cap", s_id, b, k), [(e[b, k - 1], 1.0)] + flows, LE, f.rho_max, pos)
                for t in opportunities.T[s_id, b, k]:
                    ent = [(w[b, k, t], 1.0)] + ([(wb[b, k, t], 1.0)] if with_res else [])
                    B.row(("transfer_cap", s_id, b, k, t), ent, LE, f.beta, pos)
            B.row(("bus_periodic", s_id, b), [(e[b, 0], 1.0), (e[b, tau], -1.0)], EQ, 0.0, pos)

        for j in J:
            sol = solar_energy_per_min(sc.gti[j], 1.0, eta)
            for t in range(H):
                here = opportunities.N.get((s_id, j, t), ())
                kt = [(b, _opp_at(opportunities, s_id, b, t, j)) for b in here]
                if with_res:
                    prev = d[j] if t == 0 else s[j, t - 1]
                    draws = [(wb[b, k, t], 1.0) for b, k in kt]
                    B.row(("bess_balance", s_id, j, t), [(s[j, t], 1.0), (prev, -1.0), (a[j], -sol[t]),
                                                (g[j, t], -1.0)] + draws, EQ, 0.0, pos)
                    B.row(("bess_cap", s_id, j, t), [(c[j], 1.0), (prev, -1.0), (a[j], -sol[t]),
                                                (g[j, t], -1.0)], GE, 0.0, pos)
                    B.row(("bess_floor", s_id, j, t), [(s[j, t], 1.0), (c[j], -(1.0 - f.dod))], GE, 0.0, pos)
                grid = [(w[b, k, t], 60.0) for b, k in kt]
                if with_res:
                    grid.append((g[j, t], 60.0))
                if grid:
                    B.row(("grid_power", s_id, j, t), grid + [(z[j], -1.0)], LE, 0.0, pos)
            if with_res:
                B.row(("bess_periodic", s_id, j), [(s[j, H - 1], 1.0), (d[j], -1.0)], EQ, 0.0, pos)

    lp = B.finish(instance.name[:8] or "CSP")
    return CspLp(lp, B.tags, B.directory, B.rtags, np.array(B.cblock), np.array(B.rblock),
                 sids, probs, J, with_res, instance, opportunities, energies, r_all,
                 (L_bess, L_cap, L_panel), rotations)


def _opp_at(opps: Opportunities, sid: int, b: int, t: int, j: str) -> int:
    for k in range(1, opps.tau[sid, b] + 1):
        if opps.loc[sid, b, k] == j and t in opps.T[sid, b, k]:
            return k
    raise ValueError(f"bus {b} listed at {j} in minute {t} without an opportunity")


def apply_ablation(csp: CspLp, mode: str) -> CspLp:
    """``no_res``: panels, battery and their flows fixed at zero.
    ``no_temperature``: rebuilt with the temperature term of trip energy zeroed.
    """
    if mode == "no_res":
        lp = csp.lp.copy()
        for i, tag in enumerate(csp.tags):
            if tag[0] in ("a", "c", "d", "wb", "g"):
                lp.lb[i] = lp.ub[i] = 0.0
        return replace(csp, lp=lp, ablations=csp.ablations + ("no_res",))
    if mode == "no_temperature":
        energies = compute_scenario_energies(csp.instance, ignore_temperature=True)
        new = build_csp_lp(csp.instance, csp.rotations, csp.opportunities, energies,
                           with_res=csp.with_res, amortization=csp.amortization)
        for prior in csp.ablations:
            if prior != "no_temperature":
                new = apply_ablation(new, prior)
        return replace(new, ablations=tuple(a for a in csp.ablations if a != "no_temperature")
                       + ("no_temperature",))
    raise ValueError(f"unknown ablation {mode!r}; expected one of {ABLATIONS}")


# --- solutions -----------------------------------------------------------

@dataclass
class CostBreakdown:
    bess_cost: float
    capacity_cost: float
    panel_cost: float
    avg_operational_cost: float

    @property
    def total(self) -> float:
        return self.bess_cost + self.capacity_cost + self.panel_cost + self.avg_operational_cost

    def as_dict(self) -> dict:
        return {"bess_cost": self.bess_cost, "capacity_cost": self.capacity_cost,
                "panel_cost": self.panel_cost, "avg_operational_cost": self.avg_operational_cost,
                "total": self.total}


@dataclass
class ScenarioPlan:
    scenario_id: int
    probability: float
    w: dict[tuple[int, int, int], float]
    wb: dict[tuple[int, int, int], float]
    g: dict[str, np.ndarray]
    s: dict[str, np.ndarray]
    e: dict[tuple[int, int], float]
    solar: dict[str, np.ndarray]     # panel output per minute at the chosen area


@dataclass
class PlanSolution:
    locations: tuple[str, ...]
    z: dict[str, float]
    a: dict[str, float]
    c: dict[str, float]
    d: dict[str, float]
    scenarios: list[ScenarioPlan]
    objective: float
    breakdown: CostBreakdown
    violations: list[str] = field(default_factory=list)
    attribution: "SourceAttribution | None" = None
    solver: str = ""

    def scenario(self, sid: int) -> ScenarioPlan:
        for sp_ in self.scenarios:
            if sp_.scenario_id == sid:
                return sp_
        raise KeyError(sid)


def cost_breakdown(csp: CspLp, plan: PlanSolution) -> CostBreakdown:
    f = csp.instance.fleet
    L_bess, L_cap, L_panel = csp.amortization
    op = 0.0
    for sp_ in plan.scenarios:
        sc = csp.instance.scenario(sp_.scenario_id)
        tot = sum(sc.tariff[t] * v for (_, _, t), v in sp_.w.items())
        tot += f.solar_price * sum(sp_.wb.values())
        tot += sum(float(sc.tariff @ g) for g in sp_.g.values())
        op += sp_.probability * tot
    return CostBreakdown(f.pi_bess / L_bess * sum(plan.c.values()),
                         f.gamma_grid / L_cap * sum(plan.z.values()),
                         f.alpha_panel / L_panel * sum(plan.a.values()), float(op))


def extract_solution(csp: CspLp, x: np.ndarray, *, level_tol: float = 1e-7,
                     check_tol: float = 1e-6) -> PlanSolution:
    """Turn a primal vector into a plan and replay it against the model.

    Each stored level is recomputed from its predecessor and the flows in
    between; a mismatch above ``level_tol`` raises
    :class:`PlanConsistencyError`.  Constraint breaches above ``check_tol``
    found by :func:`check_plan` are listed in ``plan.violations``.
    """
    x = np.asarray(x, dtype=float)
    D = csp.directory
    H = csp.instance.horizon
    J = csp.locations
    val = lambda tag: float(x[D[tag]]) if tag in D else 0.0  # noqa: E731
    z = {j: val(("z", j)) for j in J}
    a = {j: val(("a", j)) for j in J}
    c = {j: val(("c", j)) for j in J}
    d = {j: val(("d", j)) for j in J}

    opp = csp.opportunities
    plans = []
    for sid, p in zip(csp.scenario_ids, csp.probabilities):
        w, wb, e = {}, {}, {}
        for b in opp.buses(sid):
            tau = opp.tau[sid, b]
            e[b, 0] = val(("e", sid, b, 0))
            for k in range(1, tau + 1):
                for t in opp.T[sid, b, k]:
                    w[b, k, t] = val(("w", sid, b, k, t))
                    wb[b, k, t] = val(("wb", sid, b, k, t))
                e[b, k] = val(("e", sid, b, k))
                want = e[b, k - 1] - csp.r[sid, b, k] + sum(w[b, k, t] + wb[b, k, t]
                                                            for t in opp.T[sid, b, k])
                if abs(want - e[b, k]) > level_tol:
                    raise PlanConsistencyError(
                        f"bus {b} level before opportunity {k + 1} in scenario {sid}: "
                        f"stored {e[b, k]}, flows imply {want}")
        g, s, sol = {}, {}, {}
        for j in J:
            g[j] = np.array([val(("g", sid, j, t)) for t in range(H)])
            s[j] = np.array([val(("s", sid, j, t)) for t in range(H)])
            sol[j] = csp.solar(sid, j) * a[j]
            if csp.with_res:
                draw = _bess_draws(opp, sid, j, wb, H)
                prev = np.concatenate(([d[j]], s[j][:-1]))
                gap = np.abs(prev + sol[j] + g[j] - draw - s[j])
                if gap.size and gap.max() > level_tol:
                    t = int(gap.argmax())
                    raise PlanConsistencyError(
                        f"battery level at {j}, minute {t}, scenario {sid} off by {gap[t]}")
        plans.append(ScenarioPlan(sid, float(p), w, wb, g, s, e, sol))

    plan = PlanSolution(J, z, a, c, d, plans, float(csp.lp.c @ x),
                        CostBreakdown(0.0, 0.0, 0.0, 0.0))
    plan.breakdown = cost_breakdown(csp, plan)
    plan.violations = check_plan(plan, csp, check_tol)
    return plan


def _bess_draws(opp: Opportunities, sid: int, j: str, wb: dict, H: int) -> np.ndarray:
    draw = np.zeros(H)
    for (b, k, t), v in wb.items():
        if opp.loc[sid, b, k] == j:
            draw[t] += v
    return draw


def check_plan(plan: PlanSolution, csp: CspLp, tol: float = 1e-6) -> list[str]:
    """Replay every operating rule on a plan, independently of the LP rows.

    Uses only the rotations' opportunity data and fleet parameters: bus
    state of charge, per-minute transfer limit, battery bounds and
    recursion, grid power cap and day-to-day periodicity.
    """
    f = csp.instance.fleet
    H = csp.instance.horizon
    opp = csp.opportunities
    out: list[str] = []
    bad = out.append
    for j in plan.locations:
        for name, v in (("z", plan.z[j]), ("a", plan.a[j]), ("c", plan.c[j]), ("d", plan.d[j])):
            if v < -tol:
                bad(f"{name}[{j}] negative ({v})")
        if plan.d[j] > plan.c[j] + tol:
            bad(f"d[{j}] exceeds battery capacity")
    for sp_ in plan.scenarios:
        sid = sp_.scenario_id
        for b in opp.buses(sid):
            tau = opp.tau[sid, b]
            level = sp_.e[b, 0]
            if abs(sp_.e[b, 0] - sp_.e[b, tau]) > tol:
                bad(f"s{sid} bus {b}: day start {sp_.e[b, 0]} != day end {sp_.e[b, tau]}")
            for k in range(1, tau + 1):
                if level < f.rho_min - tol:
                    bad(f"s{sid} bus {b}: level {level} below rho_min before opportunity {k}")
                charged = 0.0
                for t in opp.T[sid, b, k]:
                    gw, bw = sp_.w[b, k, t], sp_.wb[b, k, t]
                    if gw < -tol or bw < -tol:
                        bad(f"s{sid} bus {b} minute {t}: negative transfer")
                    if gw + bw > f.beta + tol:
                        bad(f"s{sid} bus {b} minute {t}: transfer {gw + bw} above beta")
                    charged += gw + bw
                if level + charged > f.rho_max + tol:
                    bad(f"s{sid} bus {b}: charged to {level + charged} above rho_max at opportunity {k}")
                level = level + charged - csp.r[sid, b, k]
                if abs(level - sp_.e[b, k]) > tol:
                    bad(f"s{sid} bus {b}: level after opportunity {k} is {sp_.e[b, k]}, replay gives {level}")
                level = sp_.e[b, k]
            if level < f.rho_min - tol:
                bad(f"s{sid} bus {b}: final level {level} below rho_min")

        grid_to_bus: dict[tuple[str, int], float] = {}
        bess_to_bus: dict[tuple[str, int], float] = {}
        for (b, k, t), v in sp_.w.items():
            key = (opp.loc[sid, b, k], t)
            grid_to_bus[key] = grid_to_bus.get(key, 0.0) + v
            bess_to_bus[key] = bess_to_bus.get(key, 0.0) + sp_.wb[b, k, t]
        for j in plan.locations:
            c, d = plan.c[j], plan.d[j]
            prev = d
            for t in range(H):
                g = sp_.g[j][t]
                sol = sp_.solar[j][t]
                lvl = sp_.s[j][t]
                if g < -tol:
                    bad(f"s{sid} {j} minute {t}: negative grid-to-battery flow")
                if prev + sol + g > c + tol:
                    bad(f"s{sid} {j} minute {t}: battery overfilled")
                if lvl < (1 - f.dod) * c - tol or lvl > c + tol:
                    bad(f"s{sid} {j} minute {t}: battery level {lvl} outside [{(1 - f.dod) * c}, {c}]")
                if abs(prev + sol + g - bess_to_bus.get((j, t), 0.0) - lvl) > tol:
                    bad(f"s{sid} {j} minute {t}: battery balance broken")
                draw = 60.0 * (grid_to_bus.get((j, t), 0.0) + g)
                if draw > plan.z[j] + tol:
                    bad(f"s{sid} {j} minute {t}: grid draw {draw} kW above capacity {plan.z[j]}")
                prev = lvl
            if H and abs(sp_.s[j][H - 1] - d) > tol:
                bad(f"s{sid} {j}: battery ends the day at {sp_.s[j][H - 1]}, not {d}")
    return out


# --- grid/solar attribution ---------------------------------------------

@dataclass
class SourceAttribution:
    """Grid- and solar-origin split of battery contents and discharges.

    Keys of the per-location dicts are ``(scenario, location)``; per-bus
    charge splits are keyed ``(scenario, bus, k, minute)`` and give
    ``(grid_kwh, solar_kwh)``.
    """

    out_grid: dict[tuple[int, str], np.ndarray]
    out_solar: dict[tuple[int, str], np.ndarray]
    stock_grid: dict[tuple[int, str], np.ndarray]
    stock_solar: dict[tuple[int, str], np.ndarray]
    bus: dict[tuple[int, int, int, int], tuple[float, float]]


def two_compartment(inflow_grid, inflow_solar, outflow, start_grid: float, start_solar: float):
    """Run a battery whose grid-origin content is always spent first.

    Within each minute inflows arrive before the outflow leaves.  Returns
    ``(out_grid, out_solar, stock_grid, stock_solar)`` per minute.
    """
    n = len(outflow)
    og, os_, sg, ss = np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n)
    G, S = float(start_grid), float(start_solar)
    for t in range(n):
        G += inflow_grid[t]
        S += inflow_solar[t]
        take = min(max(G, 0.0), outflow[t])
        og[t] = take
        os_[t] = outflow[t] - take
        G -= take
        S -= os_[t]
        if S < 0:           # round-off only; keep compartments non-negative
            G += S
            S = 0.0
        sg[t], ss[t] = G, S
    return og, os_, sg, ss


def attribute_charge_sources(plan: PlanSolution, csp: CspLp, max_passes: int = 200) -> PlanSolution:
    """Attach a :class:`SourceAttribution` to ``plan`` and return it.

    The day's opening composition of each battery is taken as the periodic
    fixed point of the daily run (end composition equals start composition).
    """
    opp = csp.opportunities
    H = csp.instance.horizon
    og_all, os_all, sg_all, ss_all, bus = {}, {}, {}, {}, {}
    for sp_ in plan.scenarios:
        sid = sp_.scenario_id
        draws = {j: _bess_draws(opp, sid, j, sp_.wb, H) for j in plan.locations}
        for j in plan.locations:
            draw = draws[j]
            d = plan.d[j]
            G0 = 0.0
            for _ in range(max_passes):
                og, os_, sg, ss = two_compartment(sp_.g[j], sp_.solar[j], draw, G0, d - G0)
                G1 = min(max(sg[-1] if H else G0, 0.0), d)
                if abs(G1 - G0) <= 1e-12:
                    break
                G0 = G1
            key = (sid, j)
            og_all[key], os_all[key], sg_all[key], ss_all[key] = og, os_, sg, ss
        for (b, k, t), v in sp_.wb.items():
            j = opp.loc[sid, b, k]
            total = draws[j][t]
            share = og_all[sid, j][t] / total if total > 1e-15 else 0.0
            share = min(max(share, 0.0), 1.0)
            bus[sid, b, k, t] = (sp_.w[b, k, t] + v * share, v * (1.0 - share))
    plan.attribution = SourceAttribution(og_all, os_all, sg_all, ss_all, bus)
    return plan

