"""Fixtures and independent oracles shared by the test modules."""
from __future__ import annotations

import itertools

import mpmath
import numpy as np

from solarbus.energy import ScenarioEnergies, compute_scenario_energies
from solarbus.instance import (DeadheadMatrix, FleetParams, Instance, Location, Scenario, Trip,
                               generate_synthetic)
from solarbus.lpcore import LpStandardForm

REFERENCE_COEFFS = (-8.11, 0.55, 0.78, 0.35, 0.008, 23.3)


def energy_oracle(L, M, t, T, coeffs=REFERENCE_COEFFS, dps=50) -> float:
    """Log-linear consumption model evaluated in 50-digit arithmetic."""
    a0, a1, a2, a3, a4, topt = (mpmath.mpf(str(c)) for c in coeffs)
    with mpmath.workdps(dps):
        v = mpmath.exp(a0 + a1 * mpmath.log(mpmath.mpf(str(L))) + a2 * mpmath.log(mpmath.mpf(str(M)))
                       + a3 * mpmath.log(mpmath.mpf(str(t)))
                       + a4 * abs(mpmath.mpf(str(T)) - topt))
    return float(v)


def flat_scenario(sid, locations, H, temp=23.3, tariff=0.1, gti=0.0, prob=1.0) -> Scenario:
    return Scenario(sid, prob, {j: np.full(H, float(gti)) for j in locations},
                    np.full(H, float(temp)), np.full(H, float(tariff)))


def full_matrix(stops, time=1, dist=1.0, overrides=None) -> DeadheadMatrix:
    times, dists = {}, {}
    for a in stops:
        for b in stops:
            if a != b:
                times[a, b], dists[a, b] = time, dist
    for (a, b), (t, d) in (overrides or {}).items():
        times[a, b], dists[a, b] = t, d
    return DeadheadMatrix(times, dists)


def make_instance(trips, depots, terminals, H=1440, fleet=None, scenarios=None, matrix=None,
                  name="fixture") -> Instance:
    locs = [Location(d, "depot") for d in depots] + [Location(t, "terminal") for t in terminals]
    ids = [x.id for x in locs]
    return Instance(tuple(trips), tuple(locs), matrix or full_matrix(ids),
                    tuple(scenarios or [flat_scenario(0, ids, H)]), fleet or FleetParams(), H, name)


def fixed_energies(instance: Instance, trip_kwh, deadhead_kwh=0.0, overrides=None) -> ScenarioEnergies:
    """Energies set by hand: a value per trip (or one for all) and per deadhead pair."""
    trips, dh = {}, {}
    for sc in instance.scenarios:
        for t in instance.trips:
            trips[sc.id, t.id] = trip_kwh[t.id] if isinstance(trip_kwh, dict) else float(trip_kwh)
        for key in instance.deadheads.dist_km:
            dh[sc.id, key] = (overrides or {}).get(key, deadhead_kwh)
    return ScenarioEnergies(trips, dh)


def five_trip_fixture():
    """Five-trip rotation; every layover leaves 3 free minutes at 10 kWh/min."""
    trips, stops = [], ["D"]
    for n in range(1, 6):
        start = 100 + 14 * (n - 1)
        trips.append(Trip(str(n), f"S{n}", f"E{n}", start, start + 10, 5.0, 10))
        stops += [f"S{n}", f"E{n}"]
    fleet = FleetParams(rho_max=250.0, rho_min=50.0, beta=10.0)
    inst = make_instance(trips, ["D"], stops[1:], fleet=fleet)
    over = {(f"E{n}", f"S{n + 1}"): 10.0 for n in range(1, 5)}
    energies = fixed_energies(inst, 40.0, 0.0, over)
    return inst, energies


def three_bus_fixture():
    """Three buses sharing stations s2 and s4."""
    T = lambda i, a, b, s, e: Trip(i, a, b, s, e, 1.0, e - s)  # noqa: E731
    trips = [T("1a", "s1", "s2", 1, 5), T("1b", "s3", "s4", 10, 12), T("1c", "s4", "s5", 15, 20),
             T("2a", "s6", "s2", 1, 4), T("2b", "s2", "s7", 7, 12),
             T("3a", "s8", "s4", 1, 10), T("3b", "s4", "s9", 13, 18)]
    stops = [f"s{i}" for i in range(1, 10)]
    matrix = full_matrix(["D"] + stops, overrides={("s2", "s3"): (2, 1.0)})
    inst = make_instance(trips, ["D"], stops, matrix=matrix)
    return inst


def tight_synthetic(seed, *, n_trips=None, n_scenarios=None, horizon=None, factor=None,
                    n_depots=None, n_terminals=None, common_tariff=False):
    """Small synthetic instance whose battery is barely larger than one trip.

    Such batteries force opportunity charging and new stations.
    """
    rng = np.random.default_rng(10_000 + seed)
    H = horizon or int(rng.integers(60, 121))
    S = n_scenarios or int(rng.integers(1, 4))
    n = n_trips or int(rng.integers(3, 9))
    inst = generate_synthetic(seed, n, n_depots or int(rng.integers(1, 3)), S, H,
                              n_terminals=n_terminals or int(rng.integers(2, 4)),
                              common_tariff=common_tariff)
    en = compute_scenario_energies(inst)
    E = max(en.trip_energy.values()) + 2 * max(en.deadhead_energy.values())
    f = factor or float(rng.uniform(1.0, 1.3))
    return inst.with_fleet(rho_min=1.0, rho_max=1.0 + f * E)


# --- LP oracle -------------------------------------------------------------

def vertex_oracle(lp: LpStandardForm, tol=1e-9):
    """Optimum of a bounded LP by enumerating every basic solution.

    Each candidate vertex makes ``n`` constraints (rows or bounds) active.
    Returns ``(objective, x)`` or ``(None, None)`` when no vertex is feasible.
    """
    A = lp.A.toarray()
    m, n = A.shape
    assert np.all(np.isfinite(lp.ub)), "oracle needs a bounded box"
    G = np.vstack([A, np.eye(n), np.eye(n)])
    h = np.concatenate([lp.rhs, lp.lb, lp.ub])
    best, arg = None, None
    combos = np.array(list(itertools.combinations(range(G.shape[0]), n)))
    for chunk in np.array_split(combos, max(1, len(combos) // 20000)):
        M = G[chunk]
        det = np.linalg.det(M)
        ok = np.abs(det) > 1e-9
        if not ok.any():
            continue
        X = np.linalg.solve(M[ok], h[chunk[ok]][..., None])[..., 0]
        act = X @ A.T
        feas = np.all(X >= lp.lb - tol, axis=1) & np.all(X <= lp.ub + tol, axis=1)
        for i, s in enumerate(lp.senses):
            scale = tol * (1 + abs(lp.rhs[i]))
            if s == "L":
                feas &= act[:, i] <= lp.rhs[i] + scale
            elif s == "G":
                feas &= act[:, i] >= lp.rhs[i] - scale
            else:
                feas &= np.abs(act[:, i] - lp.rhs[i]) <= scale
        if feas.any():
            vals = X[feas] @ lp.c
            k = int(np.argmin(vals))
            if best is None or vals[k] < best:
                best, arg = float(vals[k]), X[feas][k]
    return best, arg


def random_boxed_lp(rng, n=None, m=None) -> LpStandardForm:
    n = n or int(rng.integers(2, 7))
    m = m or int(rng.integers(1, 9))
    A = np.round(rng.uniform(-3, 3, (m, n)), 1)
    A[rng.random((m, n)) < 0.25] = 0.0
    senses = rng.choice(["L", "G", "E"], size=m, p=[0.45, 0.4, 0.15])
    lb = np.round(rng.uniform(-2, 1, n), 1)
    ub = lb + np.round(rng.uniform(0.5, 4, n), 1)
    x0 = rng.uniform(lb, ub)
    rhs = np.round(A @ x0 + rng.normal(0, 1.5, m), 1)
    c = np.round(rng.uniform(-3, 3, n), 1)
    return LpStandardForm(A, senses, rhs, lb, ub, c)


def box_sup(q, lb, ub, zero=1e-12) -> float:
    """max of q @ x over lb <= x <= ub, written out term by term.

    Coefficients below ``zero`` in magnitude are floating-point residue of
    ``A.T @ y`` and count as 0.
    """
    total = 0.0
    for qi, lo, hi in zip(q, lb, ub):
        if abs(qi) <= zero:
            continue
        if qi > 0:
            if np.isinf(hi):
                return np.inf
            total += qi * hi
        else:
            total += qi * lo
    return total


def build_csp(inst, energies=None, clusters=None, **kw):
    """Schedule ``inst`` and assemble its LP."""
    from solarbus.cspmodel import build_csp_lp
    from solarbus.scheduler import compute_charging_opportunities, concurrent_scheduler

    energies = energies or compute_scenario_energies(inst)
    rots, J = concurrent_scheduler(inst, energies, clusters=clusters)
    opp = compute_charging_opportunities(rots, J, inst, clusters=clusters, energies=energies)
    return build_csp_lp(inst, rots, opp, energies, **kw)


def depot_loop(minutes, H, kwh, *, fleet=None, tariff=0.1, gti=0.0):
    """One bus driving a single depot-to-depot trip from minute 0."""
    trip = Trip("loop", "D", "D", 0, minutes, 10.0, minutes)
    inst = make_instance([trip], ["D"], [], H=H, fleet=fleet,
                         scenarios=[flat_scenario(0, ["D"], H, tariff=tariff, gti=gti)])
    return inst, fixed_energies(inst, kwh)


def sunny_instance(H=240, tariff=0.3):
    """Flat bright sun and expensive power: panels and storage pay off."""
    trips = [Trip("a", "A", "B", 60, 90, 12.0, 30), Trip("b", "B", "A", 120, 150, 12.0, 30)]
    sc = flat_scenario(0, ["D", "A", "B"], H, tariff=tariff, gti=1.0)
    return make_instance(trips, ["D"], ["A", "B"], H=H, scenarios=[sc],
                         fleet=FleetParams(rho_max=30.0, rho_min=1.0))


# --- independent plan replay ----------------------------------------------

def _unroll(t, start, H):
    """The absolute minute in ``[start, start + H)`` that is ``t`` on the clock."""
    return start + (t - start) % H


def _replay_bus(rot, windows, where, e, inst, en, sid, tol):
    """Simulate one bus minute by minute from its timetable.

    Energy of a move is taken when the bus departs.  A deadhead after a
    layover leaves as late as possible when the bus charges at the trip's end
    stop and right away otherwise.
    """
    f, H, dh = inst.fleet, inst.horizon, inst.deadheads
    bad = []
    trips = [inst.trip(t) for t in rot.trips]
    P = trips[0].start_time - dh.time(rot.depot, trips[0].start_stop)
    absw = {k: {_unroll(t, P, H): v for t, v in mins.items()} for k, mins in windows.items()}
    spot = {}
    for k, mins in absw.items():
        for cur, nxt in zip(trips, trips[1:]):
            if mins and cur.end_time <= min(mins) and max(mins) < nxt.start_time:
                spot[cur.id] = where[k]

    legs = [(P, trips[0].start_time, rot.depot, trips[0].start_stop,
             en.deadhead(sid, rot.depot, trips[0].start_stop))]
    for i, cur in enumerate(trips):
        legs.append((cur.start_time, cur.end_time, cur.start_stop, cur.end_stop, en.trip(sid, cur.id)))
        nxt = trips[i + 1] if i + 1 < len(trips) else None
        dest = nxt.start_stop if nxt else rot.depot
        t_dh = dh.time(cur.end_stop, dest)
        late = nxt is not None and spot.get(cur.id) == cur.end_stop
        go = nxt.start_time - t_dh if late else cur.end_time
        legs.append((go, go + t_dh, cur.end_stop, dest, en.deadhead(sid, cur.end_stop, dest)))
    if legs[-1][1] > P + H:
        return [f"s{sid} bus {rot.bus_id}: day longer than the horizon"]

    draw = dict.fromkeys(range(P, P + H), 0.0)
    for mins in absw.values():
        for u, v in mins.items():
            draw[u] += v
    take = dict.fromkeys(range(P, P + H), 0.0)
    for go, _, _, _, kwh in legs:
        take[go] += kwh

    def position(u):
        here = rot.depot
        for go, arrive, _, dest, _ in legs:
            if go <= u < arrive:
                return None
            if arrive <= u:
                here = dest
        return here

    for k, mins in absw.items():
        for u in mins:
            if position(u) != where[k]:
                bad.append(f"s{sid} bus {rot.bus_id}: charges at {where[k]} in minute {u % H} "
                           f"while at {position(u)}")

    # level just before each minute's departure, bus starting the day at 0
    level, before = 0.0, {}
    for u in range(P, P + H):
        before[u] = level
        level += draw[u] - take[u]
    if abs(level) > tol:
        bad.append(f"s{sid} bus {rot.bus_id}: day is not periodic (net {level})")
    order = sorted(absw, key=lambda k: min(absw[k]) if absw[k] else P + H)
    first = {k: min(absw[k]) if absw[k] else P + H for k in order}
    shift = e[0] - (before[first[order[0]]] if first[order[0]] < P + H else level)
    for i, k in enumerate(order, start=1):
        got = shift + (before[first[k]] if first[k] < P + H else level)
        if abs(got - e[i - 1]) > tol:
            bad.append(f"s{sid} bus {rot.bus_id}: level before window {i} is {got}, plan says {e[i - 1]}")
    for u in range(P, P + H):
        low = shift + before[u] - take[u]
        high = low + draw[u]
        if low < f.rho_min - tol or high > f.rho_max + tol:
            bad.append(f"s{sid} bus {rot.bus_id} minute {u % H}: level leaves [rho_min, rho_max]")
    return bad


def replay_plan(plan, csp, tol=1e-6) -> list[str]:
    """Check a plan against the operating rules from the timetable alone.

    Rebuilds each bus day from its rotation and trip energies, and each
    battery from GTI and the panel area; nothing is read from the LP rows.
    """
    inst = csp.instance
    f, H = inst.fleet, inst.horizon
    bad = []
    for j in plan.locations:
        if min(plan.z[j], plan.a[j], plan.c[j], plan.d[j]) < -tol:
            bad.append(f"{j}: negative sizing")
        if plan.d[j] > plan.c[j] + tol:
            bad.append(f"{j}: battery starts above its capacity")
    for sp_ in plan.scenarios:
        sid = sp_.scenario_id
        sc = next(s for s in inst.scenarios if s.id == sid)
        grid, bess = {}, {}
        for (b, k, t), gw in sp_.w.items():
            bw = sp_.wb.get((b, k, t), 0.0)
            if gw < -tol or bw < -tol or gw + bw > f.beta + tol:
                bad.append(f"s{sid} bus {b} minute {t}: transfer outside [0, beta]")
            j = csp.opportunities.loc[sid, b, k]
            grid[j, t] = grid.get((j, t), 0.0) + gw
            bess[j, t] = bess.get((j, t), 0.0) + bw
        for rot in csp.rotations[sid]:
            b = rot.bus_id
            windows, where = {}, {}
            for (bb, k, t), gw in sp_.w.items():
                if bb == b:
                    windows.setdefault(k, {})[t] = gw + sp_.wb.get((b, k, t), 0.0)
                    where[k] = csp.opportunities.loc[sid, b, k]
            tau = max(k for (bb, k) in sp_.e if bb == b)
            for k in range(1, tau + 1):
                windows.setdefault(k, {})
                where.setdefault(k, csp.opportunities.loc[sid, b, k])
            e = [sp_.e[b, k] for k in range(tau + 1)]
            bad += _replay_bus(rot, windows, where, e, inst, csp.energies, sid, tol)
        for j in plan.locations:
            c, d = plan.c[j], plan.d[j]
            sun = np.asarray(sc.gti[j], dtype=float) * plan.a[j] * f.eta_pct / 100.0 / 60.0
            g = np.asarray(sp_.g[j]) if csp.with_res else np.zeros(H)
            s = np.asarray(sp_.s[j]) if csp.with_res else np.zeros(H)
            prev = d
            for t in range(H):
                if g[t] < -tol:
                    bad.append(f"s{sid} {j} minute {t}: negative grid-to-battery flow")
                if prev + sun[t] + g[t] > c + tol:
                    bad.append(f"s{sid} {j} minute {t}: battery overfilled")
                if abs(prev + sun[t] + g[t] - bess.get((j, t), 0.0) - s[t]) > tol:
                    bad.append(f"s{sid} {j} minute {t}: battery balance broken")
                if s[t] < (1 - f.dod) * c - tol or s[t] > c + tol:
                    bad.append(f"s{sid} {j} minute {t}: battery level outside [(1-DoD)c, c]")
                if 60.0 * (grid.get((j, t), 0.0) + g[t]) > plan.z[j] + tol:
                    bad.append(f"s{sid} {j} minute {t}: grid draw above capacity")
                prev = s[t]
            if abs(s[H - 1] - d) > tol:
                bad.append(f"s{sid} {j}: battery is not periodic")
    return bad
