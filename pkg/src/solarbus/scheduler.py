"""Greedy concurrent scheduler with charge-and-go feasibility checks.

Trips are assigned in start-time order to the first bus that can take them
both in time and in energy; charging locations are opened on the fly when a
bus would otherwise run below its minimum state of charge.  The resulting
rotations are then turned into charging opportunities (layovers at a
charging location) that parameterise the charge scheduling LP.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .energy import ScenarioEnergies
from .instance import Instance, Trip


class TripInfeasibleError(RuntimeError):
    """A single trip cannot be served even by a freshly charged bus."""


@dataclass
class Rotation:
    bus_id: int
    scenario_id: int
    depot: str
    trips: list[str] = field(default_factory=list)

    def stops(self, instance: Instance) -> list[str]:
        """Depot, then (start, end) of every trip, then the depot again."""
        out = [self.depot]
        for tid in self.trips:
            t = instance.trip(tid)
            out += [t.start_stop, t.end_stop]
        return out + [self.depot]


def compatible(a: Trip, b: Trip, instance: Instance) -> bool:
    return a.end_time + instance.deadheads.time(a.end_stop, b.start_stop) <= b.start_time


def _detour(cur: Trip, nxt: Trip, rep: str, instance: Instance):
    """Minutes available when charging at ``rep`` between two trips, or None."""
    dh = instance.deadheads
    t1, t2 = dh.time(cur.end_stop, rep), dh.time(rep, nxt.start_stop)
    slack = nxt.start_time - cur.end_time - t1 - t2
    return (t1, t2, slack) if slack >= 0 else None


def is_rotation_charge_feasible(rotation: Rotation, stations, energies: ScenarioEnergies,
                                instance: Instance, *, initial_charge: float | None = None,
                                clusters: dict[str, str] | None = None, allow_open: bool = True,
                                trace: list | None = None, choices: list | None = None):
    """Check a rotation under charge-and-go, opening stations when needed.

    Charging adds ``beta`` kWh per free layover minute, capped at
    ``rho_max``.  A bus charges at its trip end when that stop is a station,
    otherwise at the next trip start when that is one.  Failing both, a new
    station is opened at the trip end only if the next trip would otherwise
    run below ``rho_min`` and the extra charge fixes it.

    With ``clusters`` (stop -> representative) a bus that needs charge at a
    trip end that is not a station may detour to its cluster's station, and
    new stations open at the cluster representative.  ``trace`` receives
    ``(label, level)`` pairs; ``choices`` receives, per layover, the stop
    where the bus charges (``None`` when it does not).

    Returns ``(feasible, stations')``; on failure the input set is returned.
    """
    f = instance.fleet
    sid = rotation.scenario_id
    rmin, rmax, beta = f.rho_min, f.rho_max, f.beta
    dh = instance.deadheads
    trips = [instance.trip(t) for t in rotation.trips]
    J = set(stations)
    log = trace.append if trace is not None else (lambda item: None)
    pick = choices.append if choices is not None else (lambda item: None)
    if not trips:
        return True, frozenset(J)

    rho = (rmax if initial_charge is None else initial_charge)
    rho -= energies.deadhead(sid, rotation.depot, trips[0].start_stop)
    log((f"{trips[0].id}:start", rho))
    rho -= energies.trip(sid, trips[0].id)
    log((f"{trips[0].id}:end", rho))
    if rho < rmin:
        return False, frozenset(stations)

    for cur, nxt in zip(trips, trips[1:]):
        e_dh = energies.deadhead(sid, cur.end_stop, nxt.start_stop)
        gap = nxt.start_time - cur.end_time - dh.time(cur.end_stop, nxt.start_stop)
        gain = beta * max(gap, 0)
        e_next = energies.trip(sid, nxt.id)
        rep = clusters.get(cur.end_stop, cur.end_stop) if clusters else cur.end_stop
        det = _detour(cur, nxt, rep, instance) if rep != cur.end_stop else None

        if cur.end_stop in J:
            rho = min(rmax, rho + gain)
            log((f"{cur.id}:end:charged", rho))
            pick(cur.end_stop)
            rho -= e_dh
        elif nxt.start_stop in J:
            pick(nxt.start_stop)
            rho -= e_dh
            log((f"{nxt.id}:start", rho))
            rho = min(rmax, rho + gain)
            log((f"{nxt.id}:start:charged", rho))
            rho -= e_next
            log((f"{nxt.id}:end", rho))
            if rho < rmin:
                return False, frozenset(stations)
            continue
        elif rho - e_dh - e_next >= rmin:
            rho -= e_dh
            pick(None)
        elif rep in J and det is not None:
            rho = _charge_via(rho, cur, nxt, rep, det, energies, sid, beta, rmax)
            log((f"{cur.id}:detour:{rep}", rho))
            pick(rep)
        elif allow_open:
            if det is not None:
                trial = _charge_via(rho, cur, nxt, rep, det, energies, sid, beta, rmax)
            else:
                trial = min(rmax, rho + gain) - e_dh
            if trial - e_next >= rmin:
                J.add(rep if det is not None else cur.end_stop)
                log((f"{cur.id}:end:charged", trial + e_dh if det is None else trial))
            rho = trial
            pick(rep if det is not None else cur.end_stop)
        else:
            rho -= e_dh
            pick(None)
        log((f"{nxt.id}:start", rho))
        rho -= e_next
        log((f"{nxt.id}:end", rho))
        if rho < rmin:
            return False, frozenset(stations)

    rho -= energies.deadhead(sid, trips[-1].end_stop, rotation.depot)
    log(("depot", rho))
    if rho < rmin:
        return False, frozenset(stations)
    return True, frozenset(J)


def _charge_via(rho, cur, nxt, rep, det, energies, sid, beta, rmax):
    t1, t2, slack = det
    rho -= energies.deadhead(sid, cur.end_stop, rep)
    rho = min(rmax, rho + beta * slack)
    return rho - energies.deadhead(sid, rep, nxt.start_stop)


def nearest_depot(instance: Instance, stop: str) -> str:
    return min(instance.depots, key=lambda d: (instance.deadheads.dist(d, stop), d))


def concurrent_scheduler(instance: Instance, energies: ScenarioEnergies, *,
                         clusters: dict[str, str] | None = None):
    """Assign trips to buses per scenario and collect charging locations.

    Returns ``(rotations, stations)`` where ``rotations`` maps scenario id to
    its list of :class:`Rotation` (bus ids from 1) and ``stations`` is the
    union over scenarios of the opened locations, depots included.
    """
    order = sorted(instance.trips, key=lambda t: (t.start_time, t.id))
    all_rotations: dict[int, list[Rotation]] = {}
    union = set(instance.depots)
    for sc in instance.scenarios:
        J = frozenset(instance.depots)
        rotations: list[Rotation] = []
        for trip in order:
            placed = False
            for rot in rotations:
                if not compatible(instance.trip(rot.trips[-1]), trip, instance):
                    continue
                trial = Rotation(rot.bus_id, sc.id, rot.depot, rot.trips + [trip.id])
                ok, J_new = is_rotation_charge_feasible(trial, J, energies, instance,
                                                        clusters=clusters)
                if ok:
                    rot.trips.append(trip.id)
                    J = J_new
                    placed = True
                    break
            if placed:
                continue
            rot = Rotation(len(rotations) + 1, sc.id, nearest_depot(instance, trip.start_stop),
                           [trip.id])
            ok, J_new = is_rotation_charge_feasible(rot, J, energies, instance, clusters=clusters)
            if not ok:
                raise TripInfeasibleError(
                    f"trip {trip.id} is not charge feasible on a fresh bus in scenario {sc.id}")
            J = J_new
            rotations.append(rot)
        all_rotations[sc.id] = rotations
        union |= J
    return all_rotations, frozenset(union)


# --- charging opportunities ---------------------------------------------

@dataclass(frozen=True)
class Leg:
    kind: str          # "trip" or "deadhead"
    origin: str
    dest: str
    depart: int
    arrive: int
    trip_id: str | None = None


@dataclass(frozen=True)
class ChargingOpportunity:
    scenario_id: int
    bus_id: int
    k: int
    location: str
    minutes: tuple[int, ...]
    after_leg: int      # charging happens after this leg index
    overnight: bool = False


@dataclass
class BusDay:
    rotation: Rotation
    legs: list[Leg]
    opportunities: list[ChargingOpportunity]


@dataclass
class Opportunities:
    """Charging opportunities of every bus in every scenario.

    ``T[s, b, k]`` are the charging minutes of opportunity ``k`` (1..tau,
    tau being the overnight layover at the depot), ``loc[s, b, k]`` its
    location, ``tau[s, b]`` the overnight index and ``N[s, j, t]`` the buses
    able to charge at location ``j`` in minute ``t``.
    """

    days: dict[tuple[int, int], BusDay]
    T: dict[tuple[int, int, int], tuple[int, ...]]
    loc: dict[tuple[int, int, int], str]
    tau: dict[tuple[int, int], int]
    N: dict[tuple[int, str, int], tuple[int, ...]]
    stations: tuple[str, ...]
    horizon: int

    def buses(self, sid: int) -> list[int]:
        return sorted(b for s, b in self.days if s == sid)


def _bus_day(rot: Rotation, J, instance: Instance, clusters, energies) -> BusDay:
    dh = instance.deadheads
    H = instance.horizon
    trips = [instance.trip(t) for t in rot.trips]
    legs: list[Leg] = []
    opps: list[tuple[str, list[int], int]] = []
    if clusters:
        if energies is None:
            raise ValueError("cluster detours need trip energies to replay charging decisions")
        where: list = []
        ok, _ = is_rotation_charge_feasible(rot, J, energies, instance, clusters=clusters,
                                            allow_open=False, choices=where)
        if not ok:
            raise ValueError(f"bus {rot.bus_id} in scenario {rot.scenario_id} is not charge feasible")
    else:
        where = [cur.end_stop if cur.end_stop in J else nxt.start_stop if nxt.start_stop in J
                 else None for cur, nxt in zip(trips, trips[1:])]

    first = trips[0]
    t_out = dh.time(rot.depot, first.start_stop)
    legs.append(Leg("deadhead", rot.depot, first.start_stop, first.start_time - t_out, first.start_time))
    legs.append(Leg("trip", first.start_stop, first.end_stop, first.start_time, first.end_time, first.id))
    for cur, nxt, spot in zip(trips, trips[1:], where):
        t_dh = dh.time(cur.end_stop, nxt.start_stop)
        e, s = cur.end_time, nxt.start_time
        if spot is None:
            legs.append(Leg("deadhead", cur.end_stop, nxt.start_stop, e, e + t_dh))
        elif spot == cur.end_stop:
            opps.append((spot, list(range(e, s - t_dh)), len(legs) - 1))
            legs.append(Leg("deadhead", cur.end_stop, nxt.start_stop, s - t_dh, s))
        elif spot == nxt.start_stop:
            legs.append(Leg("deadhead", cur.end_stop, nxt.start_stop, e, e + t_dh))
            opps.append((spot, list(range(e + t_dh, s)), len(legs) - 1))
        else:
            t1, t2, _ = _detour(cur, nxt, spot, instance)
            legs.append(Leg("deadhead", cur.end_stop, spot, e, e + t1))
            opps.append((spot, list(range(e + t1, s - t2)), len(legs) - 1))
            legs.append(Leg("deadhead", spot, nxt.start_stop, s - t2, s))
        legs.append(Leg("trip", nxt.start_stop, nxt.end_stop, nxt.start_time, nxt.end_time, nxt.id))
    last = trips[-1]
    t_in = dh.time(last.end_stop, rot.depot)
    legs.append(Leg("deadhead", last.end_stop, rot.depot, last.end_time, last.end_time + t_in))

    arrive, depart = legs[-1].arrive, legs[0].depart + H
    if depart < arrive:
        raise ValueError(f"bus {rot.bus_id} in scenario {rot.scenario_id} works longer than the horizon")
    opps.append((rot.depot, [t % H for t in range(arrive, depart)], len(legs) - 1))

    out, k = [], 0
    for i, (where, mins, after) in enumerate(opps):
        overnight = i == len(opps) - 1
        if not mins and not overnight:
            continue
        k += 1
        out.append(ChargingOpportunity(rot.scenario_id, rot.bus_id, k, where,
                                       tuple(m % H for m in mins), after, overnight))
    return BusDay(rot, legs, out)


def compute_charging_opportunities(rotations: dict[int, list[Rotation]], stations,
                                   instance: Instance, *,
                                   clusters: dict[str, str] | None = None,
                                   energies: ScenarioEnergies | None = None) -> Opportunities:
    """Charging opportunities under charge-and-go for fixed rotations.

    End-of-trip layovers at a station run from the trip's arrival until the
    bus must leave for its next start; layovers at the next start-stop run
    from arrival after the deadhead until departure.  Empty within-day
    layovers are dropped; the overnight depot layover is always kept.  With
    ``clusters`` the charging decisions are replayed from ``energies``.
    """
    J = frozenset(stations)
    days, T, loc, tau, N = {}, {}, {}, {}, {}
    for sid in sorted(rotations):
        for rot in rotations[sid]:
            day = _bus_day(rot, J, instance, clusters, energies)
            days[sid, rot.bus_id] = day
            for op in day.opportunities:
                T[sid, rot.bus_id, op.k] = op.minutes
                loc[sid, rot.bus_id, op.k] = op.location
                for t in op.minutes:
                    N.setdefault((sid, op.location, t), []).append(rot.bus_id)
            tau[sid, rot.bus_id] = day.opportunities[-1].k
    N = {key: tuple(sorted(v)) for key, v in N.items()}
    return Opportunities(days, T, loc, tau, N, tuple(sorted(J)), instance.horizon)


def segment_energies(day: BusDay, energies: ScenarioEnergies) -> dict[int, float]:
    """Energy a bus needs after opportunity ``k`` until opportunity ``k + 1``.

    For the overnight opportunity this is the stretch from pull-out to the
    first within-day opportunity of the next day.
    """
    sid = day.rotation.scenario_id

    def leg_energy(leg: Leg) -> float:
        if leg.kind == "trip":
            return energies.trip(sid, leg.trip_id)
        return energies.deadhead(sid, leg.origin, leg.dest)

    pos = [op.after_leg for op in day.opportunities]
    r = {}
    for i, op in enumerate(day.opportunities):
        lo, hi = (pos[i], pos[i + 1]) if i + 1 < len(pos) else (-1, pos[0])
        r[op.k] = float(sum(leg_energy(leg) for leg in day.legs[lo + 1:hi + 1]))
    return r
