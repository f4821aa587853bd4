"""Problem data: trips, locations, deadheads, weather/tariff scenarios, fleet.

Times are integer minutes of the day on ``[0, horizon)``; the horizon is
1440 for real networks and may be shorter for synthetic test instances.
Scenario series (GTI, temperature, tariff) are stored per minute.  Hourly
inputs are expanded by repeating each hourly value over its 60 minutes.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

HORIZON = 1440
DEADHEAD_SPEED_KMH = 30.0
EARTH_RADIUS_M = 6_371_008.8


@dataclass(frozen=True)
class Trip:
    id: str
    start_stop: str
    end_stop: str
    start_time: int
    end_time: int
    length_km: float
    travel_time_min: int


@dataclass(frozen=True)
class Location:
    id: str
    kind: str  # "depot" or "terminal"
    lat: float = 0.0
    lon: float = 0.0


@dataclass
class DeadheadMatrix:
    """Deadhead times (whole minutes) and distances (km) between stops."""

    time_min: dict[tuple[str, str], int]
    dist_km: dict[tuple[str, str], float]

    def time(self, a: str, b: str) -> int:
        return 0 if a == b else self.time_min[a, b]

    def dist(self, a: str, b: str) -> float:
        return 0.0 if a == b else self.dist_km[a, b]

    @classmethod
    def from_distances(cls, dist_km: dict[tuple[str, str], float],
                       speed_kmh: float = DEADHEAD_SPEED_KMH) -> "DeadheadMatrix":
        """Derive times from distances at a constant speed, rounded up to minutes."""
        times = {k: (0 if d == 0 else max(1, math.ceil(d / speed_kmh * 60 - 1e-9)))
                 for k, d in dist_km.items()}
        return cls(times, dict(dist_km))

    def keys(self) -> set[tuple[str, str]]:
        return set(self.dist_km) | set(self.time_min)


@dataclass
class Scenario:
    id: int
    probability: float
    gti: dict[str, np.ndarray]   # kW/m2 per minute, by location
    temp: np.ndarray             # deg C per minute
    tariff: np.ndarray           # $/kWh per minute


@dataclass(frozen=True)
class Regression:
    """Coefficients of the log-linear trip energy model."""

    a0: float = -8.11
    a1: float = 0.55
    a2: float = 0.78
    a3: float = 0.35
    a4: float = 0.008
    t_opt: float = 23.3


@dataclass(frozen=True)
class FleetParams:
    rho_max: float = 266.05
    rho_min: float = 46.95
    beta: float = 2.5
    mass_kg: float = 16121.14
    regression: Regression = field(default_factory=Regression)
    eta_pct: float = 20.0
    dod: float = 0.9
    pi_bess: float = 500.0
    gamma_grid: float = 654.0
    alpha_panel: float = 305.89
    solar_price: float = 0.0
    deadhead_speed_kmh: float = DEADHEAD_SPEED_KMH
    bess_life_days: float = 365 * 12
    capacity_life_days: float = 365 * 12
    panel_life_days: float = 365 * 30


@dataclass
class Instance:
    trips: tuple[Trip, ...]
    locations: tuple[Location, ...]
    deadheads: DeadheadMatrix
    scenarios: tuple[Scenario, ...]
    fleet: FleetParams = field(default_factory=FleetParams)
    horizon: int = HORIZON
    name: str = "instance"

    def __post_init__(self):
        self.trips = tuple(self.trips)
        self.locations = tuple(self.locations)
        self.scenarios = tuple(self.scenarios)
        self._trip_index = {t.id: t for t in self.trips}

    @property
    def depots(self) -> list[str]:
        return sorted(loc.id for loc in self.locations if loc.kind == "depot")

    @property
    def location_ids(self) -> list[str]:
        return [loc.id for loc in self.locations]

    def trip(self, trip_id: str) -> Trip:
        return self._trip_index[trip_id]

    def scenario(self, sid: int) -> Scenario:
        for sc in self.scenarios:
            if sc.id == sid:
                return sc
        raise KeyError(sid)

    def with_scenarios(self, scenarios) -> "Instance":
        return replace(self, scenarios=tuple(scenarios))

    def with_fleet(self, **changes) -> "Instance":
        return replace(self, fleet=replace(self.fleet, **changes))


@dataclass(frozen=True)
class Violation:
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.subject}: {self.message}"


def validate(instance: Instance) -> list[Violation]:
    """Every broken invariant in ``instance``; an empty list means valid."""
    out: list[Violation] = []
    H = instance.horizon
    add = lambda subject, msg: out.append(Violation(subject, msg))  # noqa: E731

    if not 1 <= H <= HORIZON:
        add("Instance", f"horizon {H} outside [1, {HORIZON}]")

    ids = [loc.id for loc in instance.locations]
    if len(set(ids)) != len(ids):
        add("Location", "duplicate location ids")
    for loc in instance.locations:
        if loc.kind not in ("depot", "terminal"):
            add(f"location:{loc.id}", f"unknown kind {loc.kind!r}")
    if not instance.depots:
        add("Location", "no depot in the location set")
    known = set(ids)

    dh = instance.deadheads
    for (a, b), t in dh.time_min.items():
        if t < 0 or (a == b and t != 0):
            add("DeadheadMatrix", f"bad time {t} for ({a}, {b})")
    for (a, b), d in dh.dist_km.items():
        if d < 0 or (a == b and d != 0):
            add("DeadheadMatrix", f"bad distance {d} for ({a}, {b})")

    trip_ids = [t.id for t in instance.trips]
    if len(set(trip_ids)) != len(trip_ids):
        add("Trip", "duplicate trip ids")
    for t in instance.trips:
        subj = f"trip:{t.id}"
        if t.start_stop not in known or t.end_stop not in known:
            add(subj, "references an unknown stop")
            continue
        if not t.end_time > t.start_time:
            add(subj, "end_time must exceed start_time")
        if t.travel_time_min != t.end_time - t.start_time:
            add(subj, "travel_time_min differs from end_time - start_time")
        if not t.length_km > 0 or not t.travel_time_min > 0:
            add(subj, "length and travel time must be positive")
        if not (0 <= t.start_time < H and t.end_time <= H):
            add(subj, f"times outside the horizon [0, {H})")

    stops = {s for t in instance.trips for s in (t.start_stop, t.end_stop) if s in known}
    stops |= set(instance.depots)
    dkeys, tkeys = set(dh.dist_km), set(dh.time_min)
    missing = [(a, b) for a in sorted(stops) for b in sorted(stops)
               if a != b and ((a, b) not in dkeys or (a, b) not in tkeys)]
    if missing:
        add("DeadheadMatrix", f"{len(missing)} stop pairs missing, e.g. {missing[0]}")

    f = instance.fleet
    if not 0 <= f.rho_min < f.rho_max:
        add("FleetParams", "need 0 <= rho_min < rho_max")
    if not 0 < f.dod <= 1:
        add("FleetParams", "dod must lie in (0, 1]")
    if not f.beta > 0:
        add("FleetParams", "beta must be positive")
    if not f.mass_kg > 0:
        add("FleetParams", "mass_kg must be positive")
    if f.eta_pct < 0 or min(f.pi_bess, f.gamma_grid, f.alpha_panel, f.solar_price) < 0:
        add("FleetParams", "efficiency and prices must be non-negative")

    if not instance.scenarios:
        add("Scenario", "no scenarios")
    total = 0.0
    for sc in instance.scenarios:
        subj = f"scenario:{sc.id}"
        total += sc.probability
        if not 0 < sc.probability <= 1:
            add(subj, "probability outside (0, 1]")
        if np.shape(sc.temp) != (H,) or np.shape(sc.tariff) != (H,):
            add(subj, f"temperature/tariff series must have {H} minutes")
        elif np.any(np.asarray(sc.tariff) < 0) or not np.all(np.isfinite(sc.temp)):
            add(subj, "negative tariff or non-finite temperature")
        for loc in ids:
            g = sc.gti.get(loc)
            if g is None or np.shape(g) != (H,):
                add(subj, f"GTI series for {loc} missing or not {H} minutes")
            elif np.any(np.asarray(g) < 0):
                add(subj, f"negative GTI at {loc}")
    if instance.scenarios and abs(total - 1.0) > 1e-9:
        add("Scenario", f"probabilities sum to {total}, not 1")
    return out


def hourly_to_minutes(values, horizon: int = HORIZON) -> np.ndarray:
    """Repeat each hourly value over its 60 minutes and cut to ``horizon``."""
    v = np.asarray(values, dtype=float)
    need = math.ceil(horizon / 60)
    if v.size < need:
        raise ValueError(f"need {need} hourly values for a {horizon}-minute horizon")
    return np.repeat(v[:need], 60)[:horizon]


def haversine_m(lat1, lon1, lat2, lon2) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def cluster_terminals(instance: Instance, radius_m: float = 500.0) -> dict[str, str]:
    """Map each stop to its cluster's candidate charging location.

    Terminals closer than ``radius_m`` (great-circle) are linked; clusters
    are the connected components (single linkage).  Each cluster is
    represented by the stop where most trips start or end, lowest id on
    ties.  Depots always represent themselves.
    """
    terms = sorted(loc.id for loc in instance.locations if loc.kind == "terminal")
    pos = {loc.id: (loc.lat, loc.lon) for loc in instance.locations}
    parent = {t: t for t in terms}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, a in enumerate(terms):
        for b in terms[i + 1:]:
            if haversine_m(*pos[a], *pos[b]) <= radius_m:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    endpoints = {t: 0 for t in terms}
    for trip in instance.trips:
        for s in (trip.start_stop, trip.end_stop):
            if s in endpoints:
                endpoints[s] += 1
    groups: dict[str, list[str]] = {}
    for t in terms:
        groups.setdefault(find(t), []).append(t)
    mapping = {d: d for d in instance.depots}
    for members in groups.values():
        rep = min(members, key=lambda s: (-endpoints[s], s))
        for s in members:
            mapping[s] = rep
    return mapping


def filter_trips(instance: Instance, start_before_min: int) -> Instance:
    """Keep only trips starting strictly before ``start_before_min``."""
    kept = tuple(t for t in instance.trips if t.start_time < start_before_min)
    return replace(instance, trips=kept)


def generate_synthetic(seed: int, n_trips: int, n_depots: int, n_scenarios: int,
                       horizon_min: int, *, n_terminals: int = 3,
                       fleet: FleetParams | None = None,
                       common_tariff: bool = False) -> Instance:
    """Random but reproducible instance for tests and demos.

    Stops lie in a roughly 3 km x 3 km box; road distance is 1.3 times the
    great-circle distance and deadhead time follows at 30 km/h.  Trips start
    between 20% and 65% of the horizon so every bus has a long overnight
    layover.  Weather draws stay inside GTI in [0, 1.2] kW/m2 and temperature
    in [-15, 40] deg C; tariffs follow a peak/off-peak pattern between 0.04
    and 0.30 $/kWh.
    """
    if min(n_trips, n_depots, n_scenarios, horizon_min) < 1:
        raise ValueError("counts must be at least 1")
    if horizon_min > HORIZON:
        raise ValueError(f"horizon_min must not exceed {HORIZON}")
    rng = np.random.default_rng(seed)
    H = int(horizon_min)

    locs = [Location(f"D{i}", "depot", 45.0 + rng.uniform(0, 0.027),
                     -79.0 + rng.uniform(0, 0.038)) for i in range(n_depots)]
    locs += [Location(f"T{i:02d}", "terminal", 45.0 + rng.uniform(0, 0.027),
                      -79.0 + rng.uniform(0, 0.038)) for i in range(n_terminals)]
    dist = {}
    for a in locs:
        for b in locs:
            if a.id != b.id:
                dist[a.id, b.id] = round(1.3 * haversine_m(a.lat, a.lon, b.lat, b.lon) / 1000, 3)
    deadheads = DeadheadMatrix.from_distances(dist)

    stops = [loc.id for loc in locs if loc.kind == "terminal"] or [locs[0].id]
    lo_t, hi_t = max(2, H // 30), max(3, H // 8)
    trips = []
    for i in range(n_trips):
        travel = int(rng.integers(lo_t, hi_t + 1))
        first = int(0.2 * H)
        last = max(first, int(0.65 * H) - travel)
        start = int(rng.integers(first, last + 1))
        a, b = rng.choice(len(stops), size=2, replace=len(stops) < 2)
        speed = rng.uniform(18.0, 28.0)
        trips.append(Trip(f"t{i:03d}", stops[a], stops[b], start, start + travel,
                          round(speed * travel / 60, 3), travel))

    hours = math.ceil(H / 60)
    base_tariff = np.array([0.05 if (h % 24) < 7 or (h % 24) >= 19 else
                            0.16 if 11 <= (h % 24) < 17 else 0.09 for h in range(hours)])
    scenarios = []
    for s in range(n_scenarios):
        t0 = rng.uniform(-10.0, 35.0)
        temp_h = np.clip(t0 + 5.0 * np.sin(np.pi * (np.arange(hours) + 0.5) / max(hours, 1))
                         + rng.normal(0, 1.0, hours), -15.0, 40.0)
        peak = rng.uniform(0.3, 1.0)
        shape = np.sin(np.pi * (np.arange(hours) + 0.5) / hours)
        gti = {loc.id: hourly_to_minutes(
            np.clip(peak * shape * rng.uniform(0.7, 1.0, hours), 0.0, 1.2), H) for loc in locs}
        tariff_h = base_tariff if common_tariff else np.clip(
            base_tariff * rng.uniform(0.8, 1.3), 0.04, 0.30)
        scenarios.append(Scenario(s, 1.0 / n_scenarios, gti, hourly_to_minutes(temp_h, H),
                                  hourly_to_minutes(np.round(tariff_h, 4), H)))
    return Instance(tuple(trips), tuple(locs), deadheads, tuple(scenarios),
                    fleet or FleetParams(), H, f"synthetic-{seed}")


# --- serialisation -------------------------------------------------------

def _series(v) -> list[float]:
    return [float(x) for x in np.asarray(v, dtype=float)]


def instance_to_dict(instance: Instance) -> dict:
    fleet = asdict(instance.fleet)
    return {
        "name": instance.name,
        "horizon": instance.horizon,
        "trips": [asdict(t) for t in instance.trips],
        "locations": [asdict(loc) for loc in instance.locations],
        "deadheads": [
            {"from": a, "to": b, "dist_km": float(instance.deadheads.dist_km[a, b]),
             "time_min": int(instance.deadheads.time_min[a, b])}
            for (a, b) in sorted(instance.deadheads.dist_km)
        ],
        "scenarios": [
            {"id": sc.id, "probability": float(sc.probability),
             "gti": {k: _series(v) for k, v in sorted(sc.gti.items())},
             "temp": _series(sc.temp), "tariff": _series(sc.tariff)}
            for sc in instance.scenarios
        ],
        "fleet": fleet,
    }


def instance_hash(instance: Instance) -> str:
    blob = json.dumps(instance_to_dict(instance), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _load_series(values, H: int) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size == H:
        return v
    if v.size == 24 or v.size == math.ceil(H / 60):
        return hourly_to_minutes(v, H)
    raise ValueError(f"series of length {v.size} is neither hourly nor {H} minutes")


def read_hourly_csv(path, value_column: str, key_column: str | None = None):
    """Read ``[key,]hour,value`` rows into ``{key: array}`` or a single array."""
    rows: dict = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            key = rec[key_column] if key_column else None
            rows.setdefault(key, {})[int(rec["hour"])] = float(rec[value_column])
    out = {}
    for key, by_hour in rows.items():
        hours = sorted(by_hour)
        if hours != list(range(len(hours))):
            raise ValueError(f"{path}: hours must run 0..n-1 without gaps")
        out[key] = np.array([by_hour[h] for h in hours])
    return out if key_column else out[None]


def instance_from_dict(doc: dict, base_dir=None, granularity: str = "yearly") -> Instance:
    """Build an instance from the JSON document layout described in README."""
    H = int(doc.get("horizon", HORIZON))
    trips = tuple(Trip(str(t["id"]), str(t["start_stop"]), str(t["end_stop"]),
                       int(t["start_time"]), int(t["end_time"]), float(t["length_km"]),
                       int(t.get("travel_time_min", int(t["end_time"]) - int(t["start_time"]))))
                  for t in doc["trips"])
    locs = tuple(Location(str(x["id"]), x.get("kind", "terminal"), float(x.get("lat", 0.0)),
                          float(x.get("lon", 0.0))) for x in doc["locations"])
    fdoc = dict(doc.get("fleet", {}))
    reg = Regression(**fdoc.pop("regression", {}))
    fleet = FleetParams(regression=reg, **fdoc)

    dist, times = {}, {}
    for e in doc.get("deadheads", []):
        key = (str(e["from"]), str(e["to"]))
        dist[key] = float(e["dist_km"])
        if "time_min" in e:
            times[key] = int(e["time_min"])
    derived = DeadheadMatrix.from_distances(dist, fleet.deadhead_speed_kmh)
    derived.time_min.update(times)

    sdoc = doc.get("scenarios", [])
    if isinstance(sdoc, dict):
        scenarios = _scenarios_from_csv(sdoc, base_dir, H, granularity)
    else:
        scenarios = tuple(
            Scenario(int(s.get("id", i)), float(s.get("probability", 1.0 / len(sdoc))),
                     {str(k): _load_series(v, H) for k, v in s["gti"].items()},
                     _load_series(s["temp"], H), _load_series(s["tariff"], H))
            for i, s in enumerate(sdoc))
    return Instance(trips, locs, derived, scenarios, fleet, H, doc.get("name", "instance"))


def _scenarios_from_csv(sdoc: dict, base_dir, H: int, granularity: str):
    from .energy import aggregate_scenarios

    base = Path(base_dir or ".")
    gti = read_hourly_csv(base / sdoc["gti_csv"], "gti_kw_m2", "location")
    temp = read_hourly_csv(base / sdoc["temp_csv"], "temp_c")
    price = read_hourly_csv(base / sdoc["price_csv"], "price_per_kwh")
    if temp.size == 24:
        return (Scenario(0, 1.0, {k: hourly_to_minutes(v, H) for k, v in gti.items()},
                         hourly_to_minutes(temp, H), hourly_to_minutes(price, H)),)
    raw = {"gti": gti, "temp": temp, "tariff": price}
    return tuple(aggregate_scenarios(raw, sdoc.get("granularity", granularity), H))


def load_instance(path, granularity: str = "yearly") -> Instance:
    path = Path(path)
    return instance_from_dict(json.loads(path.read_text()), path.parent, granularity)


def save_instance(instance: Instance, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(instance_to_dict(instance), sort_keys=True, indent=1))
    return path
