"""Trip/deadhead energy consumption, solar yield, and scenario aggregation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import Instance, Regression, Scenario, hourly_to_minutes

DAYS_PER_YEAR = 365
MONTH_DAYS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)
GRANULARITIES = ("weekly", "monthly", "quarterly", "yearly")


def trip_energy(length_km, mass_kg, travel_time_min, avg_temp_c, regression: Regression):
    """Energy in kWh of a bus movement, log-linear in length, mass and time.

    The temperature enters through its absolute distance from the
    regression's optimum temperature.  Accepts scalars or numpy arrays.
    """
    L = np.asarray(length_km, dtype=float)
    M = np.asarray(mass_kg, dtype=float)
    t = np.asarray(travel_time_min, dtype=float)
    if np.any(L <= 0) or np.any(M <= 0) or np.any(t <= 0):
        raise ValueError("length, mass and travel time must be positive")
    r = regression
    dev = np.abs(np.asarray(avg_temp_c, dtype=float) - r.t_opt)
    out = np.exp(r.a0 + r.a1 * np.log(L) + r.a2 * np.log(M) + r.a3 * np.log(t) + r.a4 * dev)
    return float(out) if out.ndim == 0 else out


def deadhead_energy(dist_km, mass_kg, speed_kmh, avg_temp_c, regression: Regression) -> float:
    """Trip energy of an empty move at constant speed; zero for zero distance."""
    if dist_km < 0:
        raise ValueError("deadhead distance must be non-negative")
    if dist_km == 0:
        return 0.0
    return trip_energy(dist_km, mass_kg, dist_km / speed_kmh * 60.0, avg_temp_c, regression)


def solar_energy_per_min(gti_kw_m2, area_m2, eta_pct):
    """kWh produced per minute by ``area_m2`` of panels at efficiency ``eta_pct``."""
    return np.asarray(gti_kw_m2, dtype=float) * area_m2 * (eta_pct / 100.0) / 60.0


def _period_of_day(granularity: str) -> np.ndarray:
    days = np.arange(DAYS_PER_YEAR)
    if granularity == "yearly":
        return np.zeros(DAYS_PER_YEAR, dtype=int)
    if granularity == "weekly":
        return np.minimum(days // 7, 51)
    month = np.repeat(np.arange(12), MONTH_DAYS)
    if granularity == "monthly":
        return month
    if granularity == "quarterly":
        return month // 3
    raise ValueError(f"unknown granularity {granularity!r}; expected one of {GRANULARITIES}")


def _hour_means(series, period: np.ndarray, n_periods: int) -> np.ndarray:
    v = np.asarray(series, dtype=float)
    if v.shape != (DAYS_PER_YEAR * 24,) or not np.all(np.isfinite(v)):
        raise ValueError(f"expected {DAYS_PER_YEAR * 24} finite hourly values, got shape {v.shape}")
    by_day = v.reshape(DAYS_PER_YEAR, 24)
    out = []
    for p in range(n_periods):
        days = by_day[period == p]
        # shifted mean: exact for constant series
        out.append(days[0] + (days - days[0]).mean(axis=0))
    return np.stack(out)


def aggregate_scenarios(raw_hourly: dict, granularity: str, horizon: int = 1440) -> list[Scenario]:
    """Average a year of hourly data into one representative day per period.

    ``raw_hourly`` holds ``gti`` (location -> 8760 values), ``temp`` and
    ``tariff`` (8760 values each).  Weeks are consecutive 7-day blocks with
    the last one absorbing day 365; months follow a non-leap calendar.
    """
    period = _period_of_day(granularity)
    n = int(period.max()) + 1
    temp = _hour_means(raw_hourly["temp"], period, n)
    tariff = _hour_means(raw_hourly["tariff"], period, n)
    gti = {loc: _hour_means(v, period, n) for loc, v in sorted(raw_hourly["gti"].items())}
    return [
        Scenario(p, 1.0 / n, {loc: hourly_to_minutes(g[p], horizon) for loc, g in gti.items()},
                 hourly_to_minutes(temp[p], horizon), hourly_to_minutes(tariff[p], horizon))
        for p in range(n)
    ]


@dataclass
class ScenarioEnergies:
    """Per-scenario trip and deadhead energies in kWh."""

    trip_energy: dict[tuple[int, str], float]
    deadhead_energy: dict[tuple[int, tuple[str, str]], float]

    def trip(self, sid: int, trip_id: str) -> float:
        return self.trip_energy[sid, trip_id]

    def deadhead(self, sid: int, a: str, b: str) -> float:
        return 0.0 if a == b else self.deadhead_energy[sid, (a, b)]

    @property
    def scenario_ids(self) -> list[int]:
        return sorted({s for s, _ in self.trip_energy} | {s for s, _ in self.deadhead_energy})


def _shifted_mean(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(v[0] + np.mean(v - v[0]))


def trip_temperatures(instance: Instance, scenario: Scenario) -> dict[str, float]:
    """Mean of the scenario temperature at each trip's start and end minute."""
    last = instance.horizon - 1
    return {t.id: 0.5 * (float(scenario.temp[t.start_time]) + float(scenario.temp[min(t.end_time, last)]))
            for t in instance.trips}


def compute_scenario_energies(instance: Instance, ignore_temperature: bool = False) -> ScenarioEnergies:
    """Energy of every trip and deadhead pair in every scenario.

    Deadheads have no timetable, so they use the scenario's mean daily
    temperature.  With ``ignore_temperature`` the temperature term is zero.
    """
    f = instance.fleet
    reg = f.regression
    trips, dheads = {}, {}
    lengths = np.array([t.length_km for t in instance.trips])
    times = np.array([t.travel_time_min for t in instance.trips])
    for sc in instance.scenarios:
        temps = trip_temperatures(instance, sc)
        tbar = np.array([reg.t_opt if ignore_temperature else temps[t.id] for t in instance.trips])
        if instance.trips:
            e = np.atleast_1d(trip_energy(lengths, f.mass_kg, times, tbar, reg))
            for t, v in zip(instance.trips, e):
                trips[sc.id, t.id] = float(v)
        dh_temp = reg.t_opt if ignore_temperature else _shifted_mean(sc.temp)
        for (a, b), d in sorted(instance.deadheads.dist_km.items()):
            dheads[sc.id, (a, b)] = deadhead_energy(d, f.mass_kg, f.deadhead_speed_kmh, dh_temp, reg)
    return ScenarioEnergies(trips, dheads)
