"""Collapse a year of hourly weather and prices into representative days.

Run: python3 demos/04_seasonal_scenarios.py
"""
import numpy as np

from solarbus import aggregate_scenarios

rng = np.random.default_rng(3)
hours = np.arange(365 * 24)
day, hour = hours // 24, hours % 24
season = np.cos(2 * np.pi * (day - 172) / 365)          # 1 at midsummer
sun = np.clip(np.sin(np.pi * (hour - 6) / 12), 0, None)  # daylight between 6 and 18
raw = {
    "gti": {"D": (0.55 + 0.35 * season) * sun * rng.uniform(0.6, 1.0, hours.size)},
    "temp": 12 + 10 * season + 5 * np.sin(np.pi * (hour - 9) / 12) + rng.normal(0, 1.5, hours.size),
    "tariff": np.where((hour >= 17) & (hour < 21), 0.28, 0.09),
}
for granularity in ("yearly", "quarterly", "monthly", "weekly"):
    scen = aggregate_scenarios(raw, granularity)
    sun_kwh = [sc.gti["D"].sum() / 60 for sc in scen]
    temps = [sc.temp.mean() for sc in scen]
    print(f"{granularity:>9}: {len(scen):2d} days, each weight {scen[0].probability:.4f}; "
          f"daily sun {min(sun_kwh):.2f}-{max(sun_kwh):.2f} kWh/m2, "
          f"mean temperature {min(temps):5.1f}-{max(temps):5.1f} C")
