"""Build rotations for a small synthetic timetable and list where buses charge.

Run: python3 demos/01_scheduling.py
"""
from solarbus import (compute_charging_opportunities, compute_scenario_energies,
                      concurrent_scheduler, generate_synthetic)

inst = generate_synthetic(seed=7, n_trips=10, n_depots=2, n_scenarios=1, horizon_min=240)
# a small battery forces charging between trips
en = compute_scenario_energies(inst)
inst = inst.with_fleet(rho_min=5.0, rho_max=5.0 + 1.8 * max(en.trip_energy.values()))
print(f"{len(inst.trips)} trips, battery window {inst.fleet.rho_min:.1f}-{inst.fleet.rho_max:.1f} kWh")

rotations, stations = concurrent_scheduler(inst, en)
print("charging stations:", ", ".join(sorted(stations)))
for rot in rotations[0]:
    kwh = sum(en.trip(0, t) for t in rot.trips)
    print(f"  bus {rot.bus_id} from {rot.depot}: {' -> '.join(rot.trips)}  ({kwh:.1f} kWh of trips)")

opp = compute_charging_opportunities(rotations, stations, inst)
print("\ncharging windows (minutes of the day):")
for (sid, b, k), mins in sorted(opp.T.items()):
    kind = "overnight" if k == opp.tau[sid, b] else "layover"
    print(f"  bus {b} window {k} at {opp.loc[sid, b, k]:>4}: {len(mins):4d} min ({kind})")
