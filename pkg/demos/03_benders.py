"""Decomposition against the single large LP on a three-scenario instance.

Run: python3 demos/03_benders.py
"""
import time

from solarbus import (benders_solve, build_csp_lp, compute_charging_opportunities,
                      compute_scenario_energies, concurrent_scheduler, generate_synthetic,
                      solve_monolithic)

inst = generate_synthetic(seed=5, n_trips=10, n_depots=1, n_scenarios=3, horizon_min=240)
en = compute_scenario_energies(inst)
rots, J = concurrent_scheduler(inst, en)
csp = build_csp_lp(inst, rots, compute_charging_opportunities(rots, J, inst), en)
print(f"LP: {csp.lp.n_rows} rows x {csp.lp.n_cols} columns, {len(csp.locations)} locations")

t0 = time.perf_counter()
mono = solve_monolithic(csp)
t1 = time.perf_counter()
plan, log = benders_solve(csp, gap_tol=1e-8)
t2 = time.perf_counter()

print("\niter        lower        upper  feas  opt")
for r in log.records:
    print(f"{r.iteration:4d} {r.lower_bound:12.6f} {r.upper_bound:12.6f} {r.cuts_feas:5d} {r.cuts_opt:4d}")
print(f"\nmonolithic {mono.objective:.8f} in {t1 - t0:.2f} s")
print(f"benders    {plan.objective:.8f} in {t2 - t1:.2f} s ({log.status})")
for j in plan.locations:
    print(f"  {j:>4}: grid {plan.z[j]:7.2f} kW  panels {plan.a[j]:7.2f} m2  battery {plan.c[j]:7.2f} kWh")
