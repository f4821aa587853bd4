"""Cost of the same fleet with and without depot solar and storage, and with
the temperature effect switched off.

Run: python3 demos/02_solar_savings.py
"""
import tempfile
from pathlib import Path

from solarbus import RunConfig, compare_runs, run_pipeline

out = Path(tempfile.mkdtemp(prefix="solarbus-demo-"))
# a whole day, so the panels see the midday sun
shape = dict(seed=12, n_trips=6, n_scenarios=1, horizon_min=1440, solver="monolithic")
runs = {}
for name, extra in [("full", {}), ("grid only", {"no_res": True}),
                    ("no temperature", {"no_temperature": True})]:
    print(f"== {name}")
    res = run_pipeline(RunConfig(out=str(out / name.replace(" ", "_")), **shape, **extra))
    assert res.exit_code == 0
    runs[name] = res.out_dir
    print()

report = compare_runs(runs["full"], runs["grid only"])
print(f"solar and storage save {report['delta_pct']['total']:.2f}% of the grid-only daily cost")
report = compare_runs(runs["no temperature"], runs["full"])
print(f"ignoring temperature understates the daily cost by {report['delta_pct']['total']:.2f}%")
print("artifacts in", out)
