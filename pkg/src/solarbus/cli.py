"""Command line: ``solarbus run``, ``solarbus compare``, ``solarbus generate``."""
from __future__ import annotations

import argparse
import json
import sys

from .instance import generate_synthetic, save_instance
from .pipeline import EXIT_INVALID, EXIT_OK, RunConfig, compare_runs, run_pipeline


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="solarbus", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="schedule, size and write a charge plan")
    run.add_argument("--instance", help="instance JSON; omit to use a synthetic instance (--seed)")
    run.add_argument("--granularity", default="yearly",
                     choices=("weekly", "monthly", "quarterly", "yearly"),
                     help="scenario period for year-long CSV weather data")
    run.add_argument("--solver", default="benders", choices=("benders", "monolithic"))
    run.add_argument("--gap-tol", type=float, default=1e-6)
    run.add_argument("--max-iters", type=int, default=200)
    run.add_argument("--no-res", action="store_true", help="no panels or batteries")
    run.add_argument("--no-temperature", action="store_true",
                     help="drop the temperature term from trip energy")
    run.add_argument("--cluster", action="store_true",
                     help="let buses charge at a station in their stop's cluster")
    run.add_argument("--cluster-radius-m", type=float, default=500.0)
    run.add_argument("--out", default="run")
    run.add_argument("--seed", type=int)
    run.add_argument("--export-mps", action="store_true")
    run.add_argument("--trip-cutoff-min", type=int,
                     help="drop trips starting at or after this minute")
    run.add_argument("--trips", type=int, default=8, help="synthetic instance: number of trips")
    run.add_argument("--depots", type=int, default=1, help="synthetic instance: depots")
    run.add_argument("--scenarios", type=int, default=2, help="synthetic instance: scenarios")
    run.add_argument("--horizon", type=int, default=120, help="synthetic instance: minutes")

    cmp_ = sub.add_parser("compare", help="percentage cost deltas between two runs")
    cmp_.add_argument("run_a")
    cmp_.add_argument("run_b")

    gen = sub.add_parser("generate", help="write a synthetic instance JSON")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--trips", type=int, default=8)
    gen.add_argument("--depots", type=int, default=1)
    gen.add_argument("--scenarios", type=int, default=2)
    gen.add_argument("--horizon", type=int, default=120)
    gen.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        cfg = RunConfig(instance=args.instance, granularity=args.granularity, solver=args.solver,
                        gap_tol=args.gap_tol, max_iters=args.max_iters, no_res=args.no_res,
                        no_temperature=args.no_temperature, cluster=args.cluster,
                        cluster_radius_m=args.cluster_radius_m, out=args.out, seed=args.seed,
                        export_mps=args.export_mps, trip_cutoff_min=args.trip_cutoff_min,
                        n_trips=args.trips, n_depots=args.depots, n_scenarios=args.scenarios,
                        horizon_min=args.horizon)
        return run_pipeline(cfg).exit_code
    if args.command == "compare":
        try:
            report = compare_runs(args.run_a, args.run_b)
        except ValueError as exc:
            print(json.dumps({"error": str(exc)}), file=sys.stderr)
            return EXIT_INVALID
        print(json.dumps(report, indent=2, sort_keys=True))
        return EXIT_OK
    try:
        inst = generate_synthetic(args.seed, args.trips, args.depots, args.scenarios, args.horizon)
    except ValueError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_INVALID
    save_instance(inst, args.out)
    print(args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
