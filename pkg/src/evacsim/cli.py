"""``evacsim`` command line.

Exit codes: 0 success, 1 scenario validation failure, 2 run incomplete or
calibration failed, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    Scenario,
    ScenarioError,
    bundled_scenario_path,
    bundled_scenarios,
    export_field,
    gnuplot_script,
    load_scenario,
    region_fields,
)
from .scheduler import CalibrationError

EXIT_OK, EXIT_INVALID, EXIT_INCOMPLETE, EXIT_IO = 0, 1, 2, 3


def _scenario_path(arg: str) -> Path:
    """A file path, or the name of a bundled scenario such as ``standard_staircase``."""
    p = Path(arg)
    if p.exists():
        return p
    try:
        return bundled_scenario_path(arg)
    except FileNotFoundError:
        return p  # let the loader report the missing file


def _load(arg: str) -> tuple[Scenario, Path]:
    path = _scenario_path(arg)
    return load_scenario(path), path.parent


def _err(msg: str):
    print(f"evacsim: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    from .harness import run_experiment

    scenario, base = _load(args.scenario)
    scenario = scenario.with_overrides(**{"agents.seed": args.seed, "dynamics.dt": args.dt,
                                          "dynamics.t_max": args.tmax})
    out = Path(args.out) if args.out else Path(scenario.output.dir)
    mode = args.mode or scenario.schedule.mode
    exp = run_experiment(scenario, mode, out, base_dir=base)
    for name, rec in exp.runs.items():
        s = rec.summary
        state = "completed" if s.completed else "INCOMPLETE"
        print(f"{name:>12}: {state} in {s.total_evacuation_time:.1f} s, "
              f"peak average force {s.peak_avg_force:.1f} N at {s.time_of_peak:.1f} s")
    if exp.calibration is not None:
        c = exp.calibration
        print(f"  calibration: t_f={c.t_f:.2f} s, v_f={c.v_f:.3f} m/s, "
              f"time shift {exp.runs['staggered'].schedule.delta_t:.2f} s")
    if exp.comparison is not None:
        c = exp.comparison
        print(f"  comparison: {c.status} (time {c.delta_time:+.1f} s, "
              f"peak force {c.delta_peak_force:+.1f} N, reduction {100 * c.force_reduction_ratio:.1f}%)")
    print(f"  wrote {out}")
    return EXIT_OK if exp.completed else EXIT_INCOMPLETE


def cmd_field(args) -> int:
    scenario, base = _load(args.scenario)
    building = scenario.build()
    field = region_fields(scenario, building, base)[0]
    export_field(field, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario, _ = _load(args.scenario)
    print(f"{scenario.name}: ok")
    return EXIT_OK


def cmd_plot(args) -> int:
    out = Path(args.dir)
    modes = args.modes or [m for m in ("staggered", "simultaneous") if (out / f"{m}.csv").exists()]
    if not modes:
        raise FileNotFoundError(f"no staggered.csv or simultaneous.csv in {out}")
    script = gnuplot_script(modes)
    if args.stdout:
        sys.stdout.write(script)
    else:
        target = out / "plot.gp"
        try:
            target.write_text(script)
        except OSError as exc:
            raise OSError(f"cannot write {target}: {exc.strerror or exc}") from exc
        print(f"wrote {target}; run `gnuplot -p {target.name}` inside {out}")
    return EXIT_OK


def cmd_schema(args) -> int:
    print(json.dumps(Scenario.model_json_schema(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_list(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evacsim", description="Staggered-evacuation social-force simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run staggered and/or simultaneous evacuations")
    run.add_argument("--scenario", required=True, help="scenario file or bundled scenario name")
    run.add_argument("--mode", choices=["staggered", "simultaneous", "both"], help="default: the scenario's")
    run.add_argument("--seed", type=int, help="override the scenario seed (unsigned 64-bit)")
    run.add_argument("--dt", type=float, help="time step, s")
    run.add_argument("--tmax", type=float, help="time limit per run, s")
    run.add_argument("--out", help="output directory (default: the scenario's output.dir)")
    run.set_defaults(func=cmd_run)

    fld = sub.add_parser("field", help="export the floor flow field as CSV")
    fld.add_argument("--scenario", required=True)
    fld.add_argument("--out", required=True, help="CSV file to write")
    fld.set_defaults(func=cmd_field)

    val = sub.add_parser("validate", help="check a scenario without running it")
    val.add_argument("--scenario", required=True)
    val.set_defaults(func=cmd_validate)

    plot = sub.add_parser("plot", help="write a gnuplot script for the CSVs in a run directory")
    plot.add_argument("--dir", required=True, help="directory written by `evacsim run`")
    plot.add_argument("--modes", nargs="+", choices=["staggered", "simultaneous"])
    plot.add_argument("--stdout", action="store_true", help="print the script instead of writing plot.gp")
    plot.set_defaults(func=cmd_plot)

    sch = sub.add_parser("schema", help="print the scenario JSON schema")
    sch.set_defaults(func=cmd_schema)

    lst = sub.add_parser("list", help="list bundled scenarios")
    lst.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        _err(str(exc).split(": ", 1)[0] + ": scenario rejected")
        for d in exc.diagnostics:
            print(f"  {d}", file=sys.stderr)
        return EXIT_INVALID
    except CalibrationError as exc:
        _err(str(exc))
        return EXIT_INCOMPLETE
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
