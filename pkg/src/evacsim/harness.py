"""Scenario files, experiment orchestration and CSV/JSON export.

A scenario is a JSON document (``.scn``) describing the building, the
agents, the integrator settings and where output goes.  ``run_experiment``
wires building -> flow fields -> scheduler -> dynamics -> metrics for the
requested schedule modes, using the same seed and initial placement for
each mode.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .building import (
    Building,
    BuildingMode,
    CellGrid,
    FloorPlan,
    StaircaseKind,
    find_port,
    make_floor_plan,
    make_unit_cell,
    replicate_unit_cell,
    unfold_staircase,
    validate_scenario,
    TARGET_KINDS,
    WALKABLE_KINDS,
)
from .dynamics import (
    AgentTemplate,
    DynamicsConfig,
    ForceParams,
    building_world,
    run_until_empty,
    spawn_agents,
    with_start_times,
)
from .flowfield import FlowField, compute_flow_field
from .metrics import Comparison, ForceTrace, RunSummary, compare_runs, summarize
from .scheduler import (
    Calibration,
    Schedule,
    ScheduleMode,
    build_schedule,
    calibrate_floor,
    compute_time_shift,
    continuity_inputs,
)

CSV_HEADER = ("time_s", "active", "avg_force_N", "peak_force_N", "evacuated")
FIELD_HEADER = ("x", "y", "vx", "vy", "distance")

Spread = float | tuple[float, float]


class ScenarioError(ValueError):
    """Scenario could not be parsed or failed validation; ``diagnostics`` lists every problem."""

    def __init__(self, message: str, diagnostics: Sequence[str] = ()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class FloorSpec(_Strict):
    """Generated rectangular floor, or explicit ``rows`` (north row first, ``# . E S A``).

    The arrival band defaults to the staircase width.
    """

    width: float = Field(12.0, gt=0)
    depth: float = Field(10.0, gt=0)
    exit_width: float = Field(1.5, gt=0)
    arrival_width: float | None = Field(None, gt=0)
    arrival_gap: float = Field(1.8, gt=0)
    rows: tuple[str, ...] | None = None


class StaircaseSpec(_Strict):
    kind: StaircaseKind = StaircaseKind.STANDARD
    length: float = Field(8.0, gt=0)
    width: float = Field(1.5, gt=0)


class BuildingSpec(_Strict):
    cell_size: float = Field(0.3, gt=0)
    floor: FloorSpec = FloorSpec()
    staircase: StaircaseSpec = StaircaseSpec()
    floor_count: int = Field(2, ge=2)
    mode: BuildingMode = BuildingMode.UNIT_CELL

    @model_validator(mode="after")
    def _unit_cell_has_two_floors(self):
        if self.mode == BuildingMode.UNIT_CELL and self.floor_count != 2:
            raise ValueError("floor_count must be 2 in unit_cell mode")
        return self


class AgentSpec(_Strict):
    count_per_floor: int = Field(50, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)
    mass: Spread = 80.0
    desired_speed: Spread = 1.5
    relaxation_time: Spread = 0.5
    radius: Spread = 0.3
    spawn_clearance: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _ranges_are_positive(self):
        for name in ("mass", "relaxation_time", "radius", "desired_speed"):
            v = getattr(self, name)
            lo, hi = v if isinstance(v, tuple) else (v, v)
            if lo > hi:
                raise ValueError(f"{name}: range low end exceeds high end")
            if lo < 0 or (lo == 0 and name != "desired_speed"):
                raise ValueError(f"{name} must be positive")
        return self


class ForceSpec(_Strict):
    social_strength: float = Field(2000.0, gt=0)
    social_range: float = Field(0.08, gt=0)
    body_stiffness: float = Field(1.2e5, gt=0)
    sliding_friction: float = Field(2.4e5, gt=0)
    interaction_cutoff: float = Field(2.0, gt=0)


class DynamicsSpec(_Strict):
    dt: float = Field(0.01, gt=0)
    t_max: float = Field(600.0, gt=0)
    sample_interval: float = Field(0.1, gt=0)
    stair_speed_factor: float = Field(1.0, gt=0)
    include_driving: bool = False
    workers: int = Field(1, ge=1)
    forces: ForceSpec = ForceSpec()


class ScheduleSpec(_Strict):
    mode: Literal["staggered", "simultaneous", "both"] = "both"


class FieldSpec(_Strict):
    r_vis: int = Field(20, ge=1)
    override: str | None = None  # CSV with x,y,vx,vy per floor cell, relative to the scenario file


class OutputSpec(_Strict):
    dir: str = "out"


class Scenario(_Strict):
    name: str = "scenario"
    description: str = ""
    building: BuildingSpec = BuildingSpec()
    agents: AgentSpec = AgentSpec()
    dynamics: DynamicsSpec = DynamicsSpec()
    schedule: ScheduleSpec = ScheduleSpec()
    field: FieldSpec = FieldSpec()
    output: OutputSpec = OutputSpec()

    # -- construction
    def floor_plan(self) -> FloorPlan:
        b = self.building
        f = b.floor
        count = self.agents.count_per_floor
        if f.rows is not None:
            grid = CellGrid.from_rows(f.rows, b.cell_size)
            band = find_port(grid, TARGET_KINDS, "outlet").width
            return FloorPlan(grid, band, count)
        arrival = f.arrival_width if f.arrival_width is not None else b.staircase.width
        return make_floor_plan(f.width, f.depth, f.exit_width, b.cell_size, arrival_width=arrival,
                               agent_count=count, arrival_gap=f.arrival_gap)

    def build(self) -> Building:
        b = self.building
        stair = unfold_staircase(b.staircase.kind, b.staircase.length, b.staircase.width, b.cell_size)
        unit = make_unit_cell(self.floor_plan(), stair)
        return unit if b.mode == BuildingMode.UNIT_CELL else replicate_unit_cell(unit, b.floor_count)

    def template(self) -> AgentTemplate:
        a = self.agents
        return AgentTemplate(a.mass, a.desired_speed, a.relaxation_time, a.radius)

    def dynamics_config(self) -> DynamicsConfig:
        d = self.dynamics
        return DynamicsConfig(
            dt=d.dt, t_max=d.t_max, sample_interval=d.sample_interval,
            params=ForceParams(**d.forces.model_dump()), template=self.template(),
            stair_speed_factor=d.stair_speed_factor, include_driving=d.include_driving,
            workers=d.workers, spawn_clearance=self.agents.spawn_clearance,
        )

    def with_overrides(self, **changes) -> "Scenario":
        """Copy with dotted-path overrides, e.g. ``{"agents.seed": 42}``; ``None`` values are skipped."""
        data = self.model_dump(mode="json")
        for path, value in changes.items():
            if value is None:
                continue
            node = data
            *parents, leaf = path.split(".")
            for key in parents:
                node = node[key]
            node[leaf] = value
        return parse_scenario(json.dumps(data), "command-line overrides")


def _format_errors(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        out.append(f"{loc}: {err['msg']}")
    return out


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}",
                            [f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    try:
        return Scenario.model_validate_json(text)
    except ValidationError as exc:
        diags = _format_errors(exc)
        raise ScenarioError(f"{source}: invalid scenario: " + "; ".join(diags), diags) from None


def load_scenario(path, check: bool = True) -> Scenario:
    """Read, default and (by default) validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read scenario {path}: {exc.strerror or exc}") from exc
    scenario = parse_scenario(text, str(path))
    if check:
        diags = check_scenario(scenario, path.parent)
        if diags:
            raise ScenarioError(f"{path}: scenario failed validation: " + "; ".join(diags), diags)
    return scenario


def dump_scenario(scenario: Scenario) -> str:
    return scenario.model_dump_json(indent=2) + "\n"


def bundled_scenarios() -> list[str]:
    root = resources.files("evacsim") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".scn"))


def bundled_scenario_path(name: str) -> Path:
    """Filesystem path of a scenario shipped with the package, e.g. ``standard_staircase.scn``."""
    if not name.endswith(".scn"):
        name += ".scn"
    path = Path(str(resources.files("evacsim") / "scenarios" / name))
    if not path.is_file():
        raise FileNotFoundError(f"no bundled scenario {name!r}; have {bundled_scenarios()}")
    return path


def check_scenario(scenario: Scenario, base_dir=None) -> list[str]:
    """Every problem that would stop ``scenario`` from running; empty when it is sound."""
    try:
        building = scenario.build()
    except ValueError as exc:
        return [f"building: {exc}"]
    template = scenario.template()
    diags = validate_scenario(building, template)
    diags += [f"dynamics.forces: {p}" for p in scenario.dynamics_config().params.check(template.max_radius)]
    if scenario.field.override is not None:
        try:
            load_field_override(_resolve(scenario.field.override, base_dir), building.floor_plan.grid)
        except (OSError, ValueError) as exc:
            diags.append(f"field.override: {exc}")
    return diags


def _resolve(path, base_dir) -> Path:
    p = Path(path)
    return p if p.is_absolute() or base_dir is None else Path(base_dir) / p


# -- field export / import

def export_field(field_: FlowField, path) -> None:
    """One row per cell: centre ``x,y`` in metres, the unit vector and the exit distance in cells."""
    w, h = field_.grid_dims
    s = field_.cell_size
    rows = []
    for iy in range(h):
        for ix in range(w):
            vx, vy = field_.vector(ix, iy)
            d = field_.distance[iy, ix]
            rows.append((f"{(ix + 0.5) * s:.6f}", f"{(iy + 0.5) * s:.6f}", f"{vx:.12g}", f"{vy:.12g}",
                         "inf" if math.isinf(d) else f"{d:.12g}"))
    _write_csv(path, FIELD_HEADER, rows)


def load_field_override(path, grid: CellGrid) -> FlowField:
    """Read an ``x,y,vx,vy`` file (as written by ``export_field``) onto ``grid``.

    Every walkable cell must be covered; extra columns such as ``distance``
    are ignored.
    """
    path = Path(path)
    vectors = np.zeros((grid.height_cells, grid.width_cells, 2))
    seen = np.zeros((grid.height_cells, grid.width_cells), dtype=bool)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"x", "y", "vx", "vy"} - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    x, y, vx, vy = (float(row[k]) for k in ("x", "y", "vx", "vy"))
                except (TypeError, ValueError):
                    raise ValueError(f"{path}:{lineno}: non-numeric value") from None
                ix, iy = grid.cell_of(x, y)
                if not grid.in_bounds(ix, iy):
                    raise ValueError(f"{path}:{lineno}: point ({x}, {y}) outside the floor")
                vectors[iy, ix] = (vx, vy)
                seen[iy, ix] = True
    except OSError as exc:
        raise OSError(f"cannot read field override {path}: {exc.strerror or exc}") from exc
    uncovered = grid.mask(WALKABLE_KINDS) & ~seen
    if np.any(uncovered):
        raise ValueError(f"{path}: {int(uncovered.sum())} walkable cells have no vector")
    return FlowField.from_vectors(grid, vectors)


# -- traces

def export_csv(trace: ForceTrace, path) -> None:
    rows = [(f"{s.time:.4f}", str(s.active), f"{s.avg_force:.6f}", f"{s.peak_force:.6f}", str(s.evacuated))
            for s in trace.samples]
    _write_csv(path, CSV_HEADER, rows)


def read_csv_trace(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def gnuplot_script(modes: Sequence[str]) -> str:
    """Average force per pedestrian against time for each run CSV in the same directory."""
    plots = ", \\\n     ".join(f"'{m}.csv' using 1:3 with lines title '{m}'" for m in modes)
    return (
        "set datafile separator ','\n"
        "set key top right\n"
        "set xlabel 'evacuation time (s)'\n"
        "set ylabel 'average force per pedestrian (N)'\n"
        "set grid\n"
        f"plot {plots}\n"
    )


# -- experiments

@dataclass
class RunRecord:
    schedule: Schedule
    trace: ForceTrace
    summary: RunSummary


@dataclass
class Experiment:
    scenario: Scenario
    seed: int
    runs: dict[str, RunRecord] = field(default_factory=dict)
    calibration: Calibration | None = None
    comparison: Comparison | None = None
    comparison_error: str | None = None

    @property
    def completed(self) -> bool:
        return all(r.summary.completed for r in self.runs.values())

    def report(self) -> dict:
        out = {"scenario": self.scenario.name, "seed": self.seed, "runs": {}}
        if self.calibration is not None:
            c = self.calibration
            out["calibration"] = {"t_f": c.t_f, "v_f": c.v_f, "crossings": c.crossings, "no_samples": c.no_samples}
        for mode, rec in self.runs.items():
            s = rec.summary
            out["runs"][mode] = {
                "schedule": {"floor_start_times": list(rec.schedule.floor_start_times),
                             "delta_t": rec.schedule.delta_t, "clamped": rec.schedule.clamped},
                "total_evacuation_time": round(s.total_evacuation_time, 6),
                "peak_avg_force": s.peak_avg_force,
                "time_of_peak": round(s.time_of_peak, 6),
                "completed": s.completed,
                "anomaly_counts": dict(sorted(s.anomaly_counts.items())),
            }
        if self.comparison is not None:
            out["comparison"] = comparison_dict(self.comparison)
        elif self.comparison_error is not None:
            out["comparison_error"] = self.comparison_error
        return out


def comparison_dict(c: Comparison) -> dict:
    return {"delta_time": round(c.delta_time, 6), "delta_peak_force": c.delta_peak_force,
            "force_reduction_ratio": c.force_reduction_ratio, "status": c.status,
            "pattern_holds": c.pattern_holds}


def _modes(modes) -> list[str]:
    if isinstance(modes, str):
        modes = ["staggered", "simultaneous"] if modes == "both" else [modes]
    out = [ScheduleMode(m).value for m in modes]
    # staggered first so file order and report order never depend on the caller
    return sorted(set(out), key=lambda m: m != "staggered")


def region_fields(scenario: Scenario, building: Building, base_dir=None) -> list[FlowField]:
    """One field per region, computed once per distinct grid; the floor may be overridden."""
    r_vis = scenario.field.r_vis
    floor_grid = building.floor_plan.grid
    cache: dict = {}
    if scenario.field.override is not None:
        cache[floor_grid] = load_field_override(_resolve(scenario.field.override, base_dir), floor_grid)
    fields = []
    for reg in building.regions():
        if reg.grid not in cache:
            cache[reg.grid] = compute_flow_field(reg.grid, r_vis)
        fields.append(cache[reg.grid])
    return fields


def run_experiment(scenario: Scenario, modes="both", out_dir=None, *, base_dir=None,
                   calibration: Calibration | None = None, on_sample=None) -> Experiment:
    """Run the requested schedule modes on identical initial conditions.

    Staggered: calibrate one floor, derive the time shift, start floor ``n``
    at ``n * dt``.  Simultaneous: every floor starts at 0.  With ``out_dir``
    set, writes ``<mode>.csv`` per run, ``report.json``, ``plot.gp`` and,
    when both modes ran, ``comparison.json``.
    """
    modes = _modes(modes)
    diags = check_scenario(scenario, base_dir)
    if diags:
        raise ScenarioError("scenario failed validation: " + "; ".join(diags), diags)
    building = scenario.build()
    cfg = scenario.dynamics_config()
    seed = scenario.agents.seed
    count = scenario.agents.count_per_floor
    fields = region_fields(scenario, building, base_dir)
    regions = building.regions()

    agents = []
    for floor in range(building.floor_count):
        agents += spawn_agents(building.floors[floor], count, seed, cfg.template, region=floor,
                               first_id=floor * count, clearance=cfg.spawn_clearance)

    exp = Experiment(scenario, seed)
    for mode in modes:
        if mode == "staggered":
            if calibration is None:
                calibration = calibrate_floor(building, cfg, seed, count, fields[0])
            delta_t, clamped = compute_time_shift(continuity_inputs(building, calibration))
            exp.calibration = calibration
        else:
            delta_t, clamped = 0.0, False
        schedule = build_schedule(delta_t, building.floor_count, mode, clamped)
        starts = list(schedule.floor_start_times) + [0.0] * (len(regions) - building.floor_count)
        run_agents = with_start_times(agents, starts)
        world = building_world(building, run_agents, cfg.params, stair_speed_factor=cfg.stair_speed_factor,
                               fields=fields, rng_seed=seed, workers=cfg.workers)
        world, trace, _ = run_until_empty(world, cfg.dt, cfg.t_max, cfg.sample_interval, cfg.include_driving)
        exp.runs[mode] = RunRecord(schedule, trace, summarize(trace, world.anomaly_counts()))
        if on_sample is not None:
            on_sample(mode, exp.runs[mode])

    if {"staggered", "simultaneous"} <= exp.runs.keys():
        try:
            exp.comparison = compare_runs(exp.runs["staggered"].summary, exp.runs["simultaneous"].summary)
        except ValueError as exc:
            exp.comparison_error = str(exc)
    if out_dir is not None:
        write_outputs(exp, out_dir)
    return exp


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_outputs(exp: Experiment, out_dir) -> None:
    out = Path(out_dir)
    for mode, rec in exp.runs.items():
        export_csv(rec.trace, out / f"{mode}.csv")
    if exp.comparison is not None:
        _write_text(out / "comparison.json", json.dumps(comparison_dict(exp.comparison), indent=2, sort_keys=True) + "\n")
    _write_text(out / "report.json", json.dumps(exp.report(), indent=2, sort_keys=True) + "\n")
    _write_text(out / "plot.gp", gnuplot_script(list(exp.runs)))
