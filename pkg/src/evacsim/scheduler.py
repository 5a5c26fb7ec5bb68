"""Continuity-equation start schedule for staggered floor evacuation.

Flux through the floor exit equals flux down the staircase,
``v_f * c_f = v_s * c_s``, so a staircase of length ``l_s`` is crossed in
``t_s = l_s / v_s``.  Starting the next floor ``dt = t_f - t_s`` after the
previous one keeps the density on the staircase constant.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .building import Building
from .dynamics import Agent, DynamicsConfig, WorldState, floor_regions, run_until_empty, spawn_agents
from .flowfield import FlowField


class DomainError(ValueError):
    pass


class CalibrationError(RuntimeError):
    pass


class ScheduleMode(str, enum.Enum):
    STAGGERED = "staggered"
    SIMULTANEOUS = "simultaneous"


class NarrowStaircaseWarning(UserWarning):
    """The staircase is narrower than the floor exit, so the continuity relation speeds agents up."""


def _positive(**values):
    for name, v in values.items():
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v!r}")


def staircase_speed(v_f: float, c_f: float, c_s: float) -> float:
    """Speed on the staircase that carries the same flux as the floor exit."""
    _positive(v_f=v_f, c_f=c_f, c_s=c_s)
    if c_s < c_f:
        warnings.warn(f"staircase width {float(c_s):g} m below exit width {float(c_f):g} m", NarrowStaircaseWarning,
                      stacklevel=2)
    return v_f * c_f / c_s


def staircase_transit_time(l_s: float, v_s: float) -> float:
    if not l_s >= 0:
        raise DomainError(f"l_s must be nonnegative, got {l_s!r}")
    _positive(v_s=v_s)
    return l_s / v_s


@dataclass(frozen=True)
class ContinuityInputs:
    t_f: float  # floor clear time, s
    l_s: float  # staircase length, m
    c_s: float  # staircase width, m
    c_f: float  # floor exit width, m
    v_f: float  # speed at the floor exit, m/s

    def check(self):
        _positive(l_s=self.l_s, c_s=self.c_s, c_f=self.c_f, v_f=self.v_f)
        if not self.t_f >= 0:
            raise DomainError(f"t_f must be nonnegative, got {self.t_f!r}")


def compute_time_shift(inputs: ContinuityInputs) -> tuple[float, bool]:
    """``(max(raw, 0), raw < 0)`` with ``raw = t_f - l_s c_s / (v_f c_f)``."""
    inputs.check()
    raw = inputs.t_f - (inputs.l_s * inputs.c_s) / (inputs.v_f * inputs.c_f)
    return (0.0, True) if raw < 0 else (raw, False)


@dataclass(frozen=True)
class Schedule:
    floor_start_times: tuple[float, ...]  # bottom floor first
    delta_t: float
    clamped: bool = False
    mode: ScheduleMode = ScheduleMode.STAGGERED


def build_schedule(delta_t: float, floor_count: int, mode: ScheduleMode | str, clamped: bool = False) -> Schedule:
    """Floor ``n`` starts at ``n * delta_t`` (staggered) or at 0 (simultaneous)."""
    mode = ScheduleMode(mode)
    if not delta_t >= 0:
        raise DomainError(f"delta_t must be nonnegative, got {delta_t!r}")
    if floor_count < 2:
        raise DomainError(f"floor_count must be at least 2, got {floor_count}")
    if mode is ScheduleMode.SIMULTANEOUS:
        starts = (0.0,) * floor_count
    else:
        starts = tuple(n * float(delta_t) for n in range(floor_count))
    return Schedule(starts, float(delta_t), clamped, mode)


@dataclass(frozen=True)
class Calibration:
    t_f: float
    v_f: float
    crossings: int
    no_samples: bool = False


def calibrate_floor(building: Building, config: DynamicsConfig = DynamicsConfig(), rng_seed: int = 0,
                    agent_count: int | None = None, field: FlowField | None = None,
                    agents: Sequence[Agent] | None = None) -> Calibration:
    """Measure ``t_f`` and ``v_f`` by evacuating one floor on its own.

    ``t_f`` is when the last agent crosses the floor exit and ``v_f`` the
    mean speed of agents as they cross it.  ``agents`` replaces the random
    placement with explicit starting positions.
    """
    plan = building.floor_plan
    if agents is not None:
        agent_count = len(agents)
    count = plan.initial_agent_count if agent_count is None else agent_count
    if count == 0:
        v0 = config.template.desired_speed
        v0 = float(np.mean(v0)) if isinstance(v0, (tuple, list)) else float(v0)
        return Calibration(0.0, v0, 0, True)
    if agents is None:
        agents = spawn_agents(plan, count, rng_seed, config.template, clearance=config.spawn_clearance)
    world = WorldState(floor_regions(plan), agents, config.params, None if field is None else [field],
                       workers=config.workers)
    world, _, done = run_until_empty(world, config.dt, config.t_max, config.sample_interval)
    if not done:
        active, inert, _ = world.counts()
        raise CalibrationError(f"single-floor calibration incomplete at t_max={config.t_max:g} s "
                               f"({active + inert} of {count} agents still inside)")
    speeds = [e.speed for e in world.events if e.to_region is None]
    return Calibration(float(max(e.time for e in world.events)), float(np.mean(speeds)), len(speeds))


def continuity_inputs(building: Building, calibration: Calibration) -> ContinuityInputs:
    stair = building.staircase
    return ContinuityInputs(calibration.t_f, stair.length_ls, stair.width_cs,
                            building.floor_plan.exit_width_cf, calibration.v_f)
