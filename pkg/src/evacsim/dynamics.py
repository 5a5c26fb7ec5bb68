"""Social-force dynamics: agents, forces, integration and region hand-offs.

Each agent relaxes towards ``v0 * e`` where ``e`` comes from the flow field
of the region it stands in, and is pushed by exponential social repulsion
plus body/friction contact terms from other agents and from walls.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels as K
from .building import (
    CellGrid,
    CellKind,
    FloorPlan,
    Region,
    arrival_depth,
    arrival_offsets,
    disc_area,
)
from .flowfield import FlowField, compute_flow_field, field_lookup
from .metrics import SAMPLE_INTERVAL, ForceTrace, record_sample

SPEED_CLAMP_FACTOR = 1.5


@dataclass(frozen=True)
class ForceParams:
    social_strength: float = 2000.0  # A, N
    social_range: float = 0.08  # B, m
    body_stiffness: float = 1.2e5  # k, N/m
    sliding_friction: float = 2.4e5  # kappa, kg/(m s)
    interaction_cutoff: float = 2.0  # m

    def check(self, max_radius: float = 0.3) -> list[str]:
        problems = [f"{name} must be positive" for name, v in self.__dict__.items() if not v > 0]
        need = 2 * max_radius + 5 * self.social_range
        if self.interaction_cutoff < need:
            problems.append(f"interaction_cutoff {self.interaction_cutoff:g} m below 2*radius + 5*B = {need:g} m")
        return problems


@dataclass
class Agent:
    id: int
    position: tuple[float, float]
    region: int = 0
    velocity: tuple[float, float] = (0.0, 0.0)
    mass: float = 80.0
    desired_speed: float = 1.5
    relaxation_time: float = 0.5
    radius: float = 0.3
    start_time: float = 0.0
    evacuated_at: float | None = None

    def check(self) -> list[str]:
        problems = []
        if not self.mass > 0:
            problems.append(f"agent {self.id}: mass must be positive")
        if not self.relaxation_time > 0:
            problems.append(f"agent {self.id}: relaxation_time must be positive")
        if not self.radius > 0:
            problems.append(f"agent {self.id}: radius must be positive")
        if not self.desired_speed >= 0:
            problems.append(f"agent {self.id}: desired_speed must be nonnegative")
        return problems


@dataclass(frozen=True)
class AgentTemplate:
    """Physical parameters for spawned agents; a ``(lo, hi)`` pair draws uniformly."""

    mass: float | tuple[float, float] = 80.0
    desired_speed: float | tuple[float, float] = 1.5
    relaxation_time: float | tuple[float, float] = 0.5
    radius: float | tuple[float, float] = 0.3

    @property
    def max_radius(self) -> float:
        r = self.radius
        return float(max(r)) if isinstance(r, (tuple, list)) else float(r)

    def draw(self, rng: np.random.Generator) -> dict:
        out = {}
        for name in ("mass", "desired_speed", "relaxation_time", "radius"):
            v = getattr(self, name)
            out[name] = float(rng.uniform(v[0], v[1])) if isinstance(v, (tuple, list)) else float(v)
        return out


@dataclass(frozen=True)
class DynamicsConfig:
    """Integration and agent settings shared by calibration and full runs."""

    dt: float = 0.01
    t_max: float = 600.0
    sample_interval: float = SAMPLE_INTERVAL
    params: ForceParams = ForceParams()
    template: AgentTemplate = AgentTemplate()
    stair_speed_factor: float = 1.0
    include_driving: bool = False
    workers: int = 1
    spawn_clearance: float = 0.0  # extra empty space around spawned agents, m


class OvercrowdingError(RuntimeError):
    pass


def driving_force(agent: Agent, field_direction) -> tuple[float, float]:
    """``m (v0 e - v) / tau``; a zero ``field_direction`` leaves pure damping."""
    ex, ey = field_direction
    m, tau, v0 = agent.mass, agent.relaxation_time, agent.desired_speed
    vx, vy = agent.velocity
    return m * (v0 * ex - vx) / tau, m * (v0 * ey - vy) / tau


def agent_agent_force(agent_i: Agent, agent_j: Agent, params: ForceParams = ForceParams()):
    """Force exerted on ``agent_i`` by ``agent_j``."""
    fx, fy, _ = K.pair_force(
        float(agent_i.position[0]), float(agent_i.position[1]),
        float(agent_i.velocity[0]), float(agent_i.velocity[1]), float(agent_i.radius), int(agent_i.id),
        float(agent_j.position[0]), float(agent_j.position[1]),
        float(agent_j.velocity[0]), float(agent_j.velocity[1]), float(agent_j.radius), int(agent_j.id),
        params.social_strength, params.social_range, params.body_stiffness, params.sliding_friction,
    )
    return fx, fy


def wall_segments(grid: CellGrid) -> np.ndarray:
    """Obstacle faces that border open cells, merged into maximal straight runs.

    Rows are ``(x0, y0, x1, y1, nx, ny)`` with the normal pointing into the
    open side.
    """
    s = grid.cell_size
    passable = grid.passable
    h, w = passable.shape
    runs: dict[tuple, list[int]] = {}
    for iy in range(h):
        for ix in range(w):
            if passable[iy, ix]:
                continue
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                jx, jy = ix + dx, iy + dy
                if not (0 <= jx < w and 0 <= jy < h) or not passable[jy, jx]:
                    continue
                if dx != 0:
                    line = ix + 1 if dx > 0 else ix
                    runs.setdefault(("v", line, dx), []).append(iy)
                else:
                    line = iy + 1 if dy > 0 else iy
                    runs.setdefault(("h", line, dy), []).append(ix)
    segs = []
    for (orient, line, sign), idx in sorted(runs.items()):
        idx = sorted(idx)
        start = prev = idx[0]
        for v in idx[1:] + [None]:
            if v is not None and v == prev + 1:
                prev = v
                continue
            if orient == "v":
                segs.append((line * s, start * s, line * s, (prev + 1) * s, float(sign), 0.0))
            else:
                segs.append((start * s, line * s, (prev + 1) * s, line * s, 0.0, float(sign)))
            if v is not None:
                start = prev = v
    return np.array(segs, dtype=float).reshape(-1, 6)


def agent_wall_force(agent: Agent, grid: CellGrid, params: ForceParams = ForceParams()):
    """Total wall repulsion on ``agent``; returns ``(force, inside_obstacle)``."""
    segs = wall_segments(grid)
    kinds = np.ascontiguousarray(grid.cells, dtype=np.int8).ravel()
    fx, fy, inside = K.wall_force(
        float(agent.position[0]), float(agent.position[1]),
        float(agent.velocity[0]), float(agent.velocity[1]), float(agent.radius),
        kinds, grid.width_cells, grid.height_cells, grid.cell_size, segs, 0, len(segs),
        params.social_strength, params.social_range, params.body_stiffness, params.sliding_friction,
        params.interaction_cutoff,
    )
    return (fx, fy), bool(inside)


def _distance_to_obstacles(grid: CellGrid, x: float, y: float, reach: float) -> float:
    s = grid.cell_size
    best = math.inf
    span = int(math.ceil(reach / s)) + 1
    cx, cy = grid.cell_of(x, y)
    for iy in range(cy - span, cy + span + 1):
        for ix in range(cx - span, cx + span + 1):
            if grid.in_bounds(ix, iy) and grid.kind(ix, iy) != CellKind.OBSTACLE:
                continue
            qx = min(max(x, ix * s), (ix + 1) * s)
            qy = min(max(y, iy * s), (iy + 1) * s)
            best = min(best, math.hypot(x - qx, y - qy))
    return best


def spawn_agents(
    floor_plan: FloorPlan,
    count: int,
    rng_seed: int,
    agent_template: AgentTemplate = AgentTemplate(),
    *,
    region: int = 0,
    start_time: float = 0.0,
    first_id: int = 0,
    clearance: float = 0.0,
) -> list[Agent]:
    """Place ``count`` agents uniformly on Free cells by rejection sampling.

    Agents overlap neither each other nor any obstacle, and keep at least
    ``clearance`` metres of empty space to both.  The stream is keyed
    on ``(rng_seed, region)`` so floors of one run get distinct placements.
    """
    if count <= 0:
        return []
    grid = floor_plan.grid
    s = grid.cell_size
    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed), int(region)]))
    ys, xs = np.nonzero(grid.cells == CellKind.FREE)
    if len(xs) == 0:
        raise OvercrowdingError("floor has no free cells")
    placed: list[Agent] = []
    pos = np.empty((count, 2))
    rad = np.empty(count)
    limit = 10_000 * count
    for n in range(count):
        params = agent_template.draw(rng)
        r = params["radius"]
        misses = 0
        while True:
            c = rng.integers(len(xs))
            x = (xs[c] + rng.random()) * s
            y = (ys[c] + rng.random()) * s
            ok = _distance_to_obstacles(grid, x, y, r + clearance) > r + clearance
            if ok and n:
                d = np.hypot(pos[:n, 0] - x, pos[:n, 1] - y)
                ok = bool(np.all(d > rad[:n] + r + clearance))
            if ok:
                break
            misses += 1
            if misses > limit:
                raise OvercrowdingError(
                    f"could not place agent {n + 1} of {count} after {limit} attempts "
                    f"({count * disc_area(r):.1f} m^2 needed)"
                )
        pos[n] = (x, y)
        rad[n] = r
        placed.append(Agent(id=first_id + n, position=(float(x), float(y)), region=region,
                            start_time=float(start_time), **params))
    return placed


@dataclass
class NeighborIndex:
    """Uniform spatial hash over active agents, keyed by (region, cell)."""

    cell: float
    nx: int
    ny: int
    keys_sorted: np.ndarray
    order: np.ndarray

    @classmethod
    def build(cls, pos, region, state, cell, nx, ny) -> "NeighborIndex":
        keys = K.hash_keys(pos, region, state, cell, nx, ny)
        live = np.nonzero(keys >= 0)[0]
        order = live[np.argsort(keys[live], kind="stable")]
        return cls(cell, nx, ny, np.ascontiguousarray(keys[order]), np.ascontiguousarray(order))


@dataclass
class StepResult:
    driving: np.ndarray  # (N, 2)
    repulsive: np.ndarray  # (N, 2) agent + wall terms
    active: np.ndarray  # bool mask of agents the forces were evaluated for


@dataclass
class TransferEvent:
    time: float
    agent: int
    from_region: int
    to_region: int | None  # None: left the building
    speed: float


class WorldState:
    """Mutable simulation state; owned by one driver between steps."""

    def __init__(
        self,
        regions: Sequence[Region],
        agents: Sequence[Agent],
        params: ForceParams = ForceParams(),
        fields: Sequence[FlowField] | None = None,
        *,
        speed_factors: Sequence[float] | None = None,
        rng_seed: int = 0,
        building=None,
        workers: int = 1,
    ):
        self.regions = list(regions)
        self.building = building
        self.params = params
        self.rng_seed = rng_seed
        self.workers = max(1, int(workers))
        sizes = {r.grid.cell_size for r in self.regions}
        if len(sizes) != 1:
            raise ValueError("all regions must share one cell size")
        self.cell_size = sizes.pop()
        if fields is None:
            cache: dict = {}
            fields = []
            for r in self.regions:
                if r.grid not in cache:
                    cache[r.grid] = compute_flow_field(r.grid)
                fields.append(cache[r.grid])
        self.fields = list(fields)
        sf = [1.0] * len(self.regions) if speed_factors is None else list(speed_factors)
        self.speed_factors = np.asarray(sf, dtype=float)

        agents = sorted(agents, key=lambda a: a.id)
        n = len(agents)
        self.ids = np.array([a.id for a in agents], dtype=np.int64)
        self.pos = np.array([a.position for a in agents], dtype=float).reshape(n, 2)
        self.vel = np.array([a.velocity for a in agents], dtype=float).reshape(n, 2)
        self.region = np.array([a.region for a in agents], dtype=np.int64)
        self.mass = np.array([a.mass for a in agents], dtype=float)
        self.v0 = np.array([a.desired_speed for a in agents], dtype=float)
        self.tau = np.array([a.relaxation_time for a in agents], dtype=float)
        self.radius = np.array([a.radius for a in agents], dtype=float)
        self.start_time = np.array([a.start_time for a in agents], dtype=float)
        self.evacuated_at = np.array(
            [np.nan if a.evacuated_at is None else a.evacuated_at for a in agents], dtype=float)
        self.state = np.where(np.isnan(self.evacuated_at), K.INERT, K.EVACUATED).astype(np.int8)
        self.anomaly_hits = np.zeros((n, K.N_ANOMALY), dtype=np.int64)
        self.extra_anomalies: Counter = Counter()
        self.events: list[TransferEvent] = []
        self.sim_time = 0.0
        self._t0 = 0.0
        self._steps = 0
        self._dt = None
        self._pack()
        self._activate()
        self.neighbor_index = self._build_index()

    # -- packed region tables for the kernels
    def _pack(self):
        kinds, vecs, segs = [], [], []
        kind_off, seg_off = [0], [0]
        for reg, fld in zip(self.regions, self.fields):
            kinds.append(np.ascontiguousarray(reg.grid.cells, dtype=np.int8).ravel())
            vecs.append(np.asarray(fld.vectors, dtype=float).reshape(-1, 2))
            kind_off.append(kind_off[-1] + kinds[-1].size)
            sg = wall_segments(reg.grid)
            segs.append(sg)
            seg_off.append(seg_off[-1] + len(sg))
        self._kinds = np.concatenate(kinds)
        self._vecs = np.ascontiguousarray(np.concatenate(vecs))
        self._segs = np.ascontiguousarray(np.concatenate(segs))
        self._kind_off = np.array(kind_off[:-1], dtype=np.int64)
        self._seg_off = np.array(seg_off, dtype=np.int64)
        self._rw = np.array([r.grid.width_cells for r in self.regions], dtype=np.int64)
        self._rh = np.array([r.grid.height_cells for r in self.regions], dtype=np.int64)
        hc = self.params.interaction_cutoff
        self._hx = int(math.ceil(self._rw.max() * self.cell_size / hc)) + 1
        self._hy = int(math.ceil(self._rh.max() * self.cell_size / hc)) + 1

    def _build_index(self) -> NeighborIndex:
        return NeighborIndex.build(self.pos, self.region, self.state,
                                   self.params.interaction_cutoff, self._hx, self._hy)

    def _activate(self):
        wake = (self.state == K.INERT) & (self.start_time <= self.sim_time)
        self.state[wake] = K.ACTIVE

    # -- bookkeeping
    @property
    def spawned(self) -> int:
        return len(self.ids)

    def counts(self) -> tuple[int, int, int]:
        """(active, inert, evacuated)."""
        return (int(np.count_nonzero(self.state == K.ACTIVE)),
                int(np.count_nonzero(self.state == K.INERT)),
                int(np.count_nonzero(self.state == K.EVACUATED)))

    @property
    def done(self) -> bool:
        return bool(np.all(self.state == K.EVACUATED))

    def anomaly_counts(self) -> dict[str, int]:
        totals = self.anomaly_hits.sum(axis=0)
        out = {name: int(v) for name, v in zip(K.ANOMALY_NAMES, totals)}
        out.update(self.extra_anomalies)
        return out

    @property
    def agents(self) -> list[Agent]:
        out = []
        for i in range(self.spawned):
            ev = self.evacuated_at[i]
            out.append(Agent(
                id=int(self.ids[i]), position=(float(self.pos[i, 0]), float(self.pos[i, 1])),
                region=int(self.region[i]), velocity=(float(self.vel[i, 0]), float(self.vel[i, 1])),
                mass=float(self.mass[i]), desired_speed=float(self.v0[i]),
                relaxation_time=float(self.tau[i]), radius=float(self.radius[i]),
                start_time=float(self.start_time[i]), evacuated_at=None if np.isnan(ev) else float(ev),
            ))
        return out

    # -- forces
    def _kernel_args(self):
        p = self.params
        return (self.pos, self.vel, self.region, self.state, self.ids, self.mass, self.v0, self.tau,
                self.radius, self.speed_factors, self._kinds, self._kind_off, self._rw, self._rh,
                self.cell_size, self._vecs, self._segs, self._seg_off,
                p.social_strength, p.social_range, p.body_stiffness, p.sliding_friction,
                p.interaction_cutoff)

    def compute_forces(self, workers: int | None = None) -> StepResult:
        n = self.spawned
        drive = np.zeros((n, 2))
        rep = np.zeros((n, 2))
        idx = self.neighbor_index
        args = self._kernel_args()
        tail = (idx.keys_sorted, idx.order, idx.cell, idx.nx, idx.ny, drive, rep)
        workers = self.workers if workers is None else max(1, int(workers))
        if workers == 1 or n < 2:
            K.compute_forces(0, n, *args, *tail, self.anomaly_hits)
        else:
            bounds = np.linspace(0, n, workers + 1).astype(int)
            # per-chunk anomaly tallies keep the shared counter free of races
            hits = [np.zeros_like(self.anomaly_hits) for _ in range(workers)]
            pool = _pool(workers)
            futs = [pool.submit(K.compute_forces, int(bounds[w]), int(bounds[w + 1]), *args, *tail, hits[w])
                    for w in range(workers)]
            for f in futs:
                f.result()
            for h in hits:
                self.anomaly_hits += h
        return StepResult(drive, rep, self.state == K.ACTIVE)

    def compute_forces_brute(self) -> StepResult:
        n = self.spawned
        drive = np.zeros((n, 2))
        rep = np.zeros((n, 2))
        scratch = np.zeros_like(self.anomaly_hits)
        K.compute_forces_brute(*self._kernel_args(), drive, rep, scratch)
        return StepResult(drive, rep, self.state == K.ACTIVE)

    # -- hand-offs
    def transfer_agent(self, i: int, from_region: int, to_region: int | None) -> bool:
        """Move agent ``i`` across a port; returns False if the arrival band is full.

        The lateral offset across the exit is carried over to the arrival
        band.  If that spot crowds an agent already there, the nearest spot along
        the band with room to spare is used instead.
        """
        src = self.regions[from_region]
        speed = float(math.hypot(*self.vel[i]))
        if to_region is None:
            self.state[i] = K.EVACUATED
            self.evacuated_at[i] = self.sim_time
            self.vel[i] = 0.0
            self.events.append(TransferEvent(self.sim_time, int(self.ids[i]), from_region, None, speed))
            return True
        dest = self.regions[to_region]
        inlet = dest.inlet
        r = float(self.radius[i])
        offset = min(max(src.outlet.lateral_offset(*self.pos[i]), 0.0), src.outlet.width)
        lo, hi = arrival_offsets(inlet.width, r)
        offset = min(max(offset, lo), hi)
        depth = arrival_depth(r, dest.grid.cell_size)
        others = np.nonzero((self.state == K.ACTIVE) & (self.region == to_region))[0]
        gap = 2.0 * self.params.social_range
        spot = None
        # nearest spot along the band with some room around it, starting from the mapped offset
        for k in range(int((hi - lo) / (0.5 * r)) + 2):
            for cand in ((offset,) if k == 0 else (offset - 0.5 * r * k, offset + 0.5 * r * k)):
                if not lo - 1e-12 <= cand <= hi + 1e-12:
                    continue
                x, y = inlet.point(cand, depth)
                d = np.hypot(self.pos[others, 0] - x, self.pos[others, 1] - y)
                if not np.any(d < self.radius[others] + r + gap):
                    spot = (x, y)
                    break
            if spot is not None:
                break
        if spot is None:
            return False
        x, y = spot
        (ex, ey), bad = field_lookup(self.fields[to_region], (x, y))
        if bad or (ex == 0.0 and ey == 0.0):
            ex, ey = inlet.direction
        self.pos[i] = (x, y)
        self.vel[i] = (speed * ex, speed * ey)
        self.region[i] = to_region
        self.events.append(TransferEvent(self.sim_time, int(self.ids[i]), from_region, to_region, speed))
        return True

    def _advance_clock(self, dt: float):
        if self._dt != dt:
            self._t0, self._steps, self._dt = self.sim_time, 0, dt
        self._steps += 1
        self.sim_time = self._t0 + self._steps * dt


_POOLS: dict[int, ThreadPoolExecutor] = {}


def _pool(workers: int) -> ThreadPoolExecutor:
    if workers not in _POOLS:
        _POOLS[workers] = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="evacsim")
    return _POOLS[workers]


def step(world: WorldState, dt: float, forces: StepResult | None = None) -> StepResult:
    """Advance ``world`` by ``dt`` in place and return the forces used.

    Agents whose centre lands in an Exit/StairEntry cell are handed to the
    downstream region (or leave the building).  A hand-off whose arrival
    band is full waits: the agent is held at rest and retried next step.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if forces is None:
        forces = world.compute_forces()
    handoff = np.zeros(world.spawned, dtype=np.bool_)
    K.integrate(world.pos, world.vel, world.region, world.state, world.mass, world.v0,
                world.speed_factors, forces.driving, forces.repulsive, float(dt), SPEED_CLAMP_FACTOR,
                world._kinds, world._kind_off, world._rw, world._rh, world.cell_size, handoff,
                world.anomaly_hits)
    world._advance_clock(dt)
    for i in np.nonzero(handoff)[0]:
        src = int(world.region[i])
        if not world.transfer_agent(int(i), src, world.regions[src].downstream):
            world.extra_anomalies["deferred_transfer"] += 1
    world._activate()
    world.neighbor_index = world._build_index()
    return forces


def floor_regions(plan: FloorPlan) -> list[Region]:
    """A lone floor whose exit leads straight outside."""
    return [Region("floor0", plan.grid, plan.outlet, plan.inlet, None, 0)]


def building_world(building, agents, params=ForceParams(), *, stair_speed_factor=1.0,
                   fields=None, rng_seed=0, workers=1) -> WorldState:
    regions = building.regions()
    factors = [1.0 if r.floor is not None else stair_speed_factor for r in regions]
    return WorldState(regions, agents, params, fields, speed_factors=factors, rng_seed=rng_seed,
                      building=building, workers=workers)


def with_start_times(agents: Sequence[Agent], start_by_region: Sequence[float]) -> list[Agent]:
    return [replace(a, start_time=float(start_by_region[a.region])) for a in agents]


def run_until_empty(
    world: WorldState,
    dt: float = 0.01,
    t_max: float = 600.0,
    sample_interval: float = SAMPLE_INTERVAL,
    include_driving: bool = False,
) -> tuple[WorldState, ForceTrace, bool]:
    """Step until every agent has left or ``t_max`` is reached.

    Samples are taken every ``sample_interval`` (rounded to whole steps) from
    the forces evaluated on the state at that instant.  The final sample is
    the first one at which everyone is out.
    """
    if not dt > 0 or not t_max > 0:
        raise ValueError("dt and t_max must be positive")
    per = max(1, int(round(sample_interval / dt)))
    trace = ForceTrace(per * dt, world.spawned)
    k = 0
    while True:
        at_sample = k % per == 0
        if world.done and at_sample:
            trace.append(record_sample(world, None, include_driving))
            break
        if world.sim_time >= t_max - 1e-9:
            break
        forces = world.compute_forces()
        if at_sample:
            trace.append(record_sample(world, forces, include_driving))
        step(world, dt, forces)
        k += 1
    return world, trace, world.done
