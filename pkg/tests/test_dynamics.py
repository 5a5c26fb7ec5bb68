from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evacsim.building import (
    CellGrid,
    CellKind,
    FloorPlan,
    StaircaseKind,
    make_floor_plan,
    make_unit_cell,
    replicate_unit_cell,
    unfold_staircase,
)
from evacsim.dynamics import (
    Agent,
    AgentTemplate,
    ForceParams,
    OvercrowdingError,
    WorldState,
    agent_agent_force,
    agent_wall_force,
    building_world,
    driving_force,
    floor_regions,
    run_until_empty,
    spawn_agents,
    step,
)
from evacsim.flowfield import FlowField

from conftest import room


def inv_e() -> float:
    """e^-1 from its alternating series in exact rationals."""
    total, term = Fraction(0), Fraction(1)
    for k in range(30):
        total += term if k % 2 == 0 else -term
        term /= k + 1
    return float(total)


A_OVER_E = 2000.0 * inv_e()  # 735.758...


def _world(grid: CellGrid, agents, fields=None, **kw) -> WorldState:
    plan = FloorPlan(grid, 0.0, len(agents))
    return WorldState(floor_regions(plan), agents, ForceParams(), fields, **kw)


def _corridor(n: int = 60, rows: int = 5) -> CellGrid:
    """Wall-free strip with an exit cell at the east end of the middle row."""
    cells = np.full((rows, n), int(CellKind.FREE), dtype=np.int8)
    cells[rows // 2, n - 1] = CellKind.EXIT
    return CellGrid(cells, 0.3)


# -- single-term forces

def test_driving_force_from_rest():
    a = Agent(0, (0.0, 0.0), mass=80, desired_speed=1.5, relaxation_time=0.5)
    assert driving_force(a, (1.0, 0.0)) == pytest.approx((240.0, 0.0))


def test_driving_force_vanishes_at_desired_velocity():
    a = Agent(0, (0.0, 0.0), velocity=(1.5, 0.0))
    assert driving_force(a, (1.0, 0.0)) == pytest.approx((0.0, 0.0))


def test_driving_force_turning():
    a = Agent(0, (0.0, 0.0), velocity=(1.5, 0.0))
    assert driving_force(a, (0.0, 1.0)) == pytest.approx((-240.0, 240.0))


def test_pair_force_at_touching_distance():
    i, j = Agent(0, (0.0, 0.0)), Agent(1, (0.6, 0.0))
    fx, fy = agent_agent_force(i, j)
    assert (fx, fy) == pytest.approx((-2000.0, 0.0), abs=1e-9)


def test_pair_force_one_range_apart():
    i, j = Agent(0, (0.0, 0.0)), Agent(1, (0.0, 0.68))
    fx, fy = agent_agent_force(i, j)
    assert math.hypot(fx, fy) == pytest.approx(A_OVER_E, rel=1e-12)
    assert fy < 0 and fx == pytest.approx(0.0, abs=1e-12)


def test_pair_force_contact_adds_body_and_friction():
    i = Agent(0, (0.0, 0.0), velocity=(0.0, 1.0))
    j = Agent(1, (0.5, 0.0))
    fx, fy = agent_agent_force(i, j)
    g = 0.1
    assert fx == pytest.approx(-(2000.0 * math.exp(g / 0.08) + 1.2e5 * g))
    # sliding friction opposes the tangential relative velocity
    assert fy == pytest.approx(-2.4e5 * g * 1.0)


finite = st.floats(-3.0, 3.0, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(finite, finite, finite, finite, finite, finite, finite, finite,
       st.floats(0.2, 0.35), st.floats(0.2, 0.35))
def test_pair_forces_are_antisymmetric(x0, y0, x1, y1, u0, w0, u1, w1, r0, r1):
    i = Agent(0, (x0, y0), velocity=(u0, w0), radius=r0)
    j = Agent(1, (x1, y1), velocity=(u1, w1), radius=r1)
    fij = np.array(agent_agent_force(i, j))
    fji = np.array(agent_agent_force(j, i))
    scale = np.max(np.abs(fij))
    assert np.all(np.abs(fij + fji) <= 1e-9 * max(scale, 1e-300))


def test_coincident_centres_push_apart_deterministically():
    i, j = Agent(3, (1.0, 1.0)), Agent(7, (1.0, 1.0))
    fij, fji = np.array(agent_agent_force(i, j)), np.array(agent_agent_force(j, i))
    assert np.all(np.isfinite(fij)) and np.linalg.norm(fij) > 0
    assert np.allclose(fij, -fji)


def test_wall_force_at_touching_distance():
    grid = room(40, 40, exits=[(39, 20)])
    a = Agent(0, (6.0, 0.3 + 0.3))
    (fx, fy), inside = agent_wall_force(a, grid)
    assert not inside
    assert (fx, fy) == pytest.approx((0.0, 2000.0), abs=1e-9)


def test_wall_force_one_range_away():
    grid = room(40, 40, exits=[(39, 20)])
    a = Agent(0, (0.3 + 0.3 + 0.08, 6.0))
    (fx, fy), _ = agent_wall_force(a, grid)
    assert fx == pytest.approx(A_OVER_E, rel=1e-12)
    assert fy == pytest.approx(0.0, abs=1e-9)


def test_wall_force_beyond_cutoff_is_zero():
    grid = room(40, 40, exits=[(39, 20)])
    (fx, fy), _ = agent_wall_force(Agent(0, (6.0, 6.0)), grid)
    assert (fx, fy) == (0.0, 0.0)


def test_wall_force_flags_body_inside_obstacle():
    grid = room(10, 10, exits=[(9, 5)])
    _, inside = agent_wall_force(Agent(0, (0.15, 1.5)), grid)
    assert inside


def test_params_check_catches_short_cutoff():
    assert ForceParams().check(0.3) == []
    assert ForceParams(interaction_cutoff=0.5).check(0.3)


# -- integration

def test_relaxation_follows_closed_form():
    grid = _corridor()
    agent = Agent(0, (0.45, 0.75), mass=80, desired_speed=1.5, relaxation_time=0.5)
    world = _world(grid, [agent])
    dt, tau, v0 = 0.01, 0.5, 1.5
    for n in range(1, int(round(5 * tau / dt)) + 1):
        step(world, dt)
        speed = math.hypot(*world.vel[0])
        exact = v0 * (1.0 - math.exp(-n * dt / tau))
        assert abs(speed - exact) <= 0.01 * v0
    assert math.hypot(*world.vel[0]) == pytest.approx(v0, rel=0.01)
    assert world.vel[0, 1] == 0.0


def test_step_with_nobody_active_only_advances_time(open_room):
    agent = Agent(0, (1.5, 1.5), start_time=10.0)
    world = _world(open_room, [agent])
    step(world, 0.01)
    assert world.sim_time == pytest.approx(0.01)
    assert tuple(world.pos[0]) == (1.5, 1.5)


def test_overlapping_agents_separate():
    grid = room(20, 20, exits=[(19, 10)])
    zero = FlowField.from_vectors(grid, np.zeros((20, 20, 2)))
    a, b = Agent(0, (3.0, 3.0)), Agent(1, (3.4, 3.2))
    world = _world(grid, [a, b], fields=[zero])
    step(world, 0.01)
    n = np.array([0.4, 0.2]) / math.hypot(0.4, 0.2)
    assert np.dot(world.vel[0], -n) > 0
    assert np.dot(world.vel[1], n) > 0


def test_step_rejects_bad_dt(open_room):
    world = _world(open_room, [Agent(0, (1.5, 1.5))])
    with pytest.raises(ValueError):
        step(world, 0.0)


# -- hand-offs

@pytest.fixture
def tower():
    plan = make_floor_plan(6.0, 4.5, 1.2, arrival_width=1.2, agent_count=0, arrival_gap=0.6)
    unit = make_unit_cell(plan, unfold_staircase(StaircaseKind.LADDER_SHORT, 6.0, 1.2))
    return replicate_unit_cell(unit, 5)


def test_transfer_keeps_lateral_offset_and_speed(tower):
    regions = tower.regions()
    outlet = regions[3].outlet
    x, y = outlet.point(0.4, 0.15)
    agent = Agent(0, (x, y), region=3, velocity=(1.2, 0.5))
    world = building_world(tower, [agent])
    dest = regions[3].downstream
    assert world.transfer_agent(0, 3, dest)
    assert world.region[0] == dest
    inlet = regions[dest].inlet
    assert inlet.lateral_offset(*world.pos[0]) == pytest.approx(0.4, abs=1e-12)
    assert abs(math.hypot(*world.vel[0]) - 1.3) < 1e-12
    ev = world.events[-1]
    assert (ev.from_region, ev.to_region) == (3, dest)


def test_transfer_moves_aside_for_an_occupied_spot():
    plan = make_floor_plan(6.0, 4.5, 1.2, arrival_width=1.8, arrival_gap=0.6)
    wide = make_unit_cell(plan, unfold_staircase(StaircaseKind.LADDER_SHORT, 6.0, 1.8))
    regions = wide.regions()
    inlet = regions[2].inlet
    sitter = Agent(0, inlet.point(0.4, 0.55), region=2)
    mover = Agent(1, regions[1].outlet.point(0.4, 0.15), region=1, velocity=(1.0, 0.0))
    world = building_world(wide, [sitter, mover])
    assert world.transfer_agent(1, 1, 2)
    gap = math.hypot(*(world.pos[1] - world.pos[0]))
    assert gap >= 0.6 + 2 * 0.08 - 1e-12
    lo, hi = 0.4, 1.4
    assert lo <= inlet.lateral_offset(*world.pos[1]) <= hi


def test_transfer_waits_when_the_band_is_full(tower):
    regions = tower.regions()
    dest = regions[3].downstream
    sitter = Agent(0, regions[dest].inlet.point(0.6, 0.4), region=dest)
    start = regions[3].outlet.point(0.6, 0.15)
    mover = Agent(1, start, region=3, velocity=(1.0, 0.0))
    world = building_world(tower, [sitter, mover])
    assert not world.transfer_agent(1, 3, dest)
    assert world.region[1] == 3
    assert tuple(world.pos[1]) == start


def test_leaving_the_building_records_time(tower):
    regions = tower.regions()
    x, y = regions[0].outlet.point(0.6, 0.15)
    world = building_world(tower, [Agent(0, (x, y), region=0, velocity=(1.0, 0.0))])
    world.sim_time = 12.5
    assert world.transfer_agent(0, 0, None)
    assert world.agents[0].evacuated_at == 12.5
    assert world.counts() == (0, 0, 1)
    forces = world.compute_forces()
    assert not forces.active[0] and np.all(forces.repulsive[0] == 0.0)


# -- spawning

def test_spawn_zero_agents():
    plan = make_floor_plan(6.0, 4.5, 1.2)
    assert spawn_agents(plan, 0, 1) == []


def test_spawn_is_deterministic_and_non_overlapping():
    plan = make_floor_plan(6.0, 4.5, 1.2)
    template = AgentTemplate(radius=(0.25, 0.3), mass=(60.0, 90.0))
    a = spawn_agents(plan, 25, 7, template)
    b = spawn_agents(plan, 25, 7, template)
    assert [x.position for x in a] == [x.position for x in b]
    assert [x.mass for x in a] == [x.mass for x in b]
    for i in range(len(a)):
        for j in range(i + 1, len(a)):
            d = math.dist(a[i].position, a[j].position)
            assert d > a[i].radius + a[j].radius
    c = spawn_agents(plan, 25, 7, template, region=1)
    assert [x.position for x in a] != [x.position for x in c]


def test_spawn_keeps_clearance():
    plan = make_floor_plan(6.0, 4.5, 1.2)
    agents = spawn_agents(plan, 15, 3, clearance=0.2)
    for i, p in enumerate(agents):
        for q in agents[i + 1:]:
            assert math.dist(p.position, q.position) > p.radius + q.radius + 0.2


def test_spawn_overcrowded_raises():
    plan = make_floor_plan(1.5, 1.5, 0.6)
    with pytest.raises(OvercrowdingError):
        spawn_agents(plan, 40, 0)


# -- runs

def _exit_room() -> CellGrid:
    return room(30, 12, exits=[(29, iy) for iy in range(4, 8)])


def test_single_agent_three_metres_from_exit():
    grid = _exit_room()
    face = 29 * 0.3
    world = _world(grid, [Agent(0, (face - 3.0, 1.8))])
    world, trace, done = run_until_empty(world, 0.01, 30.0)
    assert done
    t = world.agents[0].evacuated_at
    # 1-D relaxation trajectory x(t) = v0 (t - tau (1 - e^{-t/tau})) reaches 3 m at about 2.5 s
    assert 2.0 <= t <= 3.0
    assert trace.samples[-1].evacuated == 1


def test_empty_world_finishes_immediately(open_room):
    world, trace, done = run_until_empty(_world(open_room, []), 0.01, 10.0)
    assert done and len(trace) == 1
    assert trace.samples[0].time == 0.0 and trace.samples[0].empty


def test_run_reports_incomplete_at_t_max():
    world = _world(_exit_room(), [Agent(0, (1.0, 1.8))])
    world, trace, done = run_until_empty(world, 0.01, 1.0)
    assert not done
    assert trace.samples[-1].evacuated == 0


def _crowd_world(seed: int, workers: int = 1) -> WorldState:
    plan = make_floor_plan(6.0, 4.5, 1.2)
    agents = spawn_agents(plan, 30, seed)
    return WorldState(floor_regions(plan), agents, ForceParams(), workers=workers)


def test_identical_runs_are_bitwise_identical():
    traces = []
    for _ in range(2):
        _, trace, _ = run_until_empty(_crowd_world(5), 0.01, 8.0)
        traces.append([(s.time, s.active, s.avg_force, s.peak_force, s.evacuated) for s in trace.samples])
    assert traces[0] == traces[1]


def test_worker_count_does_not_change_results():
    one = _crowd_world(11, workers=1)
    four = _crowd_world(11, workers=4)
    for _ in range(200):
        f1, f4 = one.compute_forces(), four.compute_forces()
        assert np.array_equal(f1.repulsive, f4.repulsive)
        assert np.array_equal(f1.driving, f4.driving)
        step(one, 0.01, f1)
        step(four, 0.01, f4)
    assert np.array_equal(one.pos, four.pos)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 50))
def test_spatial_hash_matches_brute_force(seed, n):
    plan = make_floor_plan(6.0, 4.5, 1.2)
    rng = np.random.default_rng(seed)
    agents = [Agent(i, (float(rng.uniform(0.3, 6.3)), float(rng.uniform(0.3, 4.8))),
                    velocity=(float(rng.normal()), float(rng.normal()))) for i in range(n)]
    world = WorldState(floor_regions(plan), agents, ForceParams())
    fast, slow = world.compute_forces(), world.compute_forces_brute()
    assert np.array_equal(fast.repulsive, slow.repulsive)
    assert np.array_equal(fast.driving, slow.driving)


def test_conservation_through_a_run():
    world = _crowd_world(2)
    _, trace, _ = run_until_empty(world, 0.01, 60.0)
    for s in trace.samples:
        assert s.active + s.inert + s.evacuated == trace.spawned
