from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evacsim.building import CellGrid, CellKind, WALKABLE_KINDS
from evacsim.flowfield import (
    FlowField,
    compute_distance_field,
    compute_flow_field,
    field_lookup,
    greedy_walk,
    ray_cast,
    touched_cells,
)
from evacsim.harness import bundled_scenario_path, load_scenario

from conftest import random_map


def exact_touched(a, b) -> set[tuple[int, int]]:
    """Cells whose closed square meets the closed segment between two cell centres.

    Liang-Barsky clipping in exact rationals, so corner grazes are decided
    without rounding.
    """
    (x0, y0), (x1, y1) = a, b
    px, py = Fraction(2 * x0 + 1, 2), Fraction(2 * y0 + 1, 2)
    dx, dy = Fraction(x1 - x0), Fraction(y1 - y0)
    out = set()
    for ix in range(min(x0, x1) - 1, max(x0, x1) + 2):
        for iy in range(min(y0, y1) - 1, max(y0, y1) + 2):
            lo, hi = Fraction(0), Fraction(1)
            ok = True
            for p, d, cmin, cmax in ((px, dx, ix, ix + 1), (py, dy, iy, iy + 1)):
                if d == 0:
                    if not cmin <= p <= cmax:
                        ok = False
                    continue
                t0, t1 = (cmin - p) / d, (cmax - p) / d
                if t0 > t1:
                    t0, t1 = t1, t0
                lo, hi = max(lo, t0), min(hi, t1)
            if ok and lo <= hi:
                out.add((ix, iy))
    return out


def _open_grid(n: int, exit_cell) -> CellGrid:
    """Wall-free ``n`` x ``n`` floor with one exit cell."""
    cells = np.full((n, n), int(CellKind.FREE), dtype=np.int8)
    cells[exit_cell[1], exit_cell[0]] = CellKind.EXIT
    return CellGrid(cells, 0.3)


# -- ray casting

def test_ray_along_free_row_is_clear(open_room):
    assert ray_cast(open_room, (1, 4), (10, 4))


def test_ray_blocked_by_obstacle_between():
    rows = ["#########",
            "#...#...#",
            "#.......E",
            "#########"]
    grid = CellGrid.from_rows(rows, 0.3)
    assert not ray_cast(grid, (1, 2), (7, 2))
    assert ray_cast(grid, (1, 1), (7, 1))


def test_diagonal_grazing_a_corner_is_blocked():
    rows = ["#####",
            "#...#",
            "#...#",
            "#.#.E",
            "#####"]
    grid = CellGrid.from_rows(rows, 0.3)
    # centre (1.5, 1.5) -> (2.5, 2.5) passes exactly through (2, 2), a corner of the obstacle at (2, 1)
    assert (2, 1) in exact_touched((1, 1), (2, 2))
    assert not ray_cast(grid, (1, 1), (2, 2))
    assert not ray_cast(grid, (1, 1), (3, 3))
    # a ray along the row above stays half a cell clear of the obstacle
    assert (2, 1) not in exact_touched((1, 2), (3, 2))
    assert ray_cast(grid, (1, 2), (3, 2))


@settings(max_examples=300, deadline=None)
@given(st.tuples(st.integers(0, 12), st.integers(0, 12)), st.tuples(st.integers(0, 12), st.integers(0, 12)))
def test_touched_cells_match_exact_oracle(a, b):
    assert set(touched_cells(a, b)) == exact_touched(a, b)


def test_touched_cells_symmetric_and_ordered():
    path = touched_cells((0, 0), (5, 3))
    assert path[0] == (0, 0) and path[-1] == (5, 3)
    assert set(path) == set(touched_cells((5, 3), (0, 0)))


def test_ray_outside_grid_is_an_error(open_room):
    with pytest.raises(ValueError):
        ray_cast(open_room, (0, 0), (99, 0))


# -- distance field

def test_distance_next_to_exit_is_one(open_room):
    d = compute_distance_field(open_room)
    assert d[4, 11] == 0.0
    assert d[4, 10] == 1.0


def test_distance_across_empty_room_corner_to_corner():
    grid = _open_grid(5, (0, 0))
    d = compute_distance_field(grid)
    assert d[4, 4] == pytest.approx(4 * math.sqrt(2))


def test_walled_in_cell_is_unreachable():
    rows = ["#######",
            "#.#...#",
            "###...E",
            "#######"]
    d = compute_distance_field(CellGrid.from_rows(rows, 0.3))
    assert math.isinf(d[2, 1])
    assert np.isfinite(d[1, 3])


def test_no_corner_cutting():
    rows = ["#####",
            "#.#.#",
            "##..E",
            "#####"]
    d = compute_distance_field(CellGrid.from_rows(rows, 0.3))
    assert math.isinf(d[2, 1])  # the only way out is a diagonal squeezed between two walls


# -- flow field

def test_open_room_points_straight_at_the_exit():
    exit_cell = (0, 0)
    grid = _open_grid(12, exit_cell)
    field = compute_flow_field(grid, r_vis=20)
    for iy in range(12):
        for ix in range(12):
            if (ix, iy) == exit_cell:
                continue
            want = np.array([exit_cell[0] - ix, exit_cell[1] - iy], dtype=float)
            want /= np.hypot(*want)
            assert np.max(np.abs(np.array(field.vector(ix, iy)) - want)) < 1e-9


def test_vectors_are_unit_on_reachable_cells(open_room):
    field = compute_flow_field(open_room)
    walk = open_room.mask(WALKABLE_KINDS)
    norms = np.hypot(field.vectors[..., 0], field.vectors[..., 1])
    assert np.allclose(norms[walk], 1.0)
    assert np.all(norms[~open_room.passable] == 0.0)


def test_dead_end_pocket_points_back_out_of_the_mouth():
    scenario = load_scenario(bundled_scenario_path("dead_end"))
    grid = scenario.build().floor_plan.grid
    field = compute_flow_field(grid, scenario.field.r_vis)
    # pocket interior: between the arms, east of the mouth, west of the back wall
    pocket = [(ix, iy) for ix in range(7, 15) for iy in range(7, 13)]
    for ix, iy in pocket:
        assert grid.kind(ix, iy) == CellKind.FREE
        vx, _ = field.vector(ix, iy)
        assert vx < 0, (ix, iy)  # west, out through the mouth, although the door lies east


def test_dead_end_greedy_walks_escape():
    scenario = load_scenario(bundled_scenario_path("dead_end"))
    grid = scenario.build().floor_plan.grid
    field = compute_flow_field(grid, scenario.field.r_vis)
    for iy, ix in zip(*np.nonzero(grid.mask(WALKABLE_KINDS))):
        path = greedy_walk(field, (int(ix), int(iy)))
        assert field.distance[path[-1][1], path[-1][0]] == 0.0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_greedy_steps_strictly_descend(seed):
    grid = random_map(np.random.default_rng(seed))
    field = compute_flow_field(grid)
    d = field.distance
    walk = grid.mask(WALKABLE_KINDS) & np.isfinite(d)
    for iy, ix in zip(*np.nonzero(walk)):
        path = greedy_walk(field, (int(ix), int(iy)), max_steps=1)
        (x1, y1) = path[-1]
        assert d[y1, x1] < d[iy, ix]


def test_field_lookup_cell_centre_and_boundaries(open_room):
    field = compute_flow_field(open_room)
    s = open_room.cell_size
    assert field_lookup(field, ((3 + 0.5) * s, (4 + 0.5) * s)) == (field.vector(3, 4), False)
    # lower edges belong to the cell, upper edges to the next one
    assert field_lookup(field, (3 * s, 4 * s))[0] == field.vector(3, 4)
    assert field_lookup(field, (4 * s - 1e-9, 4 * s + 1e-9))[0] == field.vector(3, 4)


def test_field_lookup_on_obstacle_flags_anomaly(open_room):
    field = compute_flow_field(open_room)
    assert field_lookup(field, (0.1, 0.1)) == ((0.0, 0.0), True)
    assert field_lookup(field, (-1.0, 0.5)) == ((0.0, 0.0), True)


def test_from_vectors_normalises_and_masks(open_room):
    vec = np.zeros((open_room.height_cells, open_room.width_cells, 2))
    vec[..., 0] = 3.0
    field = FlowField.from_vectors(open_room, vec)
    assert field.vector(4, 4) == (1.0, 0.0)
    assert field.vector(0, 0) == (0.0, 0.0)
    with pytest.raises(ValueError):
        FlowField.from_vectors(open_room, vec[:-1])
