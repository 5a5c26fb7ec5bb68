"""Building geometry: floor grids, unfolded staircases and the two-floor unit cell.

Coordinates are metres with x pointing east and y pointing north.  Grid
cells are indexed ``cells[iy, ix]`` with row 0 at the south edge; cell
``(ix, iy)`` covers ``[ix*s, (ix+1)*s) x [iy*s, (iy+1)*s)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class CellKind(enum.IntEnum):
    OBSTACLE = 0
    FREE = 1
    EXIT = 2
    STAIR_ENTRY = 3  # hand-off band: agents entering it leave the region
    STAIR_EXIT = 4  # arrival band: agents handed over from upstream appear here


CHAR_TO_KIND = {
    "#": CellKind.OBSTACLE,
    ".": CellKind.FREE,
    "E": CellKind.EXIT,
    "S": CellKind.STAIR_ENTRY,
    "A": CellKind.STAIR_EXIT,
}
KIND_TO_CHAR = {v: k for k, v in CHAR_TO_KIND.items()}

TARGET_KINDS = (CellKind.EXIT, CellKind.STAIR_ENTRY)
WALKABLE_KINDS = (CellKind.FREE, CellKind.STAIR_EXIT)


class StaircaseKind(str, enum.Enum):
    LADDER_SHORT = "ladder_short"
    LADDER_LONG = "ladder_long"
    STANDARD = "standard"
    HELICAL = "helical"


class BuildingMode(str, enum.Enum):
    UNIT_CELL = "unit_cell"
    FULL_STACK = "full_stack"


HELICAL_SWEEP = 1.5 * math.pi


@dataclass(frozen=True, eq=False)
class CellGrid:
    cells: np.ndarray
    cell_size: float

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int8, copy=True)
        if cells.ndim != 2:
            raise ValueError("cells must be a 2-D array")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "cell_size", float(self.cell_size))

    @classmethod
    def from_rows(cls, rows: Sequence[str], cell_size: float) -> "CellGrid":
        """Build a grid from text rows; ``rows[0]`` is the northernmost row."""
        if not rows:
            raise ValueError("grid needs at least one row")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("grid rows must all have the same length")
        try:
            data = [[int(CHAR_TO_KIND[c]) for c in row] for row in reversed(rows)]
        except KeyError as exc:
            raise ValueError(f"unknown cell character {exc.args[0]!r}") from None
        return cls(np.array(data, dtype=np.int8), cell_size)

    def to_rows(self) -> list[str]:
        return ["".join(KIND_TO_CHAR[CellKind(int(k))] for k in row) for row in self.cells[::-1]]

    @property
    def width_cells(self) -> int:
        return int(self.cells.shape[1])

    @property
    def height_cells(self) -> int:
        return int(self.cells.shape[0])

    @property
    def extent(self) -> tuple[float, float]:
        return self.width_cells * self.cell_size, self.height_cells * self.cell_size

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width_cells and 0 <= iy < self.height_cells

    def kind(self, ix: int, iy: int) -> CellKind:
        return CellKind(int(self.cells[iy, ix]))

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.cell_size)), int(math.floor(y / self.cell_size))

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (ix + 0.5) * self.cell_size, (iy + 0.5) * self.cell_size

    def mask(self, kinds: Iterable[CellKind]) -> np.ndarray:
        return np.isin(self.cells, [int(k) for k in kinds])

    @property
    def passable(self) -> np.ndarray:
        return self.cells != CellKind.OBSTACLE

    def count(self, kinds: Iterable[CellKind]) -> int:
        return int(self.mask(kinds).sum())

    def check_invariants(self) -> list[str]:
        problems = []
        if not self.cell_size > 0:
            problems.append("cell_size must be positive")
        if self.width_cells < 1 or self.height_cells < 1:
            problems.append("grid must have at least one cell")
            return problems
        if self.count(TARGET_KINDS) == 0:
            problems.append("grid has no Exit or StairEntry cell")
        border = np.concatenate(
            [self.cells[0, :], self.cells[-1, :], self.cells[:, 0], self.cells[:, -1]]
        )
        allowed = {int(CellKind.OBSTACLE), int(CellKind.EXIT), int(CellKind.STAIR_ENTRY)}
        if any(int(k) not in allowed for k in border):
            problems.append("open boundary: border cells must be Obstacle, Exit or StairEntry")
        return problems

    def __eq__(self, other):
        if not isinstance(other, CellGrid):
            return NotImplemented
        return self.cell_size == other.cell_size and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.cell_size, self.cells.shape, self.cells.tobytes()))


@dataclass(frozen=True)
class Port:
    """A straight band through which agents leave or enter a region.

    ``direction`` is the travel direction across the band.  Lateral offsets
    are measured from ``origin`` (the right-hand edge, looking along
    ``direction``) along ``axis``.
    """

    origin: tuple[float, float]
    axis: tuple[float, float]
    direction: tuple[float, float]
    width: float

    def lateral_offset(self, x: float, y: float) -> float:
        return (x - self.origin[0]) * self.axis[0] + (y - self.origin[1]) * self.axis[1]

    def point(self, offset: float, depth: float) -> tuple[float, float]:
        return (
            self.origin[0] + offset * self.axis[0] + depth * self.direction[0],
            self.origin[1] + offset * self.axis[1] + depth * self.direction[1],
        )


_DIRECTIONS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def find_port(grid: CellGrid, kinds: Iterable[CellKind], role: str) -> Port:
    """Derive the port geometry of a straight band of cells.

    ``role="outlet"``: agents walk into the band from walkable cells.
    ``role="inlet"``: the band backs onto a wall and agents walk away from it.
    """
    kinds = tuple(kinds)
    ys, xs = np.nonzero(grid.mask(kinds))
    if len(xs) == 0:
        raise ValueError(f"no {role} band of kinds {[k.name for k in kinds]}")
    passable = grid.passable
    s = grid.cell_size

    def upstream_ok(ix, iy, dx, dy):
        ux, uy = ix - dx, iy - dy
        inside = grid.in_bounds(ux, uy)
        if role == "outlet":
            return inside and grid.kind(ux, uy) in WALKABLE_KINDS
        return not inside or not passable[uy, ux]

    for dx, dy in _DIRECTIONS:
        across = xs if dx != 0 else ys
        along = ys if dx != 0 else xs
        if len(set(across.tolist())) != 1:
            continue
        order = np.sort(along)
        if np.any(np.diff(order) != 1):
            continue
        if not all(upstream_ok(int(ix), int(iy), dx, dy) for ix, iy in zip(xs, ys)):
            continue
        ax, ay = -dy, dx
        # face on the upstream side of the band; origin at its right-hand end
        idx = int(across[0])
        face = idx if (dx + dy) > 0 else idx + 1
        lo, hi = int(order[0]), int(order[-1]) + 1
        start = lo if (ax + ay) > 0 else hi
        origin = (face * s, start * s) if dx != 0 else (start * s, face * s)
        return Port(origin, (float(ax), float(ay)), (float(dx), float(dy)), (hi - lo) * s)
    raise ValueError(f"{role} cells do not form a single straight band")


@dataclass(frozen=True)
class FloorPlan:
    grid: CellGrid
    exit_width_cf: float
    initial_agent_count: int

    @property
    def outlet(self) -> Port:
        return find_port(self.grid, TARGET_KINDS, "outlet")

    @property
    def inlet(self) -> Port | None:
        if self.grid.count([CellKind.STAIR_EXIT]) == 0:
            return None
        return find_port(self.grid, [CellKind.STAIR_EXIT], "inlet")

    def check_invariants(self) -> list[str]:
        problems = self.grid.check_invariants()
        band = self.grid.count(TARGET_KINDS) * self.grid.cell_size
        if abs(band - self.exit_width_cf) > self.grid.cell_size + 1e-9:
            problems.append(
                f"exit_width_cf={self.exit_width_cf:g} m does not match exit band width {band:g} m"
            )
        if self.initial_agent_count < 0:
            problems.append("initial_agent_count must be nonnegative")
        return problems


@dataclass(frozen=True)
class Staircase:
    kind: StaircaseKind
    length_ls: float
    width_cs: float
    unfolded: CellGrid
    centerline: tuple[tuple[float, float], ...]
    width_probes: tuple[tuple[tuple[float, float], tuple[float, float]], ...] = field(repr=False)

    @property
    def inlet(self) -> Port:
        return find_port(self.unfolded, [CellKind.STAIR_EXIT], "inlet")

    @property
    def outlet(self) -> Port:
        return find_port(self.unfolded, TARGET_KINDS, "outlet")

    def centerline_length(self) -> float:
        pts = np.asarray(self.centerline)
        return float(np.hypot(*np.diff(pts, axis=0).T).sum())

    def measured_widths(self) -> list[float]:
        """Free width across the channel at each probe.

        Straight channels: step outward from the probe point until blocked.
        Helical: walkable area inside a 60 degree wedge divided by its arc
        length on the centerline, which averages out the jagged boundary.
        """
        grid = self.unfolded
        s = grid.cell_size
        if self.kind == StaircaseKind.HELICAL:
            return self._wedge_widths()
        step = s / 50.0
        widths = []
        for (px, py), (nx, ny) in self.width_probes:
            total = 0.0
            for sign in (1.0, -1.0):
                t = 0.0
                while True:
                    ix, iy = grid.cell_of(px + sign * (t + step) * nx, py + sign * (t + step) * ny)
                    if not grid.in_bounds(ix, iy) or grid.kind(ix, iy) == CellKind.OBSTACLE:
                        break
                    t += step
                total += t
            widths.append(total)
        return widths

    def _wedge_widths(self) -> list[float]:
        grid = self.unfolded
        s = grid.cell_size
        (x0, y0), (x1, y1) = self.centerline[0], self.centerline[-1]
        cx, cy = x0, y1
        r_mid = cy - y0
        ys, xs = np.nonzero(grid.mask(WALKABLE_KINDS))
        px, py = (xs + 0.5) * s - cx, (ys + 0.5) * s - cy
        ang = np.arctan2(py, px)
        half = math.pi / 6
        widths = []
        for (qx, qy), _ in self.width_probes:
            a = math.atan2(qy - cy, qx - cx)
            diff = np.abs((ang - a + math.pi) % (2 * math.pi) - math.pi)
            area = np.count_nonzero(diff < half) * s * s
            widths.append(area / (2 * half * r_mid))
        return widths

    def check_invariants(self) -> list[str]:
        problems = [f"staircase: {p}" for p in self.unfolded.check_invariants()]
        s = self.unfolded.cell_size
        for w in self.measured_widths():
            if abs(w - self.width_cs) > s + 1e-9:
                problems.append(f"staircase channel width {w:.3f} m differs from c_s={self.width_cs:g} m")
                break
        length = self.centerline_length()
        if abs(length - self.length_ls) > 0.05 * self.length_ls:
            problems.append(
                f"staircase centerline {length:.3f} m differs from l_s={self.length_ls:g} m by more than 5%"
            )
        return problems


def _finish_staircase(kind, length_ls, width_cs, cells, cell_size, centerline, probes):
    grid = CellGrid(cells, cell_size)
    return Staircase(
        kind=StaircaseKind(kind),
        length_ls=float(length_ls),
        width_cs=float(width_cs),
        unfolded=grid,
        centerline=tuple((float(x), float(y)) for x, y in centerline),
        width_probes=tuple(probes),
    )


def unfold_staircase(kind, length_ls: float, width_cs: float, cell_size: float = 0.3) -> Staircase:
    """Render a staircase as a planar corridor on a cell grid.

    Ladders are straight, ``standard`` is a switchback (two equal flights
    joined by a landing) and ``helical`` is a 270 degree annular sweep.
    Agents arrive on the ``STAIR_EXIT`` column at the top and leave through
    the ``STAIR_ENTRY`` band at the bottom.
    """
    kind = StaircaseKind(kind)
    if not length_ls > 0:
        raise ValueError(f"length_ls must be positive, got {length_ls}")
    if not cell_size > 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    if width_cs < 2 * cell_size - 1e-12:
        raise ValueError(
            f"width_cs={width_cs} m is narrower than two cells ({2 * cell_size} m); cannot discretize"
        )
    s = cell_size
    w = max(2, int(round(width_cs / s)))
    L = length_ls / s
    O, F, A, S = (int(CellKind.OBSTACLE), int(CellKind.FREE), int(CellKind.STAIR_EXIT),
                  int(CellKind.STAIR_ENTRY))

    if kind in (StaircaseKind.LADDER_SHORT, StaircaseKind.LADDER_LONG):
        n = max(1, int(round(L)))
        cells = np.full((w + 2, n + 2), O, dtype=np.int8)
        cells[1:w + 1, 1:n + 1] = F
        cells[1:w + 1, 1] = A
        cells[1:w + 1, n + 1] = S
        yc = (1 + w / 2) * s
        centerline = [(s, yc), ((n + 1) * s, yc)]
        probes = [(((1 + n / 2) * s, yc), (0.0, 1.0))]
        return _finish_staircase(kind, length_ls, width_cs, cells, s, centerline, probes)

    if kind == StaircaseKind.STANDARD:
        # centerline = 2n + 2w + g cells for flights of n cells and a gap wall of g cells
        best = None
        for g in (1, 2):
            n = int(round((L - 2 * w - g) / 2))
            if n < 1:
                continue
            err = abs(2 * n + 2 * w + g - L)
            if best is None or err < best[0] - 1e-12:
                best = (err, n, g)
        if best is None:
            raise ValueError(f"length_ls={length_ls} m too short for a switchback of width {width_cs} m")
        _, n, g = best
        width, height = n + w + 2, 2 * w + g + 2
        cells = np.full((height, width), O, dtype=np.int8)
        lo1, hi1 = 1, w + 1  # flight 1 rows
        lo2, hi2 = w + g + 1, 2 * w + g + 1  # flight 2 rows
        cells[lo1:hi1, 1:n + 1] = F
        cells[lo2:hi2, 1:n + 1] = F
        cells[lo1:hi2, n + 1:n + w + 1] = F  # landing
        cells[lo1:hi1, 1] = A
        cells[lo2:hi2, 0] = S
        y1, y2 = (1 + w / 2) * s, (w + g + 1 + w / 2) * s
        xl = (n + 1 + w / 2) * s
        centerline = [(s, y1), (xl, y1), (xl, y2), (s, y2)]
        probes = [
            (((1 + n / 2) * s, y1), (0.0, 1.0)),
            ((xl, (y1 + y2) / 2), (1.0, 0.0)),
            (((1 + n / 2) * s, y2), (0.0, 1.0)),
        ]
        return _finish_staircase(kind, length_ls, width_cs, cells, s, centerline, probes)

    # helical: counter-clockwise sweep from the bottom (heading east) to the west side (heading south)
    r_mid = length_ls / HELICAL_SWEEP
    r_in, r_out = r_mid - w * s / 2, r_mid + w * s / 2
    if r_in < s:
        raise ValueError(f"length_ls={length_ls} m too short for a helical staircase of width {width_cs} m")
    half = int(math.ceil(r_out / s)) + 1
    cx = cy = half * s
    size = 2 * half
    cells = np.full((size, size), O, dtype=np.int8)
    ix = np.arange(size)
    px, py = np.meshgrid((ix + 0.5) * s, (ix + 0.5) * s)
    r = np.hypot(px - cx, py - cy)
    ring = (r >= r_in) & (r < r_out)
    lower_left = (px < cx) & (py < cy)
    cells[ring & ~lower_left] = F
    cells[ring & (px > cx) & (py < cy) & (np.abs(px - cx - s / 2) < 1e-9)] = A
    cells[ring & lower_left & (np.abs(py - cy + s / 2) < 1e-9)] = S
    # one row of run-out past the hand-off row keeps its back wall off arriving bodies
    cells[ring & lower_left & (np.abs(py - cy + 1.5 * s) < 1e-9)] = F
    angles = np.linspace(-0.5 * math.pi, math.pi, 97)
    centerline = [(cx + r_mid * math.cos(a), cy + r_mid * math.sin(a)) for a in angles]
    probes = []
    for a in np.linspace(-0.5 * math.pi + math.pi / 6, math.pi - math.pi / 6, 5):
        probes.append(((cx + r_mid * math.cos(a), cy + r_mid * math.sin(a)), (math.cos(a), math.sin(a))))
    return _finish_staircase(kind, length_ls, width_cs, cells, s, centerline, probes)


def make_floor_plan(
    width: float,
    depth: float,
    exit_width: float,
    cell_size: float = 0.3,
    arrival_width: float | None = None,
    agent_count: int = 0,
    arrival_gap: float = 0.3,
) -> FloorPlan:
    """Rectangular room with a door in the east wall.

    With ``arrival_width`` set, a ``STAIR_EXIT`` band runs along the inside
    of the east wall, ``arrival_gap`` metres north of the door; this is
    where agents coming down from the floor above are placed.
    """
    s = cell_size
    nx, ny = int(round(width / s)), int(round(depth / s))
    ne = max(1, int(round(exit_width / s)))
    if ne > ny:
        raise ValueError("exit wider than the wall it sits in")
    cells = np.full((ny + 2, nx + 2), int(CellKind.OBSTACLE), dtype=np.int8)
    cells[1:ny + 1, 1:nx + 1] = CellKind.FREE
    if arrival_width is not None:
        na = max(1, int(round(arrival_width / s)))
        ng = max(1, int(round(arrival_gap / s)))
        if ne + na + ng > ny:
            raise ValueError("east wall too short for door, gap and arrival band")
        door_lo = 1 + (ny - ne - na - ng) // 2
        cells[door_lo:door_lo + ne, nx + 1] = CellKind.STAIR_ENTRY
        cells[door_lo + ne + ng:door_lo + ne + ng + na, nx] = CellKind.STAIR_EXIT
    else:
        door_lo = 1 + (ny - ne) // 2
        cells[door_lo:door_lo + ne, nx + 1] = CellKind.STAIR_ENTRY
    return FloorPlan(CellGrid(cells, s), ne * s, int(agent_count))


@dataclass(frozen=True)
class Region:
    """One simulated area: a floor or a staircase instance."""

    name: str
    grid: CellGrid
    outlet: Port
    inlet: Port | None
    downstream: int | None  # region index fed by the outlet; None = outside
    floor: int | None  # floor index for floors, None for staircases


@dataclass(frozen=True)
class Building:
    unit_cell: tuple[FloorPlan, Staircase, FloorPlan]  # (upper, staircase, lower)
    floor_count: int = 2
    mode: BuildingMode = BuildingMode.UNIT_CELL

    @property
    def floor_plan(self) -> FloorPlan:
        return self.unit_cell[2]

    @property
    def staircase(self) -> Staircase:
        return self.unit_cell[1]

    @property
    def floors(self) -> tuple[FloorPlan, ...]:
        upper, _, lower = self.unit_cell
        return (lower,) + (upper,) * (self.floor_count - 1)

    @property
    def staircases(self) -> tuple[Staircase, ...]:
        return (self.unit_cell[1],) * (self.floor_count - 1)

    def regions(self) -> list[Region]:
        """Floors ``0..F-1`` followed by staircases; staircase ``k`` joins floor ``k+1`` to floor ``k``."""
        n = self.floor_count
        out = []
        for i, plan in enumerate(self.floors):
            out.append(Region(f"floor{i}", plan.grid, plan.outlet, plan.inlet,
                              None if i == 0 else n + i - 1, i))
        for k, stair in enumerate(self.staircases):
            out.append(Region(f"stair{k}", stair.unfolded, stair.outlet, stair.inlet, k, None))
        return out

    def check_invariants(self) -> list[str]:
        problems = []
        if self.mode == BuildingMode.UNIT_CELL and self.floor_count != 2:
            problems.append("unit-cell mode requires floor_count = 2")
        if self.floor_count < 2:
            problems.append("floor_count must be at least 2")
        upper, _, lower = self.unit_cell
        if upper.grid != lower.grid:
            problems.append("upper and lower floors of the unit cell differ")
        return problems


def make_unit_cell(floor: FloorPlan, staircase: Staircase) -> Building:
    return Building((floor, staircase, floor), 2, BuildingMode.UNIT_CELL)


def replicate_unit_cell(building: Building, floor_count: int) -> Building:
    """Stack ``floor_count`` copies of the unit cell's floor, joined by staircase copies."""
    if building.mode != BuildingMode.UNIT_CELL:
        raise ValueError("replicate_unit_cell needs a unit-cell building")
    if floor_count < 2:
        raise ValueError(f"floor_count must be at least 2, got {floor_count}")
    return Building(building.unit_cell, int(floor_count), BuildingMode.FULL_STACK)


def _backed_by_wall(grid: CellGrid) -> bool:
    """True if an obstacle sits right behind the outlet band, within one body width."""
    port = find_port(grid, TARGET_KINDS, "outlet")
    dx, dy = int(port.direction[0]), int(port.direction[1])
    for iy, ix in zip(*np.nonzero(grid.mask(TARGET_KINDS))):
        bx, by = int(ix) + dx, int(iy) + dy
        if grid.in_bounds(bx, by) and not grid.passable[by, bx]:
            return True
    return False


def disc_area(radius: float) -> float:
    """Area per disc in the densest (hexagonal) packing."""
    return 2.0 * math.sqrt(3.0) * radius * radius


def validate_scenario(building: Building, agent_params) -> list[str]:
    """Collect every problem with ``building`` and the agent setup; never raises.

    ``agent_params`` needs a ``radius`` attribute (the largest agent radius).
    """
    from .flowfield import compute_distance_field

    diags: list[str] = []
    try:
        diags += building.check_invariants()
        plans = {id(p): p for p in (building.unit_cell[0], building.unit_cell[2])}.values()
        for plan in plans:
            diags += [f"floor: {p}" for p in plan.check_invariants()]
        diags += building.staircase.check_invariants()
        radius = float(getattr(agent_params, "radius", 0.3))

        grids = [("floor", building.floor_plan.grid), ("staircase", building.staircase.unfolded)]
        for name, grid in grids:
            dist = compute_distance_field(grid)
            walk = grid.mask(WALKABLE_KINDS)
            if np.any(walk & ~np.isfinite(dist)):
                diags.append(f"{name}: unreachable free cells")

        regions = []
        try:
            regions = building.regions()
        except ValueError as exc:
            diags.append(f"port geometry: {exc}")
        for reg in regions:
            if _backed_by_wall(reg.grid):
                diags.append(f"{reg.name}: exit band backed by a wall, agents cannot step into it")
            if reg.downstream is None:
                continue
            dest = regions[reg.downstream]
            if dest.inlet is None:
                diags.append(f"{reg.name} feeds {dest.name}, which has no arrival band")
                continue
            for frac in (0.0, 0.5, 1.0):
                lo, hi = arrival_offsets(dest.inlet.width, radius)
                off = lo + frac * (hi - lo)
                x, y = dest.inlet.point(off, arrival_depth(radius, dest.grid.cell_size))
                ix, iy = dest.grid.cell_of(x, y)
                if not dest.grid.in_bounds(ix, iy) or dest.grid.kind(ix, iy) not in WALKABLE_KINDS:
                    diags.append(f"{dest.name}: arrival band blocked by obstacles")
                    break

        plan = building.floor_plan
        free_area = plan.grid.count([CellKind.FREE]) * plan.grid.cell_size ** 2
        need = plan.initial_agent_count * disc_area(radius)
        if need > free_area:
            diags.append(
                f"overcrowded initial placement: {plan.initial_agent_count} agents of radius "
                f"{radius:g} m need {need:.1f} m^2, floor has {free_area:.1f} m^2 free"
            )
    except Exception as exc:  # diagnostics only, never abort
        diags.append(f"validation error: {exc}")
    return diags


# clear gaps (m) between a freshly transferred body and the walls around the arrival band
ARRIVAL_BACK_GAP = 0.25
ARRIVAL_SIDE_GAP = 0.1


def arrival_depth(radius: float, cell_size: float) -> float:
    """How far past an arrival face a transferred agent is placed."""
    return max(radius, 0.5 * cell_size) + ARRIVAL_BACK_GAP


def arrival_offsets(width: float, radius: float) -> tuple[float, float]:
    """Range of lateral offsets on an arrival band of ``width`` that keeps off its side walls."""
    lo = min(radius + ARRIVAL_SIDE_GAP, 0.5 * width)
    return lo, width - lo
