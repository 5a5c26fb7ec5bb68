"""Desired-direction fields over a floor grid.

Each walkable cell points at the lowest-distance waypoint it can see within
``r_vis`` cells, along a ray that keeps a one-cell margin from walls.  When no such target exists, or stepping toward it would
not get closer to an exit, the cell falls back to steepest descent on the
8-neighbour distance field, so following the vectors cell by cell always
ends at an exit (no dead-end traps).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numba
import numpy as np

from .building import TARGET_KINDS, WALKABLE_KINDS, CellGrid

R_VIS_DEFAULT = 20
SQRT2 = math.sqrt(2.0)

# E, N, W, S, NE, NW, SW, SE: fixed order for deterministic tie-breaking
NEIGHBORS = np.array(
    [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1)], dtype=np.int64
)

METHOD_NONE, METHOD_RAY, METHOD_DESCENT = 0, 1, 2


@numba.njit(cache=True)
def _traverse(x0, y0, x1, y1, out):
    """Every cell touched by the segment between two cell centres (supercover).

    Exact integer arithmetic; a segment through a shared corner touches all
    four cells around it.  Returns the number of cells written to ``out``.
    """
    dx, dy = x1 - x0, y1 - y0
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    x, y = x0, y0
    out[0, 0] = x
    out[0, 1] = y
    n = 1
    ix = 0
    iy = 0
    while ix < nx or iy < ny:
        decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if decision == 0:
            out[n, 0] = x + sx
            out[n, 1] = y
            out[n + 1, 0] = x
            out[n + 1, 1] = y + sy
            n += 2
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif decision < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        out[n, 0] = x
        out[n, 1] = y
        n += 1
    return n


@numba.njit(cache=True)
def _visible(passable, x0, y0, x1, y1, buf):
    n = _traverse(x0, y0, x1, y1, buf)
    for k in range(n):
        if not passable[buf[k, 1], buf[k, 0]]:
            return False
    return True


@numba.njit(cache=True)
def _first_step(vx, vy):
    """Neighbour a unit vector points into when leaving a cell centre."""
    sx = 1 if vx > 0 else (-1 if vx < 0 else 0)
    sy = 1 if vy > 0 else (-1 if vy < 0 else 0)
    ax, ay = abs(vx), abs(vy)
    if ax > ay:
        return sx, 0
    if ay > ax:
        return 0, sy
    return sx, sy


@numba.njit(cache=True)
def _valid_move(passable, x, y, dx, dy):
    h, w = passable.shape
    nx, ny = x + dx, y + dy
    if nx < 0 or ny < 0 or nx >= w or ny >= h or not passable[ny, nx]:
        return False
    if dx != 0 and dy != 0:
        # no cutting past an obstacle corner
        return passable[y, nx] and passable[ny, x]
    return True


@numba.njit(cache=True)
def _clear_visible(passable, clear, x0, y0, x1, y1, buf):
    """Visible, and away from walls except within one cell of the start."""
    n = _traverse(x0, y0, x1, y1, buf)
    for k in range(n):
        cx, cy = buf[k, 0], buf[k, 1]
        if not passable[cy, cx]:
            return False
        if not clear[cy, cx] and (abs(cx - x0) > 1 or abs(cy - y0) > 1):
            return False
    return True


@numba.njit(cache=True)
def _build_field(passable, walkable, clear, dist, r_vis, neighbors):
    h, w = passable.shape
    vec = np.zeros((h, w, 2))
    method = np.zeros((h, w), dtype=np.int8)
    buf = np.empty((4 * (h + w) + 8, 2), dtype=np.int64)
    r2max = r_vis * r_vis
    for y in range(h):
        for x in range(w):
            d0 = dist[y, x]
            if not walkable[y, x] or not np.isfinite(d0) or d0 <= 0.0:
                continue
            best_d = np.inf
            best_r2 = 0
            bx = -1
            by = -1
            for ty in range(max(0, y - r_vis), min(h, y + r_vis + 1)):
                for tx in range(max(0, x - r_vis), min(w, x + r_vis + 1)):
                    r2 = (tx - x) * (tx - x) + (ty - y) * (ty - y)
                    if r2 > r2max or not clear[ty, tx]:
                        continue
                    dt = dist[ty, tx]
                    if not (dt < d0):
                        continue
                    if dt < best_d or (dt == best_d and r2 < best_r2):
                        if _clear_visible(passable, clear, x, y, tx, ty, buf):
                            best_d = dt
                            best_r2 = r2
                            bx = tx
                            by = ty
            if bx >= 0:
                ddx = float(bx - x)
                ddy = float(by - y)
                norm = math.sqrt(ddx * ddx + ddy * ddy)
                vx, vy = ddx / norm, ddy / norm
                sx, sy = _first_step(vx, vy)
                if _valid_move(passable, x, y, sx, sy) and dist[y + sy, x + sx] < d0:
                    vec[y, x, 0] = vx
                    vec[y, x, 1] = vy
                    method[y, x] = 1
                    continue
            # steepest descent on the distance field
            best_slope = 0.0
            kbest = -1
            for k in range(8):
                dx, dy = neighbors[k, 0], neighbors[k, 1]
                if not _valid_move(passable, x, y, dx, dy):
                    continue
                step = 1.0 if (dx == 0 or dy == 0) else math.sqrt(2.0)
                slope = (d0 - dist[y + dy, x + dx]) / step
                if slope > best_slope:
                    best_slope = slope
                    kbest = k
            if kbest >= 0:
                dx, dy = neighbors[kbest, 0], neighbors[kbest, 1]
                norm = math.sqrt(float(dx * dx + dy * dy))
                vec[y, x, 0] = dx / norm
                vec[y, x, 1] = dy / norm
                method[y, x] = 2
    return vec, method


def touched_cells(from_cell, to_cell) -> list[tuple[int, int]]:
    """Cells touched by the segment joining two cell centres, in walking order."""
    (x0, y0), (x1, y1) = from_cell, to_cell
    buf = np.empty((2 * (abs(x1 - x0) + abs(y1 - y0)) + 2, 2), dtype=np.int64)
    n = _traverse(int(x0), int(y0), int(x1), int(y1), buf)
    return [(int(a), int(b)) for a, b in buf[:n]]


def ray_cast(grid: CellGrid, from_cell, to_cell) -> bool:
    """True iff the segment between the two cell centres touches no obstacle.

    Grazing a corner shared with an obstacle counts as blocked.
    """
    for c in (from_cell, to_cell):
        if not grid.in_bounds(*c):
            raise ValueError(f"cell {c} outside the grid")
    passable = grid.passable
    return all(passable[y, x] for x, y in touched_cells(from_cell, to_cell))


def compute_distance_field(grid: CellGrid) -> np.ndarray:
    """Shortest 8-neighbour path length (in cells) to the nearest Exit/StairEntry.

    Straight steps cost 1, diagonal steps sqrt(2); diagonals may not cut an
    obstacle corner.  Unreachable cells get ``inf``.
    """
    passable = grid.passable
    h, w = passable.shape
    dist = np.full((h, w), np.inf)
    heap = []
    for y, x in zip(*np.nonzero(grid.mask(TARGET_KINDS))):
        dist[y, x] = 0.0
        heap.append((0.0, int(y), int(x)))
    heapq.heapify(heap)
    moves = [(int(dx), int(dy), 1.0 if dx == 0 or dy == 0 else SQRT2) for dx, dy in NEIGHBORS]
    while heap:
        d, y, x = heapq.heappop(heap)
        if d > dist[y, x]:
            continue
        for dx, dy, cost in moves:
            if not _valid_move(passable, x, y, dx, dy):
                continue
            nd = d + cost
            if nd < dist[y + dy, x + dx]:
                dist[y + dy, x + dx] = nd
                heapq.heappush(heap, (nd, y + dy, x + dx))
    return dist


@dataclass(frozen=True, eq=False)
class FlowField:
    vectors: np.ndarray  # (height, width, 2) unit vectors, zero where undefined
    distance: np.ndarray  # (height, width) cells; inf = unreachable
    cell_size: float
    passable: np.ndarray
    method: np.ndarray | None = None  # METHOD_RAY / METHOD_DESCENT per cell

    @property
    def grid_dims(self) -> tuple[int, int]:
        return int(self.distance.shape[1]), int(self.distance.shape[0])

    def vector(self, ix: int, iy: int) -> tuple[float, float]:
        return float(self.vectors[iy, ix, 0]), float(self.vectors[iy, ix, 1])

    @classmethod
    def from_vectors(cls, grid: CellGrid, vectors, distance=None) -> "FlowField":
        """Wrap externally computed vectors (e.g. a symmetry-adapted field)."""
        vectors = np.array(vectors, dtype=float)
        if vectors.shape != (grid.height_cells, grid.width_cells, 2):
            raise ValueError(f"field shape {vectors.shape} does not match grid")
        vectors[~grid.passable] = 0.0
        norms = np.hypot(vectors[..., 0], vectors[..., 1])
        nz = norms > 0
        vectors[nz] /= norms[nz][:, None]
        if distance is None:
            distance = compute_distance_field(grid)
        return _freeze(cls(vectors, np.array(distance, dtype=float), grid.cell_size, grid.passable))


def _freeze(field: FlowField) -> FlowField:
    for arr in (field.vectors, field.distance, field.passable, field.method):
        if arr is not None:
            arr.setflags(write=False)
    return field


def clearance_mask(grid: CellGrid) -> np.ndarray:
    """Passable cells with no obstacle among their in-grid 8 neighbours.

    Only these serve as ray waypoints, so exit cells against a door jamb are
    skipped in favour of the middle of the doorway.
    """
    passable = grid.passable
    padded = np.pad(passable, 1, constant_values=True)
    h, w = passable.shape
    clear = passable.copy()
    for dx, dy in NEIGHBORS:
        clear &= padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    return np.ascontiguousarray(clear)


def compute_flow_field(grid: CellGrid, r_vis: int = R_VIS_DEFAULT) -> FlowField:
    """Unit desired-direction vectors for every reachable walkable cell.

    A cell aims at the lowest-distance waypoint within ``r_vis`` cells that it
    can see along a ray keeping one cell clear of walls (beyond its own
    neighbourhood).  If no waypoint qualifies, or the first cell stepped into
    along that ray is not strictly closer to an exit, it takes the
    steepest-descent neighbour of the distance field instead.
    """
    dist = compute_distance_field(grid)
    passable = np.ascontiguousarray(grid.passable)
    walkable = np.ascontiguousarray(grid.mask(WALKABLE_KINDS))
    vec, method = _build_field(passable, walkable, clearance_mask(grid), dist, int(r_vis), NEIGHBORS)
    return _freeze(FlowField(vec, dist, grid.cell_size, grid.passable.copy(), method))


def field_lookup(field: FlowField, position) -> tuple[tuple[float, float], bool]:
    """Vector of the cell containing ``position`` plus an anomaly flag.

    Cells are half-open with lower edges inclusive.  Obstacle cells and
    positions outside the grid give the zero vector with the flag set.
    """
    x, y = position
    ix = int(math.floor(x / field.cell_size))
    iy = int(math.floor(y / field.cell_size))
    w, h = field.grid_dims
    if not (0 <= ix < w and 0 <= iy < h) or not field.passable[iy, ix]:
        return (0.0, 0.0), True
    return field.vector(ix, iy), False


def greedy_walk(field: FlowField, start, max_steps: int | None = None) -> list[tuple[int, int]]:
    """Cells visited by stepping into whichever neighbour each vector points at."""
    x, y = start
    path = [(x, y)]
    limit = max_steps if max_steps is not None else int(np.count_nonzero(field.passable))
    for _ in range(limit):
        if field.distance[y, x] == 0.0:
            break
        vx, vy = field.vector(x, y)
        if vx == 0.0 and vy == 0.0:
            break
        dx, dy = _first_step(vx, vy)
        x, y = x + dx, y + dy
        path.append((x, y))
    return path
