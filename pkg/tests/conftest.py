from __future__ import annotations

import numpy as np
import pytest

from evacsim.building import CellGrid, CellKind


def room_rows(nx: int, ny: int, exits=(), kind: str = "E") -> list[str]:
    """Walled ``nx`` x ``ny`` room; ``exits`` are ``(ix, iy)`` border cells (iy counts from the south)."""
    g = [["#"] * nx for _ in range(ny)]
    for iy in range(1, ny - 1):
        for ix in range(1, nx - 1):
            g[iy][ix] = "."
    for ix, iy in exits:
        g[iy][ix] = kind
    return ["".join(r) for r in reversed(g)]


def room(nx: int, ny: int, exits=(), cell_size: float = 0.3, kind: str = "E") -> CellGrid:
    return CellGrid.from_rows(room_rows(nx, ny, exits, kind), cell_size)


def random_map(rng: np.random.Generator, n: int = 30, density: float = 0.2) -> CellGrid:
    """``n`` x ``n`` closed map with random interior obstacles and one exit cell on the east wall."""
    cells = np.full((n, n), int(CellKind.OBSTACLE), dtype=np.int8)
    inner = np.where(rng.random((n - 2, n - 2)) < density, int(CellKind.OBSTACLE), int(CellKind.FREE))
    cells[1:-1, 1:-1] = inner
    ey = int(rng.integers(1, n - 1))
    cells[ey, -2] = CellKind.FREE
    cells[ey, -1] = CellKind.EXIT
    return CellGrid(cells, 0.3)


@pytest.fixture
def open_room() -> CellGrid:
    return room(12, 10, exits=[(11, 4), (11, 5)])
