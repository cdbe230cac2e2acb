"""Shared 16x16 input-grid geometry.

Both the event front end and the network builder need the same pixel
indexing and the same near-uniform partition of the 16-pixel axis into
n contiguous strips, so the definitions live here.
"""

from __future__ import annotations

GRID_SIDE = 16
N_PIXELS = GRID_SIDE * GRID_SIDE


def pixel_id(x: int, y: int) -> int:
    """Row-major input-neuron id for grid coordinates."""
    return y * GRID_SIDE + x


def pixel_xy(pid: int) -> tuple[int, int]:
    return pid % GRID_SIDE, pid // GRID_SIDE


def partition_bounds(n: int) -> list[int]:
    """Boundaries of the near-uniform split of 16 cells into n strips.

    Strip i covers [bounds[i], bounds[i+1]); boundaries are round(i*16/n)
    (half away from zero), giving strip widths that differ by at most 1.
    """
    if not 1 <= n <= GRID_SIDE:
        raise ValueError(f"cannot split {GRID_SIDE} cells into {n} strips")
    return [(2 * GRID_SIDE * i + n) // (2 * n) for i in range(n + 1)]


def strip_of(coord: int, n: int) -> int:
    """Index of the strip of the n-partition containing coordinate coord."""
    bounds = partition_bounds(n)
    for i in range(n):
        if bounds[i] <= coord < bounds[i + 1]:
            return i
    raise ValueError(f"coordinate {coord} outside the grid")
