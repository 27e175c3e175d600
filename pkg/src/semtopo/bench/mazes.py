"""Grid maze fixtures: a spanning-tree maze with a few extra openings for loops."""
from __future__ import annotations

import numpy as np

from ..world import CellState, OccupancyGrid


def generate_maze(seed: int, n: int = 5, corridor: int = 10, wall: int = 2, loops: int = 3,
                  resolution: float = 0.05) -> OccupancyGrid:
    """``n`` x ``n`` maze cells of ``corridor`` free pixels separated by ``wall``-thick walls."""
    rng = np.random.default_rng(seed)
    # open[(a, b)] for adjacent maze cells a, b
    opened = set()
    seen = {(0, 0)}
    stack = [(0, 0)]
    while stack:
        x, y = stack[-1]
        nbrs = [(x + dx, y + dy) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
                if 0 <= x + dx < n and 0 <= y + dy < n and (x + dx, y + dy) not in seen]
        if not nbrs:
            stack.pop()
            continue
        nxt = nbrs[int(rng.integers(len(nbrs)))]
        opened.add(frozenset(((x, y), nxt)))
        seen.add(nxt)
        stack.append(nxt)
    closed = sorted(
        (frozenset(((x, y), (x + dx, y + dy))) for x in range(n) for y in range(n)
         for dx, dy in ((1, 0), (0, 1)) if x + dx < n and y + dy < n
         and frozenset(((x, y), (x + dx, y + dy))) not in opened),
        key=lambda s: sorted(s))
    order = rng.permutation(len(closed))
    added = 0
    for k in order:
        if added == loops:
            break
        cand = opened | {closed[k]}
        if not _has_isolated_post(cand, n):
            opened = cand
            added += 1

    size = n * corridor + (n + 1) * wall
    cells = np.full((size, size), CellState.OCCUPIED, dtype=np.uint8)
    step = corridor + wall

    def span(i):
        lo = wall + i * step
        return slice(lo, lo + corridor)

    for x in range(n):
        for y in range(n):
            cells[span(y), span(x)] = CellState.FREE
    for pair in opened:
        (x0, y0), (x1, y1) = sorted(pair)
        if x1 != x0:   # horizontal neighbours: open the vertical wall between them
            lo = wall + x1 * step - wall
            cells[span(y0), lo:lo + wall] = CellState.FREE
        else:
            lo = wall + y1 * step - wall
            cells[lo:lo + wall, span(x0)] = CellState.FREE
    return OccupancyGrid(size, size, resolution, (0.0, 0.0), cells)


def _has_isolated_post(opened, n) -> bool:
    """True if some interior wall junction has all four of its walls removed."""
    for px in range(1, n):
        for py in range(1, n):
            walls = [
                frozenset(((px - 1, py - 1), (px - 1, py))),
                frozenset(((px, py - 1), (px, py))),
                frozenset(((px - 1, py - 1), (px, py - 1))),
                frozenset(((px - 1, py), (px, py))),
            ]
            if all(w in opened for w in walls):
                return True
    return False


def upsample(grid: OccupancyGrid, factor: int = 2) -> OccupancyGrid:
    """Same geometry at ``factor`` times the resolution (``factor**2`` as many cells)."""
    cells = np.kron(grid.cells, np.ones((factor, factor), dtype=np.uint8))
    return OccupancyGrid(grid.width * factor, grid.height * factor, grid.resolution / factor,
                         grid.origin, cells)
