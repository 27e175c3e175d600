"""Baseline frontier exploration: wavefront frontier detection, size/distance
goal selection and 8-connected grid Dijkstra."""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import ndimage

from .world import Cell, CellState, OccupancyGrid

_N8 = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
SQRT2 = math.sqrt(2.0)


@dataclass
class FrontierCluster:
    id: int
    cells: List[Cell]
    centroid_cell: Cell
    size: int = 0
    bfs_distance: float = math.inf   # steps from the robot to centroid_cell

    def __post_init__(self):
        self.size = len(self.cells)


@dataclass(frozen=True)
class FEWeights:
    alpha_size: float = 1.0
    alpha_dist: float = 1.0


@dataclass
class PlanStats:
    expansions: int = 0


def free_bfs(explored: OccupancyGrid, start: Cell) -> np.ndarray:
    """Step counts over 8-connected Free cells from ``start`` (-1 where unreached)."""
    h, w = explored.height, explored.width
    free = (explored.cells == CellState.FREE).ravel().tolist()
    dist = [-1] * (h * w)
    c0, r0 = start
    dist[r0 * w + c0] = 0
    dq = deque([(c0, r0)])
    while dq:
        c, r = dq.popleft()
        d = dist[r * w + c] + 1
        for dc, dr in _N8:
            cc, rr = c + dc, r + dr
            if 0 <= cc < w and 0 <= rr < h:
                k = rr * w + cc
                if free[k] and dist[k] < 0:
                    dist[k] = d
                    dq.append((cc, rr))
    return np.array(dist, dtype=np.int64).reshape(h, w)


def _is_frontier(cells, c, r, w, h) -> bool:
    """``cells`` is the flat row-major list of states."""
    for dc, dr in _N8:
        cc, rr = c + dc, r + dr
        if 0 <= cc < w and 0 <= rr < h and cells[rr * w + cc] == CellState.UNKNOWN:
            return True
    return False


def wfd_detect(explored: OccupancyGrid, robot_cell: Cell) -> List[FrontierCluster]:
    """Frontier clusters reachable from the robot through Free space.

    A wavefront (BFS) over Free cells visits every reachable cell; each
    frontier cell met along the way seeds a second BFS that gathers its
    8-connected frontier cluster.
    """
    if not explored.in_bounds(robot_cell) or explored.state(robot_cell) != CellState.FREE:
        raise ValueError("robot cell is not Free")
    cells = explored.cells.ravel().tolist()
    h, w = explored.height, explored.width
    dist_arr = free_bfs(explored, robot_cell)
    order = np.argsort(np.where(dist_arr >= 0, dist_arr, np.iinfo(np.int64).max), axis=None, kind="stable")
    dist = dist_arr.ravel().tolist()
    in_cluster = [False] * (h * w)
    clusters: List[FrontierCluster] = []
    for k in order.tolist():
        if dist[k] < 0:
            break
        r, c = divmod(k, w)
        if in_cluster[k] or not _is_frontier(cells, c, r, w, h):
            continue
        members = []
        in_cluster[k] = True
        dq = deque([(c, r)])
        while dq:
            pc, pr = dq.popleft()
            members.append((pc, pr))
            for dc, dr in _N8:
                cc, rr = pc + dc, pr + dr
                if 0 <= cc < w and 0 <= rr < h:
                    kk = rr * w + cc
                    if not in_cluster[kk] and dist[kk] >= 0 and _is_frontier(cells, cc, rr, w, h):
                        in_cluster[kk] = True
                        dq.append((cc, rr))
        members.sort(key=lambda p: (p[1], p[0]))
        mc = sum(p[0] for p in members) / len(members)
        mr = sum(p[1] for p in members) / len(members)
        centroid = min(members, key=lambda p: ((p[0] - mc) ** 2 + (p[1] - mr) ** 2, p[1], p[0]))
        clusters.append(FrontierCluster(len(clusters), members, centroid,
                                        bfs_distance=float(dist[centroid[1] * w + centroid[0]])))
    return clusters


def fe_select(clusters: Sequence[FrontierCluster], robot_cell: Cell,
              weights: FEWeights = FEWeights(),
              distances: Optional[Dict[int, float]] = None) -> FrontierCluster:
    """Cluster maximizing ``alpha_size * size - alpha_dist * distance``; ties to the lower id.

    Distances default to each cluster's recorded BFS distance from the robot.
    """
    if not clusters:
        raise LookupError("no frontiers: exploration complete")

    def utility(cl):
        d = distances[cl.id] if distances is not None else cl.bfs_distance
        return weights.alpha_size * cl.size - weights.alpha_dist * d

    return max(clusters, key=lambda cl: (utility(cl), -cl.id))


def clearance_penalty(explored: OccupancyGrid, radius_m: float, weight: float = 5.0) -> np.ndarray:
    """Extra cost for entering cells closer than ``radius_m`` to an Occupied cell."""
    clear = ndimage.distance_transform_edt(explored.cells != CellState.OCCUPIED) * explored.resolution
    return np.where(clear < radius_m, weight, 0.0)


def grid_plan(explored: OccupancyGrid, start: Cell, goal: Cell,
              stats: Optional[PlanStats] = None,
              penalty: Optional[np.ndarray] = None) -> Optional[List[Cell]]:
    """8-connected Dijkstra over Free cells (diagonal step sqrt 2); ``None`` if unreachable.

    ``penalty`` optionally adds a per-cell cost for entering that cell.
    """
    if not explored.in_bounds(start) or explored.state(start) != CellState.FREE:
        raise ValueError("start cell is not Free")
    if not explored.in_bounds(goal) or explored.state(goal) != CellState.FREE:
        return None
    h, w = explored.height, explored.width
    free = (explored.cells == CellState.FREE).ravel().tolist()
    pen = penalty.ravel().tolist() if penalty is not None else None
    dist = [math.inf] * (h * w)
    parent = {}
    dist[start[1] * w + start[0]] = 0.0
    heap = [(0.0, start[1], start[0])]
    done = [False] * (h * w)
    while heap:
        d, r, c = heapq.heappop(heap)
        k = r * w + c
        if done[k]:
            continue
        done[k] = True
        if stats is not None:
            stats.expansions += 1
        if (c, r) == goal:
            path = [goal]
            while path[-1] != start:
                path.append(parent[path[-1]])
            return path[::-1]
        for dc, dr in _N8:
            cc, rr = c + dc, r + dr
            if 0 <= cc < w and 0 <= rr < h:
                kk = rr * w + cc
                if free[kk] and not done[kk]:
                    nd = d + (SQRT2 if dc and dr else 1.0)
                    if pen is not None:
                        nd += pen[kk]
                    if nd < dist[kk]:
                        dist[kk] = nd
                        parent[(cc, rr)] = (c, r)
                        heapq.heappush(heap, (nd, rr, cc))
    return None


def path_cost(path: Sequence[Cell]) -> float:
    return sum(SQRT2 if (a[0] != b[0] and a[1] != b[1]) else 1.0 for a, b in zip(path[:-1], path[1:]))
