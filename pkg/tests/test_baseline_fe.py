import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from semtopo.baseline_fe import (FEWeights, FrontierCluster, PlanStats, clearance_penalty, fe_select,
                                 free_bfs, grid_plan, path_cost, wfd_detect)
from semtopo.semantic_topo import detect_frontier_cells
from semtopo.world import CellState, OccupancyGrid

from conftest import plus_corridor, random_grid, straight_corridor

EIGHT = np.ones((3, 3), dtype=bool)
STEPS = [(dc, dr) for dc in (-1, 0, 1) for dr in (-1, 0, 1) if dc or dr]


def bellman_ford(g: OccupancyGrid, start, penalty=None):
    """Relax every Free-cell arc until nothing changes."""
    free = g.cells == CellState.FREE
    dist = {start: 0.0}
    cells = [(c, r) for r in range(g.height) for c in range(g.width) if free[r, c]]
    changed = True
    while changed:
        changed = False
        for c, r in cells:
            if (c, r) not in dist:
                continue
            for dc, dr in STEPS:
                cc, rr = c + dc, r + dr
                if 0 <= cc < g.width and 0 <= rr < g.height and free[rr, cc]:
                    nd = dist[(c, r)] + (math.sqrt(2) if dc and dr else 1.0)
                    if penalty is not None:
                        nd += penalty[rr, cc]
                    if nd < dist.get((cc, rr), math.inf) - 1e-12:
                        dist[(cc, rr)] = nd
                        changed = True
    return dist


def reachable_partition(g, start):
    """Reference clusters: frontier cells reachable from ``start``, split by 8-connectivity."""
    reach = free_bfs(g, start) >= 0
    mask = np.zeros(reach.shape, dtype=bool)
    for c, r in detect_frontier_cells(g):
        mask[r, c] = True
    lab, n = ndimage.label(mask & reach, structure=EIGHT)
    return {frozenset((int(c), int(r)) for r, c in np.argwhere(lab == k)) for k in range(1, n + 1)}


def test_fully_explored_no_clusters():
    g, c = plus_corridor()
    assert wfd_detect(g, c) == []


def test_open_corridor_single_cluster():
    g, c = straight_corridor(width=5, open_end=True)
    (cl,) = wfd_detect(g, c)
    assert cl.size == 5 and {x for x, _ in cl.cells} == {g.width - 2}


def test_wfd_requires_free_start():
    g, _ = plus_corridor()
    with pytest.raises(ValueError):
        wfd_detect(g, (0, 0))


@settings(max_examples=100)
@given(st.integers(0, 2 ** 32 - 1))
def test_wfd_matches_reference_partition(seed):
    rng = np.random.default_rng(seed)
    g = random_grid(rng, 30, 30, p=(0.6, 0.15, 0.25))
    free = np.argwhere(g.cells == CellState.FREE)
    r, c = free[rng.integers(len(free))]
    clusters = wfd_detect(g, (int(c), int(r)))
    got = [frozenset(cl.cells) for cl in clusters]
    assert len(got) == len(set(got))
    assert set(got) == reachable_partition(g, (int(c), int(r)))
    for cl in clusters:
        assert cl.size == len(cl.cells) and cl.centroid_cell in cl.cells


def cluster(i, size, dist):
    return FrontierCluster(i, [(k, 0) for k in range(size)], (0, 0), bfs_distance=dist)


def test_fe_select_examples():
    one = cluster(0, 3, 5.0)
    assert fe_select([one], (0, 0)) is one
    a, b = cluster(0, 5, 10.0), cluster(1, 9, 10.0)
    assert fe_select([a, b], (0, 0)) is b
    with pytest.raises(LookupError):
        fe_select([], (0, 0))


@given(st.lists(st.tuples(st.integers(1, 30), st.integers(0, 60)), min_size=1, max_size=10),
       st.floats(0, 3), st.floats(0, 3))
def test_fe_select_argmax(entries, ws, wd):
    cls = [cluster(i, s, float(d)) for i, (s, d) in enumerate(entries)]
    w = FEWeights(ws, wd)
    best = cls[0]
    for cl in cls[1:]:
        u, ub = ws * cl.size - wd * cl.bfs_distance, ws * best.size - wd * best.bfs_distance
        if u > ub:
            best = cl
    assert fe_select(cls, (0, 0), w) is best


def test_grid_plan_examples():
    g = OccupancyGrid(5, 5, 0.05, (0, 0), np.zeros((5, 5), dtype=np.uint8))
    assert grid_plan(g, (1, 1), (2, 1)) == [(1, 1), (2, 1)]
    g.cells[:, 2] = CellState.OCCUPIED
    assert grid_plan(g, (0, 0), (4, 4)) is None
    g.cells[2, 2] = CellState.UNKNOWN
    assert grid_plan(g, (0, 0), (4, 4)) is None
    with pytest.raises(ValueError):
        grid_plan(g, (2, 0), (0, 0))


@settings(max_examples=60)
@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_grid_plan_matches_bellman_ford(seed, with_penalty):
    rng = np.random.default_rng(seed)
    g = random_grid(rng, 20, 20, p=(0.7, 0.2, 0.1))
    free = [(int(c), int(r)) for r, c in np.argwhere(g.cells == CellState.FREE)]
    start = free[rng.integers(len(free))]
    goal = free[rng.integers(len(free))]
    pen = clearance_penalty(g, 0.06, 2.5) if with_penalty else None
    truth = bellman_ford(g, start, pen)
    stats = PlanStats()
    path = grid_plan(g, start, goal, stats, pen)
    if goal not in truth:
        assert path is None
        return
    assert path[0] == start and path[-1] == goal
    for a, b in zip(path[:-1], path[1:]):
        assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1
        assert g.cells[b[1], b[0]] == CellState.FREE
    cost = path_cost(path) + (sum(pen[r, c] for c, r in path[1:]) if pen is not None else 0.0)
    assert cost == pytest.approx(truth[goal], rel=1e-9)
    assert 0 < stats.expansions <= len(free)


def test_grid_plan_agrees_with_networkx(rng):
    g = random_grid(rng, 50, 50, p=(0.75, 0.25, 0.0))
    G = nx.Graph()
    for r, c in np.argwhere(g.cells == CellState.FREE):
        for dc, dr in STEPS:
            cc, rr = c + dc, r + dr
            if 0 <= cc < 50 and 0 <= rr < 50 and g.cells[rr, cc] == CellState.FREE:
                G.add_edge((int(c), int(r)), (int(cc), int(rr)), weight=math.sqrt(2) if dc and dr else 1.0)
    nodes = sorted(G.nodes)
    start, goal = nodes[0], nodes[-1]
    path = grid_plan(g, start, goal)
    if nx.has_path(G, start, goal):
        assert path_cost(path) == pytest.approx(nx.dijkstra_path_length(G, start, goal), rel=1e-12)
    else:
        assert path is None


def test_clearance_penalty():
    g = OccupancyGrid(10, 1, 0.05, (0, 0), np.zeros((1, 10), dtype=np.uint8))
    g.cells[0, 0] = CellState.OCCUPIED
    pen = clearance_penalty(g, 0.15, 5.0)
    assert list(pen[0]) == [5.0, 5.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
