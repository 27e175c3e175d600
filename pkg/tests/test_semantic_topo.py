import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from semtopo.baseline_fe import free_bfs
from semtopo.bench.config import ScenarioConfig
from semtopo.robot_sim import SimConfig, integrate_scan, raycast
from semtopo.semantic_topo import (AreaClass, SegmentParams, classify_junctions, detect_frontier_cells,
                                   export_graph_text, segment, skeletonize)
from semtopo.world import CellState, OccupancyGrid, WorldPose

from conftest import plus_corridor, random_grid, straight_corridor

EIGHT = np.ones((3, 3), dtype=bool)


def brute_frontier(g: OccupancyGrid):
    out = set()
    for r in range(g.height):
        for c in range(g.width):
            if g.cells[r, c] != CellState.FREE:
                continue
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if (dr or dc) and 0 <= rr < g.height and 0 <= cc < g.width \
                            and g.cells[rr, cc] == CellState.UNKNOWN:
                        out.add((c, r))
    return out


# -- frontier cells -----------------------------------------------------

def test_frontier_fully_explored_is_empty():
    g, _ = plus_corridor()
    assert detect_frontier_cells(g) == set()


def test_frontier_single_free_cell():
    cells = np.full((3, 3), CellState.UNKNOWN, dtype=np.uint8)
    cells[1, 1] = CellState.FREE
    assert detect_frontier_cells(OccupancyGrid(3, 3, 0.05, (0, 0), cells)) == {(1, 1)}


def test_frontier_half_explored(rng):
    g = random_grid(rng, 10, 10)
    g.cells[:, 5:] = CellState.UNKNOWN
    assert detect_frontier_cells(g) == brute_frontier(g)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 30), st.integers(1, 30))
def test_frontier_matches_definition(seed, w, h):
    g = random_grid(np.random.default_rng(seed), w, h)
    assert detect_frontier_cells(g) == brute_frontier(g)


# -- skeleton -----------------------------------------------------------

def test_skeleton_thin_corridor_is_itself():
    m = np.zeros((5, 20), dtype=bool)
    m[2, 1:19] = True
    assert np.array_equal(skeletonize(m), m)


def test_skeleton_wide_corridor_centreline():
    m = np.zeros((9, 40), dtype=bool)
    m[2:7, 1:39] = True
    sk = skeletonize(m)
    assert np.all(sk <= m)
    assert ndimage.label(sk, structure=EIGHT)[1] == 1
    cols = np.nonzero(sk)[1]
    assert np.all(np.bincount(cols)[cols.min():] == 1)   # one pixel per column
    counts = ndimage.convolve(sk.astype(int), EIGHT.astype(int), mode="constant") - sk
    assert counts[sk].max() <= 2


def test_skeleton_keeps_components():
    m = np.zeros((12, 30), dtype=bool)
    m[2:9, 2:12] = True
    m[2:9, 16:28] = True
    assert ndimage.label(skeletonize(m), structure=EIGHT)[1] == 2


@given(st.integers(0, 2 ** 32 - 1))
def test_skeleton_preserves_component_count(seed):
    rng = np.random.default_rng(seed)
    m = ndimage.binary_opening(rng.random((30, 30)) < 0.7)
    if not m.any():
        return
    sk = skeletonize(m)
    assert np.all(sk <= m)
    lab, n = ndimage.label(m, structure=EIGHT)
    assert set(np.unique(lab[sk])) == set(range(1, n + 1))
    assert ndimage.label(sk, structure=EIGHT)[1] == n


def test_junction_examples():
    t = np.zeros((11, 11), dtype=bool)
    t[5, 1:10] = True
    t[1:5, 5] = True
    js = classify_junctions(t)
    assert len(js) == 1 and js[0].degree == 3
    line = np.zeros((5, 11), dtype=bool)
    line[2, 1:10] = True
    assert classify_junctions(line) == []
    plus = np.zeros((11, 11), dtype=bool)
    plus[5, 1:10] = True
    plus[1:10, 5] = True
    js = classify_junctions(plus)
    assert len(js) == 1 and js[0].degree == 4


def test_junction_degree_matches_pixel_neighbours():
    plus = np.zeros((11, 11), dtype=bool)
    plus[5, 1:10] = True
    plus[1:10, 5] = True
    (j,) = classify_junctions(plus)
    c, r = j.anchor
    assert plus[r - 1:r + 2, c - 1:c + 2].sum() - 1 == j.degree


# -- fixtures -----------------------------------------------------------

@pytest.mark.parametrize("width", [1, 5])
def test_plus_corridor(width):
    g, c = plus_corridor(width=width)
    m = segment(g, c)
    assert m.class_counts() == {"Intersection": 1, "Pathway": 4, "DeadEnd": 4, "FrontierPathway": 0}
    (inter,) = [a for a in m.areas if a.cls == AreaClass.INTERSECTION]
    assert inter.openings == 4
    assert m.goals == []


@pytest.mark.parametrize("width", [1, 5])
def test_straight_corridor(width):
    g, c = straight_corridor(width=width)
    assert segment(g, c).class_counts() == {"Intersection": 0, "Pathway": 1, "DeadEnd": 2,
                                            "FrontierPathway": 0}


def test_corridor_to_unknown():
    g, c = straight_corridor(width=5, open_end=True)
    m = segment(g, c)
    assert m.count(AreaClass.FRONTIER_PATHWAY) == 1
    (goal,) = m.goals
    fr = detect_frontier_cells(g)
    assert set(goal.frontier_cells) <= fr and len(goal.frontier_cells) == 5
    assert goal.target_cell in fr
    assert goal.target_cell[0] == g.width - 2          # right at the Unknown boundary
    assert goal.nearest_intersection is None and goal.p_l == 0.0


def test_thin_corridor_to_unknown_with_single_cell_frontiers():
    g, c = straight_corridor(width=1, open_end=True)
    assert segment(g, c).goals == []                                  # below the default size
    m = segment(g, c, SegmentParams(min_frontier_size=1))
    assert m.count(AreaClass.FRONTIER_PATHWAY) == 1


def test_intersection_with_one_frontier_arm():
    g, c = plus_corridor(width=5, open_arm=True)
    m = segment(g, c)
    (inter,) = [a for a in m.areas if a.cls == AreaClass.INTERSECTION]
    assert inter.openings == 4 and inter.connected_frontier_pathways == 1
    (goal,) = m.goals
    assert goal.nearest_intersection == inter.id
    assert (goal.openings, goal.frontier_pathways) == (4, 1)
    fp = m.areas[goal.area_id]
    assert goal.p_l == pytest.approx(fp.length)


def test_segment_errors():
    g, _ = plus_corridor()
    with pytest.raises(ValueError):
        segment(g, (0, 0))


# -- invariants on partially explored mazes ------------------------------

def _partial_maze(seed):
    gt = ScenarioConfig(map="maze_a").load_map()
    rng = np.random.default_rng(seed)
    explored = OccupancyGrid.unknown_like(gt)
    reach = free_bfs(gt, (7, 7)) >= 0
    clear = ndimage.distance_transform_edt(gt.cells != CellState.OCCUPIED)
    ok = np.argwhere(reach & (clear >= 3))
    first = None
    pose = None
    cfg = SimConfig(lidar_max_range=float(rng.uniform(0.8, 3.5)))
    for _ in range(int(rng.integers(1, 6))):
        if pose is None:
            r, c = ok[rng.integers(len(ok))]
        else:   # next pose somewhere already seen
            seen = np.argwhere((explored.cells == CellState.FREE) & (clear >= 3))
            r, c = seen[rng.integers(len(seen))]
        pose = WorldPose((c + 0.5) * 0.05, (r + 0.5) * 0.05, 0.0)
        first = first or (int(c), int(r))
        integrate_scan(explored, pose, raycast(gt, pose, cfg))
    return explored, first


@settings(max_examples=40)
@given(st.integers(0, 2 ** 32 - 1))
def test_segmentation_invariants(seed):
    explored, cell = _partial_maze(seed)
    m = segment(explored, cell)
    areas = m.areas

    # partition: disjoint cell sets covering the robot's free component
    seen = set()
    for a in areas:
        s = set(a.cells)
        assert not (s & seen)
        seen |= s
    comp = free_bfs(explored, cell) >= 0
    assert seen == set(zip(*np.nonzero(comp)[::-1]))
    assert all(explored.cells[r, c] == CellState.FREE for c, r in seen)

    # adjacency symmetric, references valid
    for a in areas:
        for nb, mine, theirs in a.neighbors:
            assert 0 <= nb < len(areas)
            assert (a.id, theirs, mine) in areas[nb].neighbors
    for e in m.graph.edges:
        for n in (e.u, e.v):
            assert n == -1 or n in m.graph.nodes

    # class rules
    for a in areas:
        nbs = a.neighbor_ids()
        if a.cls == AreaClass.INTERSECTION:
            assert a.openings >= 3 and a.openings == len(nbs)
            assert a.connected_frontier_pathways == sum(areas[n].cls == AreaClass.FRONTIER_PATHWAY
                                                        for n in nbs)
        elif a.cls == AreaClass.DEAD_END:
            assert len(a.neighbors) <= 1
        elif a.cls == AreaClass.PATHWAY and not a.is_node:
            assert len(a.neighbors) == 2

    # one goal per frontier pathway, each reachable and made of frontier cells
    fps = m.frontier_paths
    assert sorted(g.area_id for g in m.goals) == sorted(fps)
    assert all(areas[i].goal_id is not None for i in fps)
    fr = detect_frontier_cells(explored)
    for g in m.goals:
        assert len(g.frontier_cells) >= 3 and set(g.frontier_cells) <= fr
        assert comp[g.target_cell[1], g.target_cell[0]]
        assert g.p_l >= 0
        if g.nearest_intersection is not None:
            assert areas[g.nearest_intersection].cls == AreaClass.INTERSECTION

    # every reachable frontier cluster of at least three cells has exactly one goal
    fmask = np.zeros(comp.shape, dtype=bool)
    for c, r in fr:
        fmask[r, c] = True
    lab, _ = ndimage.label(comp & fmask, structure=EIGHT)
    sizes = np.bincount(lab.ravel())[1:]
    assert len(m.goals) == int(np.count_nonzero(sizes >= 3))

    if any(a.cls == AreaClass.PATHWAY and not a.is_node for a in areas):
        assert m.avg_intersection_path_len > 0

    # stability
    assert export_graph_text(segment(explored, cell)) == export_graph_text(m)
