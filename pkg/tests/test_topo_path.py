import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semtopo.frontier_goal import GoalWeights
from semtopo.robot_sim import RobotState
from semtopo.semantic_topo import AreaClass, SkeletonGraph, TerminalInfo, assemble, segment
from semtopo.topo_path import (SearchOptions, SearchStats, find_all_frontier_paths, find_optimal_path,
                               initial_turn, polyline_length, waypoints_csv)
from semtopo.world import WorldPose

from conftest import plus_corridor, straight_corridor
from graphs import brute_force, geometric_distances, random_map, random_robot

weights_st = st.builds(GoalWeights, st.floats(0, 6), st.floats(0, 1), st.floats(0, 1))


def linear_map():
    g = SkeletonGraph()
    a = g.add_node("end", (0, 0))
    b = g.add_node("junction", (2, 0))
    t = g.add_node("terminal", (2, 3))
    g.add_edge(a, b, [(0, 0), (1, 0), (2, 0)])
    g.add_edge(b, t, [(2, 0), (2, 3)])
    return assemble(g, {t: TerminalInfo([])})


def test_linear_unique_path():
    m = linear_map()
    p = find_optimal_path(m, WorldPose(0.5, 0.0, 0.0))
    assert [m.areas[i].cls for i in p.area_sequence] == [AreaClass.PATHWAY, AreaClass.DEAD_END,
                                                         AreaClass.FRONTIER_PATHWAY]
    assert p.length == pytest.approx(1.5 + 3.0)
    assert p.length == pytest.approx(polyline_length(p.waypoints), rel=1e-9)
    assert waypoints_csv(p).startswith("x,y\n0.500000,0.000000\n")


def diamond():
    """Start S, middle junction M, frontier behind M; S-M via a 4 m branch or a 6 m branch."""
    g = SkeletonGraph()
    s = g.add_node("junction", (0, 0))
    m = g.add_node("junction", (4, 0))
    t = g.add_node("terminal", (5, 0))
    g.add_edge(s, m, [(0, 0), (4, 0)])
    g.add_edge(s, m, [(0, 0), (0, 1), (4, 1), (4, 0)])
    g.add_edge(m, t, [(4, 0), (5, 0)])
    tail = g.add_node("end", (-1, 0))
    g.add_edge(s, tail, [(0, 0), (-1, 0)])
    return assemble(g, {t: TerminalInfo([])})


def test_diamond_prunes_long_route():
    m = diamond()
    branches = sorted(a.length for a in m.areas if a.cls == AreaClass.PATHWAY and not a.is_node)
    assert branches == pytest.approx([1.0, 4.0, 6.0])
    stats = SearchStats()
    # no turn cost, so only the branch lengths decide at the shared junction
    p = find_optimal_path(m, WorldPose(0.0, 0.0, 0.0), GoalWeights(0.0, 0.2, 0.1), stats=stats)
    assert p.length == pytest.approx(5.0)
    assert stats.pruned >= 1


def test_no_frontiers():
    g, c = plus_corridor()
    m = segment(g, c)
    pose = WorldPose(*g.cell_to_world(c), 0.0)
    assert find_optimal_path(m, pose) is None
    assert find_all_frontier_paths(m, pose) == []


def test_single_frontier_consistency():
    g, c = straight_corridor(open_end=True)
    m = segment(g, c)
    robot = RobotState(WorldPose(*g.cell_to_world(c), 0.0))
    (only,) = find_all_frontier_paths(m, robot)
    best = find_optimal_path(m, robot)
    assert only.terminal_goal == best.terminal_goal and only.cost == best.cost
    assert only.initial_turn == pytest.approx(0.0, abs=1e-9)


def test_robot_outside_map():
    g, c = plus_corridor()
    m = segment(g, c)
    with pytest.raises(ValueError):
        find_optimal_path(m, WorldPose(0.01, 0.01, 0.0))


def test_three_frontiers():
    g = SkeletonGraph()
    j = g.add_node("junction", (0, 0))
    ts = [g.add_node("terminal", p) for p in ((3, 0), (0, 2), (-1, -1))]
    for t in ts:
        g.add_edge(j, t, [(0, 0), g.nodes[t].point])
    m = assemble(g, {t: TerminalInfo([]) for t in ts})
    paths = find_all_frontier_paths(m, WorldPose(0.0, 0.0, 0.0))
    assert len(paths) == 3
    assert sorted(round(p.length, 9) for p in paths) == sorted(round(x, 9) for x in (3, 2, math.sqrt(2)))


def test_initial_turn():
    pts = np.array([(0.0, 0.0), (0.0, 1.0)])
    assert initial_turn(pts, 0.0) == pytest.approx(math.pi / 2)
    assert initial_turn(pts, math.pi) == pytest.approx(math.pi / 2)
    assert initial_turn(np.array([(0.0, 0.0), (-1.0, 0.0)]), 0.0) == pytest.approx(math.pi)
    assert initial_turn(np.array([(1.0, 1.0)]), 0.3) == 0.0


def test_options_validation():
    with pytest.raises(ValueError):
        SearchOptions(order="fifo")


def _draw(seed, max_areas):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        m = random_map(rng, max_areas=max_areas, n_junctions=(1, 3 if max_areas <= 8 else 9))
        if m is not None:
            return m, random_robot(rng, m)
    pytest.skip("no graph within the size limit")


@settings(max_examples=150)
@given(st.integers(0, 2 ** 32 - 1), weights_st, st.sampled_from(["cost", "lifo"]))
def test_matches_brute_force(seed, weights, order):
    m, pose = _draw(seed, 8)
    oracle = brute_force(m, pose, weights)
    stats = SearchStats()
    paths = {p.terminal_goal: p for p in find_all_frontier_paths(m, pose, weights, SearchOptions(order), stats)}
    assert set(paths) == set(oracle)
    for gid, (total, _) in oracle.items():
        assert paths[gid].cost.total == pytest.approx(total, rel=1e-9, abs=1e-9)
    best = find_optimal_path(m, pose, weights, SearchOptions(order))
    assert best.cost.total == pytest.approx(min(t for t, _ in oracle.values()), rel=1e-9, abs=1e-9)
    if order == "cost":
        assert stats.popped <= len(m.areas) ** 2


@settings(max_examples=60)
@given(st.integers(0, 2 ** 32 - 1))
def test_zero_gain_length_matches_dijkstra(seed):
    m, pose = _draw(seed, 50)
    w = GoalWeights(0.0, 0.0, 0.0)
    truth = geometric_distances(m, pose)
    got = {p.terminal_goal: p.length for p in find_all_frontier_paths(m, pose, w)}
    assert set(got) == {g for g, d in truth.items() if d < math.inf}
    for gid, d in got.items():
        assert d == pytest.approx(truth[gid], rel=1e-9)


@settings(max_examples=60)
@given(st.integers(0, 2 ** 32 - 1), weights_st)
def test_path_invariants(seed, weights):
    m, pose = _draw(seed, 20)
    anchor = m.locate(pose.x, pose.y)
    for p in find_all_frontier_paths(m, pose, weights):
        seq = p.area_sequence
        assert seq[0] == anchor.area_id
        assert m.areas[seq[-1]].cls == AreaClass.FRONTIER_PATHWAY
        assert len(set(seq)) == len(seq)
        for a, b in zip(seq[:-1], seq[1:]):
            assert b in m.areas[a].neighbor_ids()
        assert p.length == pytest.approx(polyline_length(p.waypoints), rel=1e-9)
        assert 0 <= p.initial_turn <= math.pi
        assert np.allclose(p.waypoints[0], (pose.x, pose.y))
