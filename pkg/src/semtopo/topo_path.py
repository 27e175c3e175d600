"""Cost-pruned search over the semantic topometric graph.

Partial paths grow area by area from the robot.  Their cost is kept in
normalized units, ``w_v * v + d / L_path``, so the per-area best-cost table
prunes exactly what the final score would reject.  The semantic gain of a
frontier is only subtracted once a FrontierPathway is reached.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .frontier_goal import CostBreakdown, GoalWeights, score
from .semantic_topo import AreaClass, SemanticTopometricMap, subpolyline
from .world import normalize_angle

LOOKAHEAD = 0.3  # m along the path used for the initial heading


@dataclass(frozen=True)
class SearchOptions:
    order: str = "cost"          # "cost" pops the cheapest partial path, "lifo" the newest
    lookahead: float = LOOKAHEAD

    def __post_init__(self):
        if self.order not in ("cost", "lifo"):
            raise ValueError("order must be 'cost' or 'lifo'")


@dataclass
class TopoPath:
    area_sequence: List[int]
    waypoints: np.ndarray
    length: float
    terminal_goal: int
    initial_turn: float
    cost: Optional[CostBreakdown] = None

    @property
    def score(self) -> float:
        return self.cost.total


@dataclass
class SearchStats:
    popped: int = 0
    pushed: int = 0
    pruned: int = 0

    @property
    def ops(self) -> int:
        return self.popped + self.pushed + self.pruned


@dataclass
class _Partial:
    cost: float
    areas: Tuple[int, ...]
    entries: Tuple[int, ...]     # port each area was entered through (-1: robot area)
    exit_port: int               # port of the robot area the path leaves by


def polyline_length(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    return float(np.hypot(*np.diff(pts, axis=0).T).sum())


def point_along(pts: np.ndarray, s: float) -> np.ndarray:
    """Point at arc length ``s`` from the start of ``pts`` (clamped to the end)."""
    seg = np.hypot(*np.diff(pts, axis=0).T) if len(pts) > 1 else np.zeros(0)
    acc = 0.0
    for k, ln in enumerate(seg):
        if acc + ln >= s and ln > 0:
            return pts[k] + (s - acc) / ln * (pts[k + 1] - pts[k])
        acc += ln
    return pts[-1]


def _dedupe(pts: np.ndarray) -> np.ndarray:
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(np.abs(np.diff(pts, axis=0)) > 0, axis=1)
    return pts[keep]


def initial_turn(pts: np.ndarray, heading: float, lookahead: float = LOOKAHEAD) -> float:
    """|angle| between ``heading`` and the bearing to the point ``lookahead`` along ``pts``.

    ``pts[0]`` is the robot position.  Zero when the path never leaves it.
    """
    start = pts[0]
    target = point_along(pts, lookahead)
    dx, dy = target[0] - start[0], target[1] - start[1]
    if dx == 0 and dy == 0:
        return 0.0
    return abs(normalize_angle(math.atan2(dy, dx) - heading))


def _area_points(smap: SemanticTopometricMap, aid: int, entry: int) -> np.ndarray:
    a = smap.areas[aid]
    if a.is_node:
        return a.points
    return a.points if entry == 0 else a.points[::-1]


class _Context:
    def __init__(self, smap: SemanticTopometricMap, x: float, y: float, heading: float,
                 weights: GoalWeights, opts: SearchOptions):
        anchor = smap.locate(x, y)
        if anchor is None:
            raise ValueError("robot is outside every area of the map")
        self.smap = smap
        self.anchor = anchor
        self.heading = heading
        self.weights = weights
        self.opts = opts
        self.L = smap.avg_intersection_path_len
        self.lead = polyline_length(anchor.lead_in)

    def robot_leg(self, exit_port: Optional[int]) -> np.ndarray:
        """Lead-in plus the part of the robot's own area up to ``exit_port``."""
        area = self.smap.areas[self.anchor.area_id]
        if area.is_node or exit_port is None:
            return self.anchor.lead_in
        part = subpolyline(area, self.anchor.arc, area.port_arc(exit_port))
        return np.vstack([self.anchor.lead_in, part])

    def seed_turn(self, exit_port, nb, entry) -> float:
        pts = [self.robot_leg(exit_port)]
        if nb is not None:
            pts.append(_area_points(self.smap, nb, entry))
        return initial_turn(_dedupe(np.vstack(pts)), self.heading, self.opts.lookahead)

    def waypoints(self, p: _Partial) -> np.ndarray:
        pts = [self.robot_leg(p.exit_port)]
        for aid, entry in zip(p.areas[1:], p.entries[1:]):
            pts.append(_area_points(self.smap, aid, entry))
        return _dedupe(np.vstack(pts))

    def finish(self, p: _Partial) -> TopoPath:
        smap = self.smap
        wp = self.waypoints(p)
        nb = p.areas[1] if len(p.areas) > 1 else None
        v = self.seed_turn(p.exit_port, nb, p.entries[1] if nb is not None else None)
        goal = smap.goals[smap.areas[p.areas[-1]].goal_id]
        path = TopoPath(list(p.areas), wp, polyline_length(wp), goal.id, v)
        path.cost = score(goal, path, self.weights, self.L)
        return path


def _search(smap: SemanticTopometricMap, x: float, y: float, heading: float,
            weights: GoalWeights, opts: SearchOptions, stats: SearchStats) -> Dict[int, TopoPath]:
    ctx = _Context(smap, x, y, heading, weights, opts)
    areas = smap.areas
    start = ctx.anchor.area_id
    robot_area = areas[start]
    a_cost = np.full(len(areas), np.inf)
    a_cost[start] = 0.0
    frontier: list = []
    counter = 0
    best: Dict[int, Tuple[float, _Partial]] = {}

    def push(p: _Partial):
        nonlocal counter
        stats.pushed += 1
        counter += 1
        key = p.cost if opts.order == "cost" else -counter
        heapq.heappush(frontier, (key, counter, p))

    def offer_candidate(p: _Partial):
        gid = areas[p.areas[-1]].goal_id
        if gid is None:
            return
        total = p.cost - _gain(smap, gid, weights)
        if gid not in best or total < best[gid][0]:
            best[gid] = (total, p)

    # seeds: every neighbour of the robot's area, leaving through the port it hangs on
    seeds = []
    for nb, my_port, their_port in robot_area.neighbors:
        if robot_area.is_node:
            partial, exit_port = 0.0, None
        else:
            partial, exit_port = abs(robot_area.port_arc(my_port) - ctx.anchor.arc), my_port
        enter = 0.0 if areas[nb].is_node else areas[nb].length
        v = ctx.seed_turn(exit_port, nb, their_port)
        cost = weights.w_v * v + (ctx.lead + partial + enter) / ctx.L
        seeds.append(_Partial(cost, (start, nb), (-1, their_port), exit_port if exit_port is not None else -1))
    if robot_area.cls == AreaClass.FRONTIER_PATHWAY:
        # already on a frontier pathway: its own frontier is a candidate too
        v = ctx.seed_turn(1, None, None)
        rest = robot_area.length - ctx.anchor.arc
        own = _Partial(weights.w_v * v + (ctx.lead + rest) / ctx.L, (start,), (-1,), 1)
        stats.pushed += 1
        offer_candidate(own)
    for p in seeds:
        nb = p.areas[-1]
        if a_cost[nb] <= p.cost:
            stats.pruned += 1
            continue
        a_cost[nb] = p.cost
        push(p)

    while frontier:
        _, _, p = heapq.heappop(frontier)
        stats.popped += 1
        aid = p.areas[-1]
        if p.cost > a_cost[aid]:
            continue   # superseded after it was queued
        area = areas[aid]
        if area.cls == AreaClass.FRONTIER_PATHWAY:
            offer_candidate(p)
            continue
        entry = p.entries[-1]
        for nb, my_port, their_port in area.neighbors:
            if not area.is_node and my_port == entry:
                continue
            if nb in p.areas:
                continue
            step = 0.0 if areas[nb].is_node else areas[nb].length
            cost = p.cost + step / ctx.L
            if a_cost[nb] <= cost:
                stats.pruned += 1
                continue
            a_cost[nb] = cost
            push(_Partial(cost, p.areas + (nb,), p.entries + (their_port,), p.exit_port))

    out = {}
    for gid, (_, p) in sorted(best.items()):
        out[gid] = ctx.finish(p)
    return out


def _gain(smap, gid, weights):
    g = smap.goals[gid]
    return weights.w_p * g.p_l + weights.w_I * (g.openings + g.frontier_pathways)


def find_all_frontier_paths(smap: SemanticTopometricMap, robot, weights: GoalWeights = GoalWeights(),
                            opts: SearchOptions = SearchOptions(),
                            stats: Optional[SearchStats] = None) -> List[TopoPath]:
    """Cheapest path to every reachable frontier goal, from one traversal.

    ``robot`` is a :class:`RobotState` or a ``WorldPose``.
    """
    pose = getattr(robot, "pose", robot)
    stats = stats if stats is not None else SearchStats()
    paths = _search(smap, pose.x, pose.y, pose.theta, weights, opts, stats)
    return [paths[g] for g in sorted(paths)]


def find_optimal_path(smap: SemanticTopometricMap, robot, weights: GoalWeights = GoalWeights(),
                      opts: SearchOptions = SearchOptions(),
                      stats: Optional[SearchStats] = None) -> Optional[TopoPath]:
    paths = find_all_frontier_paths(smap, robot, weights, opts, stats)
    if not paths:
        return None
    return min(paths, key=lambda p: (p.cost.total, p.cost.d, p.terminal_goal))


def waypoints_csv(path: TopoPath) -> str:
    lines = ["x,y"] + [f"{x:.6f},{y:.6f}" for x, y in path.waypoints]
    return "\n".join(lines) + "\n"
