"""Exploration loop shared by both strategies.

Each tick: move, scan, integrate.  On a replan trigger the strategy rebuilds
its world model, selects a goal and plans a path, which the potential-field
tracker then follows.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from . import baseline_fe as fe
from .frontier_goal import GoalWeights, rank
from .potential_nav import FieldParams, PathTracker, densify
from .robot_sim import (CollisionError, RobotState, SimConfig, footprint_collides,
                        integrate_scan, predict, raycast, step, wall_clearance)
from .semantic_topo import SegmentParams, frontier_mask, segment
from .topo_path import SearchOptions, SearchStats, find_all_frontier_paths
from .world import Cell, CellState, OccupancyGrid, WorldPose

PM = "PM"
FE = "FE"
COMPLETED = "Completed"
COLLISION = "Collision"
TIMEOUT = "Timeout"


@dataclass(frozen=True)
class ExploreConfig:
    strategy: str = PM
    sim: SimConfig = SimConfig()
    field: FieldParams = FieldParams(min_window=0.25)
    goal: GoalWeights = GoalWeights()
    fe: fe.FEWeights = fe.FEWeights()
    search: SearchOptions = SearchOptions()
    seg: SegmentParams = SegmentParams()
    replan_interval: float = 2.0     # s of sim time
    goal_tolerance: float = 0.10     # m
    timeout: float = 600.0           # s of sim time
    stall_window: float = 10.0       # s without stall_distance of motion -> give up the goal
    stall_distance: float = 0.05     # m
    fe_clearance: float = 0.15       # m; FE paths avoid cells closer than this to walls
    safety_margin: float = 0.01      # m added to the radius for the pre-step check
    keep_clear_reach: float = 0.25   # m; farthest a waypoint is moved away from a wall
    start_jitter: float = 0.02       # m, uniform per axis
    random_heading: bool = True

    def __post_init__(self):
        if self.strategy not in (PM, FE):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.replan_interval <= 0 or self.timeout <= 0 or self.goal_tolerance <= 0:
            raise ValueError("intervals and tolerances must be positive")


@dataclass
class CycleRecord:
    cycle: int
    t: float
    detect_s: float
    select_s: float
    plan_s: float
    detect_ops: int
    select_ops: int
    plan_ops: int
    areas: int
    goals: int


@dataclass
class ExplorationRun:
    strategy: str
    seed: int
    start: WorldPose
    outcome: str = TIMEOUT
    ticks: int = 0
    elapsed_sim_time: float = 0.0
    area_curve: List[Tuple[float, float]] = field(default_factory=list)
    stage_timings: List[CycleRecord] = field(default_factory=list)
    trajectory: List[Tuple[float, float, float, float]] = field(default_factory=list)
    tick_log: List[tuple] = field(default_factory=list)
    score_log: List[tuple] = field(default_factory=list)
    final_map: Optional[OccupancyGrid] = None
    distance_travelled: float = 0.0
    blacklisted: int = 0

    @property
    def final_area(self) -> float:
        return self.area_curve[-1][1] if self.area_curve else 0.0

    @property
    def cycles(self) -> int:
        return len(self.stage_timings)


@dataclass
class _Goal:
    waypoints: np.ndarray
    target: Tuple[float, float]
    cells: List[Cell]


def start_pose(ground_truth: OccupancyGrid, base: WorldPose, seed: int, cfg: ExploreConfig) -> WorldPose:
    """Seeded perturbation of ``base``: random heading and a small position jitter."""
    rng = np.random.default_rng(seed)
    theta = float(rng.uniform(-math.pi, math.pi)) if cfg.random_heading else base.theta
    jx, jy = rng.uniform(-cfg.start_jitter, cfg.start_jitter, size=2) if cfg.start_jitter > 0 else (0.0, 0.0)
    cand = WorldPose(base.x + float(jx), base.y + float(jy), theta)
    if footprint_collides(ground_truth, cand.x, cand.y, cfg.sim.radius):
        cand = WorldPose(base.x, base.y, theta)
    return cand


def reachable_free(ground_truth: OccupancyGrid, start: WorldPose) -> np.ndarray:
    """Mask of ground-truth Free cells 8-connected to the start cell."""
    return fe.free_bfs(ground_truth, ground_truth.pose_to_cell(start)) >= 0


def replan_due(goal_reached: bool, frontier_gone: bool, since_replan: float, interval: float) -> bool:
    return goal_reached or frontier_gone or since_replan >= interval - 1e-9


class Explorer:
    def __init__(self, ground_truth: OccupancyGrid, start: WorldPose, cfg: ExploreConfig, seed: int = 0):
        cell = ground_truth.pose_to_cell(start)
        if cell is None or ground_truth.state(cell) != CellState.FREE:
            raise ValueError("start pose is not in Free space")
        if footprint_collides(ground_truth, start.x, start.y, cfg.sim.radius):
            raise ValueError("start pose collides with the map")
        self.gt = ground_truth
        self.cfg = cfg
        self.explored = OccupancyGrid.unknown_like(ground_truth)
        self.robot = RobotState(start, radius=cfg.sim.radius)
        self.run = ExplorationRun(cfg.strategy, seed, start)
        self.blacklist = np.zeros((ground_truth.height, ground_truth.width), dtype=bool)
        self.goal: Optional[_Goal] = None
        self.tracker: Optional[PathTracker] = None
        self.t = 0.0
        self.last_replan = -math.inf
        self.stall_ref = (0.0, start.x, start.y)
        self.scan = None

    # -- sensing --------------------------------------------------------
    def _sense(self):
        self.scan = raycast(self.gt, self.robot.pose, self.cfg.sim)
        integrate_scan(self.explored, self.robot.pose, self.scan)
        area = self.explored.free_area_m2()
        curve = self.run.area_curve
        if not curve or area != curve[-1][1]:
            curve.append((round(self.t, 6), area))

    def _robot_cell(self) -> Optional[Cell]:
        cell = self.explored.pose_to_cell(self.robot.pose)
        if cell is not None and self.explored.state(cell) == CellState.FREE:
            return cell
        # robot straddling a cell that is not (yet) Free: nearest Free cell
        free = np.argwhere(self.explored.cells == CellState.FREE)
        if len(free) == 0:
            return None
        c, r = cell if cell is not None else (0, 0)
        k = int(np.argmin((free[:, 0] - r) ** 2 + (free[:, 1] - c) ** 2))
        return (int(free[k, 1]), int(free[k, 0]))

    def _blacklisted(self, cells) -> bool:
        if not cells:
            return False
        hits = sum(bool(self.blacklist[r, c]) for c, r in cells)
        return 2 * hits > len(cells)

    def _drop_goal(self):
        if self.goal is not None:
            for c, r in self.goal.cells:
                self.blacklist[r, c] = True
            self.run.blacklisted += 1
        self.goal = None
        self.tracker = None

    # -- planning -------------------------------------------------------
    def _cycle(self) -> bool:
        """Rebuild the model and pick a goal; False when nothing is left to explore."""
        cfg = self.cfg
        cell = self._robot_cell()
        if cell is None:
            return False
        if cfg.strategy == PM:
            return self._cycle_pm(cell)
        return self._cycle_fe(cell)

    def _cycle_pm(self, cell: Cell) -> bool:
        cfg = self.cfg
        t0 = time.perf_counter()
        smap = segment(self.explored, cell, cfg.seg)
        t1 = time.perf_counter()
        stats = SearchStats()
        paths = find_all_frontier_paths(smap, self.robot, cfg.goal, cfg.search, stats) if smap.goals else []
        t2 = time.perf_counter()
        scored = [(smap.goals[p.terminal_goal], p.cost, p) for p in paths
                  if not self._blacklisted(smap.goals[p.terminal_goal].frontier_cells)]
        order = rank([(g, c) for g, c, _ in scored])
        t3 = time.perf_counter()
        comp_cells = int(np.count_nonzero(smap.area_of_cell >= 0))
        self.run.stage_timings.append(CycleRecord(
            len(self.run.stage_timings), round(self.t, 6), t1 - t0, t3 - t2, t2 - t1,
            comp_cells, len(scored), stats.ops, len(smap.areas), len(smap.goals)))
        cyc = len(self.run.stage_timings) - 1
        if not order:
            return False
        best = order[0][0]
        for g, c in order:
            self.run.score_log.append((cyc, round(self.t, 6), g.id, c.d, c.v, g.p_l, g.openings,
                                       g.frontier_pathways, c.c_metric, c.g_semantic, c.total,
                                       int(g.id == best.id)))
        path = next(p for g, _, p in scored if g.id == best.id)
        pts = self._keep_clear(path.waypoints)
        self.goal = _Goal(pts, tuple(pts[-1]), list(best.frontier_cells))
        self.tracker = PathTracker(pts, cfg.field)
        return True

    def _cycle_fe(self, cell: Cell) -> bool:
        cfg = self.cfg
        t0 = time.perf_counter()
        clusters = fe.wfd_detect(self.explored, cell)
        clusters = [c for c in clusters
                    if c.size >= cfg.seg.min_frontier_size and not self._blacklisted(c.cells)]
        t1 = time.perf_counter()
        chosen = fe.fe_select(clusters, cell, cfg.fe) if clusters else None
        t2 = time.perf_counter()
        pstats = fe.PlanStats()
        cells_path = None
        if chosen is not None:
            penalty = fe.clearance_penalty(self.explored, cfg.fe_clearance) if cfg.fe_clearance > 0 else None
            cells_path = fe.grid_plan(self.explored, cell, chosen.centroid_cell, pstats, penalty)
        t3 = time.perf_counter()
        visited = int(np.count_nonzero(self.explored.cells == CellState.FREE))
        self.run.stage_timings.append(CycleRecord(
            len(self.run.stage_timings), round(self.t, 6), t1 - t0, t2 - t1, t3 - t2,
            visited, len(clusters), pstats.expansions, 0, len(clusters)))
        if chosen is None:
            return False
        # the goal is committed before planning; an unreachable one costs this cycle
        self.goal = _Goal(np.empty((0, 2)), self.explored.cell_to_world(chosen.centroid_cell),
                          list(chosen.cells))
        if cells_path is None:
            self._drop_goal()
            return True
        pts = self._keep_clear(np.array([(self.robot.pose.x, self.robot.pose.y)] +
                                        [self.explored.cell_to_world(c) for c in cells_path[1:]]))
        self.goal.waypoints = pts
        self.goal.target = tuple(pts[-1])
        self.tracker = PathTracker(pts, cfg.field)
        return True

    # -- main loop ------------------------------------------------------
    def _frontier_gone(self, fmask) -> bool:
        return bool(self.goal and self.goal.cells and not any(fmask[r, c] for c, r in self.goal.cells))

    def _goal_reached(self) -> bool:
        if self.goal is None:
            return False
        gx, gy = self.goal.target
        return math.hypot(self.robot.pose.x - gx, self.robot.pose.y - gy) <= self.cfg.goal_tolerance

    def _stalled(self) -> bool:
        t_ref, x_ref, y_ref = self.stall_ref
        p = self.robot.pose
        if math.hypot(p.x - x_ref, p.y - y_ref) >= self.cfg.stall_distance:
            self.stall_ref = (self.t, p.x, p.y)
            return False
        return self.t - t_ref >= self.cfg.stall_window

    def execute(self, log_ticks: bool = True) -> ExplorationRun:
        cfg, run = self.cfg, self.run
        sim = cfg.sim
        self._sense()
        need = True
        while True:
            if need:
                if self._goal_reached() and not self._frontier_gone(frontier_mask(self.explored)):
                    self._drop_goal()   # standing on it and it is still a frontier: unobservable
                self.last_replan = self.t
                before = self.goal.target if self.goal else None
                if not self._cycle():
                    run.outcome = COMPLETED
                    break
                if self.goal is None or self.goal.target != before:
                    self.stall_ref = (self.t, self.robot.pose.x, self.robot.pose.y)
            if self.t >= cfg.timeout - 1e-9:
                run.outcome = TIMEOUT
                break
            if self.tracker is not None:
                (v, w), gp, fvec = self.tracker.step(self.robot, self.scan, self.explored,
                                                     (sim.v_max, sim.w_max), self._sight_mask())
            else:
                v, w, gp, fvec = 0.0, 0.0, None, (0.0, 0.0)
            v, w = self._safe_command(v, w)
            prev = self.robot.pose
            try:
                self.robot = step(self.robot, (v, w), sim.dt, self.gt, sim.v_max, sim.w_max)
            except CollisionError as exc:
                self.robot = exc.state
                run.outcome = COLLISION
                self._advance(prev, v, w, gp, fvec, log_ticks)
                break
            self._advance(prev, v, w, gp, fvec, log_ticks)
            self._sense()
            fmask = frontier_mask(self.explored) if self.goal else None
            gone = fmask is not None and self._frontier_gone(fmask)
            reached = self._goal_reached()
            if self._stalled():
                self._drop_goal()
                need = True
            else:
                need = self.goal is None or replan_due(reached, gone, self.t - self.last_replan,
                                                        cfg.replan_interval)
        run.elapsed_sim_time = round(self.t, 6)
        run.final_map = self.explored
        return run

    def _sight_mask(self) -> np.ndarray:
        """Cells a goal point may not be seen through: Unknown, or tighter than the footprint.

        The clearance bound never exceeds the robot's own, so it can always
        see out of the spot it is in.
        """
        g = self.explored
        clear = ndimage.distance_transform_edt(g.cells != CellState.OCCUPIED) * g.resolution
        need = self.robot.radius + g.resolution / 2 + self.cfg.safety_margin
        cell = g.pose_to_cell(self.robot.pose)
        if cell is not None:
            need = min(need, clear[cell[1], cell[0]])
        return (clear < need) | (g.cells == CellState.UNKNOWN)

    def _keep_clear(self, pts: np.ndarray) -> np.ndarray:
        """Move waypoints that sit too close to known walls onto the nearest roomy Free cell.

        Skeleton branches that end at a frontier often run along an unseen wall
        face; the robot cannot drive them, but a point a few cells off it can
        see the face.  The first point (the robot) is never moved.
        """
        g = self.explored
        roomy = ~self._sight_mask() & (g.cells == CellState.FREE)
        if len(pts) < 2 or not roomy.any():
            return pts
        dist, (ri, ci) = ndimage.distance_transform_edt(~roomy, return_indices=True)
        reach = self.cfg.keep_clear_reach / g.resolution
        out = [pts[0]]
        for x, y in densify(pts, g.resolution)[1:]:
            cell = g.world_to_cell(x, y)
            if cell is not None and 0 < dist[cell[1], cell[0]] <= reach:
                r, c = ri[cell[1], cell[0]], ci[cell[1], cell[0]]
                x, y = g.cell_to_world((int(c), int(r)))
            if math.hypot(x - out[-1][0], y - out[-1][1]) > 1e-9:
                out.append((x, y))
        return np.array(out, dtype=float) if len(out) > 1 else pts

    def _unsafe(self, v: float, w: float, pose: Optional[WorldPose] = None) -> bool:
        """Next pose inside the safety margin of a known wall, unless it moves away from it."""
        pose = pose or self.robot.pose
        need = self.robot.radius + self.cfg.safety_margin
        p = predict(pose, v, w, self.cfg.sim.dt)
        after = wall_clearance(self.explored, p.x, p.y, need)
        if after >= need:
            return False
        return after <= self.robot.radius or after <= wall_clearance(self.explored, pose.x, pose.y, need)

    def _safe_command(self, v: float, w: float) -> Tuple[float, float]:
        """Closest command to (v, w) whose next pose keeps clear of known walls.

        Tries the commanded speed with the nearest safe turn rate, then half
        speed.  If no step is safe the robot turns in place toward the nearest
        heading that has one, which makes it slide along walls instead of
        pressing into them.
        """
        if v <= 0 or not self._unsafe(v, w):
            return v, w
        sim = self.cfg.sim
        rates = sorted(np.linspace(-sim.w_max, sim.w_max, 21), key=lambda c: (abs(c - w), c))
        for speed in (v, v / 2):
            for c in rates:
                if not self._unsafe(speed, float(c)):
                    return speed, float(c)
        p = self.robot.pose
        turns = sorted(np.linspace(-math.pi, math.pi, 73)[1:], key=lambda a: (abs(a), -a * w))
        for a in turns:
            if not self._unsafe(v / 2, 0.0, WorldPose(p.x, p.y, p.theta + float(a))):
                return 0.0, math.copysign(min(sim.w_max, abs(a) / sim.dt), a)
        return 0.0, w

    def _advance(self, prev: WorldPose, v, w, gp, fvec, log_ticks):
        run = self.run
        self.t = round(self.t + self.cfg.sim.dt, 9)
        run.ticks += 1
        p = self.robot.pose
        run.distance_travelled += math.hypot(p.x - prev.x, p.y - prev.y)
        run.trajectory.append((self.t, p.x, p.y, p.theta))
        if log_ticks:
            gx, gy = gp.position if gp is not None else (math.nan, math.nan)
            run.tick_log.append((self.t, p.x, p.y, p.theta, self.scan.min_range(), gx, gy,
                                 float(fvec[0]), float(fvec[1]), v, w))


def run_exploration(ground_truth: OccupancyGrid, start: WorldPose, strategy: str = PM,
                    config: Optional[ExploreConfig] = None, seed: int = 0,
                    log_ticks: bool = True) -> ExplorationRun:
    """Explore ``ground_truth`` from ``start`` until self-stop, collision or timeout."""
    cfg = config or ExploreConfig()
    if cfg.strategy != strategy:
        cfg = replace(cfg, strategy=strategy)
    ex = Explorer(ground_truth, start, cfg, seed)
    ex.run.trajectory.append((0.0, start.x, start.y, start.theta))
    return ex.execute(log_ticks)
