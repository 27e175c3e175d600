"""Potential-field path tracking.

The goal point is the farthest path point the robot can see within
``f_l * L_min`` (``L_min`` = shortest LiDAR return), so the tracker hugs the
path tightly in clutter and cuts corners in open space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .robot_sim import LidarScan, RobotState, clamp, segment_clear
from .world import CellState, OccupancyGrid, normalize_angle

STAGNATION_NUDGE = 0.3  # rad/s when the field vanishes


@dataclass(frozen=True)
class FieldParams:
    f_g: float = 30.0
    f_o: float = 0.065
    f_l: float = 1.5
    k_v: float = 0.01
    k_w: float = 2.0
    min_window: float = 0.0   # m; floor on the goal-point window

    def __post_init__(self):
        if min(self.f_g, self.f_o, self.f_l) <= 0:
            raise ValueError("field parameters must be positive")
        if self.min_window < 0:
            raise ValueError("min_window must be non-negative")
        if self.k_v <= 0 or self.k_w <= 0:
            raise ValueError("command gains must be positive")


@dataclass(frozen=True)
class GoalPoint:
    position: Tuple[float, float]
    bearing: float
    index: int = 0


def densify(points, spacing: float) -> np.ndarray:
    """Resample a polyline so consecutive points are at most ``spacing`` apart."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return pts.copy()
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil(math.hypot(*(b - a)) / spacing)))
        t = np.arange(1, n + 1)[:, None] / n
        out.append(a + t * (b - a))
    return np.vstack(out)


def _bearing(robot: RobotState, p) -> float:
    x, y = robot.pose.x, robot.pose.y
    return normalize_angle(math.atan2(p[1] - y, p[0] - x) - robot.pose.theta)


def select_goal_point(path, robot: RobotState, scan: LidarScan, params: FieldParams,
                      explored: OccupancyGrid, start_index: int = 0,
                      blocking: Optional[np.ndarray] = None) -> GoalPoint:
    """Pick the attraction point on ``path`` (a TopoPath or an (N, 2) array).

    Only points at or after the robot's nearest point (searched from
    ``start_index`` on) are considered.  Line of sight is tested on
    ``explored``; Occupied and Unknown cells both block.
    """
    pts = np.asarray(getattr(path, "waypoints", path), dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("empty path")
    start_index = min(max(start_index, 0), len(pts) - 1)
    x, y = robot.pose.x, robot.pose.y
    if blocking is None:
        blocking = explored.cells != CellState.FREE
    tail = pts[start_index:]
    dist = np.hypot(tail[:, 0] - x, tail[:, 1] - y)
    nearest = start_index + int(np.argmin(dist))
    window = max(params.f_l * scan.min_range(), params.min_window)
    dist = np.hypot(pts[nearest:, 0] - x, pts[nearest:, 1] - y)
    inside = np.nonzero(dist <= window + 1e-9)[0]
    chosen = nearest
    for k in inside[::-1]:
        idx = nearest + int(k)
        if segment_clear(blocking, explored, (x, y), pts[idx]):
            chosen = idx
            break
    p = pts[chosen]
    if math.hypot(p[0] - x, p[1] - y) < 1e-9:
        if len(pts) > 1:
            a, b = (pts[chosen - 1], p) if chosen > 0 else (p, pts[1])
            heading = math.atan2(b[1] - a[1], b[0] - a[0])
        else:
            heading = robot.pose.theta
        bearing = normalize_angle(heading - robot.pose.theta)
    else:
        bearing = _bearing(robot, p)
    return GoalPoint((float(p[0]), float(p[1])), bearing, chosen)


def compute_field(goal: GoalPoint, scan: LidarScan, params: FieldParams) -> np.ndarray:
    """Robot-frame force: unit attraction scaled by f_g minus inverse-range repulsion per beam."""
    if len(scan.ranges) == 0:
        raise ValueError("scan has no beams")
    ranges = scan.ranges
    if np.any(ranges <= 0):
        raise ValueError("non-positive range in scan")
    inv = params.f_o / ranges
    fx = params.f_g * math.cos(goal.bearing) - float((inv * np.cos(scan.angles)).sum())
    fy = params.f_g * math.sin(goal.bearing) - float((inv * np.sin(scan.angles)).sum())
    return np.array([fx, fy])


def field_to_command(fvec, robot: RobotState, limits: Tuple[float, float],
                     params: FieldParams = FieldParams()) -> Tuple[float, float]:
    v_max, w_max = limits
    fx, fy = float(fvec[0]), float(fvec[1])
    mag = math.hypot(fx, fy)
    if mag == 0.0:
        return 0.0, STAGNATION_NUDGE
    alpha = math.atan2(fy, fx)
    w = clamp(params.k_w * alpha, -w_max, w_max)
    v = clamp(params.k_v * mag * max(0.0, math.cos(alpha)), 0.0, v_max)
    return v, w


class PathTracker:
    """Follows one path; remembers how far along it the robot has got."""

    def __init__(self, waypoints, params: FieldParams, spacing: float = 0.025):
        self.points = densify(waypoints, spacing)
        self.params = params
        self.progress = 0

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def step(self, robot: RobotState, scan: LidarScan, explored: OccupancyGrid,
             limits: Tuple[float, float], blocking: Optional[np.ndarray] = None):
        goal = select_goal_point(self.points, robot, scan, self.params, explored,
                                 self.progress, blocking)
        x, y = robot.pose.x, robot.pose.y
        tail = self.points[self.progress:goal.index + 1]
        if len(tail):
            self.progress += int(np.argmin(np.hypot(tail[:, 0] - x, tail[:, 1] - y)))
        fvec = compute_field(goal, scan, self.params)
        return field_to_command(fvec, robot, limits, self.params), goal, fvec
