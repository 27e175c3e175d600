"""Differential-drive robot, 2D LiDAR raycasting and ideal scan integration.

Rays are traversed cell by cell (Amanatides-Woo DDA).  When a ray crosses a
cell corner exactly it steps diagonally, so no cell is ever entered for a
zero-length interval; this keeps the free/hit split of :func:`integrate_scan`
identical to the traversal of :func:`raycast`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Tuple

import numba
import numpy as np

from .world import CellState, OccupancyGrid, WorldPose

V_MAX = 0.15
W_MAX = 2.0


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    beams: int = 360
    lidar_max_range: float = 3.5
    v_max: float = V_MAX
    w_max: float = W_MAX
    radius: float = 0.11
    rng_seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.beams < 8:
            raise ValueError("need at least 8 beams")
        if self.lidar_max_range <= 0:
            raise ValueError("lidar_max_range must be positive")


@dataclass(frozen=True)
class RobotState:
    pose: WorldPose
    linear_vel: float = 0.0
    angular_vel: float = 0.0
    radius: float = 0.11


@dataclass
class LidarScan:
    ranges: np.ndarray
    angles: np.ndarray
    max_range: float
    hit: np.ndarray = None
    geometry: tuple = field(default=None, repr=False)

    def __post_init__(self):
        self.ranges = np.asarray(self.ranges, dtype=float)
        self.angles = np.asarray(self.angles, dtype=float)
        if self.ranges.shape != self.angles.shape:
            raise ValueError("ranges and angles must have equal length")
        if self.hit is None:
            self.hit = self.ranges < self.max_range
        self.hit = np.asarray(self.hit, dtype=bool)

    def __len__(self):
        return len(self.ranges)

    def min_range(self) -> float:
        return float(self.ranges.min()) if len(self.ranges) else self.max_range


class CollisionError(RuntimeError):
    def __init__(self, state: RobotState):
        super().__init__(f"collision at ({state.pose.x:.3f}, {state.pose.y:.3f})")
        self.state = state


def beam_angles(n: int) -> np.ndarray:
    """``n`` robot-relative angles covering the full circle, 0 included."""
    return -math.pi + 2.0 * math.pi * np.arange(n) / n


# ---------------------------------------------------------------------------
# DDA kernels

@numba.njit(cache=True)
def _dda_setup(gx, gy, c, s):
    cx = math.floor(gx)
    cy = math.floor(gy)
    if c > 0.0:
        sx, dx, tx = 1, 1.0 / c, (cx + 1.0 - gx) / c
    elif c < 0.0:
        sx, dx, tx = -1, -1.0 / c, (gx - cx) / -c
    else:
        sx, dx, tx = 0, np.inf, np.inf
    if s > 0.0:
        sy, dy, ty = 1, 1.0 / s, (cy + 1.0 - gy) / s
    elif s < 0.0:
        sy, dy, ty = -1, -1.0 / s, (gy - cy) / -s
    else:
        sy, dy, ty = 0, np.inf, np.inf
    return int(cx), int(cy), sx, sy, dx, dy, tx, ty


@numba.njit(cache=True)
def _cast_kernel(blocking, res, ox, oy, x, y, theta, angles, max_range, ranges, hit):
    h, w = blocking.shape
    gx = (x - ox) / res
    gy = (y - oy) / res
    rmax = max_range / res
    for i in range(angles.shape[0]):
        a = theta + angles[i]
        cx, cy, sx, sy, dx, dy, tx, ty = _dda_setup(gx, gy, math.cos(a), math.sin(a))
        t = 0.0
        ranges[i] = max_range
        hit[i] = False
        while True:
            if cx < 0 or cy < 0 or cx >= w or cy >= h or t >= rmax:
                break
            if blocking[cy, cx]:
                ranges[i] = t * res
                hit[i] = True
                break
            if tx < ty:
                t = tx
                cx += sx
                tx += dx
            elif ty < tx:
                t = ty
                cy += sy
                ty += dy
            else:
                t = tx
                cx += sx
                cy += sy
                tx += dx
                ty += dy


@numba.njit(cache=True)
def _integrate_kernel(cells, res, ox, oy, x, y, theta, angles, ranges, hit, max_range,
                      free_v, occ_v):
    h, w = cells.shape
    gx = (x - ox) / res
    gy = (y - oy) / res
    rmax = max_range / res
    for i in range(angles.shape[0]):
        a = theta + angles[i]
        cx, cy, sx, sy, dx, dy, tx, ty = _dda_setup(gx, gy, math.cos(a), math.sin(a))
        t = 0.0
        r = ranges[i]
        while True:
            if cx < 0 or cy < 0 or cx >= w or cy >= h:
                break
            t_exit = min(tx, ty)
            if hit[i]:
                if t_exit * res <= r:
                    cells[cy, cx] = free_v
                else:
                    cells[cy, cx] = occ_v
                    break
            else:
                if t >= rmax:
                    break
                cells[cy, cx] = free_v
            if tx < ty:
                t = tx
                cx += sx
                tx += dx
            elif ty < tx:
                t = ty
                cy += sy
                ty += dy
            else:
                t = tx
                cx += sx
                cy += sy
                tx += dx
                ty += dy


@numba.njit(cache=True)
def _segment_clear_kernel(blocking, res, ox, oy, x0, y0, x1, y1):
    h, w = blocking.shape
    gx = (x0 - ox) / res
    gy = (y0 - oy) / res
    ex = (x1 - ox) / res
    ey = (y1 - oy) / res
    length = math.hypot(ex - gx, ey - gy)
    if length == 0.0:
        c, s = 1.0, 0.0
    else:
        c, s = (ex - gx) / length, (ey - gy) / length
    cx, cy, sx, sy, dx, dy, tx, ty = _dda_setup(gx, gy, c, s)
    t = 0.0
    while True:
        if cx < 0 or cy < 0 or cx >= w or cy >= h:
            return False
        if blocking[cy, cx]:
            return False
        if t >= length or min(tx, ty) >= length:
            return True
        if tx < ty:
            t = tx
            cx += sx
            tx += dx
        elif ty < tx:
            t = ty
            cy += sy
            ty += dy
        else:
            t = tx
            cx += sx
            cy += sy
            tx += dx
            ty += dy


def segment_clear(blocking: np.ndarray, grid: OccupancyGrid, p0, p1) -> bool:
    """True when no blocking cell lies on the segment ``p0 -> p1`` (both ends included)."""
    return bool(_segment_clear_kernel(blocking, grid.resolution, grid.origin[0], grid.origin[1],
                                      float(p0[0]), float(p0[1]), float(p1[0]), float(p1[1])))


# ---------------------------------------------------------------------------
# public operations

def raycast(ground_truth: OccupancyGrid, pose: WorldPose, cfg: SimConfig) -> LidarScan:
    cell = ground_truth.pose_to_cell(pose)
    if cell is None:
        raise ValueError("pose outside the map")
    if ground_truth.state(cell) == CellState.OCCUPIED:
        raise ValueError("pose inside an occupied cell")
    angles = beam_angles(cfg.beams)
    ranges = np.empty(cfg.beams)
    hit = np.empty(cfg.beams, dtype=np.bool_)
    blocking = ground_truth.cells == CellState.OCCUPIED
    _cast_kernel(blocking, ground_truth.resolution, ground_truth.origin[0], ground_truth.origin[1],
                 pose.x, pose.y, pose.theta, angles, cfg.lidar_max_range, ranges, hit)
    return LidarScan(ranges, angles, cfg.lidar_max_range, hit, ground_truth.geometry)


def integrate_scan(explored: OccupancyGrid, pose: WorldPose, scan: LidarScan) -> OccupancyGrid:
    """Mark cells crossed by each beam Free and the hit cell Occupied (in place).

    Returns ``explored`` for chaining.
    """
    if scan.geometry is not None and tuple(scan.geometry) != explored.geometry:
        raise ValueError("scan geometry does not match the explored map")
    _integrate_kernel(explored.cells, explored.resolution, explored.origin[0], explored.origin[1],
                      pose.x, pose.y, pose.theta, scan.angles, scan.ranges, scan.hit,
                      scan.max_range, np.uint8(CellState.FREE), np.uint8(CellState.OCCUPIED))
    return explored


def footprint_collides(grid: OccupancyGrid, x: float, y: float, radius: float) -> bool:
    """True when the disc touches an Occupied cell or leaves the map."""
    res = grid.resolution
    gx = (x - grid.origin[0]) / res
    gy = (y - grid.origin[1]) / res
    rr = radius / res
    c0, c1 = math.floor(gx - rr), math.floor(gx + rr)
    r0, r1 = math.floor(gy - rr), math.floor(gy + rr)
    if c0 < 0 or r0 < 0 or c1 >= grid.width or r1 >= grid.height:
        return True
    window = grid.cells[r0:r1 + 1, c0:c1 + 1] == CellState.OCCUPIED
    if not window.any():
        return False
    rows, cols = np.nonzero(window)
    cols = cols + c0
    rows = rows + r0
    # closest point of each cell square to the disc center
    px = np.clip(gx, cols, cols + 1)
    py = np.clip(gy, rows, rows + 1)
    return bool(np.any((px - gx) ** 2 + (py - gy) ** 2 < rr * rr))


def wall_clearance(grid: OccupancyGrid, x: float, y: float, reach: float) -> float:
    """Distance from (x, y) to the nearest Occupied cell square, capped at ``reach``."""
    res = grid.resolution
    gx = (x - grid.origin[0]) / res
    gy = (y - grid.origin[1]) / res
    rr = reach / res
    c0, c1 = max(0, math.floor(gx - rr)), min(grid.width - 1, math.floor(gx + rr))
    r0, r1 = max(0, math.floor(gy - rr)), min(grid.height - 1, math.floor(gy + rr))
    if c0 > c1 or r0 > r1:
        return reach
    rows, cols = np.nonzero(grid.cells[r0:r1 + 1, c0:c1 + 1] == CellState.OCCUPIED)
    if len(rows) == 0:
        return reach
    cols = cols + c0
    rows = rows + r0
    px = np.clip(gx, cols, cols + 1)
    py = np.clip(gy, rows, rows + 1)
    d = float(np.sqrt(((px - gx) ** 2 + (py - gy) ** 2).min())) * res
    return min(d, reach)


def clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


def predict(p: WorldPose, v: float, w: float, dt: float) -> WorldPose:
    """Exact unicycle motion under constant (v, w) for ``dt``.

    The arc is written as its chord, ``v*dt*sinc(w*dt/2)`` along the mean
    heading, which stays accurate as ``w`` goes to zero.
    """
    half = w * dt / 2
    chord = v * dt * (math.sin(half) / half if abs(half) > 1e-8 else 1.0 - half * half / 6)
    mid = p.theta + half
    return WorldPose(p.x + chord * math.cos(mid), p.y + chord * math.sin(mid), p.theta + w * dt)


def step(robot: RobotState, cmd: Tuple[float, float], dt: float, ground_truth: OccupancyGrid,
         v_max: float = V_MAX, w_max: float = W_MAX) -> RobotState:
    """Advance the unicycle by ``dt`` with clamped commands.

    Raises :class:`CollisionError` if the footprint overlaps an Occupied cell
    after the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = clamp(float(cmd[0]), -v_max, v_max)
    w = clamp(float(cmd[1]), -w_max, w_max)
    new = replace(robot, pose=predict(robot.pose, v, w, dt), linear_vel=v, angular_vel=w)
    if footprint_collides(ground_truth, new.pose.x, new.pose.y, robot.radius):
        raise CollisionError(new)
    return new

