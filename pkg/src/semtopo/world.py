"""Occupancy grid model, coordinate transforms and map file I/O.

Cells are stored as a ``(height, width)`` uint8 array indexed ``[row, col]``.
Row 0 is the bottom of the map (smallest y); map files are written top row
first, so loading and saving flip the row order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from PIL import Image

Cell = Tuple[int, int]  # (col, row)

PGM_OCCUPIED_THRESHOLD = 128
DEFAULT_RESOLUTION = 0.05


class CellState(IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


class MapFormatError(ValueError):
    pass


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class WorldPose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))


@dataclass
class OccupancyGrid:
    width: int
    height: int
    resolution: float = DEFAULT_RESOLUTION
    origin: Tuple[float, float] = (0.0, 0.0)
    cells: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.cells is None:
            self.cells = np.full((self.height, self.width), CellState.UNKNOWN, dtype=np.uint8)
        else:
            self.cells = np.asarray(self.cells, dtype=np.uint8)
            if self.cells.shape != (self.height, self.width):
                raise ValueError(
                    f"cells shape {self.cells.shape} != ({self.height}, {self.width})")
            if self.cells.size and self.cells.max() > CellState.UNKNOWN:
                raise ValueError("cell values must be Free, Occupied or Unknown")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @classmethod
    def unknown_like(cls, other: "OccupancyGrid") -> "OccupancyGrid":
        return cls(other.width, other.height, other.resolution, other.origin)

    @property
    def geometry(self):
        return (self.width, self.height, self.resolution, self.origin)

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.width, self.height, self.resolution, self.origin, self.cells.copy())

    def in_bounds(self, cell: Cell) -> bool:
        c, r = cell
        return 0 <= c < self.width and 0 <= r < self.height

    def state(self, cell: Cell) -> CellState:
        c, r = cell
        return CellState(int(self.cells[r, c]))

    def set_state(self, cell: Cell, value: CellState) -> None:
        c, r = cell
        self.cells[r, c] = value

    def world_to_cell(self, x: float, y: float) -> Optional[Cell]:
        """Cell containing world point ``(x, y)``; ``None`` when outside the grid."""
        col = math.floor((x - self.origin[0]) / self.resolution)
        row = math.floor((y - self.origin[1]) / self.resolution)
        if 0 <= col < self.width and 0 <= row < self.height:
            return (col, row)
        return None

    def pose_to_cell(self, pose: WorldPose) -> Optional[Cell]:
        return self.world_to_cell(pose.x, pose.y)

    def cell_to_world(self, cell: Cell) -> Tuple[float, float]:
        """World coordinates of the cell center."""
        c, r = cell
        return (self.origin[0] + (c + 0.5) * self.resolution,
                self.origin[1] + (r + 0.5) * self.resolution)

    def count(self, state: CellState) -> int:
        return int(np.count_nonzero(self.cells == state))

    def free_mask(self) -> np.ndarray:
        return self.cells == CellState.FREE

    def free_area_m2(self) -> float:
        return free_area_m2(self)


def world_to_cell(grid: OccupancyGrid, p: WorldPose) -> Optional[Cell]:
    return grid.world_to_cell(p.x, p.y)


def free_area_m2(grid: OccupancyGrid) -> float:
    return grid.count(CellState.FREE) * grid.resolution ** 2


# ---------------------------------------------------------------------------
# file I/O

def load_ground_truth(path, fmt: Optional[str] = None, resolution: float = DEFAULT_RESOLUTION,
                      origin=(0.0, 0.0)) -> OccupancyGrid:
    """Load a ground-truth map from an ASCII ('#'/'.') or binary P5 PGM file.

    ``fmt`` is inferred from the extension when omitted (``.pgm`` -> PGM,
    anything else -> ASCII).
    """
    path = Path(path)
    if fmt is None:
        fmt = "pgm" if path.suffix.lower() == ".pgm" else "ascii"
    fmt = fmt.lower()
    if fmt == "pgm":
        cells = _read_pgm(path)
    elif fmt == "ascii":
        cells = _read_ascii(path)
    else:
        raise ValueError(f"unknown map format {fmt!r}")
    h, w = cells.shape
    return OccupancyGrid(w, h, resolution, origin, cells)


def _read_ascii(path: Path) -> np.ndarray:
    text = path.read_text(encoding="utf-8")
    lines = [ln.rstrip("\r") for ln in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MapFormatError(f"{path}: empty map")
    width = len(lines[0])
    if width == 0:
        raise MapFormatError(f"{path}: empty first row")
    rows = []
    for i, ln in enumerate(lines):
        if len(ln) != width:
            raise MapFormatError(f"{path}: row {i} has length {len(ln)}, expected {width}")
        row = []
        for ch in ln:
            if ch == "#":
                row.append(CellState.OCCUPIED)
            elif ch == ".":
                row.append(CellState.FREE)
            else:
                raise MapFormatError(f"{path}: unexpected character {ch!r} in row {i}")
        rows.append(row)
    return np.array(rows[::-1], dtype=np.uint8)


def _read_pgm(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic != b"P5":
        raise MapFormatError(f"{path}: not a binary P5 PGM (magic {magic!r})")
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode != "L":
                raise MapFormatError(f"{path}: expected 8-bit grayscale, got mode {img.mode}")
            pixels = np.asarray(img, dtype=np.uint8)
    except MapFormatError:
        raise
    except Exception as exc:  # Pillow raises several types for broken headers
        raise MapFormatError(f"{path}: malformed PGM ({exc})") from exc
    if pixels.size == 0:
        raise MapFormatError(f"{path}: empty map")
    cells = np.where(pixels < PGM_OCCUPIED_THRESHOLD, CellState.OCCUPIED, CellState.FREE)
    return cells[::-1].astype(np.uint8)


def save_ascii(grid: OccupancyGrid, path) -> None:
    if np.any(grid.cells == CellState.UNKNOWN):
        raise ValueError("ASCII maps cannot hold Unknown cells; use save_pgm")
    chars = np.where(grid.cells == CellState.OCCUPIED, "#", ".")
    text = "\n".join("".join(row) for row in chars[::-1]) + "\n"
    Path(path).write_text(text, encoding="utf-8")


PGM_LEVELS = {CellState.FREE: 255, CellState.OCCUPIED: 0, CellState.UNKNOWN: 128}


def grid_to_gray(grid: OccupancyGrid) -> np.ndarray:
    """Grayscale image (top row first): Free 255, Occupied 0, Unknown 128."""
    lut = np.array([PGM_LEVELS[CellState.FREE], PGM_LEVELS[CellState.OCCUPIED],
                    PGM_LEVELS[CellState.UNKNOWN]], dtype=np.uint8)
    return lut[grid.cells][::-1]


def save_pgm(grid: OccupancyGrid, path) -> None:
    Image.fromarray(np.ascontiguousarray(grid_to_gray(grid)), mode="L").save(path, format="PPM")


def load_snapshot_pgm(path, resolution: float = DEFAULT_RESOLUTION, origin=(0.0, 0.0)) -> OccupancyGrid:
    """Inverse of :func:`save_pgm` (keeps Unknown cells)."""
    with Image.open(path) as img:
        pixels = np.asarray(img.convert("L"), dtype=np.uint8)[::-1]
    cells = np.full(pixels.shape, CellState.UNKNOWN, dtype=np.uint8)
    cells[pixels == 255] = CellState.FREE
    cells[pixels == 0] = CellState.OCCUPIED
    h, w = cells.shape
    return OccupancyGrid(w, h, resolution, origin, cells)


def parse_ascii(text: str, resolution: float = DEFAULT_RESOLUTION, origin=(0.0, 0.0),
                unknown_char: str = "?") -> OccupancyGrid:
    """Build a grid from an inline ASCII drawing; ``unknown_char`` marks Unknown.

    Convenient for fixtures; the on-disk ground-truth format does not allow
    Unknown cells.
    """
    lines = [ln for ln in text.strip("\n").split("\n")]
    lines = [ln.strip() for ln in lines if ln.strip()]
    width = len(lines[0])
    lut = {"#": CellState.OCCUPIED, ".": CellState.FREE, unknown_char: CellState.UNKNOWN}
    rows = []
    for ln in lines:
        if len(ln) != width:
            raise MapFormatError("inconsistent row lengths")
        rows.append([lut[ch] for ch in ln])
    cells = np.array(rows[::-1], dtype=np.uint8)
    return OccupancyGrid(width, len(lines), resolution, origin, cells)
