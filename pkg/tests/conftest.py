import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from semtopo.world import CellState, OccupancyGrid, parse_ascii

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def grid_from(text: str, res: float = 0.05) -> OccupancyGrid:
    return parse_ascii(text, resolution=res)


def room(w: int, h: int, res: float = 0.05) -> OccupancyGrid:
    """Free interior of ``w`` x ``h`` cells inside a one-cell wall."""
    cells = np.full((h + 2, w + 2), CellState.OCCUPIED, dtype=np.uint8)
    cells[1:-1, 1:-1] = CellState.FREE
    return OccupancyGrid(w + 2, h + 2, res, (0.0, 0.0), cells)


def random_grid(rng: np.random.Generator, w: int, h: int, p=(0.5, 0.2, 0.3)) -> OccupancyGrid:
    cells = rng.choice([CellState.FREE, CellState.OCCUPIED, CellState.UNKNOWN], size=(h, w), p=p)
    return OccupancyGrid(w, h, 0.05, (0.0, 0.0), cells.astype(np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def plus_corridor(arm: int = 20, width: int = 5, open_arm: bool = False):
    """Two corridors of ``width`` cells crossing; with ``open_arm`` the top arm ends in Unknown.

    Returns the grid and the crossing's centre cell.
    """
    n = 2 * arm + width + 2
    cells = np.full((n, n), CellState.OCCUPIED, dtype=np.uint8)
    c0 = arm + 1
    cells[1:n - 1, c0:c0 + width] = CellState.FREE
    cells[c0:c0 + width, 1:n - 1] = CellState.FREE
    if open_arm:
        cells[n - 1, c0:c0 + width] = CellState.UNKNOWN
    g = OccupancyGrid(n, n, 0.05, (0.0, 0.0), cells)
    return g, (c0 + width // 2, c0 + width // 2)


def straight_corridor(length: int = 58, width: int = 5, open_end: bool = False):
    cells = np.full((width + 4, length + 2), CellState.OCCUPIED, dtype=np.uint8)
    cells[2:2 + width, 1:length + 1] = CellState.FREE
    if open_end:
        cells[2:2 + width, length + 1] = CellState.UNKNOWN
    g = OccupancyGrid(length + 2, width + 4, 0.05, (0.0, 0.0), cells)
    return g, (length // 2, 2 + width // 2)


_VERDICTS = pytest.StashKey()


@pytest.fixture
def verdict(request):
    """Record one acceptance line; shown inline and again in the terminal summary."""
    lines = request.config.stash.setdefault(_VERDICTS, [])
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        lines.append(line)
        with capman.global_and_fixture_disabled():
            print("\n" + line)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
