import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semtopo.world import (CellState, MapFormatError, OccupancyGrid, WorldPose, free_area_m2,
                           load_ground_truth, load_snapshot_pgm, normalize_angle, save_ascii,
                           save_pgm, world_to_cell)


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_bytes(data) if isinstance(data, bytes) else p.write_text(data)
    return p


def test_ascii_all_free(tmp_path):
    g = load_ground_truth(write(tmp_path, "m.txt", "...\n...\n...\n"))
    assert (g.width, g.height) == (3, 3)
    assert g.count(CellState.FREE) == 9


def test_ascii_border(tmp_path):
    g = load_ground_truth(write(tmp_path, "m.txt", "###\n#.#\n###\n"))
    assert g.count(CellState.OCCUPIED) == 8
    assert g.state((1, 1)) == CellState.FREE


def test_ascii_top_line_is_highest_row(tmp_path):
    g = load_ground_truth(write(tmp_path, "m.txt", "#..\n...\n"))
    assert g.state((0, 1)) == CellState.OCCUPIED
    assert g.state((0, 0)) == CellState.FREE


def test_pgm_threshold_bytes(tmp_path):
    p = write(tmp_path, "m.pgm", b"P5\n2 1\n255\n" + bytes([0, 255]))
    g = load_ground_truth(p)
    assert g.state((0, 0)) == CellState.OCCUPIED
    assert g.state((1, 0)) == CellState.FREE


def test_pgm_threshold_edges(tmp_path):
    p = write(tmp_path, "m.pgm", b"P5\n3 1\n255\n" + bytes([127, 128, 200]))
    g = load_ground_truth(p)
    assert [g.state((c, 0)) for c in range(3)] == [CellState.OCCUPIED, CellState.FREE, CellState.FREE]


@pytest.mark.parametrize("text", ["..\n...\n", "", ".x.\n"])
def test_ascii_malformed(tmp_path, text):
    with pytest.raises(MapFormatError):
        load_ground_truth(write(tmp_path, "m.txt", text))


def test_pgm_bad_magic(tmp_path):
    with pytest.raises(MapFormatError):
        load_ground_truth(write(tmp_path, "m.pgm", b"P2\n1 1\n255\n0\n"))


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_ground_truth(tmp_path / "nope.txt")


def test_world_to_cell_examples():
    g = OccupancyGrid.unknown_like(OccupancyGrid(10, 10, 0.05, (0.0, 0.0),
                                                 np.zeros((10, 10), dtype=np.uint8)))
    assert world_to_cell(g, WorldPose(0.0, 0.0, 0.0)) == (0, 0)
    assert world_to_cell(g, WorldPose(0.26, 0.05, 0.0)) == (5, 1)
    assert world_to_cell(g, WorldPose(-0.01, 0.0, 0.0)) is None
    assert g.world_to_cell(0.5, 0.1) is None


def test_free_area():
    g = OccupancyGrid(5, 5, 0.05, (0.0, 0.0), np.full((5, 5), CellState.UNKNOWN, dtype=np.uint8))
    assert free_area_m2(g) == 0.0
    g.cells.flat[:10] = CellState.FREE
    assert free_area_m2(g) == pytest.approx(0.025, abs=1e-15)


def test_invalid_grid():
    with pytest.raises(ValueError):
        OccupancyGrid(0, 3, 0.05, (0, 0), np.zeros((3, 0), dtype=np.uint8))
    with pytest.raises(ValueError):
        OccupancyGrid(2, 2, -1.0, (0, 0), np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        OccupancyGrid(2, 2, 0.05, (0, 0), np.full((2, 2), 7, dtype=np.uint8))


@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_normalize_angle_range(a):
    n = normalize_angle(a)
    assert -math.pi < n <= math.pi
    assert math.isclose(math.cos(n), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(n), math.sin(a), abs_tol=1e-9)


def test_pose_theta_normalized():
    assert WorldPose(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)
    assert WorldPose(0, 0, -math.pi).theta == pytest.approx(math.pi)


@given(st.integers(1, 40), st.integers(1, 40), st.floats(0.01, 1.0),
       st.floats(-5, 5), st.floats(-5, 5), st.data())
def test_cell_round_trip(w, h, res, ox, oy, data):
    g = OccupancyGrid(w, h, res, (ox, oy), np.zeros((h, w), dtype=np.uint8))
    c = (data.draw(st.integers(0, w - 1)), data.draw(st.integers(0, h - 1)))
    assert g.world_to_cell(*g.cell_to_world(c)) == c


@given(st.integers(0, 2 ** 32 - 1))
def test_area_monotone_in_free_count(seed):
    rng = np.random.default_rng(seed)
    cells = rng.integers(0, 3, size=(8, 8)).astype(np.uint8)
    g = OccupancyGrid(8, 8, 0.05, (0, 0), cells)
    unknown = np.argwhere(cells == CellState.UNKNOWN)
    if len(unknown) == 0:
        return
    r, c = unknown[0]
    before = g.free_area_m2()
    g.cells[r, c] = CellState.FREE
    assert g.free_area_m2() - before == pytest.approx(0.0025, abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12), st.integers(1, 12))
def test_ascii_round_trip(tmp_path_factory, seed, w, h):
    rng = np.random.default_rng(seed)
    cells = rng.integers(0, 2, size=(h, w)).astype(np.uint8)
    g = OccupancyGrid(w, h, 0.05, (0, 0), cells)
    p = tmp_path_factory.mktemp("rt") / "m.txt"
    save_ascii(g, p)
    assert np.array_equal(load_ground_truth(p).cells, cells)


def test_snapshot_round_trip(tmp_path, rng):
    cells = rng.integers(0, 3, size=(7, 9)).astype(np.uint8)
    g = OccupancyGrid(9, 7, 0.05, (0, 0), cells)
    save_pgm(g, tmp_path / "s.pgm")
    assert np.array_equal(load_snapshot_pgm(tmp_path / "s.pgm").cells, cells)
    assert (tmp_path / "s.pgm").read_bytes().startswith(b"P5")


def test_ascii_refuses_unknown(tmp_path):
    g = OccupancyGrid(2, 1, 0.05, (0, 0), np.array([[0, 2]], dtype=np.uint8))
    with pytest.raises(ValueError):
        save_ascii(g, tmp_path / "x.txt")
