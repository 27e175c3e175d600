"""Images and figures: run snapshots as PPM/PNG, batch reports as matplotlib figures."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from ..semantic_topo import AreaClass, segment
from ..world import CellState, OccupancyGrid, grid_to_gray, load_snapshot_pgm

TRAJECTORY_RGB = (128, 0, 160)   # purple
START_RGB = (0, 170, 0)
END_RGB = (220, 0, 0)
CLASS_RGB = {
    AreaClass.INTERSECTION: (230, 60, 40),
    AreaClass.PATHWAY: (70, 130, 230),
    AreaClass.DEAD_END: (240, 180, 20),
    AreaClass.FRONTIER_PATHWAY: (40, 190, 90),
}


class MissingArtifact(FileNotFoundError):
    pass


@dataclass
class RenderResult:
    files: List[Path] = field(default_factory=list)
    classes: List[str] = field(default_factory=list)   # area classes drawn on the semantic layer


def read_meta(run_dir: Path) -> Dict[str, str]:
    meta = {}
    for line in (run_dir / "meta.txt").read_text(encoding="utf-8").splitlines():
        k, _, v = line.partition("=")
        meta[k.strip()] = v.strip()
    return meta


def read_csv(path: Path) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _pixel(grid: OccupancyGrid, x: float, y: float):
    col = (x - grid.origin[0]) / grid.resolution
    row = (y - grid.origin[1]) / grid.resolution
    return col, grid.height - row   # image y grows downward


def _nearest_free(grid: OccupancyGrid, x: float, y: float):
    free = np.argwhere(grid.cells == CellState.FREE)
    if len(free) == 0:
        return None
    col = (x - grid.origin[0]) / grid.resolution - 0.5
    row = (y - grid.origin[1]) / grid.resolution - 0.5
    k = int(np.argmin((free[:, 1] - col) ** 2 + (free[:, 0] - row) ** 2))
    return int(free[k, 1]), int(free[k, 0])


def semantic_image(grid: OccupancyGrid, robot_xy) -> Tuple[np.ndarray, List[str]]:
    """RGB image of the robot's free component coloured by area class."""
    rgb = np.repeat(grid_to_gray(grid)[:, :, None], 3, axis=2)
    cell = _nearest_free(grid, *robot_xy)
    if cell is None:
        return rgb, []
    smap = segment(grid, cell)
    ids = smap.area_of_cell
    present = []
    for cls, colour in CLASS_RGB.items():
        members = [a.id for a in smap.areas if a.cls == cls]
        if not members:
            continue
        mask = np.isin(ids, members)[::-1]
        if mask.any():
            rgb[mask] = colour
            present.append(cls.value)
    return rgb, present


def render_run(run_dir, out_dir=None, png: bool = True) -> RenderResult:
    """Write ``map.ppm`` (explored map plus trajectory), ``map.png`` and, for PM runs,
    ``map_semantic.ppm`` into ``out_dir`` (default: the run directory)."""
    run_dir = Path(run_dir)
    for name in ("meta.txt", "final_map.pgm", "trajectory.csv"):
        if not (run_dir / name).exists():
            raise MissingArtifact(f"{run_dir / name} not found")
    out_dir = Path(out_dir) if out_dir is not None else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = read_meta(run_dir)
    grid = load_snapshot_pgm(run_dir / "final_map.pgm", float(meta["resolution"]),
                             (float(meta["origin_x"]), float(meta["origin_y"])))
    traj = np.array([(float(r["x"]), float(r["y"])) for r in read_csv(run_dir / "trajectory.csv")])
    result = RenderResult()

    img = Image.fromarray(np.repeat(grid_to_gray(grid)[:, :, None], 3, axis=2), "RGB")
    draw = ImageDraw.Draw(img)
    pix = [_pixel(grid, x, y) for x, y in traj]
    if len(pix) > 1:
        draw.line(pix, fill=TRAJECTORY_RGB, width=1)
    for (px, py), colour in ((pix[0], START_RGB), (pix[-1], END_RGB)):
        draw.rectangle([int(px) - 1, int(py) - 1, int(px) + 1, int(py) + 1], fill=colour)
    path = out_dir / "map.ppm"
    img.save(path, format="PPM")
    result.files.append(path)

    sem = None
    if meta.get("strategy") == "PM":
        sem, result.classes = semantic_image(grid, traj[-1])
        path = out_dir / "map_semantic.ppm"
        Image.fromarray(sem, "RGB").save(path, format="PPM")
        result.files.append(path)

    if png:
        path = out_dir / "map.png"
        _map_figure(grid, traj, meta, sem, path)
        result.files.append(path)
    return result


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _map_figure(grid: OccupancyGrid, traj: np.ndarray, meta: Dict[str, str], sem, path: Path) -> None:
    plt = _figure()
    extent = (grid.origin[0], grid.origin[0] + grid.width * grid.resolution,
              grid.origin[1], grid.origin[1] + grid.height * grid.resolution)
    fig, ax = plt.subplots(figsize=(5, 5))
    if sem is not None:
        ax.imshow(sem, extent=extent)
    else:
        ax.imshow(grid_to_gray(grid), cmap="gray", vmin=0, vmax=255, extent=extent)
    ax.plot(traj[:, 0], traj[:, 1], color=np.array(TRAJECTORY_RGB) / 255, lw=1.2)
    ax.plot(*traj[0], "o", color=np.array(START_RGB) / 255, ms=6)
    ax.plot(*traj[-1], "s", color=np.array(END_RGB) / 255, ms=6)
    ax.set_title(f"{meta.get('strategy')} seed {meta.get('seed')}: {meta.get('outcome')} "
                 f"in {float(meta.get('completion_s', 'nan')):.1f} s")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def report_figures(batch_dir) -> List[Path]:
    """Area-over-time, completion-time and planning-work figures for one batch."""
    batch_dir = Path(batch_dir)
    for name in ("curves.csv", "mean_curve.csv", "runs.csv", "cycles.csv"):
        if not (batch_dir / name).exists():
            raise MissingArtifact(f"{batch_dir / name} not found")
    plt = _figure()
    figdir = batch_dir / "figures"
    figdir.mkdir(exist_ok=True)
    runs = read_csv(batch_dir / "runs.csv")
    done = {(r["strategy"], r["seed"]) for r in runs if r["outcome"] == "Completed"}
    strategies = list(dict.fromkeys(r["strategy"] for r in runs))
    colours = dict(zip(strategies, plt.rcParams["axes.prop_cycle"].by_key()["color"]))
    files = []

    fig, ax = plt.subplots(figsize=(6, 4))
    per_run: Dict[tuple, list] = {}
    for r in read_csv(batch_dir / "curves.csv"):
        if (r["strategy"], r["seed"]) in done:
            per_run.setdefault((r["strategy"], r["seed"]), []).append((float(r["t"]), float(r["area_m2"])))
    for (s, _), pts in per_run.items():
        t, a = zip(*pts)
        ax.step(t, a, where="post", color=colours[s], alpha=0.2, lw=0.8)
    for s in strategies:
        pts = [(float(r["t"]), float(r["mean_area_m2"])) for r in read_csv(batch_dir / "mean_curve.csv")
               if r["strategy"] == s]
        if pts:
            t, a = zip(*pts)
            ax.step(t, a, where="post", color=colours[s], lw=2, label=f"{s} mean")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("explored free area [m²]")
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    fig.tight_layout()
    files.append(_save(plt, fig, figdir / "area_curves.png"))

    fig, ax = plt.subplots(figsize=(4, 4))
    data = [[float(r["completion_s"]) for r in runs if r["strategy"] == s and r["outcome"] == "Completed"]
            for s in strategies]
    ax.boxplot(data)
    ax.set_xticks(range(1, len(strategies) + 1), strategies)
    ax.set_ylabel("time to completion [s]")
    fig.tight_layout()
    files.append(_save(plt, fig, figdir / "completion.png"))

    fig, ax = plt.subplots(figsize=(6, 4))
    cycles = read_csv(batch_dir / "cycles.csv")
    for s in strategies:
        ops = [int(r["plan_ops"]) for r in cycles if r["strategy"] == s]
        if ops:
            ax.hist(ops, bins=30, alpha=0.6, color=colours[s], label=s)
    ax.set_xlabel("global planning operations per cycle")
    ax.set_ylabel("cycles")
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    fig.tight_layout()
    files.append(_save(plt, fig, figdir / "plan_ops.png"))
    return files


def _save(plt, fig, path: Path) -> Path:
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def compare_batches(batch_dirs: Sequence, out) -> List[Path]:
    """Overlay the mean area curves of several batches and tabulate their medians."""
    plt = _figure()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    fig, ax = plt.subplots(figsize=(6, 4))
    for d in map(Path, batch_dirs):
        if not (d / "aggregate.csv").exists():
            raise MissingArtifact(f"{d / 'aggregate.csv'} not found")
        for a in read_csv(d / "aggregate.csv"):
            rows.append((d.name, a["strategy"], a["completed"], a["completion_median"],
                         a["completion_mean"], a["plan_ops_median"]))
        curves: Dict[str, list] = {}
        for r in read_csv(d / "mean_curve.csv"):
            curves.setdefault(r["strategy"], []).append((float(r["t"]), float(r["mean_area_m2"])))
        for s, pts in curves.items():
            t, a = zip(*pts)
            ax.step(t, a, where="post", label=f"{d.name} {s}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("mean explored free area [m²]")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig_path = _save(plt, fig, out / "compare.png")
    csv_path = out / "compare.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["batch", "strategy", "completed", "completion_median", "completion_mean", "plan_ops_median"])
        w.writerows(rows)
    return [csv_path, fig_path]


def load_batch_runs(batch_dir) -> List[Path]:
    """Per-run directories of a batch, in report order."""
    root = Path(batch_dir) / "runs"
    if not root.exists():
        raise MissingArtifact(f"{root} not found")
    return sorted(p for p in root.iterdir() if p.is_dir())
