"""Seeded batch execution and CSV reporting.

Output layout under the ``out`` directory::

    runs.csv            one row per attempted run
    curves.csv          every run's explored-area staircase
    mean_curve.csv      per-strategy mean area on a 1 s grid (step-hold)
    cycles.csv          per-cycle operation counts
    aggregate.csv       one row per strategy
    summary.txt
    runs/<STRATEGY>_seed<k>/   per-run artifacts (see write_run_dir)
    timings.csv         wall-clock stage times, only with ``wallclock=True``

Everything except ``timings.csv`` is a pure function of the config.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..explorer import COMPLETED, ExploreConfig, ExplorationRun, reachable_free, run_exploration, start_pose
from ..world import OccupancyGrid, WorldPose, save_pgm
from .config import BUILTIN_MAPS, ScenarioConfig

MAX_ATTEMPTS = 3
RESEED_STRIDE = 1000   # replacement seed = seed + attempt * stride

RUN_HEADER = ["strategy", "seed", "attempt", "replaces", "outcome", "completion_s", "ticks", "cycles",
              "explored_m2", "reachable_m2", "distance_m", "blacklisted"]
CURVE_HEADER = ["strategy", "seed", "t", "area_m2"]
MEAN_HEADER = ["strategy", "t", "mean_area_m2", "runs"]
CYCLE_HEADER = ["strategy", "seed", "cycle", "t", "detect_ops", "select_ops", "plan_ops", "areas", "goals"]
AGG_HEADER = ["strategy", "runs", "completed", "completion_mean", "completion_median", "completion_min",
              "completion_max", "distance_mean", "cycles_mean",
              "detect_ops_mean", "detect_ops_median", "detect_ops_max",
              "select_ops_mean", "select_ops_median", "select_ops_max",
              "plan_ops_mean", "plan_ops_median", "plan_ops_max"]
TIMING_HEADER = ["strategy", "seed", "cycle", "detect_s", "select_s", "plan_s"]
TICK_HEADER = ["t", "x", "y", "theta", "l_min", "goal_x", "goal_y", "f_x", "f_y", "v", "w"]
SCORE_HEADER = ["cycle", "t", "goal", "d", "v", "p_l", "openings", "frontier_pathways",
                "c_metric", "g_semantic", "total", "chosen"]


class BatchError(RuntimeError):
    """A run raised; results finished before it are on disk."""


@dataclass
class RunResult:
    strategy: str
    seed: int
    attempt: int
    replaces: Optional[int]
    run: ExplorationRun
    reachable_m2: float

    @property
    def completed(self) -> bool:
        return self.run.outcome == COMPLETED


@dataclass
class BatchReport:
    results: List[RunResult] = field(default_factory=list)
    aggregate: Dict[str, dict] = field(default_factory=dict)
    mean_curves: Dict[str, List[Tuple[float, float]]] = field(default_factory=dict)

    @property
    def all_completed(self) -> bool:
        return all(r.completed for r in self.results)

    def successful(self, strategy: str) -> List[RunResult]:
        return [r for r in self.results if r.strategy == strategy and r.completed]


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.6f}"
    return "" if x is None else str(x)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def execute_one(gt: OccupancyGrid, base: WorldPose, strategy: str, cfg: ExploreConfig,
                seed: int, log_ticks: bool = True) -> Tuple[ExplorationRun, float]:
    start = start_pose(gt, base, seed, cfg)
    reach = float(np.count_nonzero(reachable_free(gt, start))) * gt.resolution ** 2
    return run_exploration(gt, start, strategy, cfg, seed, log_ticks), reach


def _job(args):
    gt, base, strategy, cfg, seed, log_ticks = args
    return execute_one(gt, base, strategy, cfg, seed, log_ticks)


def step_hold(curve: Sequence[Tuple[float, float]], times: np.ndarray) -> np.ndarray:
    """Last value observed at or before each time (first value before the curve starts)."""
    ts = np.array([c[0] for c in curve])
    vals = np.array([c[1] for c in curve])
    idx = np.searchsorted(ts, times + 1e-9, side="right") - 1
    return vals[np.clip(idx, 0, len(vals) - 1)]


def mean_curve(curves: Sequence[Sequence[Tuple[float, float]]], step: float = 1.0) -> List[Tuple[float, float]]:
    """Mean of step-hold resampled curves on a ``step`` grid; finished runs hold their last value."""
    if not curves:
        return []
    end = max(c[-1][0] for c in curves)
    times = np.arange(0.0, math.floor(end / step + 1e-9) * step + step / 2, step)
    stack = np.vstack([step_hold(c, times) for c in curves])
    return [(float(t), float(a)) for t, a in zip(times, stack.mean(axis=0))]


def _stats(vals) -> Tuple[float, float, float]:
    if len(vals) == 0:
        return math.nan, math.nan, math.nan
    arr = np.asarray(vals, dtype=float)
    return float(arr.mean()), float(np.median(arr)), float(arr.max())


def aggregate(results: Sequence[RunResult], strategy: str) -> dict:
    mine = [r for r in results if r.strategy == strategy]
    ok = [r for r in mine if r.completed]
    times = np.array([r.run.elapsed_sim_time for r in ok], dtype=float)
    row = {"strategy": strategy, "runs": len(mine), "completed": len(ok)}
    if len(ok):
        row.update(completion_mean=float(times.mean()), completion_median=float(np.median(times)),
                   completion_min=float(times.min()), completion_max=float(times.max()),
                   distance_mean=float(np.mean([r.run.distance_travelled for r in ok])),
                   cycles_mean=float(np.mean([r.run.cycles for r in ok])))
    else:
        for k in ("completion_mean", "completion_median", "completion_min", "completion_max",
                  "distance_mean", "cycles_mean"):
            row[k] = math.nan
    for stage in ("detect", "select", "plan"):
        vals = [getattr(c, f"{stage}_ops") for r in ok for c in r.run.stage_timings]
        row[f"{stage}_ops_mean"], row[f"{stage}_ops_median"], row[f"{stage}_ops_max"] = _stats(vals)
    return row


def write_run_dir(result: RunResult, path: Path, wallclock: bool = False) -> None:
    """Per-run artifacts: meta, trajectory, ticks, cycles, PM scores and the final map."""
    path.mkdir(parents=True, exist_ok=True)
    run = result.run
    grid = run.final_map
    meta = {"strategy": run.strategy, "seed": run.seed, "outcome": run.outcome,
            "completion_s": _fmt(run.elapsed_sim_time), "resolution": repr(grid.resolution),
            "origin_x": repr(grid.origin[0]), "origin_y": repr(grid.origin[1]),
            "start_x": repr(run.start.x), "start_y": repr(run.start.y), "start_theta": repr(run.start.theta)}
    (path / "meta.txt").write_text("".join(f"{k} = {v}\n" for k, v in meta.items()), encoding="utf-8")
    _write_csv(path / "trajectory.csv", ["t", "x", "y", "theta"], run.trajectory)
    if run.tick_log:
        _write_csv(path / "ticks.csv", TICK_HEADER, run.tick_log)
    _write_csv(path / "cycles.csv", CYCLE_HEADER[2:],
               [(c.cycle, c.t, c.detect_ops, c.select_ops, c.plan_ops, c.areas, c.goals)
                for c in run.stage_timings])
    if run.score_log:
        _write_csv(path / "scores.csv", SCORE_HEADER, run.score_log)
    if wallclock:
        _write_csv(path / "timings.csv", TIMING_HEADER[2:],
                   [(c.cycle, c.detect_s, c.select_s, c.plan_s) for c in run.stage_timings])
    save_pgm(grid, path / "final_map.pgm")


def run_dir_name(strategy: str, seed: int) -> str:
    return f"{strategy}_seed{seed}"


def write_report(report: BatchReport, out: Path, strategies: Sequence[str], wallclock: bool = False) -> None:
    out.mkdir(parents=True, exist_ok=True)
    results = sorted(report.results, key=lambda r: (strategies.index(r.strategy), r.seed))
    _write_csv(out / "runs.csv", RUN_HEADER, [
        (r.strategy, r.seed, r.attempt, r.replaces, r.run.outcome, r.run.elapsed_sim_time, r.run.ticks,
         r.run.cycles, r.run.final_area, r.reachable_m2, r.run.distance_travelled, r.run.blacklisted)
        for r in results])
    _write_csv(out / "curves.csv", CURVE_HEADER,
               [(r.strategy, r.seed, t, a) for r in results for t, a in r.run.area_curve])
    _write_csv(out / "cycles.csv", CYCLE_HEADER,
               [(r.strategy, r.seed, c.cycle, c.t, c.detect_ops, c.select_ops, c.plan_ops, c.areas, c.goals)
                for r in results for c in r.run.stage_timings])
    report.aggregate = {s: aggregate(results, s) for s in strategies}
    report.mean_curves = {s: mean_curve([r.run.area_curve for r in report.successful(s)])
                          for s in strategies}
    _write_csv(out / "aggregate.csv", AGG_HEADER,
               [[report.aggregate[s][k] for k in AGG_HEADER] for s in strategies])
    _write_csv(out / "mean_curve.csv", MEAN_HEADER,
               [(s, t, a, len(report.successful(s))) for s in strategies for t, a in report.mean_curves[s]])
    if wallclock:
        _write_csv(out / "timings.csv", TIMING_HEADER,
                   [(r.strategy, r.seed, c.cycle, c.detect_s, c.select_s, c.plan_s)
                    for r in results for c in r.run.stage_timings])
    for r in results:
        if r.run.final_map is not None:
            write_run_dir(r, out / "runs" / run_dir_name(r.strategy, r.seed), wallclock)
    (out / "summary.txt").write_text(summary_text(report, strategies), encoding="utf-8")


def summary_text(report: BatchReport, strategies: Sequence[str]) -> str:
    lines = []
    for s in strategies:
        a = report.aggregate[s]
        failed = a["runs"] - a["completed"]
        lines.append(f"{s}: {a['completed']} completed, {failed} failed; completion median "
                     f"{_fmt(a['completion_median'])} s (mean {_fmt(a['completion_mean'])}, "
                     f"min {_fmt(a['completion_min'])}, max {_fmt(a['completion_max'])}); "
                     f"plan ops median {_fmt(a['plan_ops_median'])}")
    if "PM" in report.aggregate and "FE" in report.aggregate:
        pm = report.aggregate["PM"]["completion_median"]
        fe_ = report.aggregate["FE"]["completion_median"]
        verdict = "yes" if pm <= fe_ else "no"
        lines.append(f"PM median <= FE median: {verdict} ({_fmt(pm)} vs {_fmt(fe_)})")
    return "\n".join(lines) + "\n"


def run_batch(cfg: ScenarioConfig, out=None, workers: int = 1, wallclock: bool = False,
              log_ticks: bool = True, figures: bool = True) -> BatchReport:
    """One run per (strategy, seed); failed runs are retried with a derived seed.

    With ``out`` set the CSV report (and figures) is written there.  If a run
    raises, whatever finished is written before :class:`BatchError` propagates.
    """
    gt = cfg.load_map()
    report = BatchReport()
    pending = [(s, seed, 0, None) for s in cfg.strategies for seed in cfg.seeds]
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        while pending:
            jobs = [(gt, cfg.start, s, replace(cfg.explore, strategy=s), seed, log_ticks)
                    for s, seed, _, _ in pending]
            outputs = pool.map(_job, jobs) if pool else map(_job, jobs)
            retry = []
            for (s, seed, attempt, orig), (run, reach) in zip(pending, outputs):
                res = RunResult(s, seed, attempt, orig, run, reach)
                report.results.append(res)
                if not res.completed and attempt + 1 < MAX_ATTEMPTS:
                    base = seed if orig is None else orig
                    retry.append((s, base + (attempt + 1) * RESEED_STRIDE, attempt + 1, base))
            pending = retry
    except Exception as exc:
        if out is not None:
            write_report(report, Path(out), cfg.strategies, wallclock)
        raise BatchError(f"run failed: {exc}") from exc
    finally:
        if pool:
            pool.shutdown()
    if out is not None:
        out = Path(out)
        write_report(report, out, cfg.strategies, wallclock)
        saved = cfg if cfg.map in BUILTIN_MAPS else replace(cfg, map=str(cfg.map_path().resolve()))
        (out / "scenario.cfg").write_text(saved.to_text(), encoding="utf-8")
        if figures:
            from .render import report_figures
            report_figures(out)
    else:
        report.aggregate = {s: aggregate(report.results, s) for s in cfg.strategies}
        report.mean_curves = {s: mean_curve([r.run.area_curve for r in report.successful(s)])
                              for s in cfg.strategies}
    return report
