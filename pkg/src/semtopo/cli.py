"""Command-line front end.

    semtopo run     --map maze_a --strategy PM --seed 3 --out out/run
    semtopo batch   scenario.cfg --out out/batch --workers 4
    semtopo render  out/run/PM_seed3
    semtopo compare out/batch_a out/batch_b --out out/compare

``run`` and ``batch`` exit with 0 only when every run completed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .bench.batch import BatchError, run_batch, run_dir_name
from .bench.config import ConfigError, ScenarioConfig, load_config, parse_config
from .bench.render import MissingArtifact, compare_batches, load_batch_runs, render_run
from .world import MapFormatError

log = logging.getLogger("semtopo")


def _scenario(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.map:
        cfg = parse_config(f"map = {args.map}", Path.cwd())
    else:
        raise ConfigError("give a config file or --map")
    changes = {}
    if args.config and args.map:
        changes["map"] = args.map
        changes["base_dir"] = Path.cwd()
    if args.strategy:
        changes["strategies"] = [s.strip().upper() for s in args.strategy.split(",")]
    if args.seed is not None:
        changes["seeds"] = [args.seed]
    return replace(cfg, **changes) if changes else cfg


def _add_scenario_flags(p: argparse.ArgumentParser, batch: bool) -> None:
    p.add_argument("config", nargs="?", help="key = value scenario file")
    p.add_argument("--map", help="maze_a, maze_b or a map file (overrides the config)")
    p.add_argument("--strategy", help="PM, FE or PM,FE")
    p.add_argument("--seed", type=int, help="single seed (overrides the config's list)")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--wallclock", action="store_true", help="also write wall-clock stage timings")
    if batch:
        p.add_argument("--workers", type=int, default=1, help="parallel runs")
        p.add_argument("--no-ticks", action="store_true", help="skip per-tick logs")


def cmd_run(args) -> int:
    cfg = _scenario(args)
    if args.seed is None:
        cfg = replace(cfg, seeds=cfg.seeds[:1])
    report = run_batch(cfg, args.out, wallclock=args.wallclock)
    for r in report.results:
        render_run(args.out / "runs" / run_dir_name(r.strategy, r.seed))
        print(f"{r.strategy} seed {r.seed}: {r.run.outcome} after {r.run.elapsed_sim_time:.1f} s, "
              f"{r.run.final_area:.3f} of {r.reachable_m2:.3f} m² explored")
    return 0 if report.all_completed else 1


def cmd_batch(args) -> int:
    cfg = _scenario(args)
    report = run_batch(cfg, args.out, workers=max(1, args.workers), wallclock=args.wallclock,
                       log_ticks=not args.no_ticks)
    print((args.out / "summary.txt").read_text(encoding="utf-8"), end="")
    return 0 if report.all_completed else 1


def cmd_render(args) -> int:
    target = Path(args.path)
    dirs: List[Path] = [target] if (target / "meta.txt").exists() else load_batch_runs(target)
    for d in dirs:
        out = args.out / d.name if args.out else None
        res = render_run(d, out)
        print(" ".join(str(f) for f in res.files))
    return 0


def cmd_compare(args) -> int:
    for f in compare_batches(args.batches, args.out):
        print(f)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semtopo", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="one exploration run with rendered images")
    _add_scenario_flags(p, batch=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="seeded runs with CSV report and figures")
    _add_scenario_flags(p, batch=True)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("render", help="images for a run directory or every run of a batch")
    p.add_argument("path", help="run directory or batch directory")
    p.add_argument("--out", type=Path, help="output directory (default: beside the artifacts)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", help="overlay several batch reports")
    p.add_argument("batches", nargs="+", help="batch output directories")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, MapFormatError, MissingArtifact, BatchError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
