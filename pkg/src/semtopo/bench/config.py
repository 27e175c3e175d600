"""Scenario configs: flat ``key = value`` text with dotted section prefixes.

Example::

    map = maze_a
    strategy = PM, FE
    seeds = 0-9
    start.x = 0.35
    goal.w_v = 4
    explore.replan_interval = 2.0
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..explorer import FE, PM, ExploreConfig
from ..world import OccupancyGrid, WorldPose, load_ground_truth
from .mazes import upsample

BUILTIN_MAPS = ("maze_a", "maze_b")
DEFAULT_START = WorldPose(0.35, 0.35, 0.0)

# section prefix -> ExploreConfig attribute holding that dataclass
_SECTIONS = {"goal": "goal", "field": "field", "sim": "sim", "fe": "fe",
             "topo": "search", "seg": "seg"}


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    map: str
    strategies: List[str] = field(default_factory=lambda: [PM])
    seeds: List[int] = field(default_factory=lambda: [0])
    start: WorldPose = DEFAULT_START
    explore: ExploreConfig = ExploreConfig()
    resolution: float = 0.05
    upsample: int = 1
    base_dir: Path = Path(".")

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        bad = [s for s in self.strategies if s not in (PM, FE)]
        if bad or not self.strategies:
            raise ConfigError(f"unknown strategy {bad}")
        if self.upsample < 1:
            raise ConfigError("upsample must be >= 1")
        if self.map not in BUILTIN_MAPS and not self.map_path().exists():
            raise ConfigError(f"map file not found: {self.map_path()}")

    def map_path(self) -> Path:
        p = Path(self.map)
        return p if p.is_absolute() else self.base_dir / p

    def load_map(self) -> OccupancyGrid:
        if self.map in BUILTIN_MAPS:
            ref = resources.files("semtopo") / "data" / f"{self.map}.txt"
            with resources.as_file(ref) as path:
                grid = load_ground_truth(path, resolution=self.resolution)
        else:
            grid = load_ground_truth(self.map_path(), resolution=self.resolution)
        return upsample(grid, self.upsample) if self.upsample > 1 else grid

    def to_text(self) -> str:
        """Canonical form; parsing it back gives an equal config."""
        lines = [f"map = {self.map}",
                 f"strategy = {', '.join(self.strategies)}",
                 f"seeds = {', '.join(str(s) for s in self.seeds)}",
                 f"resolution = {self.resolution!r}",
                 f"upsample = {self.upsample}",
                 f"start.x = {self.start.x!r}",
                 f"start.y = {self.start.y!r}",
                 f"start.theta = {self.start.theta!r}"]
        ex = self.explore
        for prefix, attr in _SECTIONS.items():
            obj = getattr(ex, attr)
            for f in dataclasses.fields(obj):
                lines.append(f"{prefix}.{f.name} = {_fmt(getattr(obj, f.name))}")
        for f in dataclasses.fields(ex):
            if f.name in _SECTIONS.values() or f.name == "strategy":
                continue
            lines.append(f"explore.{f.name} = {_fmt(getattr(ex, f.name))}")
        return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    return value if isinstance(value, str) else repr(value)


def parse_seeds(text: str) -> List[int]:
    """``"0-9"``, ``"1, 3, 5"`` or a mix of both."""
    seeds: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError(f"bad seed list {text!r}") from None
    return seeds


def _coerce(text: str, like):
    if isinstance(like, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    try:
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None
    return text


def _update(obj, updates: Dict[str, str], prefix: str):
    known = {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
    kwargs = {}
    for key, val in updates.items():
        if key not in known:
            raise ConfigError(f"unknown key {prefix}.{key}")
        kwargs[key] = _coerce(val, known[key])
    try:
        return replace(obj, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def parse_config(text: str, base_dir: Optional[Path] = None) -> ScenarioConfig:
    pairs: List[Tuple[str, str]] = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected key = value")
        pairs.append((key.strip(), val.strip()))

    top: Dict[str, str] = {}
    grouped: Dict[str, Dict[str, str]] = {}
    for key, val in pairs:
        prefix, dot, name = key.partition(".")
        if dot:
            grouped.setdefault(prefix, {})[name] = val
        else:
            top[key] = val

    unknown = set(grouped) - set(_SECTIONS) - {"explore", "start"}
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    extra = set(top) - {"map", "strategy", "seeds", "resolution", "upsample"}
    if extra:
        raise ConfigError(f"unknown key(s): {', '.join(sorted(extra))}")
    if "map" not in top:
        raise ConfigError("missing 'map'")

    ex = ExploreConfig()
    sections = {attr: _update(getattr(ex, attr), grouped.get(prefix, {}), prefix)
                for prefix, attr in _SECTIONS.items()}
    ex = replace(ex, **sections)
    ex = _update(ex, grouped.get("explore", {}), "explore")

    start_kw = {k: _coerce(v, 0.0) for k, v in grouped.get("start", {}).items()}
    if set(start_kw) - {"x", "y", "theta"}:
        raise ConfigError("start accepts x, y, theta")
    start = replace(DEFAULT_START, **start_kw)

    strategies = [s.strip().upper() for s in top.get("strategy", PM).split(",") if s.strip()]
    return ScenarioConfig(
        map=top["map"],
        strategies=strategies,
        seeds=parse_seeds(top.get("seeds", "0")),
        start=start,
        explore=ex,
        resolution=_coerce(top.get("resolution", "0.05"), 0.05),
        upsample=_coerce(top.get("upsample", "1"), 1),
        base_dir=base_dir or Path("."),
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path.parent)
