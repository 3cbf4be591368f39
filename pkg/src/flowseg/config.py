"""Flat key = value configuration files and run manifests.

Config keys are dotted: `flow_plane.n`, `track_plane.h0_deg`,
`engine.maintenance_period`.  Values are parsed by the target field's
type, unknown keys are errors, and the assembled dataclasses run their
own validation.  A manifest records everything needed to repeat a run;
the elapsed time line is informational and excluded from any
reproducibility comparison.
"""

from __future__ import annotations

import dataclasses
import time
from typing import Iterable, Optional, Sequence, Union

from .engine import EngineConfig
from .flow_plane import FlowPlaneConfig
from .track_plane import TrackPlaneConfig

PACKAGE_VERSION = "0.1.0"


class ConfigError(ValueError):
    """Bad key, bad value, or failed validation in a config source."""


_SECTIONS = ("flow_plane", "track_plane", "engine")


def _parse_value(raw: str, current) -> Union[int, float]:
    raw = raw.strip()
    if isinstance(current, bool):
        raise ConfigError("boolean config fields are not supported")
    if isinstance(current, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"expected an integer, got {raw!r}") from None
    if isinstance(current, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"expected a number, got {raw!r}") from None
    raise ConfigError(f"unsupported field type {type(current).__name__}")


def parse_assignments(pairs: Iterable[str]) -> dict[str, str]:
    """Split `section.key=value` strings; raises ConfigError on malformed."""
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        out[key.strip()] = value.strip()
    return out


def build_config(assignments: Optional[dict[str, str]] = None) -> EngineConfig:
    """EngineConfig from defaults plus dotted-key overrides."""
    fp = dataclasses.asdict(FlowPlaneConfig())
    tp = dataclasses.asdict(TrackPlaneConfig())
    eng = {f.name: getattr(EngineConfig(), f.name)
           for f in dataclasses.fields(EngineConfig)
           if f.name not in ("flow_plane", "track_plane")}
    buckets = {"flow_plane": fp, "track_plane": tp, "engine": eng}

    for key, raw in (assignments or {}).items():
        if "." not in key:
            raise ConfigError(f"config key {key!r} needs a section prefix "
                              f"({', '.join(_SECTIONS)})")
        section, _, name = key.partition(".")
        if section not in buckets:
            raise ConfigError(f"unknown config section {section!r}")
        bucket = buckets[section]
        if name not in bucket:
            raise ConfigError(f"unknown config key {key!r}")
        bucket[name] = _parse_value(raw, bucket[name])

    try:
        return EngineConfig(flow_plane=FlowPlaneConfig(**fp),
                            track_plane=TrackPlaneConfig(**tp), **eng)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(source: Union[str, Iterable[str]],
                overrides: Optional[Sequence[str]] = None) -> EngineConfig:
    """Read a key = value file (or lines); '#' starts a comment."""
    if isinstance(source, str):
        with open(source) as fh:
            lines = fh.readlines()
    else:
        lines = list(source)
    assignments: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        assignments[key.strip()] = value.strip()
    assignments.update(parse_assignments(overrides or []))
    return build_config(assignments)


def config_lines(cfg: EngineConfig) -> list[str]:
    """Dotted key = value dump, section order fixed, field order declared."""
    lines = []
    for section, obj in (("flow_plane", cfg.flow_plane),
                         ("track_plane", cfg.track_plane)):
        for f in dataclasses.fields(obj):
            lines.append(f"{section}.{f.name} = {getattr(obj, f.name)!r}")
    for f in dataclasses.fields(cfg):
        if f.name in ("flow_plane", "track_plane"):
            continue
        lines.append(f"engine.{f.name} = {getattr(cfg, f.name)!r}")
    return lines


def manifest_lines(command: str, input_path: Optional[str],
                   outputs: dict[str, str], counts: dict[str, int],
                   elapsed_s: float,
                   cfg: Optional[EngineConfig] = None) -> list[str]:
    lines = [
        "# run manifest",
        f"version={PACKAGE_VERSION}",
        f"command={command}",
        f"wall_clock={time.strftime('%Y-%m-%dT%H:%M:%S')}",
        f"elapsed_s={elapsed_s:.3f}",
    ]
    if input_path is not None:
        lines.append(f"input={input_path}")
    for name in sorted(outputs):
        lines.append(f"output.{name}={outputs[name]}")
    for name in sorted(counts):
        lines.append(f"count.{name}={counts[name]}")
    if cfg is not None:
        lines.extend(f"config.{line.replace(' = ', '=')}"
                     for line in config_lines(cfg))
    return lines


def write_manifest(path: str, lines: Sequence[str]) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
