"""Frame rendering of labeled event output.

Labeled events are bucketed into fixed-length intervals and each bucket
becomes one image: flow mode colors pixels by flow direction (hue) and
speed (saturation), segment mode colors by plane id, count mode is a
grayscale event-count image.  Output is binary PPM (P6) or PGM (P5),
chosen by mode, so no imaging dependency is needed.
"""

from __future__ import annotations

import colorsys
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import UNLABELED, FlowLabeledEvent
from .events import SensorGeometry, DEFAULT_GEOMETRY

MODES = ("flow", "segment", "count")
UNLABELED_GRAY = (96, 96, 96)
GOLDEN = 0.6180339887498949


@dataclass
class RenderConfig:
    mode: str = "flow"
    frame_dt_s: float = 1.0 / 30.0
    v_sat: float = 100.0       # px/s mapped to full saturation

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.frame_dt_s <= 0:
            raise ValueError("frame_dt_s must be positive")
        if self.v_sat <= 0:
            raise ValueError("v_sat must be positive")


def segment_color(segment: int) -> tuple[int, int, int]:
    """Stable palette: golden-ratio hue walk over plane ids."""
    hue = (segment * GOLDEN) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.80, 1.0)
    return int(r * 255), int(g * 255), int(b * 255)


def flow_color(v_u: float, v_v: float, v_sat: float) -> tuple[int, int, int]:
    speed = math.hypot(v_u, v_v)
    hue = (math.atan2(v_v, v_u) + math.pi) / (2.0 * math.pi)
    sat = min(1.0, speed / v_sat)
    r, g, b = colorsys.hsv_to_rgb(hue % 1.0, sat, 1.0)
    return int(r * 255), int(g * 255), int(b * 255)


def render_frames(records: Sequence[FlowLabeledEvent],
                  geometry: SensorGeometry = DEFAULT_GEOMETRY,
                  cfg: RenderConfig = None) -> list[np.ndarray]:
    """One array per interval: (H, W, 3) uint8, or (H, W) for count mode."""
    cfg = cfg or RenderConfig()
    if not records:
        return []
    h, w = geometry.height, geometry.width
    dt_us = max(1, int(cfg.frame_dt_s * 1e6))
    t0 = records[0].t
    n_frames = (records[-1].t - t0) // dt_us + 1
    if cfg.mode == "count":
        frames = [np.zeros((h, w), dtype=np.int64) for _ in range(n_frames)]
        for rec in records:
            frames[(rec.t - t0) // dt_us][rec.v, rec.u] += 1
        out = []
        for counts in frames:
            peak = counts.max()
            if peak == 0:
                out.append(np.zeros((h, w), dtype=np.uint8))
            else:
                out.append((counts * 255 // peak).astype(np.uint8))
        return out

    frames = [np.zeros((h, w, 3), dtype=np.uint8) for _ in range(n_frames)]
    for rec in records:
        frame = frames[(rec.t - t0) // dt_us]
        if rec.segment == UNLABELED or not (math.isfinite(rec.v_u)
                                            and math.isfinite(rec.v_v)):
            frame[rec.v, rec.u] = UNLABELED_GRAY
        elif cfg.mode == "segment":
            frame[rec.v, rec.u] = segment_color(rec.segment)
        else:
            frame[rec.v, rec.u] = flow_color(rec.v_u, rec.v_v, cfg.v_sat)
    return frames


def write_ppm(path, image: np.ndarray) -> None:
    """Binary P6; image is (H, W, 3) uint8."""
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.astype(np.uint8).tobytes())


def write_pgm(path, image: np.ndarray) -> None:
    """Binary P5; image is (H, W) uint8."""
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.astype(np.uint8).tobytes())


def render_to_dir(records: Sequence[FlowLabeledEvent], out_dir,
                  geometry: SensorGeometry = DEFAULT_GEOMETRY,
                  cfg: RenderConfig = None, prefix: str = "frame") -> list[str]:
    """Write numbered frames into out_dir; returns the paths written."""
    cfg = cfg or RenderConfig()
    frames = render_frames(records, geometry, cfg)
    os.makedirs(out_dir, exist_ok=True)
    ext = "pgm" if cfg.mode == "count" else "ppm"
    writer = write_pgm if cfg.mode == "count" else write_ppm
    paths = []
    for i, frame in enumerate(frames):
        path = os.path.join(out_dir, f"{prefix}_{i:05d}.{ext}")
        writer(path, frame)
        paths.append(path)
    return paths
