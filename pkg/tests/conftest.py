"""Shared scene fixtures.

The two expensive end-to-end scenes (fast hexagon, rotated rectangle)
are generated and segmented once per session; several tests slice
different assertions out of the same run.
"""

import math
import time

import pytest

from flowseg.engine import Engine, EngineConfig
from flowseg.flow_plane import FlowPlaneConfig
from flowseg.lk import run_lk
from flowseg.synth import ConstantMotion, build_contour, generate_scene
from flowseg.track_plane import TrackPlaneConfig

OFF_AXIS = math.radians(3.0)   # slight tilt keeps the argmax off knife edges


def angled(speed, angle=OFF_AXIS):
    return speed * math.cos(angle), speed * math.sin(angle)


@pytest.fixture(scope="session")
def hexagon_run():
    """Fast hexagon scene: events, truth, one timed engine run."""
    vu, vv = angled(58.0)
    contour = build_contour("hexagon", width=65.0, center=(45.0, 90.0))
    stream, gt = generate_scene(
        objects=[(contour, ConstantMotion(vu, vv))],
        duration=2.6, noise_rate=1500.0, burst_size=5, seed=11)
    events = list(stream.events)
    cfg = EngineConfig(track_plane=TrackPlaneConfig(evolve_threshold=12))
    engine = Engine(cfg)
    start = time.perf_counter()
    labeled = engine.run(events)
    wall_s = time.perf_counter() - start
    return {
        "events": events,
        "gt": gt,
        "cfg": cfg,
        "engine": engine,
        "labeled": labeled,
        "wall_s": wall_s,
        "true_flow": (vu, vv),
        "settled_after_us": 1.3e6,
    }


@pytest.fixture(scope="session")
def rectangle_runs():
    """Rotated rectangle at (58, 0): engine run and plane-fit baseline."""
    contour = build_contour("rectangle", width=120.0, height=60.0,
                            center=(68.0, 90.0), rotate_deg=40.0)
    stream, gt = generate_scene(
        objects=[(contour, ConstantMotion(58.0, 0.0))],
        duration=1.75, noise_rate=1000.0, burst_size=3, seed=13)
    events = list(stream.events)
    engine = Engine(EngineConfig(
        track_plane=TrackPlaneConfig(evolve_threshold=10)))
    labeled = engine.run(events)
    baseline = run_lk(events, stream.geometry)
    return {
        "events": events,
        "gt": gt,
        "labeled": labeled,
        "baseline": baseline,
        "true_flow": (58.0, 0.0),
        "settled_after_us": 0.875e6,
    }
