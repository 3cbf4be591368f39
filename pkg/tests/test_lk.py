import math

import numpy as np
import pytest

from flowseg.engine import UNLABELED
from flowseg.events import Event, SensorGeometry
from flowseg.lk import LKConfig, TimestampSurfaces, fit_plane_flow, run_lk


def ramp_surface(shape, v_u, v_v, t0=1.0):
    """Timestamp surface of an edge sweeping at (v_u, v_v): the most
    recent crossing of pixel (x, y) happened at t0 + x/v_u + y/v_v."""
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w]
    t = np.full(shape, t0, dtype=np.float64)
    if v_u != 0:
        t += xs / v_u
    if v_v != 0:
        t += ys / v_v
    return t


def test_fit_recovers_known_flow():
    cfg = LKConfig()
    surface = ramp_surface((40, 40), 58.0, 0.0)
    fit = fit_plane_flow(surface, 20, 20, cfg)
    assert fit is not None
    assert fit[0] == pytest.approx(58.0, rel=1e-6)
    assert fit[1] == pytest.approx(0.0, abs=1e-6)

    diagonal = ramp_surface((40, 40), 40.0, 30.0)
    fit = fit_plane_flow(diagonal, 20, 20, cfg)
    speed = math.hypot(*fit)
    # the plane fit recovers the normal component of a diagonal ramp
    assert speed == pytest.approx(24.0, rel=1e-6)     # 1/|(1/40, 1/30)|


def test_fit_rejects_flat_surface():
    cfg = LKConfig()
    flat = np.full((20, 20), 5.0)
    assert fit_plane_flow(flat, 10, 10, cfg) is None


def test_fit_rejects_sparse_window():
    cfg = LKConfig(min_valid=10)
    surface = np.full((20, 20), np.nan)
    surface[10, 10] = 1.0
    surface[10, 11] = 1.1
    assert fit_plane_flow(surface, 10, 10, cfg) is None


def test_fit_rejects_collinear_pixels():
    # valid pixels on one row only: the spread matrix is rank deficient
    cfg = LKConfig(min_valid=5)
    surface = np.full((20, 20), np.nan)
    for x in range(5, 16):
        surface[10, x] = x * 0.01
    assert fit_plane_flow(surface, 10, 10, cfg) is None


def test_surfaces_split_by_polarity():
    geom = SensorGeometry(32, 32)
    surfaces = TimestampSurfaces(geom)
    surfaces.update(Event(3, 4, 1000, 1))
    surfaces.update(Event(3, 4, 2000, -1))
    assert surfaces.positive[4, 3] == pytest.approx(1e-3)
    assert surfaces.negative[4, 3] == pytest.approx(2e-3)
    assert np.isnan(surfaces.positive[0, 0])


def test_run_lk_labels_all_events():
    geom = SensorGeometry(48, 48)
    events = []
    t = 0
    # an edge sweeping right at ~50 px/s, one column per 20 ms
    for step in range(24):
        t = step * 20_000
        for y in range(8, 40):
            events.append(Event(8 + step, y, t, 1))
    out = run_lk(events, geom)
    assert len(out) == len(events)
    solved = [rec for rec in out if rec.segment == 0]
    unsolved = [rec for rec in out if rec.segment == UNLABELED]
    assert len(solved) + len(unsolved) == len(out)
    assert solved, "a clean sweep should produce some fits"
    assert all(math.isnan(rec.v_u) for rec in unsolved)
    # late fits see a full window and recover the sweep speed
    late = [rec for rec in solved if rec.t >= 300_000]
    med = np.median([rec.v_u for rec in late])
    assert med == pytest.approx(50.0, rel=0.15)
