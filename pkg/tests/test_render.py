import math

import numpy as np

from flowseg.engine import FlowLabeledEvent, UNLABELED
from flowseg.events import SensorGeometry
from flowseg.render import (RenderConfig, UNLABELED_GRAY, flow_color,
                            render_frames, segment_color, write_ppm)


def test_flow_color_direction_and_saturation():
    right = flow_color(50.0, 0.0, v_sat=100.0)
    left = flow_color(-50.0, 0.0, v_sat=100.0)
    assert right != left
    # zero flow is unsaturated (gray-ish): all channels equal
    r, g, b = flow_color(0.0, 0.0, v_sat=100.0)
    assert r == g == b
    # speed clamps at v_sat: colors stop changing beyond it
    assert flow_color(200.0, 0.0, 100.0) == flow_color(900.0, 0.0, 100.0)


def test_segment_color_stable():
    assert segment_color(3) == segment_color(3)
    distinct = {segment_color(i) for i in range(8)}
    assert len(distinct) >= 6


def test_render_frames_places_events():
    geom = SensorGeometry(16, 12)
    records = [
        FlowLabeledEvent(2, 3, 0, 1, 0, 40.0, 0.0),
        FlowLabeledEvent(5, 7, 40_000, 1, UNLABELED, math.nan, math.nan),
    ]
    cfg = RenderConfig(mode="flow", frame_dt_s=0.033)
    frames = render_frames(records, geom, cfg)
    assert len(frames) == 2
    assert frames[0].shape == (12, 16, 3)
    assert tuple(frames[0][3, 2]) != (0, 0, 0)
    assert tuple(frames[1][7, 5]) == UNLABELED_GRAY
    assert render_frames([], geom, cfg) == []


def test_write_ppm_header(tmp_path):
    img = np.zeros((4, 6, 3), dtype=np.uint8)
    path = tmp_path / "frame.ppm"
    write_ppm(str(path), img)
    data = path.read_bytes()
    assert data.startswith(b"P6\n6 4\n255\n")
    assert len(data) == len(b"P6\n6 4\n255\n") + 4 * 6 * 3
