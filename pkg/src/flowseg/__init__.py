"""Event-camera optical flow estimation and velocity-based segmentation.

The engine consumes an asynchronous event stream and labels each event
with a segment id and that segment's image-plane velocity, with no
frames and no batch optimization: candidate flows are scored by the
sharpness of polarity-signed event projections, stable candidates become
tracking planes, and tracking planes follow their structure through
recentering, footprint evolution, merging and pruning.  A synthetic
scene generator with per-event ground truth and a timestamp-surface
plane-fit baseline support evaluation.
"""

from .engine import (Engine, EngineConfig, EngineStats, FlowLabeledEvent,
                     UNLABELED, read_labeled, run_stream, write_labeled)
from .events import (DEFAULT_GEOMETRY, Event, EventStream, GeometryError,
                     OrderingError, ParseError, SensorGeometry, StreamError,
                     decode_event, encode_event, load_stream, save_stream)
from .evaluation import (ErrorSummary, FlowError, angle_error_deg,
                         cross_label_fraction, flow_errors,
                         magnitude_pct_error, majority_structure_map,
                         report_lines, robot_ground_truth, summarize)
from .flow_plane import (AssociationError, AssociationResult, FlowPlane,
                         FlowPlaneConfig, MetricArray, PlaneSeed,
                         extract_associated, index_to_flow,
                         metric_local_maxima, refine)
from .lk import LKConfig, TimestampSurfaces, fit_plane_flow, run_lk
from .projection import (AccumulatorGrid, ConsistencyError, FlowVector,
                         accumulate, metric_bruteforce, pack_cell,
                         project_event, retract, round_half_away, unpack_cell)
from .render import RenderConfig, render_frames, render_to_dir, write_pgm, write_ppm
from .synth import (ConstantMotion, GroundTruth, PendulumMotion,
                    RotationMotion, ShapeContour, build_contour,
                    generate_events, generate_scene, read_gt, write_gt)
from .track_plane import TrackPlane, TrackPlaneConfig, event_lifetime_s
from .config import (ConfigError, build_config, config_lines, load_config,
                     parse_assignments)

__version__ = "0.1.0"

__all__ = [
    "AccumulatorGrid", "AssociationError", "AssociationResult",
    "ConfigError", "ConsistencyError", "ConstantMotion", "DEFAULT_GEOMETRY",
    "Engine", "EngineConfig", "EngineStats", "ErrorSummary", "Event",
    "EventStream", "FlowError", "FlowLabeledEvent", "FlowPlane",
    "FlowPlaneConfig", "FlowVector", "GeometryError", "GroundTruth",
    "LKConfig", "MetricArray", "OrderingError", "ParseError",
    "PendulumMotion", "PlaneSeed", "RenderConfig", "RotationMotion",
    "SensorGeometry", "ShapeContour", "StreamError", "TimestampSurfaces",
    "TrackPlane", "TrackPlaneConfig", "UNLABELED", "accumulate",
    "angle_error_deg", "build_config", "build_contour", "config_lines",
    "cross_label_fraction", "decode_event", "encode_event",
    "event_lifetime_s", "extract_associated", "fit_plane_flow",
    "flow_errors", "generate_events", "generate_scene", "index_to_flow",
    "load_config", "load_stream", "magnitude_pct_error",
    "majority_structure_map", "metric_bruteforce", "metric_local_maxima",
    "pack_cell", "parse_assignments", "project_event", "read_gt",
    "read_labeled", "refine", "render_frames", "render_to_dir",
    "report_lines", "retract", "robot_ground_truth", "round_half_away",
    "run_lk", "run_stream", "save_stream", "summarize", "unpack_cell",
    "write_gt", "write_labeled", "write_pgm", "write_ppm",
]
