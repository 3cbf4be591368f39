"""Flow initialization: an n x n array of perturbed projections.

Candidate flows are laid out on a tan-mapped angular grid around a center
flow; every incoming event is accumulated into all n*n grids and the
sharpness metric argmax is tracked incrementally.  Once the argmax cell
has been stable for p_stable consecutive events, the events backing the
winning projection are extracted (statistical threshold over cell values
plus 8-connected flood fill) and re-projected through progressively
narrower arrays (range/q per level).  The final association seeds a
tracking plane; everything else is re-projected into a fresh level-0
array.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .events import Event
from .projection import (KEY_M, FlowVector, _round_array, event_columns,
                         _project_sums)


class AssociationError(Exception):
    """No seed cells above threshold, or an empty winning grid."""


@dataclass
class FlowPlaneConfig:
    n: int = 20                    # array is n x n candidate flows
    angular_range: float = math.pi
    v_ref: float = 100.0           # px/s mapped to 45 deg
    p_stable: int = 500            # consecutive stable-argmax events
    q: float = 9.0                 # range shrink factor per refinement
    depth_max: int = 3             # refinement levels below the top array
    w: float = 2.0                 # seed threshold: |f| > mu + w*sigma
    noise_lifespan_s: float = 0.5  # unassociated events older than this flush

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0 < self.angular_range <= math.pi:
            raise ValueError("angular_range must be in (0, pi]")
        if self.v_ref <= 0:
            raise ValueError("v_ref must be positive")
        if self.p_stable < 1:
            raise ValueError("p_stable must be at least 1")
        if self.q <= 1:
            raise ValueError("q must exceed 1")
        if self.depth_max < 0:
            raise ValueError("depth_max must be non-negative")
        if self.w < 0:
            raise ValueError("w must be non-negative")
        if self.noise_lifespan_s <= 0:
            raise ValueError("noise_lifespan_s must be positive")


def index_to_flow(i: int, j: int, center_flow, angular_range: float,
                  cfg: FlowPlaneConfig) -> FlowVector:
    """Flow of array cell (i, j): center + v_ref*tan of the cell angle."""
    theta_u = angular_range * ((i + 0.5) / cfg.n - 0.5)
    theta_v = angular_range * ((j + 0.5) / cfg.n - 0.5)
    return FlowVector(center_flow[0] + cfg.v_ref * math.tan(theta_u),
                      center_flow[1] + cfg.v_ref * math.tan(theta_v))


class MetricArray:
    """n x n sparse accumulation grids sharing one event set.

    Grid k = j*n + i (row-major); the argmax ties break to the lowest
    (j, i).  All grids share t_ref, frozen at the first event.
    """

    def __init__(self, cfg: FlowPlaneConfig, center_flow=(0.0, 0.0),
                 angular_range: Optional[float] = None, level: int = 0):
        self.cfg = cfg
        self.center_flow = FlowVector(float(center_flow[0]), float(center_flow[1]))
        self.angular_range = cfg.angular_range if angular_range is None else angular_range
        self.level = level
        n = cfg.n
        flows = []
        for j in range(n):
            for i in range(n):
                flows.append(index_to_flow(i, j, self.center_flow,
                                           self.angular_range, cfg))
        self.flows: list[FlowVector] = flows
        self.vu_arr = np.array([f.v_u for f in flows])
        self.vv_arr = np.array([f.v_v for f in flows])
        self.cells: list[dict[int, int]] = [dict() for _ in range(n * n)]
        self.metrics: list[int] = [0] * (n * n)
        self.held: list[Event] = []
        self.t_ref_us: Optional[int] = None
        self.argmax_index: Optional[int] = None

    def __len__(self) -> int:
        return len(self.held)

    def ingest(self, ev: Event) -> int:
        """Accumulate one event into every grid; returns the argmax index."""
        u, v, t, s = ev
        if self.t_ref_us is None:
            self.t_ref_us = t
        dt = (t - self.t_ref_us) * 1e-6
        xs = _round_array(u - self.vu_arr * dt)
        ys = _round_array(v - self.vv_arr * dt)
        keys = (xs * KEY_M + ys).tolist()
        self.held.append(ev)
        mets = self.metrics
        k = 0
        if s > 0:
            for cells, key in zip(self.cells, keys):
                c = cells.get(key, 0)
                cells[key] = c + 1
                mets[k] += 2 * c + 1
                k += 1
        else:
            for cells, key in zip(self.cells, keys):
                c = cells.get(key, 0)
                cells[key] = c - 1
                mets[k] += 1 - 2 * c
                k += 1
        peak = max(mets)
        self.argmax_index = mets.index(peak)
        return self.argmax_index

    def fill(self, events: Sequence[Event]) -> None:
        """Batch-accumulate an event list (order preserved for held)."""
        if not events:
            return
        if self.t_ref_us is None:
            self.t_ref_us = events[0].t
        us, vs, ts, ss = event_columns(events)
        for k, flow in enumerate(self.flows):
            keys, sums = _project_sums(us, vs, ts, ss, flow, self.t_ref_us)
            cells = self.cells[k]
            if not cells:
                # fresh grid: unique keys, so the dict builds in one shot
                self.cells[k] = dict(zip(keys.tolist(), sums.tolist()))
                self.metrics[k] = int(np.dot(sums, sums))
                continue
            metric = self.metrics[k]
            for key, add in zip(keys.tolist(), sums.tolist()):
                c = cells.get(key, 0)
                cells[key] = c + add
                metric += add * (2 * c + add)
            self.metrics[k] = metric
        self.held.extend(events)
        peak = max(self.metrics)
        self.argmax_index = self.metrics.index(peak)

    def fill_scan(self, events: Sequence[Event]) -> None:
        """Metrics-only fill for single-shot arrays (refinement levels).

        Leaves every cell dict empty, so the array must not be ingested
        into afterwards; materialize_cells() builds the one grid a caller
        actually reads.
        """
        if not events:
            return
        if self.t_ref_us is None:
            self.t_ref_us = events[0].t
        us, vs, ts, ss = event_columns(events)
        mets = self.metrics
        for k, flow in enumerate(self.flows):
            _, sums = _project_sums(us, vs, ts, ss, flow, self.t_ref_us)
            mets[k] = int(np.dot(sums, sums))
        self.held.extend(events)
        peak = max(mets)
        self.argmax_index = mets.index(peak)

    def materialize_cells(self, k: int) -> dict[int, int]:
        """Build (and cache) grid k's cell dict from the held events."""
        if not self.cells[k] and self.held:
            us, vs, ts, ss = event_columns(self.held)
            keys, sums = _project_sums(us, vs, ts, ss, self.flows[k],
                                       self.t_ref_us)
            self.cells[k] = dict(zip(keys.tolist(), sums.tolist()))
        return self.cells[k]

    def flush_older_than(self, cutoff_us: int) -> int:
        """Retract events with t < cutoff_us; returns how many."""
        stale = [e for e in self.held if e.t < cutoff_us]
        if not stale:
            return 0
        self.held = [e for e in self.held if e.t >= cutoff_us]
        us, vs, ts, ss = event_columns(stale)
        for k, flow in enumerate(self.flows):
            keys, sums = _project_sums(us, vs, ts, ss, flow, self.t_ref_us)
            cells = self.cells[k]
            metric = self.metrics[k]
            for key, sub in zip(keys.tolist(), sums.tolist()):
                c = cells[key]
                cells[key] = c - sub
                metric += sub * (sub - 2 * c)
            self.metrics[k] = metric
        if self.held:
            peak = max(self.metrics)
            self.argmax_index = self.metrics.index(peak)
        else:
            self.argmax_index = None
        return len(stale)

    @property
    def argmax_cell(self) -> Optional[tuple[int, int]]:
        if self.argmax_index is None:
            return None
        n = self.cfg.n
        return self.argmax_index % n, self.argmax_index // n

    @property
    def argmax_flow(self) -> Optional[FlowVector]:
        if self.argmax_index is None:
            return None
        return self.flows[self.argmax_index]

    def metrics_grid(self) -> np.ndarray:
        n = self.cfg.n
        return np.array(self.metrics, dtype=np.int64).reshape(n, n)

    def dump_csv_rows(self) -> list[str]:
        rows = ["i,j,v_u,v_v,m"]
        n = self.cfg.n
        for j in range(n):
            for i in range(n):
                k = j * n + i
                f = self.flows[k]
                rows.append(f"{i},{j},{f.v_u!r},{f.v_v!r},{self.metrics[k]}")
        return rows


def metric_local_maxima(metrics_2d: np.ndarray,
                        floor_frac: float = 0.05) -> list[tuple[int, int]]:
    """(i, j) local maxima over 8-neighborhoods, one per connected plateau,
    ignoring cells below floor_frac of the global max."""
    m = np.asarray(metrics_2d)
    peak = m.max()
    if peak <= 0:
        return []
    floor = floor_frac * peak
    n_rows, n_cols = m.shape
    padded = np.full((n_rows + 2, n_cols + 2), -np.inf)
    padded[1:-1, 1:-1] = m
    qualifies = m >= floor
    for dj in (-1, 0, 1):
        for di in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            qualifies &= m >= padded[1 + dj:n_rows + 1 + dj, 1 + di:n_cols + 1 + di]
    seen = np.zeros_like(qualifies)
    result = []
    for j in range(n_rows):
        for i in range(n_cols):
            if not qualifies[j, i] or seen[j, i]:
                continue
            # flood one plateau of equal-valued qualifying neighbors
            queue = deque([(j, i)])
            seen[j, i] = True
            while queue:
                cj, ci = queue.popleft()
                for dj in (-1, 0, 1):
                    for di in (-1, 0, 1):
                        nj, ni = cj + dj, ci + di
                        if (0 <= nj < n_rows and 0 <= ni < n_cols
                                and qualifies[nj, ni] and not seen[nj, ni]
                                and m[nj, ni] == m[j, i]):
                            seen[nj, ni] = True
                            queue.append((nj, ni))
            result.append((i, j))
    return result


@dataclass
class AssociationResult:
    event_indices: list[int]       # into the array's held list
    events: list[Event]
    flow: FlowVector
    footprint: set[int]            # packed projected cells
    mu: float
    sigma: float
    threshold: float


def cell_value_stats(values: Sequence[int]) -> tuple[float, float]:
    """Mean and population standard deviation of |f| over nonzero cells."""
    mags = [abs(v) for v in values if v != 0]
    if not mags:
        raise AssociationError("winning grid has no nonzero cells")
    mu = sum(mags) / len(mags)
    var = sum((x - mu) ** 2 for x in mags) / len(mags)
    return mu, math.sqrt(var)


def flood_fill_cells(nonzero: set[int], seeds: set[int]) -> set[int]:
    """8-connected closure of seeds over the nonzero cell set (packed keys)."""
    footprint = set()
    queue = deque(sorted(seeds))
    neighbor_offsets = (1, -1, KEY_M, -KEY_M, KEY_M + 1, KEY_M - 1,
                        -KEY_M + 1, -KEY_M - 1)
    while queue:
        key = queue.popleft()
        if key in footprint:
            continue
        footprint.add(key)
        for off in neighbor_offsets:
            nb = key + off
            if nb in nonzero and nb not in footprint:
                queue.append(nb)
    return footprint


def extract_associated(array: MetricArray,
                       w: Optional[float] = None) -> AssociationResult:
    """Select the events backing the winning projection.

    Seeds are cells with |f| strictly above mu + w*sigma (stats over the
    winning grid's nonzero cells); the footprint is their 8-connected
    flood-fill closure over nonzero cells.  Raises AssociationError when
    no cell clears the threshold.
    """
    if array.argmax_index is None:
        raise AssociationError("empty array")
    if w is None:
        w = array.cfg.w
    k = array.argmax_index
    cells = array.cells[k]
    mu, sigma = cell_value_stats(list(cells.values()))
    threshold = mu + w * sigma
    nonzero = {key for key, c in cells.items() if c != 0}
    seeds = {key for key in nonzero if abs(cells[key]) > threshold}
    if not seeds:
        raise AssociationError(
            f"no cell above threshold {threshold:.2f} (mu={mu:.2f}, sigma={sigma:.2f})")
    footprint = flood_fill_cells(nonzero, seeds)

    flow = array.flows[k]
    us, vs, ts, ss = event_columns(array.held)
    dt = (ts - array.t_ref_us) * 1e-6
    xs = _round_array(us - flow.v_u * dt)
    ys = _round_array(vs - flow.v_v * dt)
    keys = (xs * KEY_M + ys).tolist()
    indices = [i for i, key in enumerate(keys) if key in footprint]
    return AssociationResult(
        event_indices=indices,
        events=[array.held[i] for i in indices],
        flow=flow,
        footprint=footprint,
        mu=mu, sigma=sigma, threshold=threshold)


def refine(assoc: AssociationResult, cfg: FlowPlaneConfig, parent_range: float,
           level: int, center_flow=None) -> MetricArray:
    """Re-project associated events through a range/q array around a flow.

    The center defaults to the association's flow; deeper levels pass the
    previous level's argmax flow instead.
    """
    if center_flow is None:
        center_flow = assoc.flow
    child = MetricArray(cfg, center_flow, parent_range / cfg.q, level)
    child.fill_scan(assoc.events)
    return child


class PlaneSeed(NamedTuple):
    events: list[Event]
    flow: FlowVector
    footprint: set[int]


class FlowPlane:
    """Stateful initializer: ingest events, emit tracking seeds."""

    def __init__(self, cfg: Optional[FlowPlaneConfig] = None):
        self.cfg = cfg or FlowPlaneConfig()
        self.array = MetricArray(self.cfg)
        self.stability_count = 0
        self._stable_index: Optional[int] = None
        self.total_ingested = 0
        self.emissions = 0

    def ingest(self, ev: Event) -> None:
        index = self.array.ingest(ev)
        self.total_ingested += 1
        if index == self._stable_index:
            self.stability_count += 1
        else:
            self._stable_index = index
            self.stability_count = 1

    def stability_check(self) -> bool:
        return self.stability_count >= self.cfg.p_stable

    def try_emit(self) -> Optional[PlaneSeed]:
        """Extract, refine coarse-to-fine, emit; rebuild with the remainder.

        Association runs once on the stable top-level array; the
        refinement levels re-project only the associated events and
        sharpen the flow through their argmax.  Returns a PlaneSeed, or
        None when not stable or when association failed (the stability
        counter resets in the failure case).
        """
        if not self.stability_check():
            return None
        cfg = self.cfg
        try:
            assoc = extract_associated(self.array, cfg.w)
        except AssociationError:
            self.stability_count = 0
            self._stable_index = None
            return None

        flow = assoc.flow
        footprint = assoc.footprint
        parent_range = self.array.angular_range
        deepest = None
        for level in range(1, cfg.depth_max + 1):
            deepest = refine(assoc, cfg, parent_range, level,
                             center_flow=flow)
            parent_range = deepest.angular_range
            flow = deepest.argmax_flow
        if deepest is not None:
            k = deepest.argmax_index
            winner = deepest.materialize_cells(k)
            footprint = {key for key, c in winner.items() if c != 0}

        taken = set(assoc.event_indices)
        remaining = [e for i, e in enumerate(self.array.held) if i not in taken]
        seed = PlaneSeed(assoc.events, flow, footprint)
        self.array = MetricArray(cfg)
        self.array.fill(remaining)
        self.stability_count = 0
        self._stable_index = self.array.argmax_index
        self.emissions += 1
        return seed

    def flush_noise(self, now_us: int) -> int:
        """Retract held events older than the noise lifespan."""
        cutoff = now_us - int(self.cfg.noise_lifespan_s * 1e6)
        before = self.array.argmax_index
        removed = self.array.flush_older_than(cutoff)
        if removed and self.array.argmax_index != before:
            self.stability_count = 0
            self._stable_index = self.array.argmax_index
        return removed
