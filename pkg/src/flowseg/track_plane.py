"""Velocity tracking: one plane per segmented structure.

A plane owns m x m accumulation grids whose flows are angular
perturbations (step h per axis) around the plane's center flow.  An
event whose center-grid projection lands in the active footprint is a
hit: it accumulates into every grid, and each grid whose own projected
cell was already nonzero scores a hit point.  When any grid's points
clear hit_fraction * |footprint| the plane recenters on that grid's
flow, halving h when the center wins and doubling it otherwise.  Misses
are counted per projected cell; a cell missed evolve_threshold times is
promoted into the footprint, which is how the plane follows contour
change.  Events expire lifetime_px / speed seconds after arrival and
retract from all grids.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

from .events import Event
from .projection import (KEY_M, AccumulatorGrid, ConsistencyError, FlowVector,
                         event_columns, round_half_away)


@dataclass
class TrackPlaneConfig:
    m_grid: int = 3                # grids per axis (odd, center = current flow)
    v_ref: float = 100.0           # px/s mapped to 45 deg, as in the flow plane
    h0_deg: float = 0.02           # initial angular perturbation step
    h_min_deg: float = 0.001
    h_max_deg: float = 5.0
    hit_fraction: float = 0.10     # recenter when a grid's hits clear this * |A|
    min_recenter_hits: int = 16    # floor on that trigger; tiny footprints would
                                   # otherwise recenter on 2-3 events of noise
    evolve_threshold: int = 3      # misses in one cell before promotion
    lifetime_px: float = 3.0       # event lifetime = lifetime_px / speed
    v_floor: float = 1.0           # px/s floor for lifetime and rate estimates

    def __post_init__(self):
        if self.m_grid < 3 or self.m_grid % 2 == 0:
            raise ValueError("m_grid must be odd and at least 3")
        if self.v_ref <= 0:
            raise ValueError("v_ref must be positive")
        if not 0 < self.h_min_deg <= self.h0_deg <= self.h_max_deg:
            raise ValueError("need 0 < h_min_deg <= h0_deg <= h_max_deg")
        if not 0 < self.hit_fraction:
            raise ValueError("hit_fraction must be positive")
        if self.min_recenter_hits < 1:
            raise ValueError("min_recenter_hits must be at least 1")
        if self.evolve_threshold < 1:
            raise ValueError("evolve_threshold must be at least 1")
        if self.lifetime_px <= 0 or self.v_floor <= 0:
            raise ValueError("lifetime_px and v_floor must be positive")


def event_lifetime_s(flow, cfg: TrackPlaneConfig) -> float:
    """Seconds an event stays relevant: lifetime_px / max(speed, v_floor)."""
    speed = math.hypot(flow[0], flow[1])
    return cfg.lifetime_px / max(speed, cfg.v_floor)


class TrackPlane:
    """Tracks one structure: its flow, its footprint, its recent events."""

    def __init__(self, plane_id: int, flow, events: Sequence[Event],
                 cfg: Optional[TrackPlaneConfig] = None):
        if not events:
            raise ValueError("a tracking plane needs at least one event")
        self.cfg = cfg or TrackPlaneConfig()
        self.plane_id = plane_id
        self.center_flow = FlowVector(float(flow[0]), float(flow[1]))
        self.h = math.radians(self.cfg.h0_deg)
        self._h_min = math.radians(self.cfg.h_min_deg)
        self._h_max = math.radians(self.cfg.h_max_deg)
        m = self.cfg.m_grid
        self.center_index = (m // 2) * m + m // 2
        self.flows = self._grid_flows()
        t_ref = events[0].t
        self.grids = [AccumulatorGrid(t_ref) for _ in range(m * m)]
        cols = event_columns(events)
        for grid, gflow in zip(self.grids, self.flows):
            grid.accumulate_batch(*cols, gflow)
        self.held: deque[Event] = deque(events)
        self.active: set[int] = self.grids[self.center_index].nonzero_cells()
        self.promoted: set[int] = set()
        self.hits = [0] * (m * m)
        self.miss_counts: dict[int, int] = {}
        self.hit_times: deque[int] = deque()
        self.created_us = events[-1].t
        self.total_hits = 0
        self.total_misses = 0
        self.recenters = 0
        self.promotions = 0
        self.expired = 0
        self._sync_cache()

    def _sync_cache(self) -> None:
        # flat copies of the per-grid hot fields; the match loop runs per
        # event and attribute chains there cost real time
        self._g_tref = [g.t_ref_us for g in self.grids]
        self._g_cells = [g.cells for g in self.grids]
        self._g_vu = [f[0] for f in self.flows]
        self._g_vv = [f[1] for f in self.flows]
        self._lifetime_us = int(self.event_lifetime_s() * 1e6)

    @classmethod
    def from_seed(cls, plane_id: int, seed,
                  cfg: Optional[TrackPlaneConfig] = None) -> "TrackPlane":
        return cls(plane_id, seed.flow, seed.events, cfg)

    def _perturb(self, value: float, steps: int) -> float:
        if steps == 0:
            return value
        v_ref = self.cfg.v_ref
        return v_ref * math.tan(math.atan(value / v_ref) + steps * self.h)

    def _grid_flows(self) -> list[FlowVector]:
        m = self.cfg.m_grid
        half = m // 2
        flows = []
        for j in range(m):
            dv = self._perturb(self.center_flow.v_v, j - half)
            for i in range(m):
                flows.append(FlowVector(self._perturb(self.center_flow.v_u,
                                                      i - half), dv))
        return flows

    def event_lifetime_s(self) -> float:
        return event_lifetime_s(self.center_flow, self.cfg)

    def __len__(self) -> int:
        return len(self.held)

    def try_match(self, ev: Event) -> bool:
        """Offer one event.  True: absorbed as a hit.  False: miss."""
        u, v, t, s = ev
        held = self.held
        if held and held[0].t < t - self._lifetime_us:
            self.expire(t)
        center = self.center_index
        dt = (t - self._g_tref[center]) * 1e-6
        x = u - self._g_vu[center] * dt
        y = v - self._g_vv[center] * dt
        xi = int(x + 0.5) if x >= 0.0 else -int(0.5 - x)
        yi = int(y + 0.5) if y >= 0.0 else -int(0.5 - y)
        key = xi * KEY_M + yi

        if key not in self.active:
            self.total_misses += 1
            count = self.miss_counts.get(key, 0) + 1
            if count >= self.cfg.evolve_threshold:
                # persistent misses promote the cell; the footprint evolves
                self.active.add(key)
                self.promoted.add(key)
                self.miss_counts.pop(key, None)
                self.promotions += 1
            else:
                self.miss_counts[key] = count
            return False

        self.total_hits += 1
        trefs = self._g_tref
        vus = self._g_vu
        vvs = self._g_vv
        cells_list = self._g_cells
        grids = self.grids
        hits = self.hits
        for k in range(len(grids)):
            if k == center:
                gkey = key
            else:
                gdt = (t - trefs[k]) * 1e-6
                gx = u - vus[k] * gdt
                gy = v - vvs[k] * gdt
                gkey = ((int(gx + 0.5) if gx >= 0.0 else -int(0.5 - gx)) * KEY_M
                        + (int(gy + 0.5) if gy >= 0.0 else -int(0.5 - gy)))
            cells = cells_list[k]
            c = cells.get(gkey, 0)
            if c != 0:
                hits[k] += 1
            cells[gkey] = c + s
            grids[k].metric += s * (2 * c + s)
            if k == center and c + s == 0 and gkey not in self.promoted:
                self.active.discard(gkey)
        held.append(ev)
        self.hit_times.append(t)

        thr = self.cfg.hit_fraction * len(self.active)
        if thr < self.cfg.min_recenter_hits:
            thr = self.cfg.min_recenter_hits
        if max(hits) > thr:
            self.recenter(t)
        return True

    def expire(self, now_us: int) -> int:
        """Retract events older than the lifetime; returns how many."""
        cutoff = now_us - self._lifetime_us
        held = self.held
        if not held or held[0].t >= cutoff:
            return 0
        center = self.center_index
        trefs = self._g_tref
        vus = self._g_vu
        vvs = self._g_vv
        cells_list = self._g_cells
        grids = self.grids
        removed = 0
        while held and held[0].t < cutoff:
            u, v, t, s = held.popleft()
            for k in range(len(grids)):
                gdt = (t - trefs[k]) * 1e-6
                gx = u - vus[k] * gdt
                gy = v - vvs[k] * gdt
                gkey = ((int(gx + 0.5) if gx >= 0.0 else -int(0.5 - gx)) * KEY_M
                        + (int(gy + 0.5) if gy >= 0.0 else -int(0.5 - gy)))
                cells = cells_list[k]
                c = cells.get(gkey)
                if c is None:
                    raise ConsistencyError(
                        f"plane {self.plane_id}: expiry retract from untouched cell")
                cells[gkey] = c - s
                grids[k].metric += s * (s - 2 * c)
                if k == center:
                    if c - s == 0 and gkey not in self.promoted:
                        self.active.discard(gkey)
                    elif c == 0 and gkey not in self.active:
                        # cancelled cell went nonzero again
                        self.active.add(gkey)
            removed += 1
        self.expired += removed
        return removed

    def recenter(self, now_us: int) -> None:
        """Adopt the winning grid's flow and rebuild the perturbations.

        Ties that still separate some grids prefer the center; h halves
        on such a center win (clamped to h_min) and doubles when an edge
        grid wins (clamped to h_max).  A center win keeps the center
        grid, its reference time and the footprint; only the perturbed
        grids regenerate.

        Three guards keep the walk sane.  An off-center grid is adopted
        only when it beats the center by a clear hit margin; below that
        the difference is counting luck near cell boundaries, and
        chasing it sends the flow on a runaway random walk.  The winner
        must also beat the center's contrast metric, otherwise a noisy
        hit surplus can drag the flow off a projection that is plainly
        crisper.  And when every projection counted about the same hits
        the perturbations are below what 1 px cells resolve over one
        lifetime, so instead of the halve (which would ratchet h to the
        floor and freeze the flow even as the true velocity drifts
        away) the tie keeps the center flow and doubles h, widening the
        net until the grids separate.
        """
        hits = self.hits
        peak = max(hits)
        center = self.center_index
        center_hits = hits[center]
        winner = center if center_hits == peak else hits.index(peak)
        self.recenters += 1
        # spreads below this are boundary-rounding luck, not signal
        margin = max(3, math.ceil(0.25 * peak))
        if (winner != center and peak >= center_hits + margin
                and self.grids[winner].metric > self.grids[center].metric):
            self.center_flow = self.flows[winner]
            self.h = min(self.h * 2.0, self._h_max)
            self._regenerate(keep_center=False)
        elif peak - min(hits) >= margin:
            new_h = max(self.h / 2.0, self._h_min)
            # h pinned at the floor leaves every grid flow unchanged, so
            # regeneration would rebuild identical grids; skip it
            rebuild = new_h != self.h
            self.h = new_h
            if rebuild:
                self._regenerate(keep_center=True)
        else:
            new_h = min(self.h * 2.0, self._h_max)
            rebuild = new_h != self.h
            self.h = new_h
            if rebuild:
                self._regenerate(keep_center=True)
        self.hits = [0] * (self.cfg.m_grid ** 2)

    def _regenerate(self, keep_center: bool) -> None:
        flows = self._grid_flows()
        center = self.center_index
        if self.held:
            t_ref = self.held[0].t
        else:
            t_ref = self.grids[center].t_ref_us
        cols = event_columns(self.held) if self.held else None
        for k in range(len(self.grids)):
            if keep_center and k == center:
                continue
            grid = AccumulatorGrid(t_ref)
            if cols is not None:
                grid.accumulate_batch(*cols, flows[k])
            self.grids[k] = grid
        self.flows = flows
        if not keep_center:
            self.active = self.grids[center].nonzero_cells()
            self.promoted = set()
            # miss counts survive: promotion pressure must outlive recenters
        self._sync_cache()

    def footprint_at(self, now_us: int) -> set[int]:
        """Nonzero center cells translated to sensor position at now_us."""
        cgrid = self.grids[self.center_index]
        cflow = self.flows[self.center_index]
        dt = (now_us - cgrid.t_ref_us) * 1e-6
        dx = round_half_away(cflow[0] * dt)
        dy = round_half_away(cflow[1] * dt)
        shift = dx * KEY_M + dy
        return {key + shift for key in cgrid.nonzero_cells()}

    def expected_hit_fraction(self, now_us: int,
                              window_lifetimes: float = 2.0) -> float:
        """Observed hits over the window vs the rate the flow predicts.

        The prediction is |footprint| * speed events per second, which
        overcounts interiors but is a stable normalizer; healthy planes
        sit well above the prune threshold on it.
        """
        window_s = window_lifetimes * self.event_lifetime_s()
        cutoff = now_us - int(window_s * 1e6)
        times = self.hit_times
        while times and times[0] < cutoff:
            times.popleft()
        speed = max(self.center_flow.speed, self.cfg.v_floor)
        expected = len(self.active) * speed * window_s
        if expected <= 0.0:
            return 0.0
        return len(times) / expected

    def age_lifetimes(self, now_us: int) -> float:
        """Plane age in units of the current event lifetime."""
        return (now_us - self.created_us) * 1e-6 / self.event_lifetime_s()

    def snapshot_row(self, now_us: int) -> str:
        f = self.center_flow
        h_deg = math.degrees(self.h)
        return (f"{self.plane_id},{now_us},{f.v_u!r},{f.v_v!r},{h_deg!r},"
                f"{len(self.active)},{len(self.held)}")
