"""Per-tick and per-run measurement.

Overhead by layer and purpose (short channel = layer 1, long channel =
layer 2; HELLO/C-HELLO/TC/HTC base fields are Routing, CMN plus the
kinematic and follow fields are Control), cluster dynamics, velocity
variance, formation spacing and obstacle clearance. Output files are
metrics.csv, events.csv and summary.json, all written atomically.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import SimParams, Vec2
from .cluster import ClusterEvent
from .radio import ChannelKind, LedgerEntry
from .starling import PatternEvent


@dataclass
class MetricsFrame:
    tick: int
    cluster_count: int
    cluster_switches_cum: int
    layer1_routing_bps: float
    layer1_control_bps: float
    layer2_routing_bps: float
    layer2_control_bps: float
    velocity_variance: float
    mean_radial_difference: Optional[float]
    min_obstacle_center_distance: Optional[float]

    @property
    def layer1_bps(self) -> float:
        return self.layer1_routing_bps + self.layer1_control_bps

    @property
    def layer2_bps(self) -> float:
        return self.layer2_routing_bps + self.layer2_control_bps


FRAME_COLUMNS = [
    "tick", "cluster_count", "cluster_switches_cum",
    "layer1_routing_bps", "layer1_control_bps",
    "layer2_routing_bps", "layer2_control_bps",
    "velocity_variance", "mean_radial_difference",
    "min_obstacle_center_distance",
]

EVENT_COLUMNS = [
    "kind", "tick", "node", "old_head", "new_head", "cause",
    "group", "pattern", "k_star", "indicator", "threshold",
    "root_group", "root_seq",
]


def velocity_variance(velocities: np.ndarray) -> float:
    """(Var(vx) + Var(vy)) / 2, population variance over all nodes."""
    if velocities.shape[0] < 1:
        raise ValueError("need at least one node")
    return float((np.var(velocities[:, 0]) + np.var(velocities[:, 1])) / 2.0)


def mean_radial_difference(geometry: dict[int, tuple[Vec2, float]],
                           pairs: list[tuple[int, int]]) -> Optional[float]:
    """Mean surface gap over ordered observation pairs; None when there
    are no pairs."""
    gaps = []
    for m, k in pairs:
        if m not in geometry or k not in geometry:
            continue
        (cm, rm), (ck, rk) = geometry[m], geometry[k]
        gaps.append(math.hypot(ck.x - cm.x, ck.y - cm.y) - rm - rk)
    if not gaps:
        return None
    return sum(gaps) / len(gaps)


def cluster_switches(events: list[ClusterEvent]) -> int:
    """Head changes of already-clustered nodes; first-time joins from
    Unclustered do not count."""
    return sum(1 for e in events
               if e.old_head is not None and e.new_head != e.old_head)


def bps_by_layer(entries: list[LedgerEntry], window: float,
                 header_bytes: int = 0) -> tuple[float, float, float, float]:
    """(layer1 routing, layer1 control, layer2 routing, layer2 control)
    in bits/s over a window of the given length in seconds."""
    if window <= 0:
        raise ValueError("window must be positive")
    sums = [0, 0, 0, 0]
    for e in entries:
        base = 0 if e.channel is ChannelKind.SHORT else 2
        sums[base] += e.routing_bytes + header_bytes
        sums[base + 1] += e.control_bytes
    return tuple(s * 8.0 / window for s in sums)  # type: ignore[return-value]


@dataclass
class ProbeStats:
    sent: int = 0
    delivered: int = 0
    dropped: dict[str, int] = field(default_factory=dict)
    hop_counts: list[int] = field(default_factory=list)
    latencies: list[int] = field(default_factory=list)  # ticks

    def as_dict(self) -> dict:
        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "dropped": dict(sorted(self.dropped.items())),
            "mean_hops": (sum(self.hop_counts) / len(self.hop_counts)
                          if self.hop_counts else None),
            "mean_latency_ticks": (sum(self.latencies) / len(self.latencies)
                                   if self.latencies else None),
        }


class MetricsCollector:
    """Single consumer of the per-tick streams; builds frames and totals."""

    def __init__(self, params: SimParams, window_seconds: float = 10.0,
                 header_bytes: int = 0):
        self.params = params
        self.window_seconds = window_seconds
        self.window_ticks = max(1, params.ticks(window_seconds))
        self.header_bytes = header_bytes
        self._window: deque[tuple[int, int, int, int]] = deque(maxlen=self.window_ticks)
        self.frames: list[MetricsFrame] = []
        self.cluster_events: list[ClusterEvent] = []
        self.pattern_events: list[PatternEvent] = []
        self.switches = 0
        self.min_obstacle: Optional[float] = None
        self.total_bytes = [0, 0, 0, 0]  # l1r, l1c, l2r, l2c
        self.total_messages = 0

    def on_tick(self, tick: int, entries: list[LedgerEntry],
                cluster_events: list[ClusterEvent],
                pattern_events: list[PatternEvent],
                velocities: np.ndarray, cluster_count: int,
                geometry: dict[int, tuple[Vec2, float]],
                observation_pairs: list[tuple[int, int]],
                min_obstacle_tick: Optional[float]) -> MetricsFrame:
        per_tick = [0, 0, 0, 0]
        for e in entries:
            base = 0 if e.channel is ChannelKind.SHORT else 2
            per_tick[base] += e.routing_bytes + self.header_bytes
            per_tick[base + 1] += e.control_bytes
            self.total_messages += 1
        for i in range(4):
            self.total_bytes[i] += per_tick[i]
        self._window.append(tuple(per_tick))  # type: ignore[arg-type]

        self.cluster_events.extend(cluster_events)
        self.pattern_events.extend(pattern_events)
        self.switches += cluster_switches(cluster_events)

        if min_obstacle_tick is not None:
            if self.min_obstacle is None or min_obstacle_tick < self.min_obstacle:
                self.min_obstacle = min_obstacle_tick

        span = len(self._window) * self.params.dt
        sums = [0, 0, 0, 0]
        for row in self._window:
            for i in range(4):
                sums[i] += row[i]
        bps = [s * 8.0 / span for s in sums]

        frame = MetricsFrame(
            tick=tick,
            cluster_count=cluster_count,
            cluster_switches_cum=self.switches,
            layer1_routing_bps=bps[0],
            layer1_control_bps=bps[1],
            layer2_routing_bps=bps[2],
            layer2_control_bps=bps[3],
            velocity_variance=velocity_variance(velocities),
            mean_radial_difference=mean_radial_difference(geometry, observation_pairs),
            min_obstacle_center_distance=self.min_obstacle,
        )
        self.frames.append(frame)
        return frame

    def metrics_csv(self) -> str:
        lines = [",".join(FRAME_COLUMNS)]
        for f in self.frames:
            lines.append(",".join(_cell(getattr(f, c)) for c in FRAME_COLUMNS))
        return "\n".join(lines) + "\n"

    def events_csv(self) -> str:
        lines = [",".join(EVENT_COLUMNS)]
        for e in self.cluster_events:
            lines.append(",".join(_cell(v) for v in (
                "cluster", e.tick, e.node, e.old_head, e.new_head, e.cause,
                None, None, None, None, None, None, None)))
        for e in self.pattern_events:
            lines.append(",".join(_cell(v) for v in (
                "pattern", e.tick, None, None, None, None,
                e.group, e.pattern, e.k_star, e.indicator, e.threshold,
                e.root_group, e.root_seq)))
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        causes: dict[str, int] = {}
        for e in self.cluster_events:
            causes[e.cause] = causes.get(e.cause, 0) + 1
        patterns: dict[str, int] = {}
        for e in self.pattern_events:
            patterns[e.pattern] = patterns.get(e.pattern, 0) + 1
        last = self.frames[-1] if self.frames else None
        return {
            "ticks": len(self.frames),
            "duration_s": len(self.frames) * self.params.dt,
            "total_bytes": {
                "layer1_routing": self.total_bytes[0],
                "layer1_control": self.total_bytes[1],
                "layer2_routing": self.total_bytes[2],
                "layer2_control": self.total_bytes[3],
            },
            "total_messages": self.total_messages,
            "cluster_switches": self.switches,
            "cluster_events_by_cause": dict(sorted(causes.items())),
            "pattern_events_by_kind": dict(sorted(patterns.items())),
            "min_obstacle_center_distance": self.min_obstacle,
            "final_cluster_count": last.cluster_count if last else None,
            "final_velocity_variance": last.velocity_variance if last else None,
        }


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_atomic(path: str, text: str) -> None:
    """Temp file + rename in the destination directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path: str, payload: dict) -> None:
    write_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
