"""Network mobility measures derived from positions and quantification
traces: the mean pairwise distance over time, and per-neighbor distance
series for a chosen observer node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence

from .quantify import DistanceRecord


class TooFewNodes(ValueError):
    """The snapshot does not contain enough nodes (or qualifying pairs)."""


@dataclass(frozen=True)
class MobilitySample:
    time: float
    avg_distance: float

    def __post_init__(self) -> None:
        if self.avg_distance < 0:
            raise ValueError("avg_distance must be >= 0")


@dataclass(frozen=True)
class NeighborSeries:
    """Times and distances at which one observer measured one neighbor."""

    observer: int
    neighbor: int
    points: tuple[tuple[float, float, float], ...]  # (time, distance, rssi)


def network_avg_distance(positions, time: float,
                         radio_range: Optional[float] = None) -> MobilitySample:
    """Mean distance over all unordered node pairs at one instant.

    positions may be a mapping of node id to (x, y) or a plain sequence of
    (x, y) points. With radio_range set, only pairs within that range count
    (a variant of the metric restricted to actual neighborhoods).

    Raises:
        TooFewNodes: fewer than two nodes, or no pair within radio_range.
    """
    if isinstance(positions, Mapping):
        points = [positions[key] for key in sorted(positions)]
    else:
        points = list(positions)
    if len(points) < 2:
        raise TooFewNodes(f"need at least 2 nodes, got {len(points)}")
    total = 0.0
    count = 0
    for (x1, y1), (x2, y2) in combinations(points, 2):
        d = math.hypot(x1 - x2, y1 - y2)
        if radio_range is not None and d > radio_range:
            continue
        total += d
        count += 1
    if count == 0:
        raise TooFewNodes("no node pair within radio_range")
    return MobilitySample(time=time, avg_distance=total / count)


def node_series(records: Iterable[DistanceRecord], observer: int,
                window: tuple[float, float]) -> list[NeighborSeries]:
    """Per-neighbor time series of one observer's measurements.

    Keeps the records the observer produced inside the closed window
    [t0, t1], grouped by the neighbor that was measured and sorted by time.
    An empty window simply yields an empty list.
    """
    t0, t1 = window
    groups: dict[int, list[tuple[float, float, float]]] = {}
    for rec in records:
        if rec.rreq_source == observer and t0 <= rec.time <= t1:
            groups.setdefault(rec.rreq_dest, []).append(
                (rec.time, rec.distance, rec.rssi_distance))
    return [NeighborSeries(observer, neighbor,
                           tuple(sorted(groups[neighbor], key=lambda p: p[0])))
            for neighbor in sorted(groups)]


def label_samples(samples: Sequence[MobilitySample],
                  threshold: float) -> list[str]:
    """Tag each sample against a caller-chosen agitation threshold.

    There is no built-in threshold; what counts as an agitated network is
    left to the user.
    """
    return ["agitated" if s.avg_distance > threshold else "stable"
            for s in samples]
