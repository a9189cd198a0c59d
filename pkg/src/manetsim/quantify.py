"""Neighbor-distance quantification hooks for the routing layer: whenever a
node accepts a route request it measures the distance to the neighbor that
relayed it, records the measurement, and re-broadcasts its distance table
one hop out so neighborhoods can also run the reference-frame localization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .localization import (
    DegenerateGeometry,
    LocalCoordinate,
    MissingDistance,
    NeighborDistanceTable,
    NoValidReference,
    ReferenceTriple,
    build_frame,
    frame_distance,
    localize_one_hop,
    localize_two_hop,
    select_reference,
)
from .radio import NonPositivePower, PowerSample, RadioParams, estimate_distance_friis


class MeasurementMode(Enum):
    """How the distance stored in the neighbor table is obtained."""

    EXACT = "exact"        # simulator ground truth
    RSSI = "rssi"          # free-space inversion of received power
    GPS_FREE = "gpsfree"   # received-power seed, then frame recomputation


@dataclass(frozen=True)
class DistanceRecord:
    """One quantification trace row.

    rreq_source is the measuring node (the one that accepted the request),
    rreq_dest the neighbor whose transmission was measured. distance is the
    simulator ground truth, rssi_distance the free-space inversion estimate;
    both are always recorded side by side whatever the measurement mode.
    """

    rreq_source: int
    rreq_dest: int
    time: float
    distance: float
    rssi_distance: float

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError("time must be >= 0")
        if self.distance < 0 or self.rssi_distance < 0:
            raise ValueError("distances must be >= 0")


@dataclass(frozen=True)
class NeighborTableBroadcast:
    """A one-hop broadcast of a node's distance-table snapshot."""

    sender: int
    table: NeighborDistanceTable

    def __post_init__(self) -> None:
        if self.sender != self.table.owner:
            raise ValueError("broadcast sender must own the table")


@dataclass
class DistanceState:
    """Per-node measurement state: own table plus neighbors' snapshots."""

    owner: int
    params: RadioParams
    table: NeighborDistanceTable = None  # type: ignore[assignment]
    snapshots: dict[int, NeighborTableBroadcast] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.table is None:
            self.table = NeighborDistanceTable(owner=self.owner)
        elif self.table.owner != self.owner:
            raise ValueError("table owner mismatch")


@dataclass(frozen=True)
class GpsFreeResult:
    """Outcome of one localization round."""

    reference: ReferenceTriple
    coordinates: dict[int, LocalCoordinate]
    distances: dict[int, float]      # owner-to-node, recomputed in the frame
    missing: tuple[int, ...]         # nodes that could not be placed


def measure_on_rreq(state: DistanceState, prev_hop: int,
                    rx_power: Optional[PowerSample], true_distance: float,
                    mode: MeasurementMode, now: float,
                    ) -> tuple[DistanceRecord, NeighborTableBroadcast]:
    """Measure the distance to the neighbor whose request was just accepted.

    Updates state.table in place (EXACT stores the ground truth, the other
    modes store the free-space inversion of rx_power) and returns the trace
    record plus the one-hop table broadcast to emit. rx_power may be None
    only in EXACT mode, for synthetic degenerate inputs; the engine always
    supplies it.
    """
    if prev_hop == state.owner:
        raise ValueError("a node cannot measure a distance to itself")
    if rx_power is not None:
        estimate = estimate_distance_friis(state.params, rx_power)
    elif mode is MeasurementMode.EXACT:
        estimate = true_distance
    else:
        raise NonPositivePower("a received-power sample is required in "
                               f"{mode.value} mode")
    stored = true_distance if mode is MeasurementMode.EXACT else estimate
    state.table.entries[prev_hop] = stored
    state.table.timestamp = now
    record = DistanceRecord(rreq_source=state.owner, rreq_dest=prev_hop,
                            time=now, distance=true_distance,
                            rssi_distance=estimate)
    return record, NeighborTableBroadcast(state.owner, state.table.snapshot())


def merge_neighbor_table(state: DistanceState,
                         incoming: NeighborTableBroadcast) -> None:
    """Store a received snapshot, newest per sender winning.

    The owner's own one-hop entries are kept in a separate table and are
    never overwritten by hearsay; pair_distance prefers them when both
    sources could answer.
    """
    if incoming.sender == state.owner:
        return
    prior = state.snapshots.get(incoming.sender)
    if prior is None or incoming.table.timestamp >= prior.table.timestamp:
        state.snapshots[incoming.sender] = incoming


def pair_distance(state: DistanceState, u: int, v: int) -> Optional[float]:
    """Best known distance between u and v, or None.

    The owner's own measurements are authoritative for pairs involving the
    owner; other pairs are answered from the snapshot of the lower-numbered
    endpoint first, so the lookup is symmetric in its arguments.
    """
    if u == v:
        return None
    if u == state.owner:
        return state.table.entries.get(v)
    if v == state.owner:
        return state.table.entries.get(u)
    first, second = (u, v) if u <= v else (v, u)
    snap = state.snapshots.get(first)
    if snap is not None and second in snap.table.entries:
        return snap.table.entries[second]
    snap = state.snapshots.get(second)
    if snap is not None and first in snap.table.entries:
        return snap.table.entries[first]
    return None


def gpsfree_refresh(state: DistanceState,
                    exclude: Iterable[int] = ()) -> GpsFreeResult:
    """Rebuild the local frame and recompute neighbor distances inside it.

    Selects the reference triple among the owner's nearest neighbors, places
    the owner and every placeable one-hop neighbor with the one-hop formula,
    places nodes known only through a neighbor's snapshot with the two-hop
    sum rule, and finally recomputes each distance as the in-frame distance
    from the owner's own coordinate. Nodes lacking a required distance are
    reported in ``missing`` rather than guessed at.

    Raises:
        NoValidReference: when no usable triple exists or the owner itself
            cannot be placed; callers should keep the previous distances.
    """
    banned = set(exclude)
    lookup = lambda a, b: pair_distance(state, a, b)  # noqa: E731
    triple = select_reference(state.table, lookup, banned)
    i, p, q = triple.center, triple.x_axis, triple.y_side
    frame = build_frame(triple, lookup(i, p), lookup(i, q), lookup(p, q))
    qx, qy = frame.q_position
    coords: dict[int, LocalCoordinate] = {
        i: LocalCoordinate(0.0, 0.0, i),
        p: LocalCoordinate(frame.d_ip, 0.0, p),
        q: LocalCoordinate(qx, qy, q),
    }
    try:
        me = localize_one_hop(frame, state.table.entries[i],
                              state.table.entries[p], state.table.entries[q],
                              subject=state.owner)
    except DegenerateGeometry as exc:
        raise NoValidReference(
            f"owner {state.owner} not placeable in the selected frame") from exc
    coords[state.owner] = me

    missing: list[int] = []
    for node in sorted(state.table.entries):
        if node in coords or node in banned:
            continue
        d_in = lookup(i, node)
        d_pn = lookup(p, node)
        if d_in is None or d_pn is None:
            missing.append(node)
            continue
        try:
            coords[node] = localize_one_hop(frame, d_in, d_pn,
                                            lookup(q, node), subject=node)
        except DegenerateGeometry:
            missing.append(node)

    two_hop = sorted(
        {name for snap in state.snapshots.values()
         for name in snap.table.entries}
        - set(coords) - banned - {state.owner})
    for node in two_hop:
        best: Optional[tuple[float, float, float]] = None  # (d_ib, d_ivia, d_viab)
        for via in sorted(state.table.entries):
            if via == i or via == node:
                continue
            snap = state.snapshots.get(via)
            if snap is None or node not in snap.table.entries:
                continue
            d_ivia = lookup(i, via)
            if d_ivia is None or d_ivia <= 0:
                continue
            d_viab = snap.table.entries[node]
            if d_viab <= 0:
                continue
            total = d_ivia + d_viab
            if best is None or total < best[0]:
                best = (total, d_ivia, d_viab)
        if best is None:
            missing.append(node)
            continue
        try:
            coords[node] = localize_two_hop(frame, best[1], best[2],
                                            lookup(p, node), subject=node)
        except (MissingDistance, DegenerateGeometry):
            missing.append(node)

    distances = {node: frame_distance(me, coord)
                 for node, coord in coords.items() if node != state.owner}
    return GpsFreeResult(reference=triple, coordinates=coords,
                         distances=distances, missing=tuple(sorted(missing)))


def apply_refresh(state: DistanceState, result: GpsFreeResult) -> list[int]:
    """Overwrite one-hop table entries with their recomputed distances.

    Only entries already present are touched; two-hop nodes stay out of the
    one-hop table. Returns the updated neighbor ids.
    """
    updated = []
    for node, dist in result.distances.items():
        if node in state.table.entries and math.isfinite(dist):
            state.table.entries[node] = dist
            updated.append(node)
    return sorted(updated)
