"""Relative localization from pairwise distances alone, with no positioning
hardware: a reference triple of nodes (center i, abscissa node p, ordinate
side node q) defines a local 2-D frame, and other nodes are placed in it by
inverting the law of cosines.

The frame convention is i at the origin, p on the positive x axis at
(d_ip, 0), and q at (d_iq*cos(alpha), d_iq*sin(alpha)) with sin(alpha) > 0,
where alpha is the angle p-i-q. Distance-only placement cannot tell a node
from its mirror image across the x axis; when the distance to q is known the
sign of y is picked by the smaller residual against it, otherwise the
positive sign is used and the coordinate is flagged ambiguous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Hashable, Iterable, Optional

NodeId = Hashable

# Slack accepted on the arccos argument before declaring the distance set
# geometrically impossible; ranging noise routinely violates metricity a bit.
COS_CLAMP_TOLERANCE = 1e-6


class DegenerateGeometry(ValueError):
    """The supplied distances cannot come from a planar triangle."""


class NoValidReference(ValueError):
    """No candidate reference triple forms a usable (non-collinear) frame."""


class MissingDistance(KeyError):
    """A distance required by the placement formulas is unavailable."""


@dataclass
class NeighborDistanceTable:
    """One node's measured distances to its one-hop neighbors.

    entries maps neighbor id to distance in meters; the owner never appears
    as a key. timestamp records when the table was last updated.
    """

    owner: NodeId
    entries: dict[NodeId, float] = field(default_factory=dict)
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if self.owner in self.entries:
            raise ValueError("table must not contain a self-entry")
        for node, dist in self.entries.items():
            if dist < 0:
                raise ValueError(f"negative distance for neighbor {node!r}")

    def snapshot(self) -> "NeighborDistanceTable":
        return NeighborDistanceTable(self.owner, dict(self.entries),
                                     self.timestamp)


@dataclass(frozen=True)
class ReferenceTriple:
    """The three nodes defining a local frame: center, x-axis node, y-side node."""

    center: NodeId
    x_axis: NodeId
    y_side: NodeId

    def __post_init__(self) -> None:
        if len({self.center, self.x_axis, self.y_side}) != 3:
            raise ValueError("reference nodes must be pairwise distinct")


@dataclass(frozen=True)
class LocalFrame:
    """A built frame: the triple plus the side lengths and angle that fix it."""

    triple: ReferenceTriple
    alpha: float
    d_ip: float
    d_iq: float

    @property
    def origin(self) -> tuple[float, float]:
        return (0.0, 0.0)

    @property
    def p_position(self) -> tuple[float, float]:
        return (self.d_ip, 0.0)

    @property
    def q_position(self) -> tuple[float, float]:
        return (self.d_iq * math.cos(self.alpha),
                self.d_iq * math.sin(self.alpha))


@dataclass(frozen=True)
class LocalCoordinate:
    """A position expressed in some LocalFrame.

    ambiguous marks coordinates whose y sign could not be resolved because
    the distance to the frame's y-side node was unavailable.
    """

    x: float
    y: float
    subject: Optional[NodeId] = None
    ambiguous: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("coordinates must be finite")


# A pairwise-distance source: returns d(u, v) in meters, or None if unknown.
PairDistance = Callable[[NodeId, NodeId], Optional[float]]


def _arccos_clamped(value: float) -> float:
    if value > 1.0:
        if value > 1.0 + COS_CLAMP_TOLERANCE:
            raise DegenerateGeometry(
                f"cosine argument {value!r} exceeds 1 beyond tolerance")
        return 0.0
    if value < -1.0:
        if value < -1.0 - COS_CLAMP_TOLERANCE:
            raise DegenerateGeometry(
                f"cosine argument {value!r} below -1 beyond tolerance")
        return math.pi
    return math.acos(value)


def angle_alpha(d_ip: float, d_iq: float, d_pq: float) -> float:
    """Angle at the frame center between the two reference arms.

    Inverts the law of cosines: arccos((d_ip^2 + d_iq^2 - d_pq^2) /
    (2*d_ip*d_iq)). The two arms must be strictly positive; the opposite
    side may be zero (the angle is then zero, a coincident placement).
    Arguments within COS_CLAMP_TOLERANCE of [-1, 1] are clamped; anything
    further out raises DegenerateGeometry.
    """
    if d_ip <= 0 or d_iq <= 0:
        raise DegenerateGeometry("angle arms must be strictly positive")
    if d_pq < 0:
        raise DegenerateGeometry("opposite side must be >= 0")
    arg = (d_ip * d_ip + d_iq * d_iq - d_pq * d_pq) / (2.0 * d_ip * d_iq)
    return _arccos_clamped(arg)


def select_reference(table: NeighborDistanceTable, cross: PairDistance,
                     exclude: Iterable[NodeId] = ()) -> ReferenceTriple:
    """Pick the reference triple among the owner's nearest neighbors.

    Candidate triples are scanned in nondecreasing order of their distances
    from the owner (ties broken by ascending node id); within a triple the
    nearest node becomes the center, the next the x-axis node, the third the
    y-side node. A triple qualifies only if all three cross-distances are
    available, positive, and form a proper (non-collinear) triangle; the
    first qualifying triple wins, so the three-nearest set is used whenever
    it is usable.

    Args:
        table: the owner's one-hop distance table.
        cross: pairwise-distance source for distances between neighbors.
        exclude: node ids that must not take part in the reference.

    Raises:
        NoValidReference: when no qualifying triple exists.
    """
    banned = set(exclude)
    ranked = sorted((dist, node) for node, dist in table.entries.items()
                    if node not in banned)
    ordered = [node for _, node in ranked]
    for i, p, q in combinations(ordered, 3):
        d_ip = cross(i, p)
        d_iq = cross(i, q)
        d_pq = cross(p, q)
        if d_ip is None or d_iq is None or d_pq is None:
            continue
        if d_ip <= 0 or d_iq <= 0 or d_pq <= 0:
            continue
        try:
            alpha = angle_alpha(d_ip, d_iq, d_pq)
        except DegenerateGeometry:
            continue
        if alpha == 0.0 or alpha == math.pi:
            continue
        return ReferenceTriple(center=i, x_axis=p, y_side=q)
    raise NoValidReference(
        f"no non-degenerate reference triple among neighbors of {table.owner!r}")


def build_frame(triple: ReferenceTriple, d_ip: float, d_iq: float,
                d_pq: float) -> LocalFrame:
    """Build the local frame fixed by the triple's three side lengths.

    Raises:
        DegenerateGeometry: if the sides are collinear or impossible.
    """
    alpha = angle_alpha(d_ip, d_iq, d_pq)
    if alpha == 0.0 or alpha == math.pi:
        raise DegenerateGeometry("reference nodes are collinear")
    return LocalFrame(triple=triple, alpha=alpha, d_ip=d_ip, d_iq=d_iq)


def localize_one_hop(frame: LocalFrame, d_ia: float, d_pa: float,
                     d_qa: Optional[float] = None,
                     subject: Optional[NodeId] = None) -> LocalCoordinate:
    """Place a node at distance d_ia from the center and d_pa from the x-axis node.

    The angle to the x axis follows from the law of cosines, which leaves the
    sign of y open. When d_qa is given, the candidate whose distance to the
    y-side node is closer to d_qa wins (ties go to +). Without d_qa the
    positive sign is used and the result is flagged ambiguous.
    """
    alpha_a = angle_alpha(frame.d_ip, d_ia, d_pa)
    x = d_ia * math.cos(alpha_a)
    y = d_ia * math.sin(alpha_a)
    if d_qa is None:
        return LocalCoordinate(x, y, subject, ambiguous=True)
    qx, qy = frame.q_position
    res_pos = abs(math.hypot(x - qx, y - qy) - d_qa)
    res_neg = abs(math.hypot(x - qx, -y - qy) - d_qa)
    if res_neg < res_pos:
        y = -y
    return LocalCoordinate(x, y, subject)


def localize_two_hop(frame: LocalFrame, d_ia: float, d_ab: float,
                     d_pb: Optional[float],
                     subject: Optional[NodeId] = None) -> LocalCoordinate:
    """Place a node reachable only through an intermediate at distance d_ia.

    The range to the center is taken as the plain sum d_ia + d_ab, which is
    exact only when the three nodes are collinear and otherwise overestimates
    the true range (so the radial coordinate never undershoots it). The y
    sign is not disambiguated; the positive branch is returned.

    Raises:
        MissingDistance: if d_pb is None.
        DegenerateGeometry: if the angle is not computable after clamping.
    """
    if d_pb is None:
        raise MissingDistance(f"distance from x-axis node to {subject!r} unknown")
    if d_ia <= 0 or d_ab <= 0:
        raise DegenerateGeometry("hop distances must be strictly positive")
    d_ib = d_ia + d_ab
    alpha_b = angle_alpha(frame.d_ip, d_ib, d_pb)
    return LocalCoordinate(d_ib * math.cos(alpha_b), d_ib * math.sin(alpha_b),
                           subject)


def frame_distance(c1: LocalCoordinate, c2: LocalCoordinate) -> float:
    """Euclidean distance between two coordinates of the same frame."""
    return math.hypot(c1.x - c2.x, c1.y - c2.y)
