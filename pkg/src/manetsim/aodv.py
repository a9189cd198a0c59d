"""On-demand distance-vector routing: route discovery by flooded route
requests answered with unicast replies, hello-based neighbor liveness,
route-error notification on link failure, sequence-numbered freshness and
timed route expiry.

Sequence-number convention: a genuine sequence number is always >= 1.
Entries learned without one (the hop-by-hop neighbor routes picked up while
relaying) carry dest_seq == 0 and lose every freshness comparison against a
real number, and a node never answers a discovery out of such an entry.
Hello beacons are pure liveness evidence here; they install no routes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

# Timer constants (seconds / counts).
HELLO_INTERVAL = 1.0
ACTIVE_ROUTE_TIMEOUT = 3.0
RREQ_RETRIES = 2
NET_TRAVERSAL_TIME = 2.8
PATH_DISCOVERY_TIME = 5.6
ALLOWED_HELLO_LOSS = 3


class SelfDestination(ValueError):
    """A node asked to discover a route to itself."""


# ---------------------------------------------------------------------------
# Wire messages


@dataclass(frozen=True)
class Rreq:
    origin: int
    origin_seq: int
    rreq_id: int
    dest: int
    dest_seq_known: Optional[int]  # None when the origin never had a route
    hop_count: int

    def __post_init__(self) -> None:
        if self.hop_count < 0:
            raise ValueError("hop_count must be >= 0")


@dataclass(frozen=True)
class Rrep:
    origin: int
    dest: int
    dest_seq: int
    hop_count: int
    lifetime: float

    def __post_init__(self) -> None:
        if self.hop_count < 0:
            raise ValueError("hop_count must be >= 0")


@dataclass(frozen=True)
class Rerr:
    unreachable: tuple[tuple[int, int], ...]  # (destination, sequence) pairs


@dataclass(frozen=True)
class Hello:
    sender: int


# ---------------------------------------------------------------------------
# Actions handed back to the driving engine


@dataclass(frozen=True)
class Broadcast:
    message: object


@dataclass(frozen=True)
class Unicast:
    to: int
    message: object


@dataclass(frozen=True)
class RouteEstablished:
    dest: int
    entry: "RoutingTableEntry"


@dataclass(frozen=True)
class TraceNote:
    text: str


@dataclass(frozen=True)
class UnreachableVerdict:
    dest: int


@dataclass
class RoutingTableEntry:
    destination: int
    next_hop: int
    hop_count: int
    dest_seq: int
    expiry: float
    active: bool = True


@dataclass
class DiscoveryStart:
    """Outcome of originate_discovery: exactly one of the cases applies."""

    route: Optional[RoutingTableEntry] = None
    actions: list = field(default_factory=list)
    retry_at: Optional[float] = None
    already_pending: bool = False


@dataclass
class _Pending:
    retries_used: int
    next_retry: float


def fresher(candidate: tuple[int, int], incumbent: tuple[int, int]) -> bool:
    """True when (seq, hops) candidate should replace the incumbent.

    Higher sequence number always wins; on equal sequence numbers a strictly
    lower hop count wins.
    """
    if candidate[0] != incumbent[0]:
        return candidate[0] > incumbent[0]
    return candidate[1] < incumbent[1]


class AodvNode:
    """Per-node protocol state machine.

    Handlers mutate the node and return a list of actions (Broadcast /
    Unicast / RouteEstablished / TraceNote) for the engine to carry out.
    Route installations are appended to ``journal`` as (event, detail) pairs
    so the engine can mirror them into the protocol log; call
    drain_journal() after each handler.
    """

    def __init__(self, node_id: int, intermediate_reply: bool = True):
        self.id = node_id
        self.own_seq = 0
        self.next_rreq_id = 0
        self.routes: dict[int, RoutingTableEntry] = {}
        self.seen_rreqs: dict[tuple[int, int], float] = {}
        self.pending: dict[int, _Pending] = {}
        self.intermediate_reply = intermediate_reply
        self.journal: list[tuple[str, str]] = []
        self._heard: set[int] = set()    # neighbors heard since last hello tick
        self._missed: dict[int, int] = {}  # consecutive silent intervals

    def drain_journal(self) -> list[tuple[str, str]]:
        out, self.journal = self.journal, []
        return out

    # -- liveness ----------------------------------------------------------

    def note_neighbor_alive(self, neighbor: int) -> None:
        """Any message overheard from a neighbor counts as liveness evidence."""
        if neighbor != self.id:
            self._heard.add(neighbor)

    def handle_hello(self, hello: Hello, prev_hop: int, now: float) -> list:
        self.note_neighbor_alive(prev_hop)
        return []

    def hello_tick(self, now: float) -> tuple[list, list[int]]:
        """Advance the per-interval liveness bookkeeping and emit a beacon.

        Neighbors serving as next hop of any live route are monitored; one
        that stayed silent for ALLOWED_HELLO_LOSS consecutive intervals is
        returned as failed (the caller should feed it to
        handle_link_failure). Hearing anything resets the counter.
        """
        monitored = {e.next_hop for e in self.routes.values()
                     if e.active and e.expiry >= now}
        failed = []
        for neighbor in monitored:
            if neighbor in self._heard:
                self._missed[neighbor] = 0
            else:
                self._missed[neighbor] = self._missed.get(neighbor, 0) + 1
                if self._missed[neighbor] >= ALLOWED_HELLO_LOSS:
                    failed.append(neighbor)
        for neighbor in list(self._missed):
            if neighbor not in monitored or neighbor in failed:
                del self._missed[neighbor]
        self._heard.clear()
        return [Broadcast(Hello(self.id))], sorted(failed)

    # -- routing table -----------------------------------------------------

    def route_for(self, dest: int, now: float) -> Optional[RoutingTableEntry]:
        entry = self.routes.get(dest)
        if entry is not None and entry.active and entry.expiry >= now:
            return entry
        return None

    def refresh_route(self, dest: int, now: float) -> None:
        """Forwarding traffic keeps the used entry alive."""
        entry = self.routes.get(dest)
        if entry is not None and entry.active:
            entry.expiry = max(entry.expiry, now + ACTIVE_ROUTE_TIMEOUT)

    def expire_routes(self, now: float) -> list[int]:
        """Deactivate entries whose expiry has passed; returns their destinations."""
        expired = []
        for entry in self.routes.values():
            if entry.active and entry.expiry < now:
                entry.active = False
                expired.append(entry.destination)
        return expired

    def _update_route(self, dest: int, next_hop: int, hop_count: int,
                      dest_seq: int, now: float,
                      lifetime: float = ACTIVE_ROUTE_TIMEOUT,
                      ) -> tuple[Optional[RoutingTableEntry], bool]:
        if dest == self.id:
            return None, False
        entry = self.routes.get(dest)
        candidate = (dest_seq, hop_count)
        usable = entry is not None and entry.active and entry.expiry >= now
        if not usable or fresher(candidate, (entry.dest_seq, entry.hop_count)):
            entry = RoutingTableEntry(dest, next_hop, hop_count, dest_seq,
                                      now + lifetime)
            self.routes[dest] = entry
            self.journal.append((
                "route-install",
                f"dest={dest} next={next_hop} hops={hop_count} seq={dest_seq}"))
            return entry, True
        if candidate == (entry.dest_seq, entry.hop_count) \
                and next_hop == entry.next_hop:
            entry.expiry = max(entry.expiry, now + lifetime)
        return entry, False

    # -- discovery ---------------------------------------------------------

    def _emit_rreq(self, dest: int, now: float) -> Rreq:
        self.own_seq += 1
        rreq_id = self.next_rreq_id
        self.next_rreq_id += 1
        # Remember our own flood so echoes coming back are dropped.
        self.seen_rreqs[(self.id, rreq_id)] = now + PATH_DISCOVERY_TIME
        known = self.routes.get(dest)
        dest_seq_known = known.dest_seq if known is not None and known.dest_seq > 0 else None
        return Rreq(origin=self.id, origin_seq=self.own_seq, rreq_id=rreq_id,
                    dest=dest, dest_seq_known=dest_seq_known, hop_count=0)

    def originate_discovery(self, dest: int, now: float) -> DiscoveryStart:
        """Start (or short-circuit) a route discovery toward dest.

        A live route is returned directly. Otherwise a flood is emitted and
        a retry is due at retry_at; feed that moment to discovery_timeout.
        """
        if dest == self.id:
            raise SelfDestination(f"node {self.id} cannot discover itself")
        route = self.route_for(dest, now)
        if route is not None:
            return DiscoveryStart(route=route)
        if dest in self.pending:
            return DiscoveryStart(already_pending=True)
        rreq = self._emit_rreq(dest, now)
        self.pending[dest] = _Pending(retries_used=0,
                                      next_retry=now + NET_TRAVERSAL_TIME)
        return DiscoveryStart(actions=[Broadcast(rreq)],
                              retry_at=now + NET_TRAVERSAL_TIME)

    def discovery_timeout(self, dest: int, now: float
                          ) -> tuple[list, Optional[UnreachableVerdict],
                                     Optional[float]]:
        """Retry a pending discovery, or give up after RREQ_RETRIES retries."""
        pend = self.pending.get(dest)
        if pend is None:
            return [], None, None
        if pend.retries_used >= RREQ_RETRIES:
            del self.pending[dest]
            return [], UnreachableVerdict(dest), None
        pend.retries_used += 1
        pend.next_retry = now + NET_TRAVERSAL_TIME
        rreq = self._emit_rreq(dest, now)
        return [Broadcast(rreq)], None, now + NET_TRAVERSAL_TIME

    # -- message handlers --------------------------------------------------

    def _purge_seen(self, now: float) -> None:
        stale = [key for key, expiry in self.seen_rreqs.items() if expiry < now]
        for key in stale:
            del self.seen_rreqs[key]

    def handle_rreq(self, rreq: Rreq, prev_hop: int, now: float
                    ) -> tuple[bool, list]:
        """Process a received route request.

        Returns (accepted, actions). Duplicates and echoes of the node's own
        flood are not accepted and change nothing beyond liveness.
        """
        if prev_hop == self.id:
            raise ValueError("a node cannot be its own previous hop")
        self.note_neighbor_alive(prev_hop)
        self._purge_seen(now)
        key = (rreq.origin, rreq.rreq_id)
        if key in self.seen_rreqs:
            return False, []
        self.seen_rreqs[key] = now + PATH_DISCOVERY_TIME
        if rreq.origin == self.id:
            return False, []
        # Links are treated as symmetric: the sender is reachable directly,
        # and the origin through it.
        self._update_route(prev_hop, prev_hop, 1, 0, now)
        self._update_route(rreq.origin, prev_hop, rreq.hop_count + 1,
                           rreq.origin_seq, now)
        if rreq.dest == self.id:
            self.own_seq = max(self.own_seq + 1, rreq.dest_seq_known or 0)
            reply = Rrep(origin=rreq.origin, dest=self.id,
                         dest_seq=self.own_seq, hop_count=0,
                         lifetime=ACTIVE_ROUTE_TIMEOUT)
            return True, [Unicast(prev_hop, reply)]
        entry = self.route_for(rreq.dest, now)
        if (self.intermediate_reply and entry is not None
                and entry.dest_seq > 0 and rreq.dest_seq_known is not None
                and entry.dest_seq >= rreq.dest_seq_known):
            reply = Rrep(origin=rreq.origin, dest=rreq.dest,
                         dest_seq=entry.dest_seq, hop_count=entry.hop_count,
                         lifetime=max(0.0, entry.expiry - now))
            return True, [Unicast(prev_hop, reply)]
        return True, [Broadcast(replace(rreq, hop_count=rreq.hop_count + 1))]

    def handle_rrep(self, rrep: Rrep, prev_hop: int, now: float) -> list:
        """Install the forward route and relay the reply toward its origin."""
        self.note_neighbor_alive(prev_hop)
        self._update_route(prev_hop, prev_hop, 1, 0, now)
        hops = rrep.hop_count + 1
        self._update_route(rrep.dest, prev_hop, hops, rrep.dest_seq, now,
                           lifetime=rrep.lifetime)
        if rrep.origin == self.id:
            self.pending.pop(rrep.dest, None)
            entry = self.route_for(rrep.dest, now)
            if entry is None:
                return [TraceNote(f"reply for {rrep.dest} beaten by a fresher route")]
            return [RouteEstablished(rrep.dest, entry)]
        reverse = self.route_for(rrep.origin, now)
        if reverse is None:
            return [TraceNote(
                f"reply toward {rrep.origin} dropped: no reverse route")]
        return [Unicast(reverse.next_hop, replace(rrep, hop_count=hops))]

    def handle_rerr(self, rerr: Rerr, prev_hop: int, now: float) -> list:
        """Invalidate routes that relied on the failed sender; cascade upstream."""
        self.note_neighbor_alive(prev_hop)
        affected: list[tuple[int, int]] = []
        for dest, seq in rerr.unreachable:
            entry = self.routes.get(dest)
            if entry is not None and entry.active and entry.next_hop == prev_hop:
                entry.active = False
                entry.dest_seq = max(entry.dest_seq, seq)
                affected.append((dest, entry.dest_seq))
        if affected:
            return [Broadcast(Rerr(tuple(affected)))]
        return []

    def handle_link_failure(self, lost: int, now: float) -> list:
        """Invalidate every route through a dead neighbor and announce it.

        The sequence number of each invalidated destination is bumped so a
        later rediscovery demands fresher information. An empty
        announcement is suppressed.
        """
        affected: list[tuple[int, int]] = []
        for entry in self.routes.values():
            if entry.active and entry.next_hop == lost:
                entry.active = False
                entry.dest_seq += 1
                affected.append((entry.destination, entry.dest_seq))
        self._missed.pop(lost, None)
        self._heard.discard(lost)
        if affected:
            return [Broadcast(Rerr(tuple(affected)))]
        return []
