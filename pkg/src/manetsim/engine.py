"""Deterministic seeded discrete-event engine: waypoint mobility inside a
bounded area, range-based broadcast delivery with an ideal MAC (fixed
per-hop latency, optional seeded jitter), the routing protocol driven per
node, distance quantification on every accepted route request, and CSV/log
trace output.

Determinism contract: a (Scenario, seed) pair maps to byte-identical trace
artifacts. The event queue orders by (time, insertion ordinal); every random
draw comes from a named stream derived from the scenario seed, so toggling
one randomized feature does not perturb the others.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional

from . import aodv
from .aodv import (
    AodvNode,
    Broadcast,
    Hello,
    Rerr,
    RouteEstablished,
    Rrep,
    Rreq,
    TraceNote,
    Unicast,
)
from .localization import NoValidReference
from .metrics import MobilitySample, network_avg_distance
from .quantify import (
    DistanceRecord,
    DistanceState,
    MeasurementMode,
    NeighborTableBroadcast,
    apply_refresh,
    gpsfree_refresh,
    measure_on_rreq,
    merge_neighbor_table,
)
from .radio import (
    ChannelMode,
    DEFAULT_RADIO_PARAMS,
    NonPositiveDistance,
    PowerSample,
    RadioParams,
    received_power,
)
from . import metrics as _metrics


class ConfigError(ValueError):
    """A scenario field violates its invariant; .field names the culprit."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class SimulationError(RuntimeError):
    """A runtime invariant was violated while executing a scenario."""


@dataclass(frozen=True)
class TrafficFlow:
    """A constant-rate data source standing in for a transport stack."""

    source: int
    dest: int
    start_time: float
    packet_interval: float


@dataclass(frozen=True)
class Scenario:
    """Full description of one simulation run."""

    area: tuple[float, float] = (1000.0, 1000.0)
    node_count: int = 20
    duration: float = 60.0
    speed_min: float = 0.0
    speed_max: float = 100.0
    radio_range: float = 250.0
    channel: ChannelMode = ChannelMode.TWO_RAY_CROSSOVER
    mode: MeasurementMode = MeasurementMode.RSSI
    seed: int = 1
    traffic: tuple[TrafficFlow, ...] = ()
    radio: RadioParams = DEFAULT_RADIO_PARAMS
    per_hop_latency: float = 0.001
    jitter: float = 0.0
    rssi_noise_sigma: float = 0.0
    noise_seed: Optional[int] = None
    mobility_sample_interval: float = 1.0
    intermediate_reply: bool = True
    # Scripted-scenario hooks, mostly for tests: pinned initial kinematics
    # and a kill switch. All default to fully random / unused.
    initial_positions: Optional[tuple[tuple[float, float], ...]] = None
    initial_waypoints: Optional[tuple[tuple[float, float], ...]] = None
    initial_speeds: Optional[tuple[float, ...]] = None
    kill_schedule: tuple[tuple[int, float], ...] = ()
    check_invariants: bool = False

    def validate(self) -> None:
        w, h = self.area
        if not (w > 0 and h > 0):
            raise ConfigError("area", "both dimensions must be positive")
        if self.node_count < 2:
            raise ConfigError("node_count", "at least 2 nodes required")
        if not self.duration > 0:
            raise ConfigError("duration", "must be positive")
        if self.speed_min < 0:
            raise ConfigError("speed_min", "must be >= 0")
        if self.speed_min > self.speed_max:
            raise ConfigError("speed_min", "must not exceed speed_max")
        if not self.radio_range > 0:
            raise ConfigError("radio_range", "must be positive")
        if not isinstance(self.channel, ChannelMode):
            raise ConfigError("channel", "not a ChannelMode")
        if not isinstance(self.mode, MeasurementMode):
            raise ConfigError("mode", "not a MeasurementMode")
        if not isinstance(self.seed, int):
            raise ConfigError("seed", "must be an integer")
        if self.per_hop_latency < 0:
            raise ConfigError("per_hop_latency", "must be >= 0")
        if self.jitter < 0:
            raise ConfigError("jitter", "must be >= 0")
        if self.rssi_noise_sigma < 0:
            raise ConfigError("rssi_noise_sigma", "must be >= 0")
        if not self.mobility_sample_interval > 0:
            raise ConfigError("mobility_sample_interval", "must be positive")
        for i, flow in enumerate(self.traffic):
            if not (0 <= flow.source < self.node_count
                    and 0 <= flow.dest < self.node_count):
                raise ConfigError("traffic", f"flow {i}: node id out of range")
            if flow.source == flow.dest:
                raise ConfigError("traffic", f"flow {i}: source equals dest")
            if flow.start_time < 0:
                raise ConfigError("traffic", f"flow {i}: negative start_time")
            if not flow.packet_interval > 0:
                raise ConfigError("traffic", f"flow {i}: interval must be positive")
        for name in ("initial_positions", "initial_waypoints"):
            value = getattr(self, name)
            if value is None:
                continue
            if len(value) != self.node_count:
                raise ConfigError(name, "length must equal node_count")
            for x, y in value:
                if not (0 <= x <= w and 0 <= y <= h):
                    raise ConfigError(name, f"point ({x}, {y}) outside area")
        if self.initial_speeds is not None:
            if len(self.initial_speeds) != self.node_count:
                raise ConfigError("initial_speeds", "length must equal node_count")
            if any(s < 0 for s in self.initial_speeds):
                raise ConfigError("initial_speeds", "speeds must be >= 0")
        for node, when in self.kill_schedule:
            if not 0 <= node < self.node_count:
                raise ConfigError("kill_schedule", f"node {node} out of range")
            if when < 0:
                raise ConfigError("kill_schedule", "kill time must be >= 0")


@dataclass(frozen=True)
class KinematicState:
    """A node's motion state: current position, target waypoint, speed."""

    node: int
    position: tuple[float, float]
    waypoint: tuple[float, float]
    speed: float


def mobility_step(state: KinematicState, dt: float, rng: random.Random,
                  area: tuple[float, float],
                  speed_range: tuple[float, float]) -> KinematicState:
    """Advance a node by dt seconds of waypoint motion.

    The node moves straight toward its waypoint at its current speed; on
    arrival it draws a fresh uniform waypoint inside the area and a fresh
    uniform speed, then keeps moving with whatever time is left. Waypoints
    are interior points and travel is linear between them, so the position
    never leaves the area. Zero speed freezes the node.
    """
    if dt <= 0:
        return state
    x, y = state.position
    wx, wy = state.waypoint
    speed = state.speed
    remaining = dt
    for _ in range(10000):  # generous redraw bound; never hit in practice
        if speed <= 0 or remaining <= 0:
            break
        dist = math.hypot(wx - x, wy - y)
        travel = speed * remaining
        if dist <= travel:
            x, y = wx, wy
            remaining -= dist / speed
            wx = rng.uniform(0.0, area[0])
            wy = rng.uniform(0.0, area[1])
            speed = rng.uniform(speed_range[0], speed_range[1])
        else:
            frac = travel / dist
            x += (wx - x) * frac
            y += (wy - y) * frac
            break
    return KinematicState(state.node, (x, y), (wx, wy), speed)


def neighbors_in_range(node: int, positions: Mapping[int, tuple[float, float]],
                       radio_range: float) -> set[int]:
    """Ids within the closed radio ball around a node, excluding itself."""
    x, y = positions[node]
    return {other for other, (ox, oy) in positions.items()
            if other != node and math.hypot(ox - x, oy - y) <= radio_range}


def deliver_broadcast(sender: int,
                      positions: Mapping[int, tuple[float, float]],
                      radio_range: float, params: RadioParams,
                      channel: ChannelMode,
                      ) -> list[tuple[int, float, PowerSample]]:
    """Recipients of a broadcast with their ground-truth distance and power.

    Recipients are exactly the nodes within the closed ball of radio_range
    around the sender (boundary included), sorted by id. The received power
    is evaluated at the transmission-time distance.
    """
    sx, sy = positions[sender]
    out = []
    for nid in sorted(positions):
        if nid == sender:
            continue
        ox, oy = positions[nid]
        d = math.hypot(ox - sx, oy - sy)
        if d <= radio_range:
            out.append((nid, d, received_power(params, channel, d)))
    return out


@dataclass(frozen=True)
class DataPacket:
    """Abstract constant-rate application payload."""

    source: int
    dest: int
    seq: int
    hops: int = 0


# ---------------------------------------------------------------------------
# Event queue


@dataclass
class Event:
    time: float
    ordinal: int
    payload: object

    def __lt__(self, other: "Event") -> bool:
        return (self.time, self.ordinal) < (other.time, other.ordinal)


@dataclass(frozen=True)
class _Deliver:
    recipient: int
    sender: int
    message: object
    distance: float
    rx_power: Optional[PowerSample]


@dataclass(frozen=True)
class _HelloTick:
    node: int


@dataclass(frozen=True)
class _TrafficSend:
    flow_index: int
    seq: int


@dataclass(frozen=True)
class _RetryTimer:
    node: int
    dest: int


@dataclass(frozen=True)
class _Kill:
    node: int


@dataclass(frozen=True)
class _Sample:
    pass


def _fmt_time(t: float) -> str:
    return f"{t:.9f}"


def _stream_rng(seed: int, *names: object) -> random.Random:
    """Independent deterministic stream named by (seed, *names)."""
    tag = "/".join(str(part) for part in names) + f"#{seed}"
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


QUANTIFICATION_HEADER = "rreq_source,rreq_dest,time_s,distance_m,rssi_distance_m"
MOBILITY_HEADER = "time_s,avg_distance_m"
SERIES_HEADER = "observer,neighbor,time_s,distance_m,rssi_distance_m"


@dataclass
class TraceBundle:
    """Everything one run produced, plus serializers for the on-disk bundle."""

    scenario: Scenario
    records: list[DistanceRecord]
    mobility: list[MobilitySample]
    protocol_log: list[str]
    summary: dict[str, object]
    route_tables: dict[int, dict[int, tuple[int, int, int, bool]]]

    def quantification_csv(self) -> str:
        lines = [QUANTIFICATION_HEADER]
        for r in self.records:
            lines.append(f"{r.rreq_source},{r.rreq_dest},{_fmt_time(r.time)},"
                         f"{r.distance!r},{r.rssi_distance!r}")
        return "\n".join(lines) + "\n"

    def mobility_csv(self, agitation_threshold: Optional[float] = None) -> str:
        if agitation_threshold is None:
            lines = [MOBILITY_HEADER]
            for s in self.mobility:
                lines.append(f"{_fmt_time(s.time)},{s.avg_distance!r}")
        else:
            labels = _metrics.label_samples(self.mobility, agitation_threshold)
            lines = [MOBILITY_HEADER + ",label"]
            for s, label in zip(self.mobility, labels):
                lines.append(f"{_fmt_time(s.time)},{s.avg_distance!r},{label}")
        return "\n".join(lines) + "\n"

    def series_csv(self) -> str:
        lines = [SERIES_HEADER]
        window = (0.0, self.scenario.duration)
        for observer in sorted({r.rreq_source for r in self.records}):
            for series in _metrics.node_series(self.records, observer, window):
                for t, dist, rssi in series.points:
                    lines.append(f"{series.observer},{series.neighbor},"
                                 f"{_fmt_time(t)},{dist!r},{rssi!r}")
        return "\n".join(lines) + "\n"

    def protocol_text(self) -> str:
        return "\n".join(self.protocol_log) + ("\n" if self.protocol_log else "")

    def summary_text(self) -> str:
        lines = [f"{key} = {self.summary[key]}" for key in sorted(self.summary)]
        return "\n".join(lines) + "\n"

    def artifacts(self, agitation_threshold: Optional[float] = None
                  ) -> dict[str, str]:
        return {
            "quantification.csv": self.quantification_csv(),
            "mobility.csv": self.mobility_csv(agitation_threshold),
            "series.csv": self.series_csv(),
            "protocol.log": self.protocol_text(),
            "summary.txt": self.summary_text(),
        }

    def write(self, outdir, agitation_threshold: Optional[float] = None
              ) -> list[Path]:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.artifacts(agitation_threshold).items():
            path = out / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
        return written


class _Sim:
    """One engine instance; strictly single-threaded and self-contained."""

    def __init__(self, sc: Scenario):
        sc.validate()
        self.sc = sc
        n = sc.node_count
        self.nodes = [AodvNode(i, intermediate_reply=sc.intermediate_reply)
                      for i in range(n)]
        self.dstates = [DistanceState(i, sc.radio) for i in range(n)]
        self.alive: set[int] = set(range(n))
        self.now = 0.0

        self._mob_rng = [_stream_rng(sc.seed, "mobility", i) for i in range(n)]
        self._jitter_rng = _stream_rng(sc.seed, "jitter")
        noise_seed = sc.noise_seed if sc.noise_seed is not None else sc.seed
        self._noise_rng = _stream_rng(noise_seed, "noise")

        self._kin: list[KinematicState] = []
        self._ktime = [0.0] * n
        for i in range(n):
            rng = self._mob_rng[i]
            if sc.initial_positions is not None:
                pos = tuple(sc.initial_positions[i])
            else:
                pos = (rng.uniform(0.0, sc.area[0]), rng.uniform(0.0, sc.area[1]))
            if sc.initial_waypoints is not None:
                wp = tuple(sc.initial_waypoints[i])
            else:
                wp = (rng.uniform(0.0, sc.area[0]), rng.uniform(0.0, sc.area[1]))
            if sc.initial_speeds is not None:
                speed = sc.initial_speeds[i]
            else:
                speed = rng.uniform(sc.speed_min, sc.speed_max)
            self._kin.append(KinematicState(i, pos, wp, speed))

        self._queue: list[Event] = []
        self._ordinal = 0
        self._pkt_queues: dict[int, dict[int, list[DataPacket]]] = {
            i: {} for i in range(n)}
        self.records: list[DistanceRecord] = []
        self.samples: list[MobilitySample] = []
        self.log: list[str] = []
        self.counters: dict[str, int] = {}

        # Kills are scheduled before the periodic chains so that at an exact
        # time tie the kill wins deterministically.
        for node, when in sorted(sc.kill_schedule, key=lambda k: (k[1], k[0])):
            self._schedule(when, _Kill(node))
        for i in range(n):
            self._schedule(0.0, _HelloTick(i))
        self._schedule(0.0, _Sample())
        for idx, flow in enumerate(sc.traffic):
            if flow.start_time < sc.duration:
                self._schedule(flow.start_time, _TrafficSend(idx, 0))

    # -- plumbing ------------------------------------------------------

    def _schedule(self, when: float, payload: object) -> None:
        heapq.heappush(self._queue, Event(when, self._ordinal, payload))
        self._ordinal += 1

    def _log(self, event: str, node: int, detail: str = "-") -> None:
        self.log.append(f"{_fmt_time(self.now)} {event} {node} {detail}")

    def _count(self, key: str, by: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + by

    def _drain(self, node: AodvNode) -> None:
        for event, detail in node.drain_journal():
            self._log(event, node.id, detail)

    def _positions(self) -> dict[int, tuple[float, float]]:
        speed_range = (self.sc.speed_min, self.sc.speed_max)
        for i in sorted(self.alive):
            dt = self.now - self._ktime[i]
            if dt > 0:
                self._kin[i] = mobility_step(self._kin[i], dt,
                                             self._mob_rng[i], self.sc.area,
                                             speed_range)
                self._ktime[i] = self.now
        return {i: self._kin[i].position for i in sorted(self.alive)}

    # -- transmission ----------------------------------------------------

    def _delivery_delay(self) -> float:
        delay = self.sc.per_hop_latency
        if self.sc.jitter > 0:
            delay += self._jitter_rng.uniform(0.0, self.sc.jitter)
        return delay

    def _perturb(self, power: PowerSample) -> PowerSample:
        if self.sc.rssi_noise_sigma > 0:
            factor = math.exp(self._noise_rng.gauss(0.0, self.sc.rssi_noise_sigma))
            return PowerSample(power.rx_power * factor)
        return power

    def _broadcast(self, sender: int, message: object) -> None:
        if sender not in self.alive:
            return
        positions = self._positions()
        recipients = deliver_broadcast(sender, positions, self.sc.radio_range,
                                       self.sc.radio, self.sc.channel)
        for nid, dist, power in recipients:
            self._schedule(self.now + self._delivery_delay(),
                           _Deliver(nid, sender, message, dist,
                                    self._perturb(power)))

    def _unicast(self, sender: int, to: int, message: object) -> None:
        if sender not in self.alive:
            return
        positions = self._positions()
        if to not in positions:
            self._log("unicast-lost", sender, f"to={to} reason=dead")
            return
        sx, sy = positions[sender]
        ox, oy = positions[to]
        d = math.hypot(ox - sx, oy - sy)
        if d > self.sc.radio_range:
            self._log("unicast-lost", sender, f"to={to} reason=out-of-range")
            return
        power = self._perturb(received_power(self.sc.radio, self.sc.channel, d))
        self._schedule(self.now + self._delivery_delay(),
                       _Deliver(to, sender, message, d, power))

    def _emit(self, origin: int, actions: list) -> None:
        for action in actions:
            if isinstance(action, Broadcast):
                self._broadcast(origin, action.message)
            elif isinstance(action, Unicast):
                self._unicast(origin, action.to, action.message)
            elif isinstance(action, RouteEstablished):
                self._flush_queue(origin, action.dest)
            elif isinstance(action, TraceNote):
                self._log("note", origin, action.text)

    # -- traffic ---------------------------------------------------------

    def _flush_queue(self, node_id: int, dest: int) -> None:
        for pkt in self._pkt_queues[node_id].pop(dest, []):
            self._send_data(node_id, pkt)

    def _send_data(self, src: int, pkt: DataPacket) -> None:
        node = self.nodes[src]
        entry = node.route_for(pkt.dest, self.now)
        if entry is not None:
            node.refresh_route(pkt.dest, self.now)
            self._count("data_sent")
            self._log("data-send", src,
                      f"dest={pkt.dest} seq={pkt.seq} next={entry.next_hop}")
            self._unicast(src, entry.next_hop, replace(pkt, hops=1))
            return
        self._pkt_queues[src].setdefault(pkt.dest, []).append(pkt)
        self._log("data-queued", src, f"dest={pkt.dest} seq={pkt.seq}")
        start = node.originate_discovery(pkt.dest, self.now)
        self._drain(node)
        if start.already_pending or start.route is not None:
            return
        self._count("discoveries_started")
        self._count("rreq_originated")
        rreq = start.actions[0].message
        self._log("rreq-origin", src,
                  f"dest={pkt.dest} rreq_id={rreq.rreq_id} seq={rreq.origin_seq}")
        self._emit(src, start.actions)
        self._schedule(start.retry_at, _RetryTimer(src, pkt.dest))

    # -- event handlers ----------------------------------------------------

    def _on_hello_tick(self, p: _HelloTick) -> None:
        if p.node not in self.alive:
            return
        node = self.nodes[p.node]
        for dest in node.expire_routes(self.now):
            self._log("route-expire", p.node, f"dest={dest}")
        actions, failed = node.hello_tick(self.now)
        self._drain(node)
        self._count("hello_sent")
        self._log("hello", p.node)
        self._emit(p.node, actions)
        for lost in failed:
            self._log("link-fail", p.node, f"neighbor={lost}")
            rerr_actions = node.handle_link_failure(lost, self.now)
            self._drain(node)
            for action in rerr_actions:
                if isinstance(action, Broadcast):
                    dests = ",".join(str(d) for d, _ in action.message.unreachable)
                    self._count("rerr_sent")
                    self._log("rerr-send", p.node, f"dests={dests}")
            self._emit(p.node, rerr_actions)
        nxt = self.now + aodv.HELLO_INTERVAL
        if nxt <= self.sc.duration:
            self._schedule(nxt, _HelloTick(p.node))

    def _on_sample(self, p: _Sample) -> None:
        positions = self._positions()
        if len(positions) >= 2:
            self.samples.append(network_avg_distance(positions, self.now))
        if self.sc.check_invariants:
            self._check_route_walks()
        nxt = self.now + self.sc.mobility_sample_interval
        if nxt <= self.sc.duration:
            self._schedule(nxt, _Sample())

    def _on_kill(self, p: _Kill) -> None:
        if p.node in self.alive:
            self._positions()  # freeze the victim at its death position
            self.alive.discard(p.node)
            self._log("kill", p.node)

    def _on_traffic(self, p: _TrafficSend) -> None:
        flow = self.sc.traffic[p.flow_index]
        nxt = self.now + flow.packet_interval
        if nxt < self.sc.duration:
            self._schedule(nxt, _TrafficSend(p.flow_index, p.seq + 1))
        if flow.source not in self.alive:
            return
        self._send_data(flow.source, DataPacket(flow.source, flow.dest, p.seq))

    def _on_retry(self, p: _RetryTimer) -> None:
        if p.node not in self.alive:
            return
        node = self.nodes[p.node]
        actions, verdict, retry_at = node.discovery_timeout(p.dest, self.now)
        self._drain(node)
        if verdict is not None:
            self._count("discoveries_unreachable")
            self._log("discovery-fail", p.node, f"dest={p.dest} unreachable")
            dropped = self._pkt_queues[p.node].pop(p.dest, [])
            for pkt in dropped:
                self._count("data_dropped")
                self._log("data-drop", p.node,
                          f"dest={p.dest} seq={pkt.seq} reason=unreachable")
        elif actions:
            self._count("rreq_originated")
            rreq = actions[0].message
            self._log("rreq-origin", p.node,
                      f"dest={p.dest} rreq_id={rreq.rreq_id} "
                      f"seq={rreq.origin_seq} retry=1")
            self._emit(p.node, actions)
            self._schedule(retry_at, _RetryTimer(p.node, p.dest))

    def _on_deliver(self, p: _Deliver) -> None:
        if p.recipient not in self.alive:
            return
        node = self.nodes[p.recipient]
        msg = p.message
        if isinstance(msg, Rreq):
            self._handle_rreq_delivery(node, p)
        elif isinstance(msg, Rrep):
            actions = node.handle_rrep(msg, p.sender, self.now)
            self._drain(node)
            for action in actions:
                if isinstance(action, Unicast):
                    self._log("rrep-forward", p.recipient,
                              f"origin={action.message.origin} "
                              f"dest={action.message.dest} to={action.to}")
                elif isinstance(action, RouteEstablished):
                    self._count("rrep_delivered")
                    self._count("discoveries_succeeded")
                    self._log("rrep-deliver", p.recipient,
                              f"dest={action.dest} hops={action.entry.hop_count} "
                              f"seq={action.entry.dest_seq}")
            self._emit(p.recipient, actions)
        elif isinstance(msg, Rerr):
            actions = node.handle_rerr(msg, p.sender, self.now)
            self._drain(node)
            for action in actions:
                if isinstance(action, Broadcast):
                    dests = ",".join(str(d) for d, _ in action.message.unreachable)
                    self._count("rerr_sent")
                    self._log("rerr-forward", p.recipient, f"dests={dests}")
            self._emit(p.recipient, actions)
        elif isinstance(msg, Hello):
            node.handle_hello(msg, p.sender, self.now)
        elif isinstance(msg, NeighborTableBroadcast):
            node.note_neighbor_alive(p.sender)
            merge_neighbor_table(self.dstates[p.recipient], msg)
        elif isinstance(msg, DataPacket):
            self._handle_data_delivery(node, p, msg)

    def _handle_rreq_delivery(self, node: AodvNode, p: _Deliver) -> None:
        msg: Rreq = p.message
        accepted, actions = node.handle_rreq(msg, p.sender, self.now)
        self._drain(node)
        if not accepted:
            self._log("rreq-drop", p.recipient,
                      f"origin={msg.origin} rreq_id={msg.rreq_id} from={p.sender}")
            return
        self._count("rreq_accepted")
        self._log("rreq-accept", p.recipient,
                  f"origin={msg.origin} rreq_id={msg.rreq_id} dest={msg.dest} "
                  f"from={p.sender} hops={msg.hop_count}")
        record, table_bcast = measure_on_rreq(
            self.dstates[p.recipient], p.sender, p.rx_power, p.distance,
            self.sc.mode, self.now)
        self.records.append(record)
        self._count("records")
        self._log("record", p.recipient,
                  f"neighbor={p.sender} distance={record.distance!r} "
                  f"rssi={record.rssi_distance!r}")
        for action in actions:
            if isinstance(action, Broadcast):
                self._count("rreq_rebroadcast")
                self._log("rreq-rebroadcast", p.recipient,
                          f"origin={msg.origin} rreq_id={msg.rreq_id} "
                          f"hops={action.message.hop_count}")
            elif isinstance(action, Unicast):
                self._count("rrep_sent")
                self._log("rrep-send", p.recipient,
                          f"origin={action.message.origin} "
                          f"dest={action.message.dest} "
                          f"seq={action.message.dest_seq} "
                          f"hops={action.message.hop_count}")
        self._emit(p.recipient, actions)
        self._count("table_broadcasts")
        self._log("table-broadcast", p.recipient,
                  f"entries={len(table_bcast.table.entries)}")
        self._broadcast(p.recipient, table_bcast)
        if self.sc.mode is MeasurementMode.GPS_FREE:
            state = self.dstates[p.recipient]
            try:
                result = gpsfree_refresh(state)
                updated = apply_refresh(state, result)
                ref = result.reference
                self._count("gpsfree_refreshes")
                self._log("gpsfree-refresh", p.recipient,
                          f"reference={ref.center},{ref.x_axis},{ref.y_side} "
                          f"placed={len(result.coordinates)} "
                          f"updated={len(updated)}")
            except NoValidReference:
                self._count("gpsfree_skipped")
                self._log("gpsfree-skip", p.recipient, "no-valid-reference")

    def _handle_data_delivery(self, node: AodvNode, p: _Deliver,
                              msg: DataPacket) -> None:
        node.note_neighbor_alive(p.sender)
        if msg.dest == p.recipient:
            self._count("data_delivered")
            self._log("data-deliver", p.recipient,
                      f"source={msg.source} seq={msg.seq} hops={msg.hops}")
            return
        entry = node.route_for(msg.dest, self.now)
        if entry is None:
            self._count("data_dropped")
            self._log("data-drop", p.recipient,
                      f"dest={msg.dest} seq={msg.seq} reason=no-route")
            return
        if msg.hops >= self.sc.node_count:
            self._count("data_dropped")
            self._log("data-drop", p.recipient,
                      f"dest={msg.dest} seq={msg.seq} reason=hop-limit")
            return
        node.refresh_route(msg.dest, self.now)
        self._drain(node)
        self._log("data-forward", p.recipient,
                  f"dest={msg.dest} seq={msg.seq} next={entry.next_hop}")
        self._unicast(p.recipient, entry.next_hop, replace(msg, hops=msg.hops + 1))

    # -- invariants --------------------------------------------------------

    def _check_route_walks(self) -> None:
        """Next-hop chains for active routes must never revisit a node."""
        for node_id in sorted(self.alive):
            for dest, entry in self.nodes[node_id].routes.items():
                if not (entry.active and entry.expiry >= self.now):
                    continue
                current = node_id
                seen = {current}
                for _ in range(self.sc.node_count + 1):
                    hop_entry = self.nodes[current].route_for(dest, self.now)
                    if hop_entry is None:
                        break
                    current = hop_entry.next_hop
                    if current == dest:
                        break
                    if current in seen:
                        raise SimulationError(
                            f"routing loop toward {dest} at node {current} "
                            f"(t={self.now})")
                    seen.add(current)

    # -- main loop -----------------------------------------------------

    def run(self) -> TraceBundle:
        sc = self.sc
        handlers = {
            _Deliver: self._on_deliver,
            _HelloTick: self._on_hello_tick,
            _TrafficSend: self._on_traffic,
            _RetryTimer: self._on_retry,
            _Kill: self._on_kill,
            _Sample: self._on_sample,
        }
        while self._queue and self._queue[0].time <= sc.duration:
            event = heapq.heappop(self._queue)
            if event.time < self.now:
                raise SimulationError("event queue went backward in time")
            self.now = event.time
            handlers[type(event.payload)](event.payload)
            self._count("events_processed")

        route_tables: dict[int, dict[int, tuple[int, int, int, bool]]] = {}
        for i, node in enumerate(self.nodes):
            table = {}
            for dest, entry in node.routes.items():
                live = entry.active and entry.expiry >= sc.duration
                table[dest] = (entry.next_hop, entry.hop_count,
                               entry.dest_seq, live)
            route_tables[i] = table

        summary: dict[str, object] = dict(self.counters)
        summary.update({
            "node_count": sc.node_count,
            "duration_s": sc.duration,
            "seed": sc.seed,
            "mode": sc.mode.value,
            "channel": sc.channel.value,
        })
        return TraceBundle(scenario=sc, records=self.records,
                           mobility=self.samples, protocol_log=self.log,
                           summary=summary, route_tables=route_tables)


def run_scenario(scenario: Scenario) -> TraceBundle:
    """Execute a scenario to completion and return its trace bundle.

    Raises:
        ConfigError: if a scenario invariant is violated.
        SimulationError: if a runtime invariant breaks (for example two
            nodes ending up exactly co-located, which the engine forbids).
    """
    sim = _Sim(scenario)
    try:
        return sim.run()
    except NonPositiveDistance as exc:
        raise SimulationError(f"co-located nodes at t={sim.now}") from exc
