"""Deterministic ad hoc network simulator: on-demand distance-vector routing
extended with neighbor-distance quantification (ground truth, received-power
ranging, and reference-frame localization from distances alone)."""

from .aodv import (
    ACTIVE_ROUTE_TIMEOUT,
    ALLOWED_HELLO_LOSS,
    HELLO_INTERVAL,
    NET_TRAVERSAL_TIME,
    PATH_DISCOVERY_TIME,
    RREQ_RETRIES,
    AodvNode,
    Hello,
    Rerr,
    Rrep,
    Rreq,
    RoutingTableEntry,
    SelfDestination,
    UnreachableVerdict,
    fresher,
)
from .engine import (
    ConfigError,
    DataPacket,
    KinematicState,
    Scenario,
    SimulationError,
    TraceBundle,
    TrafficFlow,
    deliver_broadcast,
    mobility_step,
    neighbors_in_range,
    run_scenario,
)
from .localization import (
    DegenerateGeometry,
    LocalCoordinate,
    LocalFrame,
    MissingDistance,
    NeighborDistanceTable,
    NoValidReference,
    ReferenceTriple,
    angle_alpha,
    build_frame,
    frame_distance,
    localize_one_hop,
    localize_two_hop,
    select_reference,
)
from .metrics import (
    MobilitySample,
    NeighborSeries,
    TooFewNodes,
    label_samples,
    network_avg_distance,
    node_series,
)
from .quantify import (
    DistanceRecord,
    DistanceState,
    GpsFreeResult,
    MeasurementMode,
    NeighborTableBroadcast,
    apply_refresh,
    gpsfree_refresh,
    measure_on_rreq,
    merge_neighbor_table,
    pair_distance,
)
from .radio import (
    ChannelMode,
    DEFAULT_RADIO_PARAMS,
    NonPositiveDistance,
    NonPositivePower,
    PowerSample,
    RadioParams,
    crossover_distance,
    estimate_distance_friis,
    received_power,
)

__version__ = "0.1.0"
