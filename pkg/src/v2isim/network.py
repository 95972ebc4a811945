"""Static road network: junctions, lanes, routes, pools, detectors and zones.

All lengths are meters, angles radians, coordinates planar with the origin at
the studied junction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from .errors import (
    CapacityMismatch,
    DanglingReference,
    InvalidValue,
    OffsetOutOfRange,
)

# One queued vehicle (5 m body, no extra gap) and its footprint on a 1.6 m wide
# path through a junction.
SLOT_LENGTH = 5.0
FOOTPRINT_AREA = 8.0

# Allowed disagreement between a lane's declared length and its endpoints.
GEOMETRY_TOLERANCE = 1.0


def max_occupancy(length: float, slot: float = SLOT_LENGTH) -> int:
    """Number of whole vehicle slots that fit on a lane of ``length`` meters."""
    if length < 0:
        raise InvalidValue(f"lane length must be >= 0, got {length}")
    return int(math.floor(length / slot))


def pool_capacity(area: float, footprint: float = FOOTPRINT_AREA) -> int:
    if area <= 0:
        raise InvalidValue(f"pool area must be > 0, got {area}")
    return int(math.floor(area / footprint))


def occupation_threshold(capacity: int) -> int:
    """Pool count at which the intersection manager starts holding vehicles."""
    if capacity < 0:
        raise InvalidValue(f"capacity must be >= 0, got {capacity}")
    return capacity // 2


class Position(NamedTuple):
    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def _check_position(p: Position, what: str) -> Position:
    if not (math.isfinite(p.x) and math.isfinite(p.y)):
        raise InvalidValue(f"{what}: coordinates must be finite, got {tuple(p)}")
    return p


class Zone(Enum):
    CONTROL = "control"
    SURVEILLANCE = "surveillance"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class ZoneSpec:
    center: Position = Position(0.0, 0.0)
    control_radius: float = 300.0
    surveillance_radius: float = 500.0

    def __post_init__(self):
        _check_position(self.center, "zone center")
        if not 0 < self.control_radius < self.surveillance_radius:
            raise InvalidValue(
                "zone radii must satisfy 0 < control < surveillance, got "
                f"{self.control_radius} / {self.surveillance_radius}"
            )


def zone_of(p: Position, z: ZoneSpec) -> Zone:
    # Points exactly on a boundary belong to the inner zone.
    d = math.hypot(p[0] - z.center[0], p[1] - z.center[1])
    if d <= z.control_radius:
        return Zone.CONTROL
    if d <= z.surveillance_radius:
        return Zone.SURVEILLANCE
    return Zone.OUTSIDE


@dataclass(frozen=True)
class Pool:
    """Junction interior shared by crossing paths.

    ``depth`` is how far the interior reaches into every incoming lane (ending
    at the lane end) and every outgoing lane (starting at the lane start).
    """

    area: float
    depth: float
    capacity: int = -1

    def __post_init__(self):
        if self.depth <= 0:
            raise InvalidValue(f"pool depth must be > 0, got {self.depth}")
        expected = pool_capacity(self.area)
        if self.capacity == -1:
            object.__setattr__(self, "capacity", expected)
        elif self.capacity != expected:
            raise CapacityMismatch(
                f"declared pool capacity {self.capacity} != floor({self.area}/{FOOTPRINT_AREA}) = {expected}"
            )
        if self.capacity < 1:
            raise InvalidValue(f"pool area {self.area} holds no vehicle")

    @property
    def threshold(self) -> int:
        return occupation_threshold(self.capacity)


@dataclass(frozen=True)
class Junction:
    id: str
    center: Position
    pool: Pool | None = None

    def __post_init__(self):
        _check_position(self.center, f"junction {self.id}")


@dataclass(frozen=True)
class Lane:
    id: str
    from_junction: str
    to_junction: str
    length: float
    angle: float
    max_occupancy: int = -1
    speed_limit: float | None = None
    parallel: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.length > 0 or not math.isfinite(self.length):
            raise InvalidValue(f"lane {self.id}: length must be > 0, got {self.length}")
        expected = max_occupancy(self.length)
        if self.max_occupancy == -1:
            object.__setattr__(self, "max_occupancy", expected)
        elif self.max_occupancy != expected:
            raise CapacityMismatch(
                f"lane {self.id}: declared occupancy {self.max_occupancy} != "
                f"floor({self.length}/{SLOT_LENGTH}) = {expected}"
            )
        if self.speed_limit is not None and not self.speed_limit > 0:
            raise InvalidValue(f"lane {self.id}: speed limit must be > 0")


@dataclass(frozen=True)
class Route:
    id: str
    lanes: tuple[str, ...]
    source: str = ""
    dest: str = ""


class DetectorKind(Enum):
    ENTRY = "entry"
    EXIT = "exit"


@dataclass(frozen=True)
class Detector:
    id: str
    lane: str
    offset: float
    kind: DetectorKind
    junction: str | None = None   # pool this detector counts for, if any
    tag: str = ""                 # free label, "mission-exit" marks preemption end points
    generated: bool = False


@dataclass(frozen=True)
class Network:
    junctions: dict[str, Junction]
    lanes: dict[str, Lane]
    routes: dict[str, Route]
    detectors: tuple[Detector, ...] = ()
    zone: ZoneSpec = field(default_factory=ZoneSpec)

    # -- geometry ---------------------------------------------------------
    def lane_start(self, lane_id: str) -> Position:
        return self.junctions[self.lanes[lane_id].from_junction].center

    def incoming(self, junction: str) -> list[str]:
        return sorted(l.id for l in self.lanes.values() if l.to_junction == junction)

    def outgoing(self, junction: str) -> list[str]:
        return sorted(l.id for l in self.lanes.values() if l.from_junction == junction)

    def stop_offset(self, lane_id: str) -> float:
        """Offset of the stop line at the downstream end of a lane."""
        lane = self.lanes[lane_id]
        pool = self.junctions[lane.to_junction].pool
        return lane.length - pool.depth if pool else lane.length

    def pool_intervals(self, junction: str) -> list[tuple[str, float, float]]:
        """(lane, lo, hi) offset ranges that make up a junction interior.

        Incoming ranges are closed ``[stop, length]``; outgoing ranges are
        half-open ``[0, depth)``.
        """
        pool = self.junctions[junction].pool
        if pool is None:
            return []
        spans = [(l, self.stop_offset(l), self.lanes[l].length) for l in self.incoming(junction)]
        spans += [(l, 0.0, pool.depth) for l in self.outgoing(junction)]
        return spans

    def pool_junctions(self) -> list[str]:
        return sorted(j for j, junc in self.junctions.items() if junc.pool is not None)

    def mission_exit(self, route_id: str) -> Detector | None:
        lanes = self.routes[route_id].lanes
        for det in self.detectors:
            if det.tag == "mission-exit" and det.lane in lanes:
                return det
        return None


def locate(net: Network, lane_id: str, offset: float) -> Position:
    lane = net.lanes[lane_id]
    if not 0.0 <= offset <= lane.length:
        raise OffsetOutOfRange(f"offset {offset} outside lane {lane_id} [0, {lane.length}]")
    start = net.lane_start(lane_id)
    return Position(start.x + offset * math.cos(lane.angle), start.y + offset * math.sin(lane.angle))


def pool_detectors(junctions: dict[str, Junction], lanes: dict[str, Lane]) -> list[Detector]:
    """Entry detectors on every stop line and exit detectors ``depth`` into every exit."""
    dets = []
    for jid in sorted(junctions):
        pool = junctions[jid].pool
        if pool is None:
            continue
        for lane in sorted(lanes.values(), key=lambda l: l.id):
            if lane.to_junction == jid:
                dets.append(Detector(f"{jid}:in:{lane.id}", lane.id, lane.length - pool.depth,
                                     DetectorKind.ENTRY, jid, generated=True))
            if lane.from_junction == jid:
                dets.append(Detector(f"{jid}:out:{lane.id}", lane.id, pool.depth,
                                     DetectorKind.EXIT, jid, generated=True))
    return dets


def build_network(junctions, lanes, routes, detectors=(), zone=None) -> Network:
    """Cross-check every reference and derive the pool detectors."""
    jmap = {}
    for j in junctions:
        if j.id in jmap:
            raise InvalidValue(f"duplicate junction id {j.id}")
        jmap[j.id] = j
    lmap = {}
    for lane in lanes:
        if lane.id in lmap:
            raise InvalidValue(f"duplicate lane id {lane.id}")
        for end in (lane.from_junction, lane.to_junction):
            if end not in jmap:
                raise DanglingReference(f"lane {lane.id} references unknown junction {end}")
        lmap[lane.id] = lane
    _check_geometry(jmap, lmap)

    rmap = {}
    for r in routes:
        if r.id in rmap:
            raise InvalidValue(f"duplicate route id {r.id}")
        if not r.lanes:
            raise InvalidValue(f"route {r.id} has no lanes")
        for lid in r.lanes:
            if lid not in lmap:
                raise DanglingReference(f"route {r.id} references unknown lane {lid}")
        for a, b in zip(r.lanes, r.lanes[1:]):
            if lmap[a].to_junction != lmap[b].from_junction:
                raise InvalidValue(f"route {r.id}: lanes {a} and {b} are not connected")
        source, dest = lmap[r.lanes[0]].from_junction, lmap[r.lanes[-1]].to_junction
        if r.source and r.source != source or r.dest and r.dest != dest:
            raise InvalidValue(f"route {r.id}: declared endpoints disagree with its lanes")
        if jmap[source].pool or jmap[dest].pool:
            raise InvalidValue(f"route {r.id} must start and end outside junction pools")
        rmap[r.id] = Route(r.id, tuple(r.lanes), source, dest)

    explicit = []
    for d in detectors:
        if d.lane not in lmap:
            raise DanglingReference(f"detector {d.id} references unknown lane {d.lane}")
        if not 0 <= d.offset <= lmap[d.lane].length:
            raise InvalidValue(f"detector {d.id}: offset {d.offset} outside its lane")
        if d.junction is not None and d.junction not in jmap:
            raise DanglingReference(f"detector {d.id} references unknown junction {d.junction}")
        explicit.append(d)
    for jid, j in jmap.items():
        if j.pool is None:
            continue
        for lane in lmap.values():
            if jid in (lane.from_junction, lane.to_junction) and lane.length <= j.pool.depth:
                raise InvalidValue(f"lane {lane.id} is shorter than the pool depth of {jid}")
    dets = tuple(explicit) + tuple(pool_detectors(jmap, lmap))
    ids = [d.id for d in dets]
    if len(set(ids)) != len(ids):
        raise InvalidValue("duplicate detector ids")
    return Network(jmap, lmap, rmap, dets, zone or ZoneSpec())


def _check_geometry(jmap, lmap):
    for lane in lmap.values():
        a, b = jmap[lane.from_junction].center, jmap[lane.to_junction].center
        end = Position(a.x + lane.length * math.cos(lane.angle), a.y + lane.length * math.sin(lane.angle))
        if end.distance_to(b) > GEOMETRY_TOLERANCE:
            raise InvalidValue(
                f"lane {lane.id}: length {lane.length} and angle do not reach junction {lane.to_junction}"
            )
        for other in lane.parallel:
            if other not in lmap:
                raise DanglingReference(f"lane {lane.id} lists unknown parallel lane {other}")
            o = lmap[other]
            if (o.from_junction, o.to_junction) != (lane.from_junction, lane.to_junction) or o.length != lane.length:
                raise InvalidValue(f"lanes {lane.id} and {other} are not parallel")
            if lane.id not in o.parallel:
                raise InvalidValue(f"parallel lanes must list each other: {lane.id} / {other}")
