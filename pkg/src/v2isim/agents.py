"""Agent state machines: traffic room manager, intersection manager,
traffic light agents and the in-vehicle mobile agent.

Agents talk only through the bus. They get a ``ctx`` object (the engine) that
offers ``send``, the current ``tick``/``time`` and read access to the world,
which stands in for the roadside sensing the agents would have.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import IntEnum

from .bus import AgentId, Envelope, Kind, Role, ZoneBroadcast
from .errors import DuplicateRegistration, MissionConflict, MissionUnknown, NotInOverride
from .microsim import jam_ahead
from .network import Network, Position, Zone, zone_of
from .scenario import Mode
from .signals import TrafficLightState, preemption_colors
from .vehicles import VehicleKind

log = logging.getLogger(__name__)

TRM_ID = AgentId(Role.TRM, 0)
IMA_ID = AgentId(Role.IMA, 0)
EXEMPT_DISTANCE = 10.0   # vehicles this close to the stop line keep going


def mobile_id(vehicle_id: int) -> AgentId:
    return AgentId(Role.MOBILE, vehicle_id)


# -- register log --------------------------------------------------------

@dataclass
class RegisterEntry:
    kind: VehicleKind
    route: str
    time: float
    zones: list = field(default_factory=list)   # (time, Zone) whenever the zone changes


class RegisterLog(dict):
    def note_zone(self, vid: int, time: float, zone: Zone) -> None:
        zones = self[vid].zones
        if not zones or zones[-1][1] is not zone:
            zones.append((time, zone))


def register_vehicle(log_: RegisterLog, vid: int, kind: VehicleKind, route: str, time: float) -> RegisterLog:
    if vid in log_:
        raise DuplicateRegistration(f"vehicle {vid} registered twice")
    log_[vid] = RegisterEntry(VehicleKind(kind), route, time)
    return log_


# -- mobile agent --------------------------------------------------------

def mobile_on_tick(v, world, first: bool, mode: Mode) -> list[tuple]:
    """Messages a vehicle's app sends this tick as ``(to, kind, payload)``."""
    if not v.app_active:
        return []
    out = []
    if first:
        out.append((TRM_ID, Kind.REGISTER, {"vehicle": v.id, "kind": v.kind.value, "route": v.route.id}))
        # The declaration only exists when the preemption service is running.
        if v.kind is VehicleKind.EMERGENCY and mode is Mode.SCENARIO_A:
            out.append((TRM_ID, Kind.EMERGENCY_DECLARE, {"vehicle": v.id, "route": v.route.id}))
    pos = world.position(v)
    report = {"vehicle": v.id, "x": pos.x, "y": pos.y, "speed": v.speed,
              "lane": v.lane, "offset": v.offset, "lane_index": v.lane_index}
    out.append((IMA_ID, Kind.POSITION_UPDATE, report))
    if v.kind is VehicleKind.EMERGENCY and mode is Mode.SCENARIO_A:
        out.append((TRM_ID, Kind.POSITION_UPDATE, report))
    return out


def mobile_on_message(v, env: Envelope, world) -> None:
    kind = env.kind
    if kind is Kind.STAY_STEADY:
        v.held = True
        v.hold_release_pending = False
    elif kind is Kind.RELEASE:
        if v.held:
            v.hold_release_pending = True
    elif kind is Kind.LANE_CHANGE_ADVISORY:
        target = env.payload["target"]
        if target in world.net.lanes[v.lane].parallel:
            v.lane_request = target
    # ZoneAlert is informational only.


# -- traffic light agent --------------------------------------------------

class TLAgent:
    def __init__(self, index: int, tl: TrafficLightState):
        self.id = AgentId(Role.TL, index)
        self.tl = tl
        self.errors = 0

    def on_message(self, env: Envelope, ctx) -> None:
        if env.kind is Kind.PHASE_OVERRIDE:
            self.tl.set_override(env.payload["colors"])
        elif env.kind is Kind.RESUME_SCHEDULE:
            try:
                self.tl.clear_override(ctx.time)
            except NotInOverride as exc:
                self.errors += 1
                log.warning("ignored resume: %s", exc)
                return
        else:
            return
        ctx.send(self.id, TRM_ID, Kind.PHASE_STATUS,
                 {"junction": self.tl.junction, "mode": self.tl.mode,
                  "colors": {a: c.value for a, c in self.tl.colors(ctx.time).items()}})


# -- traffic room manager -------------------------------------------------

class MissionPhase(IntEnum):
    DECLARED = 0
    IN_SURVEILLANCE = 1
    IN_CONTROL = 2
    CLEARED = 3


@dataclass
class Crossing:
    junction: str
    approach: str
    lane_index: int     # route index of the lane that enters the junction


@dataclass
class EmergencyMission:
    vehicle: int
    route: str
    crossings: list[Crossing]
    exit_lane_index: int | None = None
    exit_offset: float = 0.0
    phase: MissionPhase = MissionPhase.DECLARED
    overridden: list = field(default_factory=list)
    held: set = field(default_factory=set)
    advised_lane: str | None = None
    history: list = field(default_factory=list)   # (time, phase)

    @property
    def active(self) -> bool:
        return self.phase is not MissionPhase.CLEARED

    def advance(self, phase: MissionPhase, time: float) -> None:
        if phase <= self.phase:
            raise ValueError(f"mission phases only move forward ({self.phase.name} -> {phase.name})")
        self.phase = phase
        self.history.append((time, phase))


def plan_mission(net: Network, signals, vehicle: int, route_id: str) -> EmergencyMission:
    route = net.routes[route_id]
    crossings = []
    for i, lid in enumerate(route.lanes):
        j = net.lanes[lid].to_junction
        spec = signals.get(j)
        if spec is None or i == len(route.lanes) - 1:
            continue
        for appr, lanes in spec.approach_lanes.items():
            if lid in lanes:
                crossings.append(Crossing(j, appr, i))
    m = EmergencyMission(vehicle, route_id, crossings)
    det = net.mission_exit(route_id)
    if det is not None:
        m.exit_lane_index = route.lanes.index(det.lane)
        m.exit_offset = det.offset
    elif crossings:
        m.exit_lane_index = crossings[-1].lane_index + 1
    return m


class TrafficRoomManager:
    def __init__(self, cfg, tl_agents: dict[str, AgentId], mode: Mode):
        self.id = TRM_ID
        self.cfg = cfg
        self.net: Network = cfg.network
        self.mode = mode
        self.register_log = RegisterLog()
        self.missions: dict[int, EmergencyMission] = {}
        self.tl_agents = tl_agents
        self.ima_directory = [IMA_ID]
        self.phase_status: dict[str, dict] = {}
        self.incidents: list = []

    # message handling
    def on_message(self, env: Envelope, ctx) -> None:
        k, p = env.kind, env.payload
        if k is Kind.REGISTER:
            register_vehicle(self.register_log, p["vehicle"], p["kind"], p["route"], env.deliver_time)
        elif k is Kind.EMERGENCY_DECLARE:
            self.declare(p["vehicle"], p["route"], env.deliver_time)
        elif k is Kind.POSITION_UPDATE:
            m = self.missions.get(p["vehicle"])
            if m is not None and m.active:
                self.on_position(m, p, ctx)
        elif k is Kind.PHASE_STATUS:
            self.phase_status[p["junction"]] = p
        elif k is Kind.INCIDENT_REPORT:
            self.incidents.append(env)

    def declare(self, vid: int, route: str, time: float) -> EmergencyMission:
        for other in self.missions.values():
            if other.active:
                raise MissionConflict(
                    f"emergency vehicle {vid} declared while vehicle {other.vehicle} still has an active mission"
                )
        m = plan_mission(self.net, self.cfg.signals, vid, route)
        m.history.append((time, m.phase))
        self.missions[vid] = m
        return m

    def mission(self, vid: int) -> EmergencyMission:
        try:
            return self.missions[vid]
        except KeyError:
            raise MissionUnknown(f"no mission for vehicle {vid}") from None

    def on_position(self, m: EmergencyMission, report: dict, ctx) -> None:
        """Advance the preemption protocol from one position report."""
        if not m.active:
            raise MissionUnknown(f"mission of vehicle {m.vehicle} is already cleared")
        t = ctx.time
        zone = zone_of(Position(report["x"], report["y"]), self.net.zone)
        if m.vehicle in self.register_log:
            self.register_log.note_zone(m.vehicle, t, zone)
        if m.phase is MissionPhase.DECLARED and zone is not Zone.OUTSIDE:
            m.advance(MissionPhase.IN_SURVEILLANCE, t)
            ctx.send(self.id, ZoneBroadcast("control", "except", (m.vehicle,)), Kind.ZONE_ALERT,
                     {"vehicle": m.vehicle, "route": m.route})
        if m.phase is MissionPhase.IN_SURVEILLANCE and zone is Zone.CONTROL:
            m.advance(MissionPhase.IN_CONTROL, t)
        if m.phase is not MissionPhase.IN_CONTROL:
            return

        idx, off, speed = report["lane_index"], report["offset"], report["speed"]
        if m.exit_lane_index is not None and (idx > m.exit_lane_index or
                                              (idx == m.exit_lane_index and off >= m.exit_offset)):
            self.clear(m, ctx)
            return
        route = self.net.routes[m.route]
        params = self.cfg.vehicle_types[VehicleKind.EMERGENCY]
        dt = self.cfg.sim.dt
        horizon = speed * speed / (2 * params.decel) + speed * params.tau \
            + speed * (2 * self.cfg.sim.latency_ticks * dt + dt)
        upcoming = [c for c in m.crossings if c.lane_index >= idx]
        for n, c in enumerate(upcoming):
            if c.junction in m.overridden:
                continue
            if n > 0:
                # later junctions flip once the vehicle is close enough
                dist = self.net.stop_offset(route.lanes[c.lane_index]) - off \
                    + sum(self.net.lanes[route.lanes[i]].length for i in range(idx, c.lane_index))
                if dist > horizon:
                    break
            self.override(m, c, ctx)

    def override(self, m: EmergencyMission, c: Crossing, ctx) -> None:
        tl_id = self.tl_agents[c.junction]
        tl = ctx.lights[c.junction]
        ctx.send(self.id, tl_id, Kind.PHASE_OVERRIDE,
                 {"junction": c.junction, "colors": preemption_colors(tl, c.approach)})
        m.overridden.append(c.junction)
        ctx.send(self.id, ZoneBroadcast("control", "not-cleared", (c.junction, c.approach, m.vehicle)),
                 Kind.STAY_STEADY, {"junction": c.junction})

    def clear(self, m: EmergencyMission, ctx) -> None:
        m.advance(MissionPhase.CLEARED, ctx.time)
        for j in m.overridden:
            ctx.send(self.id, self.tl_agents[j], Kind.RESUME_SCHEDULE, {"junction": j})
        for vid in sorted(m.held):
            ctx.send(self.id, mobile_id(vid), Kind.RELEASE, {"vehicle": vid})
        m.held.clear()

    def on_hold_delivered(self, vid: int) -> None:
        for m in self.missions.values():
            if m.active:
                m.held.add(vid)

    def on_tick(self, ctx) -> None:
        """Lane advisories for an emergency vehicle stuck behind a queue."""
        for m in self.missions.values():
            if m.phase not in (MissionPhase.IN_SURVEILLANCE, MissionPhase.IN_CONTROL):
                continue
            v = ctx.world.vehicles.get(m.vehicle)
            if v is None or v.lane == m.advised_lane:
                continue
            parallel = self.net.lanes[v.lane].parallel
            if parallel and jam_ahead(v, ctx.world):
                m.advised_lane = v.lane
                ctx.send(self.id, mobile_id(v.id), Kind.LANE_CHANGE_ADVISORY,
                         {"vehicle": v.id, "target": parallel[0]})


# -- intersection manager ------------------------------------------------

class IntersectionManager:
    def __init__(self, cfg, mode: Mode):
        self.id = IMA_ID
        self.cfg = cfg
        self.mode = mode
        self.zone = cfg.network.zone
        self.junctions = cfg.network.pool_junctions()
        det_junction = {d.id: (d.junction, d.kind) for d in cfg.network.detectors if d.junction in self.junctions}
        self._det = det_junction
        self.count = {j: 0 for j in self.junctions}
        self.capacity = {j: cfg.network.junctions[j].pool.capacity for j in self.junctions}
        self.threshold = {j: cfg.network.junctions[j].pool.threshold for j in self.junctions}
        self.hold = {j: set() for j in self.junctions}
        self.last_report: dict[int, dict] = {}

    @property
    def hold_set(self) -> set:
        return set().union(*self.hold.values()) if self.hold else set()

    def on_detector(self, events) -> None:
        for ev in events:
            hit = self._det.get(ev.detector)
            if hit is None:
                continue
            j, kind = hit
            self.count[j] += 1 if kind.value == "entry" else -1
            if self.count[j] < 0:
                raise AssertionError(f"pool counter of {j} went negative")

    def on_message(self, env: Envelope, ctx) -> None:
        if env.kind is Kind.POSITION_UPDATE:
            self.last_report[env.payload["vehicle"]] = env.payload

    def on_hold_delivered(self, vid: int, junction: str) -> None:
        self.hold[junction].add(vid)

    def forget(self, vid: int) -> None:
        self.last_report.pop(vid, None)
        for s in self.hold.values():
            s.discard(vid)

    def on_tick(self, ctx) -> None:
        if self.mode is not Mode.SCENARIO_B:
            return
        for j in self.junctions:
            c = self.count[j]
            if c >= self.threshold[j]:
                ctx.send(self.id, ZoneBroadcast("control", "pool-gate", (j,)), Kind.STAY_STEADY, {"junction": j})
            elif self.hold[j]:
                for vid in sorted(self.hold[j]):
                    ctx.send(self.id, mobile_id(vid), Kind.RELEASE, {"vehicle": vid, "junction": j})
                self.hold[j].clear()


def resolve_broadcast(env: Envelope, ctx) -> list:
    """Expand a zone broadcast into concrete recipients at delivery time."""
    world = ctx.world
    trm, ima = ctx.trm, ctx.ima
    to: ZoneBroadcast = env.to
    want = Zone(to.zone)
    out = []
    for vid in sorted(world.vehicles):
        if vid not in trm.register_log:
            continue
        v = world.vehicles[vid]
        if zone_of(world.position(v), world.net.zone) is not want:
            continue
        extra = None
        if to.exemption == "except":
            if vid in to.args:
                continue
        elif to.exemption == "pool-gate":
            (j,) = to.args
            if world.pool_end.get(v.lane) != j:
                continue
            dist = world.stop[v.lane] - v.offset
            if dist <= EXEMPT_DISTANCE or vid in ima.hold[j]:
                continue
            extra = {"dist": dist}
        elif to.exemption == "not-cleared":
            j, approach, ev = to.args
            if vid == ev:
                continue
            tl = world.lights.get(j)
            if tl is None or world.net.lanes[v.lane].to_junction != j:
                continue
            if v.lane in tl.approach_lanes[approach]:
                continue
            dist = world.stop[v.lane] - v.offset
            if dist <= 0 or v.held:
                continue
            extra = {"dist": dist}
        elif to.exemption:
            raise ValueError(f"unknown exemption rule {to.exemption!r}")
        out.append((mobile_id(vid), extra))
    return out


__all__ = [
    "TRM_ID", "IMA_ID", "EXEMPT_DISTANCE", "mobile_id", "RegisterEntry", "RegisterLog", "register_vehicle",
    "mobile_on_tick", "mobile_on_message", "TLAgent", "MissionPhase", "EmergencyMission", "plan_mission",
    "TrafficRoomManager", "IntersectionManager", "resolve_broadcast"
]
