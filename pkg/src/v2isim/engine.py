"""Tick loop that ties the world, the bus and the agents together.

Each tick: deliver due envelopes, run agent callbacks (room manager,
intersection manager, light agents, then mobile agents by vehicle id), advance
the physics, and feed detector events to the intersection manager.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .agents import (
    IMA_ID,
    TRM_ID,
    IntersectionManager,
    MissionPhase,
    TLAgent,
    TrafficRoomManager,
    mobile_id,
    mobile_on_message,
    mobile_on_tick,
    resolve_broadcast,
)
from .bus import AgentId, Bus, Envelope, Kind, Role
from .errors import InvariantViolation
from .microsim import STOPPED_SPEED, World, pool_occupancy
from .network import Zone, zone_of
from .scenario import Mode, ScenarioConfig, config_digest
from .vehicles import VehicleKind


@dataclass
class EmergencyRecord:
    vehicle: int
    route: str
    stops: int = 0                          # ticks spent standing
    min_speed_in_control: float = math.inf  # after the mission reached InControl
    control_time: float | None = None
    cleared_time: float | None = None


@dataclass
class RunResult:
    mode: Mode
    seed: int
    dt: float
    digest: str
    vehicles: list                   # every spawned vehicle, by id
    trace: list
    envelopes: list
    deadlock_time: float | None
    pool_max: dict
    emergencies: dict
    missions: dict = field(default_factory=dict)
    frames: list | None = None

    @property
    def deadlocked(self) -> bool:
        return self.deadlock_time is not None


class Engine:
    def __init__(self, cfg: ScenarioConfig, seed: int | None = None, mode: Mode | None = None,
                 record_envelopes: bool = True, check: bool = True, record_frames: bool = False):
        self.mode = Mode(mode) if mode is not None else cfg.mode
        self.seed = cfg.sim.seed if seed is None else seed
        self.cfg = cfg
        self.world = World(cfg, self.seed)
        self.lights = self.world.lights
        self.bus = Bus(cfg.sim.dt, cfg.sim.latency_ticks, lambda env: resolve_broadcast(env, self),
                       log=record_envelopes)
        self.tl_agents = {}
        for k, (jid, tl) in enumerate(self.lights.items()):
            self.tl_agents[jid] = TLAgent(k, tl)
        self.trm = TrafficRoomManager(cfg, {j: a.id for j, a in self.tl_agents.items()}, self.mode)
        self.ima = IntersectionManager(cfg, self.mode)
        for agent_id in [TRM_ID, IMA_ID] + [a.id for a in self.tl_agents.values()]:
            self.bus.register(agent_id)
        self._tl_by_id = {a.id: a for a in self.tl_agents.values()}
        self.check = check
        self.started: set[int] = set()
        self.emergencies: dict[int, EmergencyRecord] = {}
        self.pool_max = {j: 0 for j in self.world.capacity}
        self.frames = [] if record_frames else None
        self._stuck_since = None
        self.deadlock_time = None

    @property
    def tick(self) -> int:
        return self.world.tick

    @property
    def time(self) -> float:
        return self.world.time

    def send(self, sender: AgentId, to, kind: Kind, payload: dict | None = None) -> Envelope:
        return self.bus.send(sender, to, kind, payload, self.world.tick)

    # -- one tick ----------------------------------------------------------
    def step(self) -> None:
        world = self.world
        for env in self.bus.deliver_due(world.tick):
            self._dispatch(env)
        self.trm.on_tick(self)
        self.ima.on_tick(self)
        zone = world.net.zone
        inside_speeds = []
        for vid in sorted(world.vehicles):
            v = world.vehicles[vid]
            first = vid not in self.started
            if first:
                self.started.add(vid)
                self.bus.register(mobile_id(vid))
                if v.kind is VehicleKind.EMERGENCY:
                    self.emergencies[vid] = EmergencyRecord(vid, v.route.id)
            for to, kind, payload in mobile_on_tick(v, world, first, self.mode):
                self.send(mobile_id(vid), to, kind, payload)
            if zone_of(world.position(v), zone) is not Zone.OUTSIDE:
                inside_speeds.append(v.speed)
        self._watch_deadlock(world.time, inside_speeds)

        n_arrived = len(world.arrived)
        events = world.step()
        self.ima.on_detector(events)
        for v in world.arrived[n_arrived:]:
            self.bus.unregister(mobile_id(v.id))
            self.ima.forget(v.id)
        self._watch_emergencies(world.arrived[n_arrived:])
        for j in self.pool_max:
            self.pool_max[j] = max(self.pool_max[j], world.pool_count[j])
        if self.check:
            world.check_invariants()
            for j in self.ima.junctions:
                geo = pool_occupancy(world, j)
                if not geo == world.pool_count[j] == self.ima.count[j]:
                    raise InvariantViolation(
                        f"pool {j}: geometric count {geo}, detector count {world.pool_count[j]}, "
                        f"manager count {self.ima.count[j]}"
                    )
                if geo > world.capacity[j]:
                    raise InvariantViolation(f"pool {j} holds {geo} > capacity {world.capacity[j]}")

    def _dispatch(self, env: Envelope) -> None:
        to = env.to
        if to.role is Role.MOBILE:
            v = self.world.vehicles.get(to.index)
            if v is None:
                return   # the vehicle left the network while the message travelled
            mobile_on_message(v, env, self.world)
            if env.kind is Kind.STAY_STEADY:
                if env.sender == IMA_ID:
                    self.ima.on_hold_delivered(v.id, env.payload["junction"])
                elif env.sender == TRM_ID:
                    self.trm.on_hold_delivered(v.id)
        elif to == TRM_ID:
            self.trm.on_message(env, self)
        elif to == IMA_ID:
            self.ima.on_message(env, self)
        elif to.role is Role.TL:
            self._tl_by_id[to].on_message(env, self)

    def _watch_deadlock(self, t: float, speeds: list) -> None:
        sim = self.cfg.sim
        if self.frames is not None:
            self.frames.append((t, tuple(speeds)))
        if len(speeds) >= sim.deadlock_min_vehicles and max(speeds) < STOPPED_SPEED:
            if self._stuck_since is None:
                self._stuck_since = t
            if self.deadlock_time is None and t - self._stuck_since >= sim.deadlock_window - 1e-9:
                self.deadlock_time = t
        else:
            self._stuck_since = None

    def _watch_emergencies(self, just_arrived) -> None:
        gone = {v.id for v in just_arrived}
        for vid, rec in self.emergencies.items():
            v = self.world.vehicles.get(vid)
            if v is None and vid not in gone:
                continue
            speed = v.speed if v is not None else next(u.speed for u in just_arrived if u.id == vid)
            if speed < STOPPED_SPEED:
                rec.stops += 1
            m = self.trm.missions.get(vid)
            if m is None:
                continue
            if m.phase >= MissionPhase.IN_CONTROL:
                if rec.control_time is None:
                    rec.control_time = self.world.time
                rec.min_speed_in_control = min(rec.min_speed_in_control, speed)
            if m.phase is MissionPhase.CLEARED and rec.cleared_time is None:
                rec.cleared_time = self.world.time

    # -- whole run ----------------------------------------------------------
    def run(self) -> RunResult:
        for _ in range(self.cfg.sim.ticks - self.world.tick):
            self.step()
        return self.result()

    def result(self) -> RunResult:
        """Snapshot of the run so far; ``run`` calls it after the last tick."""
        world = self.world
        vehicles = sorted(list(world.vehicles.values()) + world.arrived, key=lambda v: v.id)
        return RunResult(
            mode=self.mode, seed=self.seed, dt=self.cfg.sim.dt, digest=config_digest(self.cfg),
            vehicles=vehicles, trace=world.trace, envelopes=self.bus.log or [],
            deadlock_time=self.deadlock_time, pool_max=dict(self.pool_max),
            emergencies=self.emergencies, missions=self.trm.missions, frames=self.frames,
        )


def simulate(cfg: ScenarioConfig, seed: int | None = None, mode: Mode | str | None = None, **kw) -> RunResult:
    return Engine(cfg, seed=seed, mode=None if mode is None else Mode(mode), **kw).run()
