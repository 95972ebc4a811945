"""Fixed-step microscopic simulation.

Car following is the Krauss model without driver imperfection, so a run is a
pure function of its configuration and seed. Every lane keeps its vehicles
ordered front to back; the step plans new speeds for all vehicles first and
then moves them.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvariantViolation, NoParallelLane
from .network import DetectorKind, Network, Position, Zone, zone_of
from .scenario import ScenarioConfig
from .signals import Color, TrafficLightState
from .vehicles import VehicleKind, VehicleParams

STOP_MARGIN = 1.0      # vehicles halt this far before a closed stop line
STOPPED_SPEED = 0.1    # below this a vehicle counts as standing
GAP_EPS = 1e-9


def krauss_safe_speed(v: float, v_leader: float, gap: float, p: VehicleParams) -> float:
    return v_leader + (gap - v_leader * p.tau) / ((v + v_leader) / (2.0 * p.decel) + p.tau)


def next_speed(v: float, p: VehicleParams, dt: float, leader=None, stop_distance=None,
               v_limit: float = math.inf) -> float:
    """One Krauss update for a single vehicle.

    ``leader`` is ``(v_leader, gap)``; ``stop_distance`` is the distance to a
    closed stop line, which acts like a standing leader ``STOP_MARGIN`` short
    of it.
    """
    out = min(v + p.accel * dt, p.v_max, v_limit)
    if leader is not None:
        out = min(out, krauss_safe_speed(v, leader[0], leader[1], p))
    if stop_distance is not None:
        out = min(out, krauss_safe_speed(v, 0.0, stop_distance - STOP_MARGIN, p))
    return max(0.0, out)


@dataclass(slots=True, eq=False)
class Vehicle:
    id: int
    kind: VehicleKind
    params: VehicleParams
    route: object            # network.Route
    lane_index: int
    lane: str
    offset: float
    speed: float
    depart: float
    v_des: float
    spawn_speed: float
    arrive: float | None = None
    app_active: bool = True
    held: bool = False
    hold_release_pending: bool = False
    lane_request: str | None = None


class DetectorEvent(NamedTuple):
    detector: str
    vehicle: int
    time: float


class TraceRow(NamedTuple):
    time: float
    vehicle: int
    lane: str
    offset: float
    speed: float
    held: bool


class _Plan(NamedTuple):
    lane: str
    offset: float
    speed: float
    lane_index: int
    moved_lane: bool
    arrived: bool


def demand_schedule(cfg: ScenarioConfig, rng: np.random.Generator) -> list[tuple[float, int, str, VehicleKind]]:
    """Spawn times per demand entry; jitter scales each headway by ``1 +- jitter``."""
    out = []
    for k, d in enumerate(cfg.demand):
        if cfg.sim.jitter > 0:
            gaps = d.headway * (1.0 + cfg.sim.jitter * rng.uniform(-1.0, 1.0, d.count - 1))
        else:
            gaps = np.full(d.count - 1, d.headway)
        times = d.start + np.concatenate(([0.0], np.cumsum(gaps)))
        out += [(float(t), k, d.route, d.kind) for t in times]
    out.sort(key=lambda e: (e[0], e[1]))
    return out


class World:
    """Mutable simulation state of one run."""

    def __init__(self, cfg: ScenarioConfig, seed: int | None = None):
        self.cfg = cfg
        self.net: Network = cfg.network
        self.dt = cfg.sim.dt
        self.tick = 0
        net = self.net
        self.lane_order = sorted(net.lanes)
        self.lanes: dict[str, list[Vehicle]] = {lid: [] for lid in self.lane_order}
        self.vehicles: dict[int, Vehicle] = {}
        self.arrived: list[Vehicle] = []
        self.spawned = 0
        self._held_short: list = []
        self.trace: list[TraceRow] = []
        self.events: list[DetectorEvent] = []

        self.length = {lid: l.length for lid, l in net.lanes.items()}
        self.limit = {lid: (l.speed_limit or math.inf) for lid, l in net.lanes.items()}
        self._geom = {}
        for lid, l in net.lanes.items():
            s = net.lane_start(lid)
            self._geom[lid] = (s.x, s.y, math.cos(l.angle), math.sin(l.angle))

        self.lights = {jid: TrafficLightState(jid, s.program, dict(s.approach_lanes), s.offset)
                       for jid, s in sorted(cfg.signals.items())}
        self.lane_signal = {}
        for jid, tl in self.lights.items():
            for appr, lanes in tl.approach_lanes.items():
                for lid in lanes:
                    self.lane_signal[lid] = (tl, appr)

        # stop lines exist where a lane meets a signal or a pool
        self.stop = {}
        self.pool_end = {}     # lane -> junction whose pool starts at this lane's stop line
        self.pool_start = {}   # lane -> (junction, depth) whose pool covers this lane's start
        for lid, l in net.lanes.items():
            to_pool = net.junctions[l.to_junction].pool
            if to_pool is not None:
                self.pool_end[lid] = l.to_junction
            if to_pool is not None or lid in self.lane_signal:
                self.stop[lid] = net.stop_offset(lid)
            from_pool = net.junctions[l.from_junction].pool
            if from_pool is not None:
                self.pool_start[lid] = (l.from_junction, from_pool.depth)
        self.capacity = {j: net.junctions[j].pool.capacity for j in net.pool_junctions()}
        self.pool_count = {j: 0 for j in self.capacity}
        self.entries = {j: 0 for j in self.capacity}
        self.exits = {j: 0 for j in self.capacity}
        self.lock_until = {j: -math.inf for j in self.capacity}
        self.lock_armed = {j: True for j in self.capacity}

        self.detectors = {lid: [] for lid in self.lane_order}
        for d in net.detectors:
            self.detectors[d.lane].append(d)
        for lst in self.detectors.values():
            lst.sort(key=lambda d: (d.offset, d.id))

        seed = cfg.sim.seed if seed is None else seed
        self.rng = np.random.default_rng(seed)
        self.schedule = deque(demand_schedule(cfg, self.rng))
        self.backlog: dict[str, deque] = {}

    # -- queries ----------------------------------------------------------
    @property
    def time(self) -> float:
        return self.tick * self.dt

    def position(self, v: Vehicle) -> Position:
        x, y, c, s = self._geom[v.lane]
        return Position(x + v.offset * c, y + v.offset * s)

    def zone(self, v: Vehicle) -> Zone:
        return zone_of(self.position(v), self.net.zone)

    def distance_to_stop(self, v: Vehicle) -> float | None:
        stop = self.stop.get(v.lane)
        return None if stop is None else stop - v.offset

    def pool_of(self, v: Vehicle) -> str | None:
        """Junction whose interior holds the vehicle's front bumper, if any."""
        j = self.pool_end.get(v.lane)
        if j is not None and v.offset >= self.stop[v.lane]:
            return j
        ps = self.pool_start.get(v.lane)
        if ps is not None and v.offset < ps[1]:
            return ps[0]
        return None

    def next_lane(self, v: Vehicle) -> str | None:
        lanes = v.route.lanes
        return lanes[v.lane_index + 1] if v.lane_index + 1 < len(lanes) else None

    def colors(self) -> dict[str, Color]:
        t = self.time
        out = {}
        for tl in self.lights.values():
            shown = tl.colors(t)
            for appr, lanes in tl.approach_lanes.items():
                for lid in lanes:
                    out[lid] = shown[appr]
        return out

    # -- step -------------------------------------------------------------
    def step(self) -> list[DetectorEvent]:
        dt = self.dt
        t = self.time
        for vid in sorted(self.vehicles):
            v = self.vehicles[vid]
            if v.hold_release_pending:
                v.held = False
                v.hold_release_pending = False
            if v.lane_request is not None:
                if apply_lane_change(v, self, v.lane_request):
                    v.lane_request = None
        # held vehicles short of their stop line must still be short of it after the step
        self._held_short = [(v, v.lane, self.stop[v.lane]) for v in self.vehicles.values()
                            if v.held and v.lane in self.stop and v.offset < self.stop[v.lane]]
        self._update_locks(t)
        colors = self.colors()
        live = dict(self.pool_count)
        locked = {j for j, until in self.lock_until.items() if t < until}

        tails = {}
        for lid, lst in self.lanes.items():
            if lst:
                last = lst[-1]
                tails[lid] = (last.offset, last.params.length, last.speed)

        plans: dict[int, _Plan] = {}
        events: list[DetectorEvent] = []
        t_end = t + dt
        length, stop = self.length, self.stop
        for lid in self.lane_order:
            lst = self.lanes[lid]
            if not lst:
                continue
            L = length[lid]
            prev = None
            for v in lst:
                p = v.params
                spd, off = v.speed, v.offset
                cap = min(spd + p.accel * dt, p.v_max, self.limit[lid])
                vnew = cap
                horizon = cap * (cap / (2.0 * p.decel) + p.tau + dt) + 1.0
                look_next = True
                if prev is not None:
                    pp = plans[prev.id]
                    look_next = pp.moved_lane or pp.arrived
                    plen = prev.params.length
                    vnew = min(vnew, krauss_safe_speed(spd, prev.speed, max(prev.offset - plen - off, 0.0), p))
                    if not pp.arrived:
                        lead_path = pp.offset if not pp.moved_lane else L + pp.offset
                        vnew = min(vnew, (lead_path - plen - off) / dt)
                # closed stop line on the current lane
                s = stop.get(lid)
                if s is not None and off < s:
                    g = s - STOP_MARGIN - off
                    if g <= horizon and self._closed(lid, v, g, colors, live, True):
                        vnew = min(vnew, _stop_speed(spd, g, p, dt))
                # look along the route for leaders and closed stop lines
                dist = L - off
                k = v.lane_index + 1
                lanes = v.route.lanes
                while k < len(lanes) and dist <= horizon:
                    nl = lanes[k]
                    if look_next:
                        tail = tails.get(nl)
                        if tail is not None:
                            gap = dist + tail[0] - tail[1]
                            vnew = min(vnew, krauss_safe_speed(spd, tail[2], max(gap, 0.0), p),
                                       max(gap, 0.0) / dt)
                            look_next = False
                    s = stop.get(nl)
                    if s is not None:
                        g = dist + s - STOP_MARGIN
                        if g <= horizon and self._closed(nl, v, g, colors, live, False):
                            vnew = min(vnew, _stop_speed(spd, g, p, dt))
                            break
                    dist += length[nl]
                    k += 1
                if locked and self._in_locked(v, locked):
                    vnew = 0.0
                vnew = max(0.0, vnew)

                new_off = off + vnew * dt
                last = v.lane_index == len(lanes) - 1
                moved = arrived = False
                n_lane, n_index = lid, v.lane_index
                if last and new_off >= L:
                    arrived = True
                    new_off = L
                elif new_off > L:
                    moved = True
                    n_index += 1
                    n_lane = lanes[n_index]
                    new_off -= L
                self._cross(v, lid, off, n_lane if moved else None, new_off, t_end, live, events)
                plan = _Plan(n_lane, new_off, vnew, n_index, moved, arrived)
                plans[v.id] = plan
                if moved:
                    tail = tails.get(n_lane)
                    if tail is None or new_off < tail[0]:
                        tails[n_lane] = (new_off, p.length, vnew)
                prev = v

        # apply the plans
        trace = self.trace
        dirty = set()
        for lid in self.lane_order:
            keep = []
            for v in self.lanes[lid]:
                pl = plans[v.id]
                v.speed = pl.speed
                v.offset = pl.offset
                if pl.arrived:
                    v.arrive = t_end
                    del self.vehicles[v.id]
                    self.arrived.append(v)
                elif pl.moved_lane:
                    v.lane = pl.lane
                    v.lane_index = pl.lane_index
                    v.held = False
                    v.lane_request = None
                    dirty.add(pl.lane)
                else:
                    keep.append(v)
                trace.append(TraceRow(t_end, v.id, v.lane, v.offset, v.speed, v.held))
            self.lanes[lid] = keep
        for v in self.vehicles.values():
            if v.lane in dirty and plans[v.id].moved_lane:
                self.lanes[v.lane].append(v)
        for lid in dirty:
            self.lanes[lid].sort(key=lambda u: -u.offset)

        for ev in events:
            det = self._det_by_id(ev.detector)
            if det.junction is not None and det.junction in self.pool_count:
                if det.kind is DetectorKind.ENTRY:
                    self.entries[det.junction] += 1
                else:
                    self.exits[det.junction] += 1
        for j in self.pool_count:
            self.pool_count[j] = self.entries[j] - self.exits[j]
        self.tick += 1
        self._spawn()
        self.events = events
        return events

    # -- helpers ----------------------------------------------------------
    def _closed(self, lid, v, g, colors, live, current) -> bool:
        c = colors.get(lid)
        if c is Color.RED:
            return True
        if c is Color.YELLOW and g >= v.speed * v.speed / (2.0 * v.params.decel):
            return True
        if current and v.held:
            return True
        j = self.pool_end.get(lid)
        return j is not None and live[j] >= self.capacity[j]

    def _in_locked(self, v, locked) -> bool:
        return self.pool_of(v) in locked

    def _det_by_id(self, did):
        cache = getattr(self, "_det_cache", None)
        if cache is None:
            cache = self._det_cache = {d.id: d for d in self.net.detectors}
        return cache[did]

    def _cross(self, v, lid, old, new_lane, new_off, t_end, live, events):
        hi = self.length[lid] if new_lane is not None else new_off
        for d in self.detectors[lid]:
            if old < d.offset <= hi:
                events.append(DetectorEvent(d.id, v.id, t_end))
                self._count(d, live)
        if new_lane is not None:
            for d in self.detectors[new_lane]:
                if d.offset <= new_off:
                    events.append(DetectorEvent(d.id, v.id, t_end))
                    self._count(d, live)

    @staticmethod
    def _count(d, live):
        if d.junction is not None and d.junction in live:
            live[d.junction] += 1 if d.kind is DetectorKind.ENTRY else -1

    def _update_locks(self, t):
        """Saturated pools whose every vehicle stands still lock up for a while.

        While locked nothing inside the pool moves. After ``gridlock_timeout``
        the lock lifts and stays disarmed until the pool drains below capacity.
        """
        for j, capj in self.capacity.items():
            if t < self.lock_until[j]:
                continue
            count = self.pool_count[j]
            if not self.lock_armed[j]:
                if count < capj:
                    self.lock_armed[j] = True
                continue
            if count >= capj:
                inside = [v for v in self.vehicles.values() if self.pool_of(v) == j]
                if inside and all(v.speed < STOPPED_SPEED for v in inside):
                    self.lock_until[j] = t + self.cfg.sim.gridlock_timeout
                    self.lock_armed[j] = False

    def _spawn(self):
        t = self.time
        types = self.cfg.vehicle_types
        while self.schedule and self.schedule[0][0] <= t + 1e-9:
            _, _, rid, kind = self.schedule.popleft()
            first = self.net.routes[rid].lanes[0]
            self.backlog.setdefault(first, deque()).append((rid, kind))
        for lid in sorted(self.backlog):
            queue = self.backlog[lid]
            if not queue:
                continue
            lst = self.lanes[lid]
            rid, kind = queue[0]
            p = types[kind]
            route = self.net.routes[rid]
            v_des = min([p.v_max] + [self.limit[l] for l in route.lanes])
            speed = min(p.v_max, self.limit[lid])
            if lst:
                tail = lst[-1]
                gap = tail.offset - tail.params.length
                if gap < 0:
                    continue
                speed = max(0.0, min(speed, krauss_safe_speed(speed, tail.speed, gap, p), gap / self.dt))
            queue.popleft()
            v = Vehicle(self.spawned, kind, p, route, 0, lid, 0.0, speed, t, v_des, speed)
            self.spawned += 1
            self.vehicles[v.id] = v
            lst.append(v)

    def pending_spawns(self) -> int:
        return len(self.schedule) + sum(len(q) for q in self.backlog.values())

    def check_invariants(self) -> None:
        for lid, lst in self.lanes.items():
            L = self.length[lid]
            for i, v in enumerate(lst):
                if not (0.0 <= v.offset <= L + GAP_EPS):
                    raise InvariantViolation(f"vehicle {v.id} offset {v.offset} outside lane {lid}")
                if not (0.0 <= v.speed <= v.params.v_max + GAP_EPS):
                    raise InvariantViolation(f"vehicle {v.id} speed {v.speed} out of bounds")
                if i and lst[i - 1].offset - lst[i - 1].params.length - v.offset < -1e-6:
                    raise InvariantViolation(f"vehicles {lst[i - 1].id} and {v.id} overlap on lane {lid}")
        if self.spawned != len(self.vehicles) + len(self.arrived):
            raise InvariantViolation("vehicle conservation broken")
        for v, lid, s in self._held_short:
            if v.lane != lid or v.offset > s:
                raise InvariantViolation(f"held vehicle {v.id} passed its stop line on lane {lid}")


def _stop_speed(v, g, p, dt):
    if g <= 0.0:
        return 0.0
    return min(krauss_safe_speed(v, 0.0, g, p), g / dt)


def pool_occupancy(world: World, junction: str) -> int:
    return sum(1 for v in world.vehicles.values() if world.pool_of(v) == junction)


def jam_ahead(v: Vehicle, world: World, lookahead: float = 100.0) -> bool:
    ahead = [u.speed for u in world.lanes[v.lane] if v.offset < u.offset <= v.offset + lookahead]
    return len(ahead) >= 3 and sum(ahead) / len(ahead) < 2.0


def apply_lane_change(v: Vehicle, world: World, target: str) -> bool:
    """Move ``v`` sideways onto a parallel lane if there is at least 1 m of
    bumper gap on both sides; returns whether the move happened."""
    lane = world.net.lanes[v.lane]
    if target not in lane.parallel:
        raise NoParallelLane(f"lane {target} is not parallel to {v.lane}")
    for u in world.lanes[target]:
        if u.offset >= v.offset:
            if u.offset - u.params.length - v.offset < 1.0:
                return False
        elif v.offset - v.params.length - u.offset < 1.0:
            return False
    world.lanes[v.lane].remove(v)
    v.lane = target
    dest = world.lanes[target]
    dest.append(v)
    dest.sort(key=lambda u: -u.offset)
    return True


def detect_deadlock(frames, window_s: float = 60.0, min_vehicles: int = 3) -> bool:
    """Whether a window of frames shows a standing crowd throughout.

    ``frames`` is a time-ordered sequence of ``(time, speeds)`` where ``speeds``
    are the speeds of the vehicles inside the surveillance zone at that time.
    """
    frames = list(frames)
    if not frames or frames[-1][0] - frames[0][0] < window_s - 1e-9:
        return False
    return all(len(sp) >= min_vehicles and max(sp) < STOPPED_SPEED for _, sp in frames)


def first_deadlock(frames, window_s: float = 60.0, min_vehicles: int = 3) -> float | None:
    """Earliest time at which the trailing ``window_s`` seconds form a deadlock."""
    since = None
    for t, sp in frames:
        if len(sp) >= min_vehicles and max(sp) < STOPPED_SPEED:
            if since is None:
                since = t
            if t - since >= window_s - 1e-9:
                return t
        else:
            since = None
    return None
