import math

import pytest

from v2isim.agents import (EXEMPT_DISTANCE, IMA_ID, TRM_ID, IntersectionManager, MissionPhase, RegisterLog, TLAgent,
                           TrafficRoomManager, mobile_id, mobile_on_tick, plan_mission, register_vehicle)
from v2isim.bus import AgentId, Envelope, Kind, Role, ZoneBroadcast
from v2isim.engine import Engine
from v2isim.errors import DuplicateRegistration, MissionConflict, MissionUnknown
from v2isim.microsim import World
from v2isim.network import locate
from v2isim.scenario import Mode
from v2isim.signals import Color, TrafficLightState
from v2isim.vehicles import VehicleKind


class Ctx:
    """Just enough of the engine for an agent: a clock, the lights and a send log."""

    def __init__(self, cfg, time=0.0):
        self.cfg = cfg
        self.time = time
        self.tick = 0
        self.lights = {j: TrafficLightState(j, s.program, dict(s.approach_lanes), s.offset)
                       for j, s in cfg.signals.items()}
        self.sent = []

    def send(self, sender, to, kind, payload=None):
        self.sent.append((sender, to, kind, payload or {}))

    def kinds(self):
        return [k for _, _, k, _ in self.sent]


# -- register log ------------------------------------------------------------

def test_register_log():
    log = RegisterLog()
    register_vehicle(log, 1, "passenger", "1", 0.5)
    register_vehicle(log, 2, VehicleKind.EMERGENCY, "4", 1.0)
    assert log[1].kind is VehicleKind.PASSENGER
    assert log[2].kind is VehicleKind.EMERGENCY and log[2].route == "4"
    with pytest.raises(DuplicateRegistration):
        register_vehicle(log, 1, "passenger", "1", 2.0)


# -- mobile agent --------------------------------------------------------------

def _first_vehicle(cfg, kind):
    w = World(cfg)
    while True:
        w.step()
        for v in w.vehicles.values():
            if v.kind is kind:
                return v, w


def test_passenger_activation(saeb_cfg):
    v, w = _first_vehicle(saeb_cfg, VehicleKind.PASSENGER)
    out = mobile_on_tick(v, w, True, Mode.SCENARIO_A)
    assert [k for _, k, _ in out] == [Kind.REGISTER, Kind.POSITION_UPDATE]
    assert [k for _, k, _ in mobile_on_tick(v, w, False, Mode.SCENARIO_A)] == [Kind.POSITION_UPDATE]


def test_emergency_activation(saeb_cfg):
    v, w = _first_vehicle(saeb_cfg, VehicleKind.EMERGENCY)
    out = mobile_on_tick(v, w, True, Mode.SCENARIO_A)
    assert [k for _, k, _ in out][:3] == [Kind.REGISTER, Kind.EMERGENCY_DECLARE, Kind.POSITION_UPDATE]
    # position also goes to the room manager, which runs the mission
    assert (TRM_ID, Kind.POSITION_UPDATE) in [(to, k) for to, k, _ in out]
    # without the preemption service there is nothing to declare
    assert Kind.EMERGENCY_DECLARE not in [k for _, k, _ in mobile_on_tick(v, w, True, Mode.BASELINE)]


def test_inactive_app_is_silent(small_cfg):
    v, w = _first_vehicle(small_cfg, VehicleKind.PASSENGER)
    v.app_active = False
    assert mobile_on_tick(v, w, True, Mode.SCENARIO_B) == []


# -- traffic light agent -------------------------------------------------------

def test_tl_agent_override_and_resume(saeb_cfg):
    ctx = Ctx(saeb_cfg, time=12.0)
    jid, tl = sorted(ctx.lights.items())[0]
    agent = TLAgent(0, tl)
    appr = tl.program.approaches[0]
    colors = {a: (Color.GREEN if a == appr else Color.RED) for a in tl.program.approaches}
    agent.on_message(Envelope(TRM_ID, agent.id, Kind.PHASE_OVERRIDE, {"colors": colors}, 11.5, 12.0, 0), ctx)
    assert tl.mode == "override"
    assert ctx.sent[-1][2] is Kind.PHASE_STATUS and ctx.sent[-1][3]["mode"] == "override"
    agent.on_message(Envelope(TRM_ID, agent.id, Kind.RESUME_SCHEDULE, {}, 11.5, 12.0, 1), ctx)
    assert tl.mode == "static" and ctx.sent[-1][3]["mode"] == "static"
    before = len(ctx.sent)
    agent.on_message(Envelope(TRM_ID, agent.id, Kind.RESUME_SCHEDULE, {}, 11.5, 12.0, 2), ctx)
    assert agent.errors == 1 and len(ctx.sent) == before and tl.mode == "static"


# -- scenario A mission ----------------------------------------------------------

def _point_at(cfg, route, dist):
    """First (lane_index, offset, x, y) along ``route`` within ``dist`` of the zone centre."""
    net = cfg.network
    c = net.zone.center
    for i, lid in enumerate(net.routes[route].lanes):
        L = net.lanes[lid].length
        for k in range(int(L) + 1):
            p = locate(net, lid, float(k))
            if math.hypot(p.x - c.x, p.y - c.y) <= dist:
                return i, float(k), p.x, p.y
    raise AssertionError("route never gets that close")


def _report(cfg, route, where, speed=10.0):
    if isinstance(where, tuple):
        i, off = where
        p = locate(cfg.network, cfg.network.routes[route].lanes[i], off)
        x, y = p.x, p.y
    else:
        i, off, x, y = _point_at(cfg, route, where)
    return {"vehicle": 0, "x": x, "y": y, "speed": speed, "lane_index": i, "offset": off,
            "lane": cfg.network.routes[route].lanes[i]}


def _trm(cfg):
    ctx = Ctx(cfg)
    tl_ids = {j: AgentId(Role.TL, k) for k, j in enumerate(sorted(cfg.signals))}
    return TrafficRoomManager(cfg, tl_ids, Mode.SCENARIO_A), ctx


@pytest.mark.parametrize("route", ["1", "2", "3", "4"])
def test_mission_walkthrough(saeb_cfg, route):
    trm, ctx = _trm(saeb_cfg)
    m = trm.declare(0, route, 0.0)
    assert m.phase is MissionPhase.DECLARED and m.crossings

    trm.on_position(m, _report(saeb_cfg, route, 400.0), ctx)
    assert m.phase is MissionPhase.IN_SURVEILLANCE
    assert ctx.kinds() == [Kind.ZONE_ALERT]
    assert ctx.sent[0][1] == ZoneBroadcast("control", "except", (0,))
    trm.on_position(m, _report(saeb_cfg, route, 390.0), ctx)
    assert ctx.kinds() == [Kind.ZONE_ALERT]          # alerted once

    trm.on_position(m, _report(saeb_cfg, route, 250.0), ctx)
    assert m.phase is MissionPhase.IN_CONTROL
    first = m.crossings[0]
    overrides = [(to, p) for _, to, k, p in ctx.sent if k is Kind.PHASE_OVERRIDE]
    assert overrides and overrides[0][0] == trm.tl_agents[first.junction]
    assert overrides[0][1]["colors"][first.approach] is Color.GREEN
    assert all(c is Color.RED for a, c in overrides[0][1]["colors"].items() if a != first.approach)
    assert Kind.STAY_STEADY in ctx.kinds()

    # crossing the mission exit clears everything that was overridden
    m.held.add(42)
    ctx.sent.clear()
    trm.on_position(m, _report(saeb_cfg, route, (m.exit_lane_index, m.exit_offset)), ctx)
    assert m.phase is MissionPhase.CLEARED
    resumed = {to for _, to, k, _ in ctx.sent if k is Kind.RESUME_SCHEDULE}
    assert resumed == {trm.tl_agents[j] for j in m.overridden}
    assert (TRM_ID, mobile_id(42), Kind.RELEASE) in [(s, to, k) for s, to, k, _ in ctx.sent]
    assert [p for _, p in m.history] == list(MissionPhase)
    with pytest.raises(MissionUnknown):
        trm.on_position(m, _report(saeb_cfg, route, (m.exit_lane_index, m.exit_offset)), ctx)


def test_all_crossings_overridden_before_exit(saeb_cfg):
    # walking the whole route at speed flips every light on it
    trm, ctx = _trm(saeb_cfg)
    m = trm.declare(0, "2", 0.0)
    lanes = saeb_cfg.network.routes["2"].lanes
    for i, lid in enumerate(lanes[:m.exit_lane_index + 1]):
        L = saeb_cfg.network.lanes[lid].length
        for k in range(0, int(L), 5):
            if m.active:
                trm.on_position(m, _report(saeb_cfg, "2", (i, float(k)), speed=15.0), ctx)
    assert set(m.overridden) == {c.junction for c in m.crossings}


def test_second_mission_conflicts(saeb_cfg):
    trm, _ = _trm(saeb_cfg)
    trm.declare(0, "1", 0.0)
    with pytest.raises(MissionConflict):
        trm.declare(1, "2", 1.0)


def test_unknown_mission(saeb_cfg):
    trm, _ = _trm(saeb_cfg)
    with pytest.raises(MissionUnknown):
        trm.mission(7)


def test_phases_only_move_forward(saeb_cfg):
    m = plan_mission(saeb_cfg.network, saeb_cfg.signals, 0, "1")
    m.advance(MissionPhase.IN_CONTROL, 1.0)
    with pytest.raises(ValueError):
        m.advance(MissionPhase.IN_SURVEILLANCE, 2.0)


def test_mission_plan_follows_route(saeb_cfg):
    net = saeb_cfg.network
    for rid in "1234":
        m = plan_mission(net, saeb_cfg.signals, 0, rid)
        lanes = net.routes[rid].lanes
        assert [c.junction for c in m.crossings] == [net.lanes[lanes[c.lane_index]].to_junction for c in m.crossings]
        assert lanes[m.exit_lane_index] == net.mission_exit(rid).lane


# -- scenario B gating -----------------------------------------------------------

def test_gate_closes_at_threshold_and_releases_below(gridlock_cfg):
    ima = IntersectionManager(gridlock_cfg, Mode.SCENARIO_B)
    (j,) = ima.junctions
    assert ima.capacity[j] == 5 and ima.threshold[j] == 2
    ctx = Ctx(gridlock_cfg)
    ima.count[j] = 1
    ima.on_tick(ctx)
    assert ctx.sent == []
    ima.count[j] = 2
    ima.on_tick(ctx)
    assert ctx.sent == [(IMA_ID, ZoneBroadcast("control", "pool-gate", (j,)), Kind.STAY_STEADY, {"junction": j})]
    ima.on_hold_delivered(8, j)
    ima.on_hold_delivered(3, j)
    ctx.sent.clear()
    ima.count[j] = 1
    ima.on_tick(ctx)
    assert [(to, k) for _, to, k, _ in ctx.sent] == [(mobile_id(3), Kind.RELEASE), (mobile_id(8), Kind.RELEASE)]
    assert ima.hold_set == set()


def test_gate_is_idle_outside_scenario_b(gridlock_cfg):
    ima = IntersectionManager(gridlock_cfg, Mode.BASELINE)
    ima.count[ima.junctions[0]] = 5
    ctx = Ctx(gridlock_cfg)
    ima.on_tick(ctx)
    assert ctx.sent == []


def test_held_vehicles_obey_and_pool_stays_under_capacity(gridlock_cfg):
    eng = Engine(gridlock_cfg, seed=5, mode=Mode.SCENARIO_B)
    (j,) = eng.ima.junctions
    held_seen = False
    for _ in range(gridlock_cfg.sim.ticks):
        eng.step()
        assert eng.world.pool_count[j] <= 5
        for vid in eng.ima.hold[j]:
            v = eng.world.vehicles.get(vid)
            if v is not None and eng.world.pool_end.get(v.lane) == j:
                held_seen = True
                assert v.offset <= eng.world.stop[v.lane]
    assert held_seen and eng.deadlock_time is None


# -- whole runs ------------------------------------------------------------------

def test_baseline_sends_only_registration_and_positions(saeb_cfg, gridlock_cfg):
    for cfg in (saeb_cfg.with_(duration=240), gridlock_cfg.with_(duration=240)):
        res = Engine(cfg, mode=Mode.BASELINE).run()
        assert res.envelopes
        assert {e.kind for e in res.envelopes} == {Kind.REGISTER, Kind.POSITION_UPDATE}


def test_scenario_b_never_holds_the_first_rows(gridlock_cfg):
    res = Engine(gridlock_cfg, seed=1, mode=Mode.SCENARIO_B).run()
    holds = [e for e in res.envelopes if e.kind is Kind.STAY_STEADY]
    assert holds and all(e.payload["dist"] > EXEMPT_DISTANCE for e in holds)


def test_lights_are_restored_after_each_mission(saeb_cfg):
    eng = Engine(saeb_cfg, mode=Mode.SCENARIO_A)
    latency = saeb_cfg.sim.latency_ticks * saeb_cfg.sim.dt
    res = eng.run()
    assert len(res.missions) == 4
    for m in res.missions.values():
        assert m.phase is MissionPhase.CLEARED
        cleared = m.history[-1][0]
        statuses = [e for e in res.envelopes if e.kind is Kind.PHASE_STATUS
                    and e.payload["mode"] == "static" and e.send_time >= cleared]
        restored = {e.payload["junction"] for e in statuses if e.send_time <= cleared + latency + 1e-9}
        assert set(m.overridden) <= restored
    assert all(tl.mode == "static" for tl in eng.lights.values())


def test_preemption_keeps_mission_approach_green(saeb_cfg):
    """While in control, every junction the vehicle could reach before stopping shows green for it."""
    eng = Engine(saeb_cfg, mode=Mode.SCENARIO_A)
    net = saeb_cfg.network
    checked = 0
    for _ in range(saeb_cfg.sim.ticks):
        eng.step()
        for m in eng.trm.missions.values():
            v = eng.world.vehicles.get(m.vehicle)
            if v is None or m.phase is not MissionPhase.IN_CONTROL:
                continue
            p = v.params
            reach = v.speed ** 2 / (2 * p.decel) + v.speed * p.tau
            for c in m.crossings:
                if c.lane_index != v.lane_index:
                    continue
                lid = net.routes[m.route].lanes[c.lane_index]
                to_stop = net.stop_offset(lid) - v.offset
                if 0 < to_stop <= reach:
                    checked += 1
                    assert eng.lights[c.junction].colors(eng.time)[c.approach] is Color.GREEN
    assert checked > 0
