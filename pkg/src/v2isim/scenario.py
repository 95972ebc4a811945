"""Scenario files: a YAML document with ``network``, ``demand``, ``signals`` and ``sim``.

See ``docs/scenario-format.md`` for the schema. ``parse_scenario`` validates
everything up front so the simulator never meets a dangling reference.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum

import yaml

from .errors import DanglingReference, InvalidValue, ScenarioSyntaxError
from .network import (
    Detector,
    DetectorKind,
    Junction,
    Lane,
    Network,
    Pool,
    Position,
    Route,
    ZoneSpec,
    build_network,
)
from .signals import Color, Phase, SignalProgram
from .vehicles import DEFAULT_TYPES, VehicleKind, VehicleParams, check_types


class Mode(str, Enum):
    BASELINE = "baseline"
    SCENARIO_A = "scenario-a"
    SCENARIO_B = "scenario-b"


@dataclass(frozen=True)
class Demand:
    route: str
    kind: VehicleKind
    start: float
    headway: float
    count: int


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.5
    duration: float = 600.0
    seed: int = 0
    latency_ticks: int = 1
    jitter: float = 0.0           # relative headway jitter, e.g. 0.1 for +-10 %
    gridlock_timeout: float = 300.0
    subject: str = "all"          # which vehicles the metrics average over
    deadlock_window: float = 60.0
    deadlock_min_vehicles: int = 3

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidValue(f"dt must be > 0, got {self.dt}")
        if not self.duration > 0:
            raise InvalidValue(f"duration must be > 0, got {self.duration}")
        if self.latency_ticks < 0:
            raise InvalidValue("latency_ticks must be >= 0")
        if not 0 <= self.jitter < 1:
            raise InvalidValue("jitter must be in [0, 1)")
        if self.subject not in ("all", "emergency"):
            raise InvalidValue(f"subject must be 'all' or 'emergency', got {self.subject!r}")
        if not self.gridlock_timeout > 0 or not self.deadlock_window > 0:
            raise InvalidValue("gridlock_timeout and deadlock_window must be > 0")

    @property
    def ticks(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass(frozen=True)
class SignalSpec:
    junction: str
    program: SignalProgram
    approach_lanes: dict[str, tuple[str, ...]]
    offset: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    network: Network
    demand: tuple[Demand, ...]
    signals: dict[str, SignalSpec]
    sim: SimParams = field(default_factory=SimParams)
    vehicle_types: dict[VehicleKind, VehicleParams] = field(default_factory=lambda: dict(DEFAULT_TYPES))
    mode: Mode = Mode.BASELINE

    def with_(self, **changes) -> "ScenarioConfig":
        """Copy with top-level fields or sim parameters replaced."""
        sim_keys = {f.name for f in dataclasses.fields(SimParams)}
        sim_changes = {k: v for k, v in changes.items() if k in sim_keys}
        rest = {k: v for k, v in changes.items() if k not in sim_keys}
        if "mode" in rest:
            rest["mode"] = Mode(rest["mode"])
        cfg = dataclasses.replace(self, **rest)
        if sim_changes:
            cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, **sim_changes))
        validate(cfg)
        return cfg


# -- parsing -------------------------------------------------------------

def _req(d, key, where):
    if not isinstance(d, dict):
        raise ScenarioSyntaxError(f"{where}: expected a mapping, got {type(d).__name__}")
    if key not in d:
        raise ScenarioSyntaxError(f"{where}: missing key {key!r}")
    return d[key]


def _num(v, where) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioSyntaxError(f"{where}: expected a number, got {v!r}")
    if not math.isfinite(v):
        raise InvalidValue(f"{where}: value must be finite")
    return float(v)


def _list(v, where) -> list:
    if not isinstance(v, list):
        raise ScenarioSyntaxError(f"{where}: expected a list")
    return v


def _parse_network(d) -> Network:
    zd = d.get("zone", {}) or {}
    center = zd.get("center", [0.0, 0.0])
    zone = ZoneSpec(
        Position(_num(center[0], "zone.center"), _num(center[1], "zone.center")),
        _num(zd.get("control_radius", 300.0), "zone.control_radius"),
        _num(zd.get("surveillance_radius", 500.0), "zone.surveillance_radius"),
    )
    junctions = []
    for jd in _list(_req(d, "junctions", "network"), "network.junctions"):
        jid = str(_req(jd, "id", "junction"))
        pool = None
        if jd.get("pool") is not None:
            pd = jd["pool"]
            pool = Pool(_num(_req(pd, "area", f"junction {jid} pool"), "pool.area"),
                        _num(_req(pd, "depth", f"junction {jid} pool"), "pool.depth"),
                        int(pd.get("capacity", -1)))
        junctions.append(Junction(jid, Position(_num(_req(jd, "x", jid), "x"), _num(_req(jd, "y", jid), "y")), pool))
    centers = {j.id: j.center for j in junctions}

    lanes = []
    for ld in _list(_req(d, "lanes", "network"), "network.lanes"):
        lid = str(_req(ld, "id", "lane"))
        a, b = str(_req(ld, "from", f"lane {lid}")), str(_req(ld, "to", f"lane {lid}"))
        length = _num(_req(ld, "length", f"lane {lid}"), f"lane {lid} length")
        if "angle" in ld:
            angle = _num(ld["angle"], f"lane {lid} angle")
        elif a in centers and b in centers:
            angle = math.atan2(centers[b].y - centers[a].y, centers[b].x - centers[a].x)
        else:
            angle = 0.0   # the dangling junction is reported by build_network
        limit = ld.get("speed_limit")
        lanes.append(Lane(lid, a, b, length, angle, int(ld.get("max_occupancy", -1)),
                          None if limit is None else _num(limit, f"lane {lid} speed_limit"),
                          tuple(str(p) for p in ld.get("parallel", []) or [])))

    routes = []
    for rd in _list(_req(d, "routes", "network"), "network.routes"):
        rid = str(_req(rd, "id", "route"))
        routes.append(Route(rid, tuple(str(x) for x in _list(_req(rd, "lanes", f"route {rid}"), rid)),
                            str(rd.get("source", "")), str(rd.get("dest", ""))))

    detectors = []
    for dd in d.get("detectors", []) or []:
        did = str(_req(dd, "id", "detector"))
        try:
            kind = DetectorKind(dd.get("kind", "exit"))
        except ValueError:
            raise InvalidValue(f"detector {did}: unknown kind {dd.get('kind')!r}") from None
        junc = dd.get("junction")
        detectors.append(Detector(did, str(_req(dd, "lane", did)), _num(_req(dd, "offset", did), did),
                                  kind, None if junc is None else str(junc), str(dd.get("tag", ""))))
    return build_network(junctions, lanes, routes, detectors, zone)


def _parse_signals(d) -> dict[str, SignalSpec]:
    out = {}
    for jid, sd in (d or {}).items():
        jid = str(jid)
        appr = _req(sd, "approaches", f"signals.{jid}")
        if not isinstance(appr, dict) or not appr:
            raise ScenarioSyntaxError(f"signals.{jid}.approaches must be a non-empty mapping")
        names = tuple(str(a) for a in appr)
        lanes = {str(a): tuple(str(x) for x in (v or [])) for a, v in appr.items()}
        phases = []
        for pd in _list(_req(sd, "phases", f"signals.{jid}"), f"signals.{jid}.phases"):
            state = str(_req(pd, "state", f"signals.{jid} phase"))
            if len(state) != len(names):
                raise InvalidValue(f"signals.{jid}: phase state {state!r} must have one letter per approach")
            try:
                colors = {a: Color(c) for a, c in zip(names, state.upper())}
            except ValueError:
                raise InvalidValue(f"signals.{jid}: bad color letter in {state!r}") from None
            phases.append(Phase(colors, _num(_req(pd, "duration", jid), "duration")))
        conflicts = frozenset(frozenset(str(x) for x in pair) for pair in sd.get("conflicts", []) or [])
        program = SignalProgram(names, tuple(phases), conflicts)
        out[jid] = SignalSpec(jid, program, lanes, _num(sd.get("offset", 0.0), "offset"))
    return out


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioSyntaxError(f"malformed scenario file: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioSyntaxError("scenario file must be a mapping")
    for key in ("network", "demand", "sim"):
        _req(doc, key, "scenario")
    network = _parse_network(doc["network"])

    demand = []
    for dd in _list(doc["demand"], "demand"):
        try:
            kind = VehicleKind(dd.get("kind", "passenger"))
        except ValueError:
            raise InvalidValue(f"unknown vehicle kind {dd.get('kind')!r}") from None
        demand.append(Demand(str(_req(dd, "route", "demand")), kind,
                             _num(dd.get("start", 0.0), "demand.start"),
                             _num(_req(dd, "headway", "demand"), "demand.headway"),
                             int(_req(dd, "count", "demand"))))

    types = dict(DEFAULT_TYPES)
    for kind, td in (doc.get("vehicle_types") or {}).items():
        try:
            k = VehicleKind(kind)
        except ValueError:
            raise InvalidValue(f"unknown vehicle kind {kind!r}") from None
        base = dataclasses.asdict(DEFAULT_TYPES[k])
        for name, v in td.items():
            if name not in base:
                raise ScenarioSyntaxError(f"vehicle_types.{kind}: unknown field {name!r}")
            base[name] = _num(v, f"vehicle_types.{kind}.{name}")
        types[k] = VehicleParams(**base)

    sd = doc["sim"] or {}
    known = {f.name for f in dataclasses.fields(SimParams)}
    unknown = set(sd) - known
    if unknown:
        raise ScenarioSyntaxError(f"sim: unknown keys {sorted(unknown)}")
    sim_kwargs = {}
    for k, v in sd.items():
        if k == "subject":
            sim_kwargs[k] = str(v)
        elif k in ("seed", "latency_ticks", "deadlock_min_vehicles"):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ScenarioSyntaxError(f"sim.{k} must be an integer")
            sim_kwargs[k] = v
        else:
            sim_kwargs[k] = _num(v, f"sim.{k}")
    try:
        mode = Mode(doc.get("mode", "baseline"))
    except ValueError:
        raise InvalidValue(f"unknown mode {doc.get('mode')!r}") from None

    cfg = ScenarioConfig(network, tuple(demand), _parse_signals(doc.get("signals")),
                         SimParams(**sim_kwargs), types, mode)
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    net = cfg.network
    check_types(cfg.vehicle_types)
    for d in cfg.demand:
        if d.route not in net.routes:
            raise DanglingReference(f"demand references unknown route {d.route}")
        if not d.headway > 0 or d.count < 1 or d.start < 0:
            raise InvalidValue(f"demand on route {d.route}: need headway > 0, count >= 1, start >= 0")
    fastest = max(p.v_max for p in cfg.vehicle_types.values())
    for lane in net.lanes.values():
        if lane.length <= fastest * cfg.sim.dt:
            raise InvalidValue(f"lane {lane.id} is shorter than one tick of travel at {fastest} m/s")
    for jid, spec in cfg.signals.items():
        if jid not in net.junctions:
            raise DanglingReference(f"signal program for unknown junction {jid}")
        incoming = set(net.incoming(jid))
        seen = set()
        for appr, lanes in spec.approach_lanes.items():
            for lid in lanes:
                if lid not in net.lanes:
                    raise DanglingReference(f"signals.{jid}.{appr} references unknown lane {lid}")
                if lid not in incoming:
                    raise InvalidValue(f"signals.{jid}.{appr}: lane {lid} does not enter {jid}")
                if lid in seen:
                    raise InvalidValue(f"signals.{jid}: lane {lid} belongs to two approaches")
                seen.add(lid)
        if seen != incoming:
            raise InvalidValue(f"signals.{jid}: incoming lanes {sorted(incoming - seen)} have no approach")


# -- serialization -------------------------------------------------------

def _clean(x):
    return int(x) if isinstance(x, float) and x.is_integer() and abs(x) < 1e15 else x


def to_document(cfg: ScenarioConfig) -> dict:
    net = cfg.network
    junctions = []
    for j in net.junctions.values():
        jd = {"id": j.id, "x": _clean(j.center.x), "y": _clean(j.center.y)}
        if j.pool:
            jd["pool"] = {"area": _clean(j.pool.area), "depth": _clean(j.pool.depth), "capacity": j.pool.capacity}
        junctions.append(jd)
    lanes = []
    for lane in net.lanes.values():
        ld = {"id": lane.id, "from": lane.from_junction, "to": lane.to_junction,
              "length": _clean(lane.length), "angle": lane.angle, "max_occupancy": lane.max_occupancy}
        if lane.speed_limit is not None:
            ld["speed_limit"] = _clean(lane.speed_limit)
        if lane.parallel:
            ld["parallel"] = list(lane.parallel)
        lanes.append(ld)
    routes = [{"id": r.id, "source": r.source, "dest": r.dest, "lanes": list(r.lanes)} for r in net.routes.values()]
    detectors = []
    for d in net.detectors:
        if d.generated:
            continue
        dd = {"id": d.id, "lane": d.lane, "offset": _clean(d.offset), "kind": d.kind.value}
        if d.junction is not None:
            dd["junction"] = d.junction
        if d.tag:
            dd["tag"] = d.tag
        detectors.append(dd)
    signals = {}
    for jid, spec in cfg.signals.items():
        prog = spec.program
        signals[jid] = {
            "offset": _clean(spec.offset),
            "approaches": {a: list(spec.approach_lanes[a]) for a in prog.approaches},
            "conflicts": sorted(sorted(p) for p in prog.conflicts),
            "phases": [{"state": "".join(ph.colors[a].value for a in prog.approaches),
                        "duration": _clean(ph.duration)} for ph in prog.phases],
        }
    z = net.zone
    return {
        "mode": cfg.mode.value,
        "network": {
            "zone": {"center": [_clean(z.center.x), _clean(z.center.y)],
                     "control_radius": _clean(z.control_radius),
                     "surveillance_radius": _clean(z.surveillance_radius)},
            "junctions": junctions,
            "lanes": lanes,
            "routes": routes,
            "detectors": detectors,
        },
        "demand": [{"route": d.route, "kind": d.kind.value, "start": _clean(d.start),
                    "headway": _clean(d.headway), "count": d.count} for d in cfg.demand],
        "signals": signals,
        "vehicle_types": {k.value: {n: _clean(v) for n, v in dataclasses.asdict(p).items()}
                          for k, p in sorted(cfg.vehicle_types.items(), key=lambda kv: kv[0].value)},
        "sim": {k: _clean(v) for k, v in dataclasses.asdict(cfg.sim).items()},
    }


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_document(cfg), sort_keys=False, default_flow_style=None, width=100)


def load_scenario(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioSyntaxError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario(text)


def config_digest(cfg: ScenarioConfig) -> str:
    """Fingerprint of everything but the mode and seed.

    Paired runs must share it: they may only differ in control mode and seed.
    """
    doc = to_document(cfg)
    doc.pop("mode")
    doc["sim"].pop("seed")
    text = yaml.safe_dump(doc, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]
