"""Builders for the two replica scenarios shipped with the package.

``saeb_salam`` is a star-shaped stand-in for the studied district: four
emergency routes whose middle lanes have the reference lengths, each reached
through a far and a near approach (the near one doubled by a parallel lane)
and left through a 350 m exit lane with the preemption end detector 300 m
past the last signal. ``gridlock`` is a single three-approach junction with a
40.96 m2 pool whose eastern exit is metered by a nearby signal.
"""
from __future__ import annotations

import math

from .scenario import ScenarioConfig, dump_scenario, parse_scenario

REFERENCE_LANES = {
    # route: (source junction, destination junction, lane length)
    "1": ("393948024", "6555914051", 101.52),
    "2": ("393948024", "2356356625", 223.94),
    "3": ("287640809", "287623849", 136.96),
    "4": ("393912045", "2356356625", 168.32),
}
GRIDLOCK_JUNCTION = "393948023"

EV_SPEED = 22.2
FAR, NEAR, EXIT, SIDE = 300.0, 250.0, 350.0, 150.0


class _Doc:
    def __init__(self):
        self.junctions = {}
        self.lanes = []
        self.routes = []
        self.detectors = []
        self.demand = []
        self.signals = {}

    def node(self, jid, x, y, pool=None):
        if jid in self.junctions:
            assert self.junctions[jid]["x"] == round(x, 2) and self.junctions[jid]["y"] == round(y, 2), jid
            return jid
        d = {"id": jid, "x": round(x, 2), "y": round(y, 2)}
        if pool:
            d["pool"] = pool
        self.junctions[jid] = d
        return jid

    def xy(self, jid):
        return self.junctions[jid]["x"], self.junctions[jid]["y"]

    def lane(self, lid, a, b, parallel=None, length=None):
        (xa, ya), (xb, yb) = self.xy(a), self.xy(b)
        d = {"id": lid, "from": a, "to": b,
             "length": length if length is not None else round(math.hypot(xb - xa, yb - ya), 2)}
        if parallel:
            d["parallel"] = [parallel]
        self.lanes.append(d)
        return lid

    def away(self, jid, name, angle_deg, dist):
        x, y = self.xy(jid)
        a = math.radians(angle_deg)
        return self.node(name, x + dist * math.cos(a), y + dist * math.sin(a))

    def two_way_program(self, jid, offset, approaches, green=40.0):
        (a, la), (b, lb) = approaches
        self.signals[jid] = {
            "offset": round(offset, 2),
            "approaches": {a: la, b: lb},
            "conflicts": [[a, b]],
            "phases": [{"state": "GR", "duration": green}, {"state": "YR", "duration": 3},
                       {"state": "RR", "duration": 2}, {"state": "RG", "duration": green},
                       {"state": "RY", "duration": 3}, {"state": "RR", "duration": 2}],
        }

    def document(self, sim, mode="baseline"):
        return {"mode": mode,
                "network": {"zone": {"center": [0, 0], "control_radius": 300, "surveillance_radius": 500},
                            "junctions": list(self.junctions.values()), "lanes": self.lanes,
                            "routes": self.routes, "detectors": self.detectors},
                "demand": self.demand, "signals": self.signals, "sim": sim}


def _green_start_offset(arrival: float, wait: float, cycle: float = 90.0) -> float:
    """Offset that puts ``arrival`` ``wait`` seconds before the first approach turns green."""
    return (cycle - wait - arrival) % cycle


def saeb_salam_document(departures=(60.0, 150.0, 240.0, 330.0), red_wait: float = 30.0,
                        queue: int = 10, duration: float = 600.0, dt: float = 0.5) -> dict:
    d = _Doc()
    A, B = d.node("393948024", -120, 0), d.node("6555914051", -120, 101.52)
    C, D = d.node("2356356625", 103.94, 0), d.node("393912045", 103.94, -168.32)
    E, F = d.node("287640809", -40, 160), d.node("287623849", 96.96, 160)
    positions = {"1": (A, B), "2": (A, C), "3": (E, F), "4": (D, C)}
    # the reference lanes
    for rid, (src, dst, length) in REFERENCE_LANES.items():
        d.lane(f"r{rid}", src, dst, length=length)

    # emergency approaches: far lane, near lane and its parallel twin, all heading at angle
    approach_dirs = {A: ("w", 180.0), D: ("s", -90.0), E: ("e", 180.0)}
    for jid, (tag, ang) in approach_dirs.items():
        near = d.away(jid, f"{tag}_near", ang, NEAR)
        far = d.away(jid, f"{tag}_far", ang, NEAR + FAR)
        d.lane(f"{tag}_far", far, near)
        d.lane(f"{tag}_near", near, jid, parallel=f"{tag}_near2")
        d.lane(f"{tag}_near2", near, jid, parallel=f"{tag}_near")
        # queueing passengers turn off before the emergency route
        sink = d.away(jid, f"{tag}_sink", ang + 135.0, SIDE)
        d.lane(f"{tag}_sink", jid, sink)
        d.routes.append({"id": f"{tag}_turn", "lanes": [f"{tag}_near", f"{tag}_sink"]})

    exits = {"1": (B, 90.0), "2": (C, 0.0), "3": (F, 0.0), "4": (C, 90.0)}
    for rid, (jid, ang) in exits.items():
        end = d.away(jid, f"x{rid}_end", ang, EXIT)
        d.lane(f"x{rid}", jid, end)
        d.detectors.append({"id": f"mission_exit_{rid}", "lane": f"x{rid}", "offset": 300.0,
                            "kind": "exit", "tag": "mission-exit"})

    entry_tag = {"1": "w", "2": "w", "3": "e", "4": "s"}
    for rid in REFERENCE_LANES:
        t = entry_tag[rid]
        d.routes.append({"id": rid, "source": f"{t}_far",
                         "dest": f"x{rid}_end", "lanes": [f"{t}_far", f"{t}_near", f"r{rid}", f"x{rid}"]})

    # cross streets with passenger demand at every signalized junction
    cross_dirs = {A: -90.0, B: 0.0, C: 90.0, D: 180.0, E: 90.0, F: -90.0}
    for jid, ang in cross_dirs.items():
        src = d.away(jid, f"c{jid}_src", ang, SIDE)
        dst = d.away(jid, f"c{jid}_dst", ang + 150.0, SIDE)
        d.lane(f"c{jid}_in", src, jid)
        d.lane(f"c{jid}_out", jid, dst)
        d.routes.append({"id": f"c{jid}", "lanes": [f"c{jid}_in", f"c{jid}_out"]})

    # timing: free-flow arrival of each emergency vehicle at its first signal
    arrive_first = {rid: dep + (FAR + NEAR) / EV_SPEED for rid, dep in zip(REFERENCE_LANES, departures)}
    arrive_second = {rid: arrive_first[rid] + REFERENCE_LANES[rid][2] / EV_SPEED for rid in REFERENCE_LANES}
    d.two_way_program(A, _green_start_offset(arrive_first["1"], red_wait), (("W", ["w_near", "w_near2"]), ("S", [f"c{A}_in"])))
    d.two_way_program(E, _green_start_offset(arrive_first["3"], red_wait), (("W", ["e_near", "e_near2"]), ("N", [f"c{E}_in"])))
    d.two_way_program(D, _green_start_offset(arrive_first["4"], red_wait), (("S", ["s_near", "s_near2"]), ("W", [f"c{D}_in"])))
    d.two_way_program(B, _green_start_offset(arrive_second["1"], 20.0), (("S", ["r1"]), ("E", [f"c{B}_in"])))
    d.two_way_program(F, _green_start_offset(arrive_second["3"], 20.0), (("W", ["r3"]), ("S", [f"c{F}_in"])))
    d.signals[C] = {
        "offset": 0,
        "approaches": {"W": ["r2"], "S": ["r4"], "N": [f"c{C}_in"]},
        "conflicts": [["N", "S"], ["N", "W"], ["S", "W"]],
        "phases": [{"state": "GRR", "duration": 25}, {"state": "YRR", "duration": 3},
                   {"state": "RGR", "duration": 25}, {"state": "RYR", "duration": 3},
                   {"state": "RRG", "duration": 31}, {"state": "RRY", "duration": 3}],
    }

    for rid, dep in zip(REFERENCE_LANES, departures):
        t = entry_tag[rid]
        first = positions[rid][0]
        second = positions[rid][1]
        d.demand.append({"route": rid, "kind": "emergency", "start": dep, "headway": 1, "count": 1})
        d.demand.append({"route": f"{t}_turn", "kind": "passenger",
                         "start": round(arrive_first[rid] - 45.0, 2), "headway": 3, "count": queue})
        d.demand.append({"route": f"c{first}", "kind": "passenger",
                         "start": round(arrive_first[rid] - 40.0, 2), "headway": 4, "count": 8})
        d.demand.append({"route": f"c{second}", "kind": "passenger",
                         "start": round(arrive_second[rid] - 40.0, 2), "headway": 4, "count": 8})
    sim = {"dt": dt, "duration": duration, "seed": 1, "latency_ticks": 1, "jitter": 0.1,
           "gridlock_timeout": 300, "subject": "emergency", "deadlock_window": 60, "deadlock_min_vehicles": 3}
    return d.document(sim)


def gridlock_document(waves=((0.0, 300.0, 30.0), (60.0, 120.0, 6.0, 4)), meter_green: float = 20.0,
                      meter_red: float = 40.0, duration: float = 600.0, dt: float = 1.0,
                      exit_a: float = 40.0, share_a: int = 2, timeout: float = 300.0,
                      depth: float = 12.8) -> dict:
    """Single junction with a 6.4 m x 6.4 m pool (capacity 5, threshold 2).

    Three approaches feed three exits; the eastern exit runs ``exit_a`` meters
    to a signal that is green ``meter_green`` and red ``meter_red`` seconds
    per cycle, so its queue can back up into the pool. Demand comes in
    ``waves`` of (start, end, headway per approach[, A weight]); every
    approach cycles its vehicles through the exits with A weighted
    ``share_a`` times unless the wave says otherwise.
    """
    d = _Doc()
    J = d.node(GRIDLOCK_JUNCTION, 0, 0, pool={"area": 40.96, "depth": depth, "capacity": 5})
    approaches = {"W": 180.0, "N": 90.0, "S": -90.0}
    for name, ang in approaches.items():
        src = d.away(J, f"{name.lower()}_src", ang, 100.0)
        d.lane(f"{name.lower()}_in", src, J)
    DA = d.away(J, "meter_a", 0.0, exit_a)
    d.lane("a_out", J, DA)
    a_end = d.away(DA, "a_end", 0.0, 100.0)
    d.lane("a_far", DA, a_end)
    for name, ang in (("b", 45.0), ("c", -45.0)):
        end = d.away(J, f"{name}_end", ang, 100.0)
        d.lane(f"{name}_out", J, end)

    exits = {"A": ["a_out", "a_far"], "B": ["b_out"], "C": ["c_out"]}
    for name in approaches:
        for ex, lanes in exits.items():
            d.routes.append({"id": f"{name}{ex}", "lanes": [f"{name.lower()}_in"] + lanes})

    green = 20.0
    d.signals[J] = {
        "offset": 0,
        "approaches": {"W": ["w_in"], "N": ["n_in"], "S": ["s_in"]},
        "conflicts": [["N", "S"], ["N", "W"], ["S", "W"]],
        "phases": [{"state": "GRR", "duration": green}, {"state": "YRR", "duration": 3},
                   {"state": "RGR", "duration": green}, {"state": "RYR", "duration": 3},
                   {"state": "RRG", "duration": green}, {"state": "RRY", "duration": 3}],
    }
    # the cross approach of the meter carries no traffic
    d.signals[DA] = {
        "offset": 0,
        "approaches": {"E": ["a_out"], "X": []},
        "conflicts": [["E", "X"]],
        "phases": [{"state": "GR", "duration": meter_green}, {"state": "YR", "duration": 3},
                   {"state": "RR", "duration": 1}, {"state": "RG", "duration": meter_red - 8.0},
                   {"state": "RY", "duration": 3}, {"state": "RR", "duration": 1}],
    }
    for wave in waves:
        start, end, headway = wave[:3]
        pattern = ["A"] * (wave[3] if len(wave) > 3 else share_a) + ["B", "C"]
        for k, name in enumerate(approaches):
            for i, ex in enumerate(pattern):
                first = start + 1.5 * k + i * headway
                count = int((end - first) // (headway * len(pattern))) + 1
                if first < end:
                    d.demand.append({"route": f"{name}{ex}", "kind": "passenger", "start": round(first, 2),
                                     "headway": round(headway * len(pattern), 2), "count": count})
    sim = {"dt": dt, "duration": duration, "seed": 1, "latency_ticks": 1, "jitter": 0.1,
           "gridlock_timeout": timeout, "subject": "all", "deadlock_window": 60, "deadlock_min_vehicles": 3}
    return d.document(sim)


def _load(doc) -> ScenarioConfig:
    import yaml
    return parse_scenario(yaml.safe_dump(doc, sort_keys=False))


def saeb_salam(**kw) -> ScenarioConfig:
    return _load(saeb_salam_document(**kw))


def gridlock(**kw) -> ScenarioConfig:
    return _load(gridlock_document(**kw))


def canonical_text(cfg: ScenarioConfig) -> str:
    return dump_scenario(cfg)


BUNDLED = {"saeb-salam": "saeb_salam.yaml", "gridlock": "gridlock.yaml"}


def bundled_path(name: str):
    """Path of a scenario file shipped inside the package."""
    from importlib.resources import files
    return files("v2isim") / "scenarios" / BUNDLED[name]
