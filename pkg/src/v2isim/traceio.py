"""Trajectory trace files.

Layout (UTF-8, tab separated)::

    # v2isim-trace 1
    # digest <config digest>
    # mode <mode>
    # seed <seed>
    # dt <seconds>
    # deadlock <time or none>
    # compare <current>,<scenario>          (only in paired runs)
    # vehicle <id> <kind> <route> <v_des> <spawn_speed> <depart> <arrive or -> <subject 0/1> <groups>
    time  vehicle  lane  offset  speed  held
    ...
    # end <number of sample rows>

Floats are written with ``repr`` so reading a trace back gives bit-identical
values, which is what makes replayed reports byte-identical.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import CorruptTrace
from .metrics import VehicleInfo
from .microsim import TraceRow
from .vehicles import VehicleKind

MAGIC = "# v2isim-trace 1"
COLUMNS = "time\tvehicle\tlane\toffset\tspeed\theld"


@dataclass
class TraceData:
    digest: str
    mode: str
    seed: int
    dt: float
    deadlock_time: float | None
    infos: list[VehicleInfo]
    rows: list[TraceRow]
    compare: tuple[str, str] | None = None


def vehicle_groups(net, route_id: str) -> tuple[str, ...]:
    """Report groups of a vehicle: its route plus every pool junction it crosses."""
    lanes = net.routes[route_id].lanes
    junctions = [net.lanes[l].to_junction for l in lanes[:-1]]
    return (f"route/{route_id}",) + tuple(f"junction/{j}" for j in junctions if net.junctions[j].pool)


def vehicle_infos(result, cfg) -> list[VehicleInfo]:
    subject_all = cfg.sim.subject == "all"
    net = cfg.network
    return [VehicleInfo(v.id, v.kind.value, v.route.id, v.depart, v.arrive, v.v_des, v.spawn_speed,
                        vehicle_groups(net, v.route.id), subject_all or v.kind is VehicleKind.EMERGENCY)
            for v in result.vehicles]


def write_trace(path, result, cfg, compare: tuple[str, str] | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(MAGIC + "\n")
        fh.write(f"# digest {result.digest}\n# mode {result.mode.value}\n# seed {result.seed}\n")
        fh.write(f"# dt {result.dt!r}\n")
        fh.write(f"# deadlock {'none' if result.deadlock_time is None else repr(result.deadlock_time)}\n")
        if compare:
            fh.write(f"# compare {compare[0]},{compare[1]}\n")
        for i in vehicle_infos(result, cfg):
            arrive = "-" if i.arrive is None else repr(i.arrive)
            fh.write(f"# vehicle {i.vehicle} {i.kind} {i.route} {i.v_des!r} {i.spawn_speed!r} "
                     f"{i.depart!r} {arrive} {int(i.subject)} {','.join(i.groups)}\n")
        fh.write(COLUMNS + "\n")
        for r in result.trace:
            fh.write(f"{r.time!r}\t{r.vehicle}\t{r.lane}\t{r.offset!r}\t{r.speed!r}\t{int(r.held)}\n")
        fh.write(f"# end {len(result.trace)}\n")


def read_trace(path) -> TraceData:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except (OSError, UnicodeDecodeError) as exc:
        raise CorruptTrace(f"cannot read trace {path}: {exc}") from None
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != MAGIC:
        raise CorruptTrace("not a v2isim trace")
    if not lines[-1].startswith("# end "):
        raise CorruptTrace("trace is truncated (no end marker)")
    header = {}
    infos = []
    i = 1
    try:
        while i < len(lines) and lines[i].startswith("# "):
            key, _, rest = lines[i][2:].partition(" ")
            if key == "vehicle":
                f = rest.split(" ")
                groups = tuple(g for g in f[8].split(",") if g) if len(f) > 8 else ()
                infos.append(VehicleInfo(int(f[0]), f[1], f[2], float(f[5]), None if f[6] == "-" else float(f[6]),
                                         float(f[3]), float(f[4]), groups, f[7] == "1"))
            else:
                header[key] = rest
            i += 1
        if i >= len(lines) or lines[i] != COLUMNS:
            raise CorruptTrace("missing column header")
        rows = []
        for line in lines[i + 1:-1]:
            f = line.split("\t")
            if len(f) != 6:
                raise CorruptTrace(f"malformed sample row: {line!r}")
            rows.append(TraceRow(float(f[0]), int(f[1]), f[2], float(f[3]), float(f[4]), f[5] == "1"))
        expected = int(lines[-1][len("# end "):])
        dead = header["deadlock"]
        pair = tuple(header["compare"].split(",")) if "compare" in header else None
        if pair is not None and len(pair) != 2:
            raise CorruptTrace(f"bad compare header {header['compare']!r}")
        data = TraceData(header["digest"], header["mode"], int(header["seed"]), float(header["dt"]),
                         None if dead == "none" else float(dead), infos, rows, pair)
    except CorruptTrace:
        raise
    except (ValueError, IndexError, KeyError) as exc:
        raise CorruptTrace(f"malformed trace: {exc}") from None
    if expected != len(rows):
        raise CorruptTrace(f"trace announces {expected} samples but holds {len(rows)}")
    return data
