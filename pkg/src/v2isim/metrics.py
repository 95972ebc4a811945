"""Per-vehicle measurements, run summaries and baseline-vs-scenario comparison."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigMismatch, EmptyTrajectory, NegativeDuration, ZeroAcceleration, ZeroBaseline


def time_loss(speeds, v_desired: float, dt: float) -> float:
    """Seconds lost against driving at ``v_desired`` the whole time.

    Each sample covers one tick; a sample faster than desired contributes 0.
    """
    speeds = np.asarray(speeds, dtype=float)
    if speeds.size == 0:
        raise EmptyTrajectory("no trajectory samples")
    if not v_desired > 0:
        raise ValueError("desired speed must be > 0")
    return float(np.clip(1.0 - speeds / v_desired, 0.0, None).sum() * dt)


def travel_time(depart: float, arrive: float) -> float:
    if arrive < depart:
        raise NegativeDuration(f"arrival {arrive} before departure {depart}")
    return arrive - depart


def ratio_travel_time(mean_speed: float, mean_accel: float) -> float:
    """Speed divided by mean acceleration; kept as a diagnostic next to the
    measured travel time, which it does not reproduce."""
    if mean_accel == 0:
        raise ZeroAcceleration("mean acceleration is zero")
    return mean_speed / mean_accel


def reduction_pct(current: float, scenario: float) -> float:
    if current == 0:
        raise ZeroBaseline("baseline value is zero")
    return round((current - scenario) / current * 100.0, 2)


@dataclass(frozen=True)
class VehicleMetrics:
    vehicle: int
    kind: str
    route: str
    depart: float
    arrive: float
    travel_time: float
    time_loss: float
    mean_speed: float
    mean_abs_accel: float
    groups: tuple[str, ...] = ()

    @property
    def ratio_time(self) -> float | None:
        return None if self.mean_abs_accel == 0 else ratio_travel_time(self.mean_speed, self.mean_abs_accel)


def vehicle_metrics(vehicle, kind, route, depart, arrive, speeds, spawn_speed, v_des, dt, groups=()) -> VehicleMetrics:
    speeds = np.asarray(speeds, dtype=float)
    tl = time_loss(speeds, v_des, dt)
    tt = travel_time(depart, arrive)
    accel = np.abs(np.diff(np.concatenate(([spawn_speed], speeds)))) / dt
    return VehicleMetrics(vehicle, kind, route, depart, arrive, tt, tl,
                          float(speeds.mean()), float(accel.mean()), tuple(groups))


@dataclass(frozen=True)
class GroupStats:
    count: int
    time_loss: float
    travel_time: float
    mean_speed: float
    mean_accel: float


@dataclass
class RunSummary:
    mode: str
    digest: str
    groups: dict[str, GroupStats]
    spawned: int
    arrived: int
    deadlocked: bool
    runs: int = 1
    vehicles: list = field(default_factory=list, repr=False)


def summarize(mode, digest, metrics, spawned: int, deadlocked: bool) -> RunSummary:
    """Average the four criteria per group over the given (arrived) vehicles."""
    buckets: dict[str, list[VehicleMetrics]] = {}
    for m in metrics:
        for g in m.groups:
            buckets.setdefault(g, []).append(m)
    groups = {}
    for g in sorted(buckets, key=group_sort_key):
        ms = buckets[g]
        groups[g] = GroupStats(len(ms),
                               float(np.mean([m.time_loss for m in ms])),
                               float(np.mean([m.travel_time for m in ms])),
                               float(np.mean([m.mean_speed for m in ms])),
                               float(np.mean([m.mean_abs_accel for m in ms])))
    return RunSummary(str(mode), digest, groups, spawned, len(metrics), deadlocked, 1, list(metrics))


def aggregate(summaries: list[RunSummary]) -> RunSummary:
    """Mean over repetitions of each repetition's group averages."""
    if not summaries:
        raise ValueError("nothing to aggregate")
    first = summaries[0]
    for s in summaries[1:]:
        if s.digest != first.digest or s.mode != first.mode:
            raise ConfigMismatch("repetitions disagree on configuration or mode")
    names = sorted({g for s in summaries for g in s.groups}, key=group_sort_key)
    groups = {}
    for g in names:
        stats = [s.groups[g] for s in summaries if g in s.groups]
        groups[g] = GroupStats(sum(x.count for x in stats),
                               float(np.mean([x.time_loss for x in stats])),
                               float(np.mean([x.travel_time for x in stats])),
                               float(np.mean([x.mean_speed for x in stats])),
                               float(np.mean([x.mean_accel for x in stats])))
    return RunSummary(first.mode, first.digest, groups,
                      sum(s.spawned for s in summaries), sum(s.arrived for s in summaries),
                      any(s.deadlocked for s in summaries), len(summaries))


def group_sort_key(name: str):
    kind, _, ident = name.partition("/")
    return (kind, (0, int(ident), "") if ident.isdigit() else (1, 0, ident))


@dataclass(frozen=True)
class Reduction:
    group: str
    current_time_loss: float
    scenario_time_loss: float
    time_loss_pct: float | None          # None when the baseline value is zero
    current_travel_time: float
    scenario_travel_time: float
    travel_time_pct: float | None


@dataclass
class ComparisonReport:
    current: RunSummary
    scenario: RunSummary
    rows: list[Reduction]

    def overall(self, kind: str = "route") -> tuple[float, float] | None:
        """Mean of the per-group reductions (not the reduction of the means)."""
        rows = [r for r in self.rows if r.group.startswith(kind + "/")]
        tl = [r.time_loss_pct for r in rows if r.time_loss_pct is not None]
        tt = [r.travel_time_pct for r in rows if r.travel_time_pct is not None]
        if not tl and not tt:
            return None
        return (float(np.mean(tl)) if tl else None, float(np.mean(tt)) if tt else None)

    def row(self, group: str) -> Reduction:
        return next(r for r in self.rows if r.group == group)


def _pct_or_none(current, scenario):
    # a group nobody lost time in has no meaningful reduction
    try:
        return reduction_pct(current, scenario)
    except ZeroBaseline:
        return None


def compare(current: RunSummary, scenario: RunSummary) -> ComparisonReport:
    if current.digest != scenario.digest:
        raise ConfigMismatch("baseline and scenario runs use different network or demand")
    rows = []
    for g, c in current.groups.items():
        s = scenario.groups.get(g)
        if s is None:
            continue
        rows.append(Reduction(g, c.time_loss, s.time_loss, _pct_or_none(c.time_loss, s.time_loss),
                              c.travel_time, s.travel_time, _pct_or_none(c.travel_time, s.travel_time)))
    return ComparisonReport(current, scenario, rows)


def compare_values(pairs: dict[str, tuple[float, float, float, float]]) -> ComparisonReport:
    """Comparison straight from reference averages.

    ``pairs`` maps a group name to (current time loss, scenario time loss,
    current travel time, scenario travel time).
    """
    cur = {g: GroupStats(1, p[0], p[2], 0.0, 0.0) for g, p in pairs.items()}
    sce = {g: GroupStats(1, p[1], p[3], 0.0, 0.0) for g, p in pairs.items()}
    return compare(RunSummary("baseline", "", cur, 0, 0, False), RunSummary("scenario", "", sce, 0, 0, False))


@dataclass(frozen=True)
class VehicleInfo:
    """What the metrics need to know about a vehicle besides its samples."""
    vehicle: int
    kind: str
    route: str
    depart: float
    arrive: float | None
    v_des: float
    spawn_speed: float
    groups: tuple[str, ...]
    subject: bool


def collect(infos, trace, dt: float) -> list[VehicleMetrics]:
    """Metrics for every arrived subject vehicle, in vehicle id order."""
    wanted = {i.vehicle: i for i in infos if i.subject and i.arrive is not None}
    speeds: dict[int, list[float]] = {vid: [] for vid in wanted}
    for row in trace:
        lst = speeds.get(row[1])
        if lst is not None:
            lst.append(row[4])
    out = []
    for vid in sorted(wanted):
        i = wanted[vid]
        out.append(vehicle_metrics(vid, i.kind, i.route, i.depart, i.arrive, speeds[vid],
                                   i.spawn_speed, i.v_des, dt, i.groups))
    return out
