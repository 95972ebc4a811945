"""Offline checks of the formulas against the reference figures.

Each check recomputes a reference number from reference inputs:
occupancy from lane length, reduction percentages from the averaged time
loss and travel time pairs, and the overall mean of the route reductions.
"""
from __future__ import annotations

from dataclasses import dataclass

from .metrics import compare_values, reduction_pct
from .network import SLOT_LENGTH, max_occupancy

# route: (lane length m, reference maximum occupancy)
OCCUPANCY = {"1": (101.52, 20), "2": (223.94, 44), "3": (136.96, 27), "4": (168.32, 33)}

# group: (current time loss, scenario time loss, current travel time, scenario travel time)
EMERGENCY_AVERAGES = {
    "route/1": (41.16, 19.99, 59.96, 39.53),
    "route/2": (78.991, 38.997, 111.97, 73.62),
    "route/3": (72.04, 30.43, 90.29, 47.76),
    "route/4": (58.96, 29.13, 75.386, 49.97),
}
EMERGENCY_REDUCTIONS = {   # (time loss %, travel time %)
    "route/1": (51.43, 34.07),
    "route/2": (50.63, 33.98),
    "route/3": (57.76, 47.1),
    "route/4": (50.59, 33.71),
}
GRIDLOCK_AVERAGES = (451.32, 222.79, 467.94, 256.59)
GRIDLOCK_REDUCTIONS = (50.64, 45.17)
OVERALL_TIME_LOSS = 52.6

PCT_TOL = 0.01
OVERALL_TOL = 0.05


@dataclass(frozen=True)
class Check:
    name: str
    expected: float
    got: float
    tol: float

    @property
    def ok(self) -> bool:
        return abs(self.got - self.expected) <= self.tol + 1e-9


def occupancy_checks(slot: float = SLOT_LENGTH) -> list[Check]:
    return [Check(f"occupancy route {rid} ({length} m)", occ, max_occupancy(length, slot), 0)
            for rid, (length, occ) in OCCUPANCY.items()]


def emergency_checks() -> list[Check]:
    out = []
    for g, (tl0, tl1, tt0, tt1) in EMERGENCY_AVERAGES.items():
        want_tl, want_tt = EMERGENCY_REDUCTIONS[g]
        out.append(Check(f"{g} time loss reduction", want_tl, reduction_pct(tl0, tl1), PCT_TOL))
        out.append(Check(f"{g} travel time reduction", want_tt, reduction_pct(tt0, tt1), PCT_TOL))
    return out


def gridlock_checks() -> list[Check]:
    tl0, tl1, tt0, tt1 = GRIDLOCK_AVERAGES
    return [Check("junction time loss reduction", GRIDLOCK_REDUCTIONS[0], reduction_pct(tl0, tl1), PCT_TOL),
            Check("junction travel time reduction", GRIDLOCK_REDUCTIONS[1], reduction_pct(tt0, tt1), PCT_TOL)]


def overall_check() -> Check:
    report = compare_values(EMERGENCY_AVERAGES)
    return Check("mean route time loss reduction", OVERALL_TIME_LOSS, report.overall("route")[0], OVERALL_TOL)


def all_checks(slot: float = SLOT_LENGTH) -> list[Check]:
    return occupancy_checks(slot) + emergency_checks() + gridlock_checks() + [overall_check()]


def format_table(checks: list[Check]) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"{'check':<{width}}  {'expected':>9}  {'computed':>9}  result"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {c.expected:>9g}  {c.got:>9g}  {'pass' if c.ok else 'FAIL'}")
    passed = sum(c.ok for c in checks)
    lines.append(f"{passed}/{len(checks)} checks pass")
    return "\n".join(lines) + "\n"
