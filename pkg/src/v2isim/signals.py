"""Fixed-time signal programs with an override mode used for preemption."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from itertools import accumulate

from .errors import (
    ConflictingGreens,
    IncompleteColorMap,
    InvalidValue,
    NotInOverride,
    UnknownApproach,
)


class Color(str, Enum):
    GREEN = "G"
    YELLOW = "Y"
    RED = "R"


@dataclass(frozen=True)
class Phase:
    colors: dict[str, Color]
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise InvalidValue(f"phase duration must be > 0, got {self.duration}")
        if not self.colors:
            raise InvalidValue("phase lists no approach")


def _pair(a, b):
    return frozenset((a, b))


@dataclass(frozen=True)
class SignalProgram:
    approaches: tuple[str, ...]
    phases: tuple[Phase, ...]
    conflicts: frozenset = frozenset()   # set of frozenset({a, b})

    def __post_init__(self):
        if not self.phases:
            raise InvalidValue("signal program needs at least one phase")
        known = set(self.approaches)
        for pair in self.conflicts:
            if len(pair) != 2 or not pair <= known:
                raise UnknownApproach(f"conflict pair {sorted(pair)} names an unknown approach")
        for i, ph in enumerate(self.phases):
            if set(ph.colors) != known:
                raise IncompleteColorMap(f"phase {i} must color exactly {sorted(known)}")
            check_conflicts(ph.colors, self.conflicts)
        ends = list(accumulate(p.duration for p in self.phases))
        object.__setattr__(self, "_ends", ends)

    @property
    def cycle(self) -> float:
        return self._ends[-1]

    def phase_index(self, t: float) -> int:
        tc = t % self.cycle
        return min(bisect.bisect_right(self._ends, tc), len(self.phases) - 1)

    def conflicting(self, approach: str) -> frozenset[str]:
        return conflicting_approaches(self, approach)


def check_conflicts(colors, conflicts):
    greens = [a for a, c in colors.items() if c == Color.GREEN]
    for i, a in enumerate(greens):
        for b in greens[i + 1:]:
            if _pair(a, b) in conflicts:
                raise ConflictingGreens(f"approaches {a} and {b} conflict but are both green")


def conflicting_approaches(program: SignalProgram, approach: str) -> frozenset[str]:
    if approach not in program.approaches:
        raise UnknownApproach(approach)
    return frozenset(b for pair in program.conflicts if approach in pair for b in pair if b != approach)


@dataclass
class TrafficLightState:
    junction: str
    program: SignalProgram
    approach_lanes: dict[str, tuple[str, ...]]
    offset: float = 0.0       # schedule time at simulation t = 0
    override: dict[str, Color] | None = field(default=None)

    @property
    def mode(self) -> str:
        return "static" if self.override is None else "override"

    def color_for(self, approach: str, t: float) -> Color:
        if approach not in self.approach_lanes:
            raise UnknownApproach(f"{approach} at junction {self.junction}")
        if self.override is not None:
            return self.override[approach]
        return self.program.phases[self.program.phase_index(t + self.offset)].colors[approach]

    def colors(self, t: float) -> dict[str, Color]:
        if self.override is not None:
            return dict(self.override)
        return dict(self.program.phases[self.program.phase_index(t + self.offset)].colors)

    def set_override(self, colors: dict[str, Color]) -> None:
        colors = {a: Color(c) for a, c in colors.items()}
        if set(colors) != set(self.approach_lanes):
            raise IncompleteColorMap(
                f"override for {self.junction} must color {sorted(self.approach_lanes)}, got {sorted(colors)}"
            )
        check_conflicts(colors, self.program.conflicts)
        self.override = colors

    def clear_override(self, t: float) -> None:
        # Resuming is time-synced: the schedule simply continues as if the
        # override had never happened, so ``t`` is only used for the check.
        if self.override is None:
            raise NotInOverride(f"junction {self.junction} is not overridden (t={t})")
        self.override = None


def preemption_colors(tl: TrafficLightState, approach: str) -> dict[str, Color]:
    """Green for ``approach``, red for everything else."""
    if approach not in tl.approach_lanes:
        raise UnknownApproach(approach)
    return {a: (Color.GREEN if a == approach else Color.RED) for a in tl.approach_lanes}
