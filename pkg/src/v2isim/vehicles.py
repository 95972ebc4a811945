from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import InvalidValue


class VehicleKind(str, Enum):
    PASSENGER = "passenger"
    EMERGENCY = "emergency"


@dataclass(frozen=True)
class VehicleParams:
    length: float = 5.0
    accel: float = 0.6
    decel: float = 4.5
    v_max: float = 13.9
    tau: float = 1.0

    def __post_init__(self):
        for name in ("length", "accel", "decel", "v_max", "tau"):
            if not getattr(self, name) > 0:
                raise InvalidValue(f"vehicle parameter {name} must be > 0")


DEFAULT_TYPES = {
    VehicleKind.PASSENGER: VehicleParams(),
    VehicleKind.EMERGENCY: VehicleParams(accel=0.8, v_max=22.2),
}


def check_types(types: dict) -> None:
    missing = set(VehicleKind) - set(types)
    if missing:
        raise InvalidValue(f"vehicle types missing: {sorted(k.value for k in missing)}")
    if not types[VehicleKind.EMERGENCY].v_max > types[VehicleKind.PASSENGER].v_max:
        raise InvalidValue("emergency vehicles must be faster than passenger vehicles")
