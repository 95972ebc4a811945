"""Deterministic message bus between agents.

Envelopes are delivered a fixed number of ticks after they are sent. Within a
delivery tick the order is (deliver time, sender role, sender index, seq), so a
run never depends on dict or hash ordering.
"""
from __future__ import annotations

from collections import defaultdict
from enum import Enum, IntEnum
from typing import Callable, NamedTuple

from .errors import DuplicateRegistration, UnknownSender


class Role(IntEnum):
    TRM = 0
    IMA = 1
    TL = 2
    MOBILE = 3


class AgentId(NamedTuple):
    role: Role
    index: int

    def __str__(self):
        return f"{self.role.name}#{self.index}"


class ZoneBroadcast(NamedTuple):
    """Addressee resolved at delivery: every registered mobile agent in ``zone``
    except those the exemption rule ``exemption`` (with ``args``) excludes."""
    zone: str
    exemption: str = ""
    args: tuple = ()

    def __str__(self):
        extra = ":".join(str(a) for a in self.args)
        return f"ZONE[{self.zone}|{self.exemption}{':' if extra else ''}{extra}]"


class Kind(str, Enum):
    REGISTER = "Register"
    POSITION_UPDATE = "PositionUpdate"
    EMERGENCY_DECLARE = "EmergencyDeclare"
    ZONE_ALERT = "ZoneAlert"
    STAY_STEADY = "StaySteady"
    RELEASE = "Release"
    PHASE_OVERRIDE = "PhaseOverride"
    RESUME_SCHEDULE = "ResumeSchedule"
    LANE_CHANGE_ADVISORY = "LaneChangeAdvisory"
    PHASE_STATUS = "PhaseStatus"
    INCIDENT_REPORT = "IncidentReport"


class Envelope(NamedTuple):
    sender: AgentId
    to: object          # AgentId or ZoneBroadcast
    kind: Kind
    payload: dict
    send_time: float
    deliver_time: float
    seq: int


# A resolver expands a broadcast into (recipient, extra payload) pairs.
Resolver = Callable[[Envelope], list]


class Bus:
    def __init__(self, dt: float, latency_ticks: int = 1, resolver: Resolver | None = None, log: bool = True):
        self.dt = dt
        self.latency = latency_ticks
        self.resolver = resolver
        self._agents: set[AgentId] = set()
        self._seq: dict[AgentId, int] = {}
        self._queue: dict[int, list[Envelope]] = defaultdict(list)
        self.log: list[Envelope] | None = [] if log else None

    def register(self, agent: AgentId) -> None:
        if agent in self._agents:
            raise DuplicateRegistration(f"agent {agent} already on the bus")
        self._agents.add(agent)
        self._seq[agent] = 0

    def unregister(self, agent: AgentId) -> None:
        self._agents.discard(agent)

    def __contains__(self, agent) -> bool:
        return agent in self._agents

    def send(self, sender: AgentId, to, kind: Kind, payload: dict | None, tick: int) -> Envelope:
        if sender not in self._agents:
            raise UnknownSender(f"{sender} is not registered on the bus")
        seq = self._seq[sender]
        self._seq[sender] = seq + 1
        due = tick + self.latency
        env = Envelope(sender, to, kind, payload or {}, tick * self.dt, due * self.dt, seq)
        self._queue[due].append(env)
        return env

    def pending(self) -> int:
        return sum(len(v) for v in self._queue.values())

    def deliver_due(self, tick: int) -> list[Envelope]:
        """Pop every envelope due at or before ``tick``, broadcasts expanded."""
        due = sorted(k for k in self._queue if k <= tick)
        out = []
        for k in due:
            batch = self._queue.pop(k)
            batch.sort(key=_order_key)
            for env in batch:
                if isinstance(env.to, ZoneBroadcast):
                    for rcpt, extra in (self.resolver(env) if self.resolver else []):
                        payload = {**env.payload, **extra} if extra else env.payload
                        out.append(env._replace(to=rcpt, payload=payload))
                else:
                    out.append(env)
        if self.log is not None:
            self.log.extend(out)
        return out


def _order_key(env: Envelope):
    return (env.deliver_time, env.sender.role, env.sender.index, env.seq)


def format_envelope(env: Envelope) -> str:
    payload = " ".join(f"{k}={_fmt(v)}" for k, v in env.payload.items())
    return f"{env.send_time:.2f}\t{env.deliver_time:.2f}\t{env.sender}\t{env.to}\t{env.kind.value}\t{payload}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3f}"
    if isinstance(v, dict):
        return ",".join(f"{k}:{_fmt(x)}" for k, x in v.items())
    if isinstance(v, Enum):
        return str(v.value)
    return str(v)


def write_envelope_log(path, envelopes) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# send_time\tdeliver_time\tfrom\tto\tkind\tpayload\n")
        for env in envelopes:
            fh.write(format_envelope(env) + "\n")
