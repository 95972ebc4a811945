"""Repeated runs with sequential seeds and their aggregation."""
from __future__ import annotations

from dataclasses import dataclass

from .engine import Engine, RunResult
from .metrics import RunSummary, aggregate, collect, summarize
from .scenario import Mode, ScenarioConfig
from .traceio import vehicle_infos


@dataclass
class Repetition:
    seed: int
    summary: RunSummary
    result: RunResult        # trace and envelopes are dropped unless kept


@dataclass
class Batch:
    mode: Mode
    reps: list[Repetition]
    summary: RunSummary


def summarize_result(result: RunResult, cfg: ScenarioConfig) -> RunSummary:
    metrics = collect(vehicle_infos(result, cfg), result.trace, result.dt)
    return summarize(result.mode.value, result.digest, metrics, len(result.vehicles), result.deadlocked)


def run_once(cfg: ScenarioConfig, mode: Mode | str, seed: int, keep: bool = False,
             check: bool = True, record_envelopes: bool = True) -> Repetition:
    result = Engine(cfg, seed=seed, mode=Mode(mode), check=check, record_envelopes=record_envelopes).run()
    summary = summarize_result(result, cfg)
    if not keep:
        result.trace = []
        result.vehicles = []
    return Repetition(seed, summary, result)


def run_batch(cfg: ScenarioConfig, mode: Mode | str, reps: int, seed: int, keep: bool = False,
              check: bool = True, record_envelopes: bool = True) -> Batch:
    if reps < 1:
        raise ValueError("repetitions must be >= 1")
    out = [run_once(cfg, mode, seed + k, keep, check, record_envelopes) for k in range(reps)]
    return Batch(Mode(mode), out, aggregate([r.summary for r in out]))
