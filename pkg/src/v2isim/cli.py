"""Command line entry point.

    v2isim run --scenario gridlock --compare baseline,scenario-b --reps 50 --out out/
    v2isim replay out/traces/*.trace --out replayed/
    v2isim regression

Exit status: 0 on success, 1 for configuration or input errors, 2 when the
simulation breaks one of its own invariants.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bus import write_envelope_log
from .errors import (ConfigMismatch, CorruptTrace, InvariantViolation, MissionConflict, ScenarioError,
                     V2ISimError)
from .metrics import aggregate, collect, compare, summarize
from .regression import all_checks, format_table
from .replica import BUNDLED, bundled_path
from .reports import summary_text, write_reports
from .runner import run_batch
from .scenario import Mode, config_digest, load_scenario
from .traceio import read_trace, write_trace

log = logging.getLogger("v2isim")


def _scenario(arg: str):
    if arg in BUNDLED and not Path(arg).exists():
        return load_scenario(bundled_path(arg))
    return load_scenario(arg)


def _modes(args, cfg) -> tuple[list[Mode], tuple[str, str] | None]:
    if args.compare:
        parts = [p.strip() for p in args.compare.split(",")]
        if len(parts) != 2 or parts[0] == parts[1]:
            raise ScenarioError("--compare needs two different modes, e.g. baseline,scenario-a")
        try:
            modes = [Mode(p) for p in parts]
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
        return modes, (modes[0].value, modes[1].value)
    return [Mode(args.mode) if args.mode else cfg.mode], None


def cmd_run(args) -> int:
    cfg = _scenario(args.scenario)
    overrides = {k: v for k, v in (("dt", args.dt), ("duration", args.duration)) if v is not None}
    if overrides:
        cfg = cfg.with_(**overrides)
    if args.reps < 1:
        raise ScenarioError("--reps must be >= 1")
    seed = cfg.sim.seed if args.seed is None else args.seed
    modes, pair = _modes(args, cfg)
    out = Path(args.out)
    keep = args.emit_trace
    per_run, summaries = [], []
    for mode in modes:
        log.info("running %s x%d from seed %d", mode.value, args.reps, seed)
        batch = run_batch(cfg, mode, args.reps, seed, keep=keep, record_envelopes=args.emit_envelopes)
        for rep in batch.reps:
            per_run.append((mode.value, rep.seed, rep.summary.vehicles))
            if args.emit_trace:
                (out / "traces").mkdir(parents=True, exist_ok=True)
                write_trace(out / "traces" / f"{mode.value}-{rep.seed}.trace", rep.result, cfg, pair)
            if args.emit_envelopes:
                (out / "envelopes").mkdir(parents=True, exist_ok=True)
                write_envelope_log(out / "envelopes" / f"{mode.value}-{rep.seed}.tsv", rep.result.envelopes)
            rep.result = None   # traces of 50 runs add up; drop them once written
        summaries.append(batch.summary)
    report = compare(summaries[0], summaries[1]) if pair else None
    write_reports(out, per_run, summaries, report)
    sys.stdout.write(summary_text(summaries, report))
    return 0


def cmd_replay(args) -> int:
    paths = []
    for p in args.traces:
        p = Path(p)
        paths += sorted(p.glob("*.trace")) if p.is_dir() else [p]
    if not paths:
        raise CorruptTrace("no trace files given")
    traces = [read_trace(p) for p in paths]
    digests = {t.digest for t in traces}
    if len(digests) != 1:
        raise ConfigMismatch("traces come from different configurations")
    if args.scenario:
        digest = config_digest(_scenario(args.scenario))
        if digest not in digests:
            raise ConfigMismatch(f"scenario digest {digest} does not match trace digest {traces[0].digest}")
    pairs = {t.compare for t in traces}
    if len(pairs) != 1:
        raise ConfigMismatch("traces disagree on the compared modes")
    pair = pairs.pop()
    order = list(pair) if pair else sorted({t.mode for t in traces}, key=lambda m: list(Mode).index(Mode(m)))
    per_run, summaries = [], []
    for mode in order:
        runs = sorted((t for t in traces if t.mode == mode), key=lambda t: t.seed)
        if not runs:
            raise CorruptTrace(f"no trace for mode {mode}")
        sums = []
        for t in runs:
            metrics = collect(t.infos, t.rows, t.dt)
            per_run.append((mode, t.seed, metrics))
            sums.append(summarize(mode, t.digest, metrics, len(t.infos), t.deadlock_time is not None))
        summaries.append(aggregate(sums))
    report = compare(summaries[0], summaries[1]) if pair else None
    write_reports(args.out, per_run, summaries, report)
    sys.stdout.write(summary_text(summaries, report))
    return 0


def cmd_regression(args) -> int:
    checks = all_checks()
    sys.stdout.write(format_table(checks))
    return 0 if all(c.ok for c in checks) else 1


class _Parser(argparse.ArgumentParser):
    # Usage errors are input errors; status 2 is kept for invariant violations.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="v2isim", description="Agent-coordinated traffic simulation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario, optionally comparing two modes")
    run.add_argument("--scenario", required=True,
                     help=f"scenario YAML file or a bundled name ({', '.join(BUNDLED)})")
    run.add_argument("--mode", choices=[m.value for m in Mode])
    run.add_argument("--compare", metavar="A,B", help="run both modes and report reductions from A to B")
    run.add_argument("--reps", type=int, default=50)
    run.add_argument("--seed", type=int)
    run.add_argument("--dt", type=float)
    run.add_argument("--duration", type=float)
    run.add_argument("--out", default="v2isim-out")
    run.add_argument("--emit-trace", action="store_true")
    run.add_argument("--emit-envelopes", action="store_true")
    run.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="recompute reports from trace files")
    rp.add_argument("traces", nargs="+", help="trace files or directories holding them")
    rp.add_argument("--scenario", help="check the traces were produced from this scenario")
    rp.add_argument("--out", default="v2isim-replay")
    rp.set_defaults(func=cmd_replay)

    pr = sub.add_parser("regression", aliases=["paper-regression"],
                        help="recompute the reference figures and check them")
    pr.set_defaults(func=cmd_regression)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"v2isim: invariant violated: {exc}", file=sys.stderr)
        return 2
    except (ScenarioError, MissionConflict, ConfigMismatch, CorruptTrace) as exc:
        print(f"v2isim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (V2ISimError, OSError) as exc:
        print(f"v2isim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
