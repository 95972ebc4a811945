"""CSV and text reports. Fixed decimals keep the bytes stable across runs."""
from __future__ import annotations

import csv
import io
from pathlib import Path

from .metrics import ComparisonReport, RunSummary

VEHICLE_HEADER = ["mode", "seed", "vehicle", "kind", "route", "depart", "arrive", "travel_time",
                  "time_loss", "mean_speed", "mean_abs_accel", "speed_accel_ratio"]
GROUP_HEADER = ["mode", "group", "runs", "vehicles", "time_loss", "travel_time", "mean_speed",
                "mean_accel", "speed_accel_ratio"]
COMPARISON_HEADER = ["group", "current_time_loss", "scenario_time_loss", "time_loss_reduction_pct",
                     "current_travel_time", "scenario_travel_time", "travel_time_reduction_pct"]


def _f(x, nd=3) -> str:
    return "" if x is None else f"{x:.{nd}f}"


def _pct(x) -> str:
    return "    n/a  " if x is None else f"{x:7.2f} %"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def vehicles_csv(per_run: list[tuple[str, int, list]]) -> str:
    """``per_run`` holds (mode, seed, vehicle metrics) for every repetition."""
    rows = []
    for mode, seed, metrics in per_run:
        for m in metrics:
            rows.append([mode, seed, m.vehicle, m.kind, m.route, _f(m.depart, 2), _f(m.arrive, 2),
                         _f(m.travel_time, 2), _f(m.time_loss), _f(m.mean_speed), _f(m.mean_abs_accel),
                         _f(m.ratio_time)])
    return _csv(rows, VEHICLE_HEADER)


def groups_csv(summaries: list[RunSummary]) -> str:
    rows = []
    for s in summaries:
        for g, st in s.groups.items():
            ratio = st.mean_speed / st.mean_accel if st.mean_accel else None
            rows.append([s.mode, g, s.runs, st.count, _f(st.time_loss), _f(st.travel_time),
                         _f(st.mean_speed), _f(st.mean_accel), _f(ratio)])
    return _csv(rows, GROUP_HEADER)


def comparison_csv(report: ComparisonReport | None) -> str:
    rows = []
    if report is not None:
        for r in report.rows:
            rows.append([r.group, _f(r.current_time_loss), _f(r.scenario_time_loss), _f(r.time_loss_pct, 2),
                         _f(r.current_travel_time), _f(r.scenario_travel_time), _f(r.travel_time_pct, 2)])
        for kind in ("route", "junction"):
            ov = report.overall(kind)
            if ov is not None:
                rows.append([f"overall/{kind}", "", "", _f(ov[0], 2), "", "", _f(ov[1], 2)])
    return _csv(rows, COMPARISON_HEADER)


def summary_text(summaries: list[RunSummary], report: ComparisonReport | None = None) -> str:
    out = []
    for s in summaries:
        out.append(f"mode {s.mode}: {s.runs} run(s), {s.spawned} vehicles spawned, {s.arrived} measured, "
                   f"deadlock {'yes' if s.deadlocked else 'no'}")
        for g, st in s.groups.items():
            out.append(f"  {g:<22} n={st.count:<5} time loss {st.time_loss:9.2f} s   "
                       f"travel time {st.travel_time:9.2f} s   speed {st.mean_speed:6.2f} m/s   "
                       f"accel {st.mean_accel:5.2f} m/s2")
    if report is not None:
        out.append(f"reduction {report.current.mode} -> {report.scenario.mode}:")
        for r in report.rows:
            out.append(f"  {r.group:<22} time loss {_pct(r.time_loss_pct)}   travel time {_pct(r.travel_time_pct)}")
        for kind in ("route", "junction"):
            ov = report.overall(kind)
            if ov is not None:
                out.append(f"  {'mean over ' + kind + 's':<22} time loss {_pct(ov[0])}   travel time {_pct(ov[1])}")
    return "\n".join(out) + "\n"


def write_reports(out_dir, per_run, summaries, report: ComparisonReport | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "vehicles.csv": vehicles_csv(per_run),
        "routes.csv": groups_csv(summaries),
        "summary.txt": summary_text(summaries, report),
    }
    if report is not None:
        files["comparison.csv"] = comparison_csv(report)
    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text, encoding="utf-8", newline="\n")
        written.append(path)
    return written
