"""Record a paired run to traces, then rebuild every report from them.

Reports are a pure function of the recorded traces, so replaying the
trace directory must reproduce the CSV files and the summary byte for
byte. This script does exactly what a user would do on the command line,
in a temporary directory, and checks the bytes.

    python demos/trace_replay.py
"""
import filecmp
import tempfile
from pathlib import Path

from v2isim.cli import main as v2isim

REPORTS = ["vehicles.csv", "routes.csv", "summary.txt", "comparison.csv"]

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    print("$ v2isim run --scenario saeb-salam --compare baseline,scenario-a --reps 3 --emit-trace")
    v2isim(["run", "--scenario", "saeb-salam", "--compare", "baseline,scenario-a", "--reps", "3",
            "--emit-trace", "--out", str(tmp / "live")])

    traces = sorted(p.name for p in (tmp / "live" / "traces").iterdir())
    print(f"\nwrote {len(traces)} traces: {', '.join(traces)}")

    print("\n$ v2isim replay live/traces --scenario saeb-salam")
    v2isim(["replay", str(tmp / "live" / "traces"), "--scenario", "saeb-salam", "--out", str(tmp / "replayed")])

    match, mismatch, errors = filecmp.cmpfiles(tmp / "live", tmp / "replayed", REPORTS, shallow=False)
    print(f"\nidentical after replay: {', '.join(match) or 'none'}")
    if mismatch or errors:
        raise SystemExit(f"replay differs: {mismatch + errors}")
