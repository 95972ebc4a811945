import pytest

from v2isim.engine import simulate
from v2isim.errors import CorruptTrace
from v2isim.metrics import collect
from v2isim.traceio import read_trace, vehicle_infos, write_trace


@pytest.fixture
def trace_file(small_cfg, tmp_path):
    res = simulate(small_cfg, seed=9)
    path = tmp_path / "run.trace"
    write_trace(path, res, small_cfg, ("baseline", "scenario-b"))
    return res, path


def test_round_trip_is_exact(small_cfg, trace_file):
    res, path = trace_file
    data = read_trace(path)
    assert (data.digest, data.mode, data.seed, data.dt) == (res.digest, "baseline", 9, 0.5)
    assert data.rows == res.trace
    assert data.infos == vehicle_infos(res, small_cfg)
    assert data.compare == ("baseline", "scenario-b")
    assert data.deadlock_time is None
    assert collect(data.infos, data.rows, data.dt) == collect(vehicle_infos(res, small_cfg), res.trace, res.dt)


def test_writing_twice_gives_same_bytes(small_cfg, trace_file, tmp_path):
    res, path = trace_file
    again = tmp_path / "again.trace"
    write_trace(again, simulate(small_cfg, seed=9), small_cfg, ("baseline", "scenario-b"))
    assert again.read_bytes() == path.read_bytes()


def _mangle(path, fn):
    lines = path.read_text().split("\n")
    path.write_text("\n".join(fn(lines)))
    return path


@pytest.mark.parametrize("mangle", [
    lambda ls: ls[:len(ls) // 2],                                      # truncated
    lambda ls: ["# something else"] + ls[1:],                          # wrong magic
    lambda ls: ls[:-3] + ls[-2:],                                      # one sample missing
    lambda ls: [l.replace("\t", " ", 1) if l[:1].isdigit() else l for l in ls],   # broken row
    lambda ls: [l for l in ls if not l.startswith("# digest")],         # header missing
    lambda ls: [l for l in ls if not l.startswith("time\t")],           # no column line
    lambda ls: [l.replace("# seed 9", "# seed nine") for l in ls],
])
def test_corrupt_traces_are_rejected(trace_file, mangle):
    _, path = trace_file
    with pytest.raises(CorruptTrace):
        read_trace(_mangle(path, mangle))


def test_missing_or_binary_file(tmp_path):
    with pytest.raises(CorruptTrace):
        read_trace(tmp_path / "absent.trace")
    (tmp_path / "bin.trace").write_bytes(b"\xff\xfe\x00garbage")
    with pytest.raises(CorruptTrace):
        read_trace(tmp_path / "bin.trace")
