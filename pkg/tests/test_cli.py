import csv
import json
import subprocess
import sys

import pytest

from su2hjb.cli import main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("run1")
    code = main(["solve", "--system", "eq27", "--lambda", "0.5", "--h", "0.4", "--rho", "1.6", "--rt", "0.2", "--out", str(out)])
    assert code == 0
    return out


def test_solve_outputs(solved):
    manifest = json.loads((solved / "manifest.json").read_text())
    values = rows(solved / "values.csv")
    assert values[0] == ["x", "y", "z", "value", "flag"]
    assert len(values) - 1 == manifest["mesh"]["vertices"]
    metric = rows(solved / "metric.csv")
    assert metric[0] == ["iter", "metric"]
    assert len(metric) - 1 == manifest["field"]["iterations"]
    assert manifest["system"]["name"] == "eq27"
    assert "timings" in manifest and "solve_s" in manifest["timings"]


def test_rerun_is_byte_identical(solved, tmp_path):
    assert main(["rerun", str(solved / "manifest.json"), "--out", str(tmp_path)]) == 0
    for name in ("values.csv", "metric.csv", "field.npy"):
        assert (solved / name).read_bytes() == (tmp_path / name).read_bytes()


def test_min_time_route(tmp_path):
    assert main(["solve", "--lambda", "0", "--h", "0.4", "--rho", "1.6", "--out", str(tmp_path)]) == 0
    body = rows(tmp_path / "values.csv")[1:]
    target = [float(r[3]) for r in body if r[4] == "target"]
    assert target and all(v == 0.0 for v in target)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["field"]["kind"] == "min_time"


def test_spec_file_with_default_lambda(tmp_path):
    spec = {
        "name": "xz",
        "generators": [[1, 0, 0], [0, 0, 1]],
        "control_set": {"kind": "sphere", "size": 2.0},
        "lambda": 1.0,
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    out = tmp_path / "run"
    assert main(["solve", "--spec-file", str(path), "--h", "0.4", "--rho", "1.6", "--out", str(out)]) == 0
    assert json.loads((out / "manifest.json").read_text())["solver"]["lam"] == 1.0


def test_not_converged_exit_code(tmp_path):
    assert main(["solve", "--h", "0.4", "--rho", "1.6", "--max-iters", "2", "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--h", "-1", "--out", "x"],
        ["solve", "--controls", "1", "--out", "x"],
        ["oracle", "--dt", "0", "--probes", "axes", "--out", "x"],
        ["oracle", "--start", "1,2", "--out", "x"],
        ["nonsense"],
    ],
)
def test_config_errors_exit_one(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_trajectory_probe_set(solved, tmp_path):
    assert main(["trajectory", "--field", str(solved), "--probes", "axes", "--out", str(tmp_path)]) == 0
    files = sorted(tmp_path.glob("traj_*.csv"))
    assert len(files) == 9
    assert rows(files[0])[0] == ["t", "x", "y", "z", "v1", "v2"]


def test_trajectory_start_in_target(solved, tmp_path):
    assert main(["trajectory", "--field", str(solved), "--start", "0,0,0.05", "--out", str(tmp_path)]) == 0
    assert len(rows(tmp_path / "traj_00.csv")) == 2


def test_trajectory_start_outside(solved, tmp_path):
    assert main(["trajectory", "--field", str(solved), "--start", "3,0,0", "--out", str(tmp_path)]) == 1


def test_oracle_probe_set_and_origin(tmp_path):
    assert main(["oracle", "--system", "eq27", "--dt", "0.02", "--probes", "axes", "--tmax", "2.5", "--out", str(tmp_path / "a")]) == 0
    body = rows(tmp_path / "a" / "oracle.csv")
    assert body[0] == ["probe_x", "probe_y", "probe_z", "time"]
    assert len(body) == 10
    assert main(["oracle", "--start", "0,0,0", "--out", str(tmp_path / "b")]) == 0
    assert rows(tmp_path / "b" / "oracle.csv")[1][3] == "0.0"


def test_oracle_horizon_writes_inf(tmp_path):
    assert main(["oracle", "--start", "0,1.2,0", "--dt", "0.02", "--tmax", "0.3", "--out", str(tmp_path)]) == 0
    assert rows(tmp_path / "oracle.csv")[1][3] == "inf"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "su2hjb", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "solve" in res.stdout
