import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laneemden.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, main
from laneemden.errors import ConfigurationError
from laneemden.io import RunConfig, format_value, parse_range, read_config_file, to_jsonable, write_csv, write_json


def _csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_harmonics_table(tmp_path):
    assert main(["harmonics", "--N", "3", "--jmax", "5", "--out", str(tmp_path)]) == EXIT_OK
    rows = _csv(tmp_path / "harmonics.csv")
    assert rows[0] == ["j", "lambda_j", "N_j"]
    assert [int(r[2]) for r in rows[1:]] == [1, 3, 5, 7, 9, 11]


def test_harmonics_symmetric_columns_and_gegenbauer(tmp_path):
    args = ["harmonics", "--N", "4", "--jmax", "4", "--n", "3", "--gegenbauer", "2,0,1,0.5", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    rows = _csv(tmp_path / "harmonics.csv")
    assert rows[0][3] == "N_j_Xn"
    assert rows[-1][3] == ""
    report = json.loads((tmp_path / "harmonics.json").read_text())
    assert report["gegenbauer"]["value"] == pytest.approx(0.0, abs=1e-15)  # U_2(1/2) = 0


def test_radial_two_zone_csv(tmp_path):
    assert main(["radial", "--a", "1", "--b", "2", "--N", "2", "--p", "3", "--m", "2", "--K", "512",
                 "--out", str(tmp_path)]) == EXIT_OK
    rows = _csv(tmp_path / "radial.csv")
    assert rows[0] == ["r", "u", "du"]
    u = np.array([float(r[1]) for r in rows[1:]])
    inner = u[1:-1]
    assert np.count_nonzero(np.sign(inner[1:]) != np.sign(inner[:-1])) == 1
    report = json.loads((tmp_path / "radial.json").read_text())
    assert report["config"]["m"] == 2 and report["version"]
    assert report["summary"]["nodal_zones"] == 2


def test_csv_line_endings_and_float_format(tmp_path):
    path = write_csv(tmp_path / "t.csv", ("x", "flag"), [(0.1, True), (1e-300, False)])
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode() == "x,flag\n0.1,true\n1e-300,false\n"


@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert float(format_value(x)) == x


def test_json_is_strict(tmp_path):
    path = write_json(tmp_path / "t.json", {"a": np.float64(math.inf), "b": np.arange(3), "c": (1, 2)})
    data = json.loads(path.read_text())
    assert data == {"a": "inf", "b": [0, 1, 2], "c": [1, 2]}
    assert path.read_text().endswith("\n")
    assert to_jsonable(np.bool_(True)) is True


def test_validation_errors():
    with pytest.raises(ConfigurationError):
        RunConfig(a=2.0, b=1.0).validate()
    with pytest.raises(ConfigurationError):
        RunConfig(K=4).validate()
    with pytest.raises(ConfigurationError):
        RunConfig(cone_tol=0.0).validate()
    with pytest.raises(ConfigurationError):
        parse_range("1.5")


def test_exit_codes(tmp_path):
    assert main(["radial", "--a", "2", "--b", "1", "--p", "3", "--out", str(tmp_path)]) == EXIT_INPUT
    assert main(["radial", "--out", str(tmp_path)]) == EXIT_INPUT
    # no crossing of nu_1 + lambda_12 for p < 1.2
    assert main(["bifurcations", "--nrange", "12:12", "--prange", "1.05:1.2", "--K", "256",
                 "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "bifurcations_summary.json").read_text())
    assert "12" in summary["failures"]
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2


def test_numerical_failure_exit(tmp_path):
    # amplitude overflows double precision this close to p = 1
    assert main(["radial", "--p", "1.0001", "--out", str(tmp_path)]) == EXIT_NUMERIC


def test_config_precedence(tmp_path, monkeypatch):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# settings\nN = 3\njmax = 2\nformat = json\n")
    assert read_config_file(cfg_file) == {"N": 3, "jmax": 2, "format": "json"}
    env_dir = tmp_path / "env"
    monkeypatch.setenv("LANEEMDEN_OUTPUT_DIR", str(env_dir))
    assert main(["harmonics", "--config", str(cfg_file), "--jmax", "3"]) == EXIT_OK
    report = json.loads((env_dir / "harmonics.json").read_text())
    assert report["config"]["N"] == 3 and report["config"]["jmax"] == 3
    assert [r[2] for r in report["rows"]] == [1, 3, 5, 7]
    flag_dir = tmp_path / "flag"
    assert main(["harmonics", "--config", str(cfg_file), "--out", str(flag_dir)]) == EXIT_OK
    assert (flag_dir / "harmonics.json").exists()


def test_bad_config_file(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["harmonics", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_INPUT


def _run_all(out):
    cmds = [
        ["harmonics", "--N", "5", "--jmax", "6", "--n", "2"],
        ["radial", "--p", "2.5", "--m", "2", "--K", "256"],
        ["spectrum", "--prange", "1.5:6", "--samples", "4", "--K", "256"],
        ["morse", "--p", "3", "--nrange", "1:3", "--K", "256", "--format", "json"],
        ["cone-index", "--prange", "1.2:3", "--samples", "3", "--nrange", "1:2", "--K", "256"],
        ["degeneracies", "--prange", "1.05:1.5", "--jmax", "3", "--K", "256"],
    ]
    for c in cmds:
        assert main(c + ["--out", str(out)]) == EXIT_OK
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_outputs_are_byte_identical(tmp_path):
    # identical config includes the output directory, which every JSON report embeds
    first = _run_all(tmp_path / "out")
    for f in (tmp_path / "out").iterdir():
        f.unlink()
    second = _run_all(tmp_path / "out")
    assert first.keys() == second.keys() and len(first) >= 7
    for name in first:
        assert first[name] == second[name], name


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "laneemden", "harmonics", "--N", "2", "--jmax", "2",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip().endswith("harmonics.csv")


@pytest.mark.slow
def test_bifurcations_to_branch_pipeline(tmp_path):
    assert main(["bifurcations", "--m", "1", "--nrange", "1:6", "--out", str(tmp_path)]) == EXIT_OK
    rows = _csv(tmp_path / "bifurcations.csv")
    assert [int(r[0]) for r in rows[1:]] == [1, 2, 3, 4, 5, 6]
    point = json.loads((tmp_path / "point_n2.json").read_text())
    assert point["parity"]["certified_space"] == "SYM"
    assert main(["branch", "--from", str(tmp_path / "point_n2.json"), "--p-max", "1.5",
                 "--out", str(tmp_path)]) == EXIT_OK
    branch = _csv(tmp_path / "branch_n2.csv")
    assert branch[0][0] == "arclength"
    s = np.array([float(r[0]) for r in branch[1:]])
    assert s.size > 3 and np.all(np.diff(s) > 0)
    summary = json.loads((tmp_path / "branch_n2_summary.json").read_text())
    assert summary["termination"] == "P_MAX"
