import csv
import json
import subprocess
import sys

import pytest

from coopaoa.cli import main


def rows(path):
    with open(path) as f:
        return list(csv.DictReader(line for line in f if not line.startswith("#")))


def test_default_run(tmp_path):
    assert main(["--out", str(tmp_path), "--K", "4"]) == 0
    r = rows(tmp_path / "metrics.csv")
    assert [int(x["k"]) for x in r] == [1, 2, 3, 4]
    assert all(float(x["pos_rmse_m"]) > 0 for x in r)
    err = rows(tmp_path / "errors.csv")
    assert len(err) == 51 - 6


def test_two_modes(tmp_path):
    assert main(["--out", str(tmp_path), "--K", "3", "--mode", "prior", "--mode", "posterior"]) == 0
    r = rows(tmp_path / "metrics.csv")
    assert {x["mode"] for x in r} == {"prior", "posterior"}
    assert len(r) == 6


def test_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--seed", "7", "--K", "3", "--out", str(a)]) == 0
    assert main(["--seed", "7", "--K", "3", "--out", str(b)]) == 0
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    assert (a / "errors.csv").read_bytes() == (b / "errors.csv").read_bytes()


def test_config_echo_replays(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--seed", "3", "--K", "2", "--M", "2", "--out", str(a)]) == 0
    assert main(["--config", str(a / "metrics.csv"), "--out", str(b)]) == 0
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()


def test_json_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"K": 2, "n_vehicles": 20, "n_anchors": 3}))
    assert main(["--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert len(rows(tmp_path / "errors.csv")) == 17


@pytest.mark.parametrize("doc", ['{"K": 2, "bogus": 1}', '{"K": ', '{"r": -1}', '{"mode": "both"}'])
def test_bad_config_exits_nonzero(tmp_path, capsys, doc):
    cfg = tmp_path / "c.json"
    cfg.write_text(doc)
    assert main(["--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "metrics.csv").exists()


def test_sweep_needs_values(tmp_path):
    assert main(["--sweep", "r", "--out", str(tmp_path)]) == 2


def test_sweep_output(tmp_path):
    assert main(["--sweep", "R", "--values", "0.01,0.1", "--seeds", "2", "--K", "2",
                 "--workers", "1", "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / "sweep_R.csv")
    assert [float(x["value"]) for x in r] == [0.01, 0.1]
    assert all(int(x["n_seeds"]) == 2 for x in r)
    assert len(rows(tmp_path / "sweep_R_runs.csv")) == 4
    header = (tmp_path / "sweep_R.csv").read_text().splitlines()[1]
    assert json.loads(header[len("# config:"):])["M"] == [10]


def test_from_file(tmp_path):
    from coopaoa.scenario import ScenarioParams, generate_scenario, save_scenario
    path = tmp_path / "s.json"
    save_scenario(generate_scenario(ScenarioParams(n_vehicles=12, n_anchors=2), 0), path)
    assert main(["--scenario", f"from-file:{path}", "--K", "2", "--out", str(tmp_path)]) == 0
    assert len(rows(tmp_path / "errors.csv")) == 10


def test_missing_scenario_file(tmp_path):
    assert main(["--scenario", f"from-file:{tmp_path / 'nope.json'}", "--out", str(tmp_path)]) == 1


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "coopaoa", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "--sweep" in out.stdout
