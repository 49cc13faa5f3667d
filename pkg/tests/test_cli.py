import csv
import json

import pytest

from twopeak.cli import main


def _json(path):
    return json.loads(path.read_text())


@pytest.mark.parametrize("args, expected", [
    (["--map", "identity"], 1),
    (["--map", "reflection"], -1),
    ([], -1),
    (["--map", "g", "--m", "1", "2", "--beta", "1.5", "1.2"], -1),
])
def test_degree(tmp_path, args, expected):
    out = tmp_path / "deg.json"
    assert main(["degree", *args, "--out", str(out)]) == 0
    doc = _json(out)
    assert doc["degree"] == expected
    assert "certificate" not in doc


def test_degree_certificate(tmp_path):
    out = tmp_path / "deg.json"
    assert main(["degree", "--map", "identity", "--certificate", "--grid-res", "16", "--out", str(out)]) == 0
    assert "certificate" in _json(out)


def test_degree_zero_on_boundary_exit_3(capsys):
    assert main(["degree", "--map", "identity", "--box", "0", "1", "-1", "1"]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_solve_reduced_coefficients(tmp_path):
    out = tmp_path / "root.json"
    assert main(["solve-reduced", "--m", "1", "2", "--out", str(out)]) == 0
    doc = _json(out)
    assert doc["t"] == pytest.approx([2 ** (4 / 3), 2 ** (2 / 3)], rel=1e-10)
    assert doc["det"] == pytest.approx(doc["det_formula"], rel=1e-10)


def test_solve_reduced_model_source(tmp_path):
    out = tmp_path / "red.json"
    assert main(["solve-reduced", "--source", "model", "--eps", "8e-3", "--out", str(out)]) == 0
    assert _json(out)


def test_constants(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["constants", "--out", str(out)]) == 0
    rows = {r["name"]: r for r in csv.DictReader(out.open())}
    assert float(rows["A"]["value"]) == pytest.approx(3888.6173, rel=1e-6)


def test_verify_subset(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert main(["verify", "b2", "--out", str(out)]) == 0
    assert "b2: PASS" in capsys.readouterr().err
    assert _json(out)["b2"]["passed"]


def test_verify_failing_check_sets_exit_code(capsys):
    assert main(["verify", "b1"]) == 1
    assert "b1: FAIL" in capsys.readouterr().err


def test_bad_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "n": 6}))
    assert main(["constants", "--config", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err


def test_unparseable_config_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["pipeline", "--config", str(bad)]) == 2


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["nope"])
    assert exc.value.code == 2


def test_pipeline_model_source(tmp_path):
    from twopeak.config import default_config

    cfg = default_config().to_dict()
    cfg["source"] = "model"
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    assert main(["pipeline", "--config", str(path), "--eps-list", "8e-3", "--out", str(out)]) == 0
    rep = _json(out / "report.json")
    assert [p["eps"] for p in rep["points"]] == [8e-3]
    assert (out / "sweeps.csv").exists() and (out / "constants.csv").exists()


def test_seed_override_recorded(tmp_path):
    from twopeak.config import default_config

    cfg = default_config().to_dict()
    cfg["source"] = "model"
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    assert main(["pipeline", "--config", str(path), "--eps-list", "8e-3", "--seed", "7", "--out", str(out)]) == 0
    assert _json(out / "report.json")["config"]["seed"] == 7
