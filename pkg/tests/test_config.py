import json

import numpy as np
import pytest

from twopeak.config import SCHEMA_VERSION, ConfigError, default_config, from_dict, load_config


def _doc(**over):
    doc = default_config().to_dict()
    doc.update(over)
    return doc


def test_default_config_round_trip(tmp_path):
    cfg = default_config()
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    again = load_config(path)
    assert again.to_dict() == cfg.to_dict()
    assert again.quadrature == cfg.quadrature
    assert again.eps_list == (8e-3, 4e-3, 2e-3)
    assert cfg.to_dict()["schema_version"] == SCHEMA_VERSION


def test_seed_flows_into_quadrature():
    cfg = default_config().with_seed(99)
    assert cfg.seed == 99 and cfg.quadrature.seed == 99
    assert from_dict(_doc(seed=7)).quadrature.seed == 7


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.update(schema_version=2), "schema_version"),
    (lambda d: d.update(n=4), "n"),
    (lambda d: d["profiles"].pop(), "profiles"),
    (lambda d: d.update(extra=1), "Additional properties"),
    (lambda d: d["profiles"][0].update(a=[1.0] * 6), "sum of coefficients"),
    (lambda d: d["profiles"][0].update(beta=2.5), "beta"),
    (lambda d: d["profiles"][0].update(z=[0.0] * 5), "length n"),
    (lambda d: d["profiles"][1].update(z=[0.1] + [0.0] * 5), "overlap"),
    (lambda d: d.update(box={"gamma1": 5.0, "gamma2": 1.0}), "gamma1"),
    (lambda d: d.update(quadrature={"radial_nodes": 4}), "radial_nodes"),
    (lambda d: d.update(dictionary={"value_scales": [0.5, 2.0]}), "unit scale"),
    (lambda d: d.update(eps_list=[0.0]), "eps_list"),
    (lambda d: d.update(source="other"), "source"),
])
def test_invalid_configs(mutate, message):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ConfigError, match=message):
        from_dict(doc)


def test_n5_rejected_for_pipeline():
    doc = default_config().to_dict()
    doc["n"] = 5
    for p in doc["profiles"]:
        p["z"] = p["z"][:5]
        p["a"] = p["a"][:5]
    with pytest.raises(ConfigError):
        from_dict(doc)


def test_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(path)


def test_with_eps():
    cfg = default_config().with_eps([1e-2])
    assert cfg.eps_list == (1e-2,)
    with pytest.raises(ConfigError):
        cfg.with_eps([-1.0])


def test_default_profiles_symmetric():
    cfg = default_config(separation=2.0)
    p1, p2 = cfg.profiles
    assert np.linalg.norm(p2.z - p1.z) == 2.0
    assert p1.a_sum == p2.a_sum == -6.0
    assert cfg.K(p1.z) == cfg.K(p2.z) == 1.0


def test_shipped_default_config_matches_builder():
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "configs" / "default.json"
    assert load_config(path).to_dict() == default_config().to_dict()
