"""Run configuration: a single JSON document with a schema version."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

from .bubble import KProfile, TwoPeakK
from .galerkin import DictSpec
from .integrate import QuadratureSpec

SCHEMA_VERSION = 1

_PROFILE = {
    "type": "object",
    "required": ["z", "a", "beta"],
    "additionalProperties": False,
    "properties": {
        "z": {"type": "array", "items": {"type": "number"}},
        "a": {"type": "array", "items": {"type": "number"}},
        "beta": {"type": "number"},
        "sigma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "k0": {"type": "number"},
        "r0": {"type": "number", "exclusiveMinimum": 0},
    },
}

SCHEMA = {
    "type": "object",
    "required": ["schema_version", "n", "profiles"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "n": {"type": "integer", "minimum": 5},
        "profiles": {"type": "array", "items": _PROFILE, "minItems": 2, "maxItems": 2},
        "eps_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "radial_nodes": {"type": "integer", "minimum": 8},
                "map_scale": {"type": "number", "exclusiveMinimum": 0},
                "transverse_nodes": {"type": "integer", "minimum": 8},
                "mc_samples": {"type": "integer", "minimum": 16},
                "rel_tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "mc_rel_tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "dictionary": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "value_scales": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "dlam_scales": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "dy_scales": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "cond_max": {"type": "number", "exclusiveMinimum": 1},
            },
        },
        "box": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma1": {"type": "number", "exclusiveMinimum": 0},
                "gamma2": {"type": "number", "exclusiveMinimum": 0},
                "delta_box": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "source": {"enum": ["model", "full"]},
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "report": {"type": "string"},
                "sweeps": {"type": "string"},
                "constants": {"type": "string"},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    n: int
    profiles: tuple
    eps_list: tuple = (8e-3, 4e-3, 2e-3)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    dictionary: DictSpec = field(default_factory=DictSpec)
    gamma1: float = 0.01
    gamma2: float = 1000.0
    delta_box: float = 0.5
    source: str = "full"
    outputs: dict = field(default_factory=lambda: {"report": "report.json", "sweeps": "sweeps.csv",
                                                   "constants": "constants.csv"})
    seed: int = 20240607

    @property
    def K(self) -> TwoPeakK:
        return TwoPeakK(self.profiles)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=int(seed), quadrature=replace(self.quadrature, seed=int(seed)))

    def with_eps(self, eps_list) -> "RunConfig":
        eps = tuple(float(e) for e in eps_list)
        if any(not e > 0 for e in eps):
            raise ConfigError("eps values must be positive")
        return replace(self, eps_list=eps)

    def to_dict(self) -> dict:
        q = asdict(self.quadrature)
        q.pop("seed")
        d = asdict(self.dictionary)
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "profiles": [
                {"z": p.z.tolist(), "a": p.a.tolist(), "beta": p.beta, "sigma": p.sigma, "k0": p.k0, "r0": p.r0}
                for p in self.profiles
            ],
            "eps_list": list(self.eps_list),
            "quadrature": q,
            "dictionary": {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()},
            "box": {"gamma1": self.gamma1, "gamma2": self.gamma2, "delta_box": self.delta_box},
            "source": self.source,
            "outputs": dict(self.outputs),
            "seed": self.seed,
        }


def from_dict(doc: dict) -> RunConfig:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {path}: {exc.message}") from None
    n = doc["n"]
    profiles = []
    for i, p in enumerate(doc["profiles"]):
        if len(p["z"]) != n or len(p["a"]) != n:
            raise ConfigError(f"profile {i}: z and a must have length n={n}")
        try:
            profiles.append(KProfile(np.array(p["z"], float), np.array(p["a"], float), float(p["beta"]),
                                     sigma=p.get("sigma", 0.5), k0=p.get("k0", 0.0), r0=p.get("r0", 0.25)))
        except ValueError as exc:
            raise ConfigError(f"profile {i}: {exc}") from None
    try:
        TwoPeakK(profiles)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    seed = int(doc.get("seed", 20240607))
    try:
        quad = QuadratureSpec(**{**doc.get("quadrature", {}), "seed": seed})
        dspec = DictSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in doc.get("dictionary", {}).items()})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    box = doc.get("box", {})
    g1, g2 = box.get("gamma1", 0.01), box.get("gamma2", 1000.0)
    if not g1 < g2:
        raise ConfigError("box: gamma1 must be below gamma2")
    if n - 4 <= 1:
        raise ConfigError(f"the two-peak pipeline needs beta in (1, n-4); n={n} leaves no admissible beta")
    outputs = {"report": "report.json", "sweeps": "sweeps.csv", "constants": "constants.csv"}
    outputs.update(doc.get("outputs", {}))
    return RunConfig(
        n=n,
        profiles=tuple(profiles),
        eps_list=tuple(float(e) for e in doc.get("eps_list", (8e-3, 4e-3, 2e-3))),
        quadrature=quad,
        dictionary=dspec,
        gamma1=float(g1),
        gamma2=float(g2),
        delta_box=float(box.get("delta_box", 0.5)),
        source=doc.get("source", "full"),
        outputs=outputs,
        seed=seed,
    )


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return from_dict(doc)


def default_config(n: int = 6, beta: float = 1.5, separation: float = 1.0, k0: float = 1.0) -> RunConfig:
    """Symmetric profiles ``a = (-1, ..., -1)`` at distance ``separation`` along the first axis."""
    z1 = np.zeros(n)
    z2 = np.zeros(n)
    z2[0] = separation
    a = -np.ones(n)
    r0 = min(0.2, separation / 5.0)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n": n,
        "profiles": [
            {"z": z1.tolist(), "a": a.tolist(), "beta": beta, "k0": k0, "r0": r0},
            {"z": z2.tolist(), "a": a.tolist(), "beta": beta, "k0": k0, "r0": r0},
        ],
    }
    return from_dict(doc)
