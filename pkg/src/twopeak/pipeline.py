"""End-to-end construction of the two-peak solution and report emission."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .bubble import KProfile, as_dimension
from .config import RunConfig
from .constants import a_closed_form, cached_interaction_constants, constants_table, expansion_model
from .fitting import fit_power_law
from .galerkin import GalerkinError, solution_u
from .integrate import QuadratureSpec, symmetric_cloud
from .reduced import (
    ReducedError,
    ReducedSystem,
    brouwer_degree,
    g_map,
    offset_block_degree,
    solve_full_reduced,
    solve_reduced,
)

log = logging.getLogger(__name__)

VERIFIERS = ("a1", "a2", "a3", "a4", "a5", "a6", "a7", "b1", "b2", "b3", "b4")


# --- positivity ------------------------------------------------------------------

@dataclass
class PositivityVerdict:
    passed: bool
    min_value: float
    negative_norm: float
    n_points: int
    witnesses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "min_value": self.min_value, "negative_norm": self.negative_norm,
                "n_points": self.n_points, "witnesses": self.witnesses}


def positivity_check(u: Callable, dim, centers, lams, spec: QuadratureSpec = QuadratureSpec(),
                     n_cloud: int = 10_000, tol: float = 1e-8, ball_radii: int = 48,
                     ball_dirs: int = 64) -> PositivityVerdict:
    """Minimum of ``u`` on an importance cloud plus dense balls, and the ``L^2*`` norm of ``u^-``.

    The balls sample radii ``geomspace(1e-3, 1e3) / lam`` around every centre.
    """
    dim = as_dimension(dim)
    n = dim.n
    centers = [np.asarray(c, dtype=float) for c in centers]
    cloud = symmetric_cloud(dim, centers, list(lams), replace(spec, mc_samples=n_cloud))
    rng = np.random.default_rng(spec.seed + 1)
    balls = []
    for c, l in zip(centers, lams):
        d = rng.standard_normal((ball_dirs, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = np.geomspace(1e-3, 1e3, ball_radii) / l
        balls.append(c + (r[:, None, None] * d[None, :, :]).reshape(-1, n))
    pts = np.vstack([cloud.x, *balls])
    vals = u(pts)
    u_cloud = vals[: cloud.x.shape[0]]
    neg = np.minimum(u_cloud, 0.0)
    neg_norm = float(cloud.integrate(np.abs(neg) ** dim.two_star) ** (1.0 / dim.two_star))
    mn = float(vals.min())
    order = np.argsort(vals)[:5]
    witnesses = [{"x": pts[i].tolist(), "u": float(vals[i])} for i in order if vals[i] <= 0]
    passed = mn > 0 and neg_norm <= tol
    return PositivityVerdict(passed, mn, neg_norm, int(pts.shape[0]), witnesses)


# --- report --------------------------------------------------------------------

@dataclass
class RunReport:
    config: dict
    constants: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    reduced: dict = field(default_factory=dict)
    points: list = field(default_factory=list)
    trends: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = all(v["passed"] for v in self.verdicts.values())
        ok = ok and all(self.trends.get("checks", {}).values())
        ok = ok and all(p.get("positivity", {}).get("passed", False) for p in self.points)
        deg = self.reduced.get("degree")
        if deg is not None:
            ok = ok and deg.get("product") == -1
        return ok and not self.failures

    def to_dict(self) -> dict:
        # timing is left out so that reruns are byte-identical
        return {
            "config": self.config,
            "constants": self.constants,
            "verdicts": self.verdicts,
            "reduced": self.reduced,
            "points": self.points,
            "trends": self.trends,
            "failures": self.failures,
            "passed": self.passed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        return cls(doc["config"], doc["constants"], doc["verdicts"], doc["reduced"], doc["points"], doc["trends"],
                   doc["failures"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def report_json(report: RunReport) -> str:
    return json.dumps(_jsonable(report.to_dict()), sort_keys=True, indent=2) + "\n"


def sweeps_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block", "series", "abscissa", "value", "stderr", "fit", "residual"])
    for name in sorted(report.verdicts):
        for label, fit in sorted(report.verdicts[name].get("fits", {}).items()):
            errs = fit.get("stderr") or [None] * len(fit["samples"])
            for (x, v), se in zip(fit["samples"], errs):
                pred = fit["constant"] * x ** fit["exponent"]
                w.writerow([name, label, repr(float(x)), repr(float(v)), "" if se is None else repr(float(se)),
                            repr(float(pred)), f"{v / pred - 1:.6e}"])
    for label, fit in sorted(report.trends.get("fits", {}).items()):
        for x, v in fit["samples"]:
            pred = fit["constant"] * x ** fit["exponent"]
            w.writerow(["pipeline", label, repr(float(x)), repr(float(v)), "", repr(float(pred)),
                        f"{v / pred - 1:.6e}"])
    for p in report.points:
        for key in ("v_norm", "offset_norm", "residual_norm"):
            if key in p:
                w.writerow(["pipeline_point", key, repr(float(p["eps"])), repr(float(p[key])), "", "", ""])
    return buf.getvalue()


def constants_table_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "n", "beta", "value", "method", "cross_check", "rel_dev"])
    for r in report.constants:
        w.writerow([r["name"], r["n"], r["beta"], repr(float(r["value"])), r["method"], repr(float(r["cross_check"])),
                    f"{r['rel_dev']:.3e}"])
    return buf.getvalue()


def emit_report(report: RunReport, paths: dict) -> dict:
    """Write report JSON, sweep CSV and constants CSV atomically; return the written paths."""
    payload = {
        "report": report_json(report),
        "sweeps": sweeps_csv(report),
        "constants": constants_table_csv(report),
    }
    pending = []
    try:
        for key, text in payload.items():
            if paths.get(key) is None:
                continue
            target = Path(paths[key])
            target.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
            pending.append((key, tmp, target))
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
        written = {}
        for key, tmp, target in pending:
            os.replace(tmp, target)
            written[key] = target
        pending.clear()
    finally:
        for _, tmp, _ in pending:
            try:
                os.unlink(tmp)
            except OSError:
                pass
    return {k: str(v) for k, v in written.items()}


def load_report(path) -> RunReport:
    return RunReport.from_dict(json.loads(Path(path).read_text()))


# --- stages ----------------------------------------------------------------------

def constants_rows(n: int, betas, spec: QuadratureSpec) -> list:
    return constants_table(n, betas, spec, cached_interaction_constants(n, spec))


def pure_profile(profile: KProfile) -> KProfile:
    """The same profile with the local model extended to all of space."""
    return KProfile(profile.z, profile.a, profile.beta, profile.sigma, profile.k0, r0=1e3)


def run_verifiers(config: RunConfig, names=VERIFIERS) -> dict:
    from . import expansion as ex

    n = config.n
    spec = config.quadrature
    profiles = config.profiles
    out = {}
    linear = None
    for name in names:
        if name not in VERIFIERS:
            raise ValueError(f"unknown verifier {name!r}; choose from {', '.join(VERIFIERS)}")
        if name in ("a1", "a2", "a6", "a7"):
            if linear is None:
                linear = ex.verify_linear_bounds(n, profiles, spec=spec)
            v = linear[name]
        elif name == "a3":
            v = ex.verify_energy_balance(n, profiles, spec=spec)
        elif name == "a4":
            v = ex.verify_lemma_a4(n, profiles, spec=spec)
        elif name == "a5":
            v = ex.verify_lemma_a5(n, spec=spec)
        elif name == "b1":
            v = ex.verify_lemma_b1(n, pure_profile(profiles[0]), spec=spec)
        elif name == "b2":
            v = ex.verify_lemma_b2(n, spec=spec)
        elif name == "b3":
            v = ex.verify_lemma_b3(n, pure_profile(profiles[0]), spec=spec)
        else:
            v = ex.verify_lemma_b4(n, spec=spec)
        out[name] = _jsonable(v.to_dict())
    return out


def reduced_stage(config: RunConfig, model) -> dict:
    """Root of the balance map, its certificate and the degree of the reduced map."""
    n = config.n
    beta = tuple(p.beta for p in config.profiles)
    root = solve_reduced(model.mk, beta, n, (config.gamma1, config.gamma2))
    t = root.t
    box = ((t[0] / 4, t[0] * 4), (t[1] / 4, t[1] * 4))
    gdeg = brouwer_degree(lambda s: g_map(s, model.mk, beta, n), box)
    eps = max(config.eps_list) if config.eps_list else 1e-2
    system = ReducedSystem(n, config.profiles, eps, model, "model")
    vec = np.concatenate([t, np.zeros(2 * n)])
    odeg = offset_block_degree(system, vec, radius=config.delta_box)
    return {
        "m": list(model.mk),
        "beta": list(beta),
        "root": root.to_dict(),
        "degree": {
            "scale_box": [list(b) for b in box],
            "scale": gdeg.degree,
            "scale_winding": gdeg.total_winding,
            "scale_min_norm": gdeg.min_norm,
            "offset": odeg.degree,
            "offset_winding": odeg.total_winding,
            "product": gdeg.degree * odeg.degree,
        },
    }


def solve_point(config: RunConfig, eps: float, model) -> dict:
    """Construct the solution at one ``eps`` and summarise it."""
    n = config.n
    res = solve_full_reduced(n, config.profiles, eps, config.source, model, config.quadrature, config.dictionary,
                             (config.gamma1, config.gamma2))
    sp, sol = res.space, res.solution
    if sol is None:
        from .galerkin import build_space, solve_correction

        sp = build_space(n, res.centers, res.lams, config.dictionary, config.quadrature)
        sol = solve_correction(sp, eps, config.K)
    u = solution_u(sp, sol)
    pos = positivity_check(u, n, res.centers, res.lams, config.quadrature)
    A = a_closed_form(n)
    offsets = [float(np.linalg.norm(res.centers[k] - config.profiles[k].z)) for k in range(2)]
    return {
        "eps": float(eps),
        "t": res.t.tolist(),
        "x": res.x.tolist(),
        "lams": list(res.lams),
        "centers": [c.tolist() for c in res.centers],
        "offsets": offsets,
        "offset_norm": max(offsets),
        "alpha": list(sol.alpha),
        "alpha_hat": list(sol.alpha_hat),
        "alpha_bar": list(sol.alpha_bar),
        "alpha_bar_bound": 2.0 * sol.omega_norm / math.sqrt(A),
        "v_norm": sol.v_norm,
        "omega_norm": sol.omega_norm,
        "f_norm": sol.f_norm,
        "qinv_norm": sol.qinv_norm,
        "iterations": sol.iterations,
        "residual_norm": sol.residual_norm,
        "reduced_residual": res.residual,
        "reduced_iterations": res.iterations,
        "multipliers": {k: np.ravel(v).tolist() for k, v in sol.multipliers.items() if k != "mu"},
        "positivity": pos.to_dict(),
    }


def _decreasing(seq, slack: float = 0.0) -> bool:
    return all(b < a * (1.0 + slack) for a, b in zip(seq, seq[1:]))


def trend_checks(points: list) -> dict:
    """Limits along the sweep ordered by decreasing ``eps``."""
    pts = sorted(points, key=lambda p: -p["eps"])
    out = {"checks": {}, "fits": {}, "values": {}}
    if len(pts) < 2:
        return out
    c = out["checks"]
    c["v_norm_strictly_decreasing"] = _decreasing([p["v_norm"] for p in pts])
    c["offsets_decreasing"] = _decreasing([p["offset_norm"] for p in pts], 0.1)
    for j in range(2):
        c[f"alpha_{j}_to_one"] = _decreasing([abs(p["alpha"][j] - 1.0) + 1e-15 for p in pts], 0.1)
        c[f"lam_{j}_increasing"] = all(b["lams"][j] > a["lams"][j] for a, b in zip(pts, pts[1:]))
        c[f"alpha_{j}_near_alpha_hat"] = all(abs(p["alpha_bar"][j]) <= p["alpha_bar_bound"] + 1e-15 for p in pts)
    c["positivity_all"] = all(p["positivity"]["passed"] for p in pts)
    if len(pts) >= 3:
        for j in range(2):
            samples = sorted((p["eps"], p["lams"][j]) for p in pts)
            if len(samples) >= 4:
                fit = fit_power_law(samples)
                slope = fit.exponent
                out["fits"][f"lam_{j}"] = _jsonable(fit.to_dict())
            else:
                x = np.log([s[0] for s in samples])
                y = np.log([s[1] for s in samples])
                slope = float(np.polyfit(x, y, 1)[0])
            out["values"][f"lam_{j}_slope"] = slope
            c[f"lam_{j}_slope"] = abs(slope + 2.0) <= 0.2 if pts[0]["lams"] else False
    return out


def run_pipeline(config: RunConfig, verify=(), progress: Optional[Callable[[str], None]] = None) -> RunReport:
    """Constants, optional estimate verifiers, reduced root and degree, then one solve per ``eps``."""
    say = progress or (lambda msg: log.info(msg))
    report = RunReport(config=config.to_dict())
    t0 = time.perf_counter()
    n = config.n
    spec = config.quadrature
    betas = [p.beta for p in config.profiles]
    report.constants = _jsonable(constants_rows(n, betas, spec))
    report.timing["constants"] = time.perf_counter() - t0
    if verify:
        t1 = time.perf_counter()
        say(f"verifying {', '.join(verify)}")
        report.verdicts = run_verifiers(config, verify)
        report.timing["verify"] = time.perf_counter() - t1
    ic = cached_interaction_constants(n, spec)
    model = expansion_model(n, config.profiles, spec, ic.c0, ic.c1)
    try:
        report.reduced = _jsonable(reduced_stage(config, model))
    except ReducedError as exc:
        report.failures.append({"stage": "reduced", "error": str(exc), "trace": _jsonable(exc.trace)})
    for eps in sorted(config.eps_list, reverse=True):
        t1 = time.perf_counter()
        say(f"eps = {eps:g}")
        try:
            report.points.append(_jsonable(solve_point(config, eps, model)))
        except (ReducedError, GalerkinError, np.linalg.LinAlgError) as exc:
            trace = getattr(exc, "trace", [])
            report.failures.append({"stage": f"eps={eps!r}", "error": str(exc), "trace": _jsonable(trace)})
        report.timing[f"eps={eps:g}"] = time.perf_counter() - t1
    report.trends = _jsonable(trend_checks(report.points))
    report.timing["total"] = time.perf_counter() - t0
    return report
