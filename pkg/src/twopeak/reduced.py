"""The reduced two-scale problem: scale law, balance map, roots and degrees."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bubble import as_dimension


class ReducedError(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class DegreeUndefined(ReducedError):
    pass


def _half(dim) -> float:
    return (as_dimension(dim).n - 4) / 2.0


def l_eps_exponent(beta1: float, beta2: float, dim) -> float:
    h = _half(dim)
    den = beta1 * beta2 - h * (beta1 + beta2)
    if abs(den) <= 1e-14 * max(1.0, beta1 * beta2):
        raise ReducedError("degenerate balance")
    return beta1 * beta2 / den


def l_eps(eps: float, beta1: float, beta2: float, dim) -> float:
    """Scale law ``L_eps = eps^(b1 b2 / (b1 b2 - (n-4)(b1+b2)/2))``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return float(eps ** l_eps_exponent(beta1, beta2, dim))


def scales_from_t(t, eps: float, beta, dim) -> tuple:
    L = l_eps(eps, beta[0], beta[1], dim)
    return tuple(float(tk * L ** (1.0 / bk)) for tk, bk in zip(t, beta))


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if t.shape != (2,) or np.any(~(t > 0)):
        raise ValueError("t must be a pair of positive reals")
    return t


def g_map(t, m, beta, dim) -> np.ndarray:
    """``g_k = t_k^(-b_k) - m_k (t1 t2)^(-(n-4)/2)``."""
    t = _check_t(t)
    h = _half(dim)
    P = (t[0] * t[1]) ** (-h)
    return np.array([t[k] ** (-beta[k]) - m[k] * P for k in range(2)])


def jac_g(t, m, beta, dim):
    """Closed-form Jacobian of ``g_map`` and its determinant."""
    t = _check_t(t)
    h = _half(dim)
    P = (t[0] * t[1]) ** (-h)
    J = np.empty((2, 2))
    for k in range(2):
        for j in range(2):
            J[k, j] = h * m[k] * P / t[j]
        J[k, k] -= beta[k] * t[k] ** (-beta[k] - 1)
    return J, float(np.linalg.det(J))


def root_determinant(t, m, beta, dim) -> float:
    """Determinant at a root: ``(b1 b2 - (b1+b2)(n-4)/2) m1 m2 / (t1 t2)^(n-3)``."""
    n = as_dimension(dim).n
    h = _half(dim)
    return float((beta[0] * beta[1] - (beta[0] + beta[1]) * h) * m[0] * m[1] / (t[0] * t[1]) ** (n - 3))


def closed_form_root(m, beta, dim) -> np.ndarray:
    """Root for equal exponents by the ratio substitution ``t1/t2 = (m1/m2)^(-1/b)``."""
    if not math.isclose(beta[0], beta[1]):
        raise ValueError("closed form needs equal exponents")
    b = beta[0]
    h = _half(dim)
    if math.isclose(2 * h, b):
        raise ReducedError("degenerate balance")
    q = (m[0] / m[1]) ** (-1.0 / b)
    t1 = (m[0] * q**h) ** (1.0 / (2 * h - b))
    return np.array([t1, t1 / q])


@dataclass
class ReducedRoot:
    t: np.ndarray
    residual: float
    jacobian: np.ndarray
    det: float
    det_formula: float
    iterations: int
    uniqueness: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "t": self.t.tolist(),
            "residual": self.residual,
            "det": self.det,
            "det_formula": self.det_formula,
            "iterations": self.iterations,
            "uniqueness": self.uniqueness,
        }


def _newton_log(fun, jac, t0, tol=1e-13, max_iter=100, scale=None):
    """Newton in ``log t`` with backtracking on the residual norm.

    ``scale(t)`` gives the size of the terms in each component; the residual
    is measured relative to it, which keeps the stopping rule meaningful when
    the root sits at large ``t``.
    """
    size = (lambda r, t: float(np.max(np.abs(r / scale(t))))) if scale else (lambda r, t: float(np.max(np.abs(r))))
    u = np.log(np.asarray(t0, dtype=float))
    r = fun(np.exp(u))
    trace = [size(r, np.exp(u))]
    for it in range(1, max_iter + 1):
        if trace[-1] <= tol:
            return np.exp(u), it - 1, trace
        t = np.exp(u)
        J = jac(t) * t[None, :]
        step = np.linalg.solve(J, -r)
        s = 1.0
        while True:
            nu = u + s * step
            nr = fun(np.exp(nu))
            if size(nr, np.exp(nu)) < trace[-1] or s < 1e-8:
                break
            s *= 0.5
        u, r = nu, nr
        trace.append(size(r, np.exp(u)))
    raise ReducedError("Newton did not converge", trace)


def solve_reduced(m, beta, dim, box=(0.01, 1000.0), grid: int = 64, tol: float = 1e-12) -> ReducedRoot:
    """Root of ``g`` in ``box x box`` with a grid-scan uniqueness certificate."""
    g1, g2 = float(box[0]), float(box[1])
    if not 0 < g1 < g2:
        raise ValueError("box must satisfy 0 < gamma1 < gamma2")
    fun = lambda t: g_map(t, m, beta, dim)
    jac = lambda t: jac_g(t, m, beta, dim)[0]
    b = 0.5 * (beta[0] + beta[1])
    h = _half(dim)
    mm = math.sqrt(m[0] * m[1])
    t0 = mm ** (1.0 / (2 * h - b)) if not math.isclose(2 * h, b) else math.sqrt(g1 * g2)
    t0 = min(max(t0, g1), g2)
    scale = lambda t: np.asarray(t, dtype=float) ** -np.asarray(beta, dtype=float)
    t, its, _ = _newton_log(fun, jac, (t0, t0), tol=1e-14, scale=scale)
    if np.any(t < g1) or np.any(t > g2):
        raise ReducedError(f"no root in box: Newton landed at {t.tolist()}")
    J, det = jac_g(t, m, beta, dim)
    uniq = uniqueness_scan(fun, jac, (g1, g2), grid, scale)
    roots = uniq["roots"]
    if len(roots) != 1:
        raise ReducedError(f"expected exactly one root cell, found {len(roots)}", uniq)
    return ReducedRoot(t, float(np.max(np.abs(fun(t)))), J, det, root_determinant(t, m, beta, dim), its, uniq)


def uniqueness_scan(fun, jac, box, grid: int = 64, scale=None) -> dict:
    """Scan a log-spaced grid for cells where both components change sign, then polish each by Newton."""
    g1, g2 = box
    ax = np.geomspace(g1, g2, grid + 1)
    vals = np.array([[fun(np.array([a, b])) for b in ax] for a in ax])
    cells = []
    for i in range(grid):
        for j in range(grid):
            c = vals[i:i + 2, j:j + 2].reshape(4, 2)
            if np.ptp(np.sign(c[:, 0])) > 0 and np.ptp(np.sign(c[:, 1])) > 0:
                cells.append((i, j))
    roots = []
    for i, j in cells:
        start = (math.sqrt(ax[i] * ax[i + 1]), math.sqrt(ax[j] * ax[j + 1]))
        try:
            r, _, _ = _newton_log(fun, jac, start, tol=1e-14 if scale else 1e-13, scale=scale)
        except (ReducedError, np.linalg.LinAlgError):
            continue
        if np.all(r >= g1) and np.all(r <= g2) and not any(np.allclose(r, q, rtol=1e-7) for q in roots):
            roots.append(r)
    return {"grid": grid, "box": [g1, g2], "cells": [list(c) for c in cells],
            "roots": [r.tolist() for r in roots]}


# --- degree ---------------------------------------------------------------------

@dataclass
class DegreeResult:
    degree: int
    certificate: list
    total_winding: float
    min_norm: float

    def to_dict(self) -> dict:
        return {"degree": self.degree, "total_winding": self.total_winding, "min_norm": self.min_norm,
                "certificate": self.certificate}


def _angle(a, b) -> float:
    return math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])


def brouwer_degree(fmap: Callable, box, grid_res: int = 64, zero_tol: float = 1e-12,
                   max_depth: int = 20) -> DegreeResult:
    """Winding number of ``fmap`` along the counter-clockwise boundary of ``box``.

    ``box = ((x0, x1), (y0, y1))``.  A segment whose angular increment exceeds
    pi/2 is bisected until it does not.
    """
    (x0, x1), (y0, y1) = box
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
    pts = []
    for (ax, ay), (bx, by) in zip(corners, corners[1:]):
        for s in np.linspace(0.0, 1.0, grid_res, endpoint=False):
            pts.append((ax + s * (bx - ax), ay + s * (by - ay)))
    pts.append(corners[-1])
    f = lambda p: np.asarray(fmap(np.array(p, dtype=float)), dtype=float)
    vals = [f(p) for p in pts]
    scale = max(float(np.max([np.linalg.norm(v) for v in vals])), 1e-300)
    min_norm = [min(float(np.linalg.norm(v)) for v in vals)]
    cert = []

    def walk(p, q, fp, fq, depth):
        d = _angle(fp, fq)
        if abs(d) > math.pi / 2 and depth < max_depth:
            mid = (0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]))
            fm = f(mid)
            min_norm[0] = min(min_norm[0], float(np.linalg.norm(fm)))
            return walk(p, mid, fp, fm, depth + 1) + walk(mid, q, fm, fq, depth + 1)
        cert.append({"point": [float(p[0]), float(p[1])], "value": [float(fp[0]), float(fp[1])],
                     "increment": float(d)})
        return d

    total = 0.0
    for p, q, fp, fq in zip(pts, pts[1:], vals, vals[1:]):
        total += walk(p, q, fp, fq, 0)
    if min_norm[0] <= zero_tol * scale:
        raise DegreeUndefined("degree undefined on this box")
    deg = int(round(total / (2 * math.pi)))
    if abs(total / (2 * math.pi) - deg) > 1e-6:
        raise DegreeUndefined(f"winding {total / (2 * math.pi)} is not an integer; refine the boundary")
    return DegreeResult(deg, cert, float(total), float(min_norm[0]))


def g_degree(m, beta, dim, box=((0.25, 4.0), (0.25, 4.0)), grid_res: int = 64) -> DegreeResult:
    return brouwer_degree(lambda t: g_map(t, m, beta, dim), box, grid_res)


# --- the full reduced system ------------------------------------------------------

@dataclass
class FullReducedResult:
    source: str
    eps: float
    t: np.ndarray
    x: np.ndarray
    lams: tuple
    centers: tuple
    residual: float
    iterations: int
    trace: list
    space: object = field(default=None, repr=False)
    solution: object = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "eps": self.eps,
            "t": self.t.tolist(),
            "x": self.x.tolist(),
            "lams": list(self.lams),
            "centers": [c.tolist() for c in self.centers],
            "residual": self.residual,
            "iterations": self.iterations,
            "trace": list(self.trace),
        }


class ReducedSystem:
    """Rescaled reduced equations in the unknowns ``(t, x)``.

    ``lam_k = t_k L_eps^(1/b_k)`` and ``y^k = z^k + x^k / lam_k``.  The scale
    equations are normalised so that the model source reproduces ``g_map``
    exactly; the offset equations so that their linear part is ``-a^k * x^k``.
    """

    def __init__(self, dim, profiles, eps: float, model, source: str = "model", spec=None, dict_spec=None):
        if source not in ("model", "full"):
            raise ValueError("source must be 'model' or 'full'")
        self.dim = as_dimension(dim)
        self.profiles = profiles
        self.eps = float(eps)
        self.model = model
        self.source = source
        self.spec = spec
        self.dict_spec = dict_spec
        self.beta = tuple(p.beta for p in profiles)
        self.L = l_eps(eps, self.beta[0], self.beta[1], self.dim)
        self.last = None

    def unpack(self, vec):
        n = self.dim.n
        t = np.asarray(vec[:2], dtype=float)
        x = np.asarray(vec[2:], dtype=float).reshape(2, n)
        lams = tuple(float(t[k] * self.L ** (1.0 / self.beta[k])) for k in range(2))
        ys = tuple(self.profiles[k].z + x[k] / lams[k] for k in range(2))
        return t, x, lams, ys

    def gradients(self, lams, ys):
        if self.source == "model":
            md = self.model
            dl = np.array([md.dlam(k, self.eps, lams) for k in range(2)])
            dy = np.array([md.dy(k, self.eps, lams, ys[k] - self.profiles[k].z, self.profiles[k].a, ys[k] - ys[1 - k])
                           for k in range(2)])
            return dl, dy
        from .galerkin import build_space, reduced_gradients, solve_correction
        from .bubble import TwoPeakK
        from .galerkin import DictSpec
        from .integrate import QuadratureSpec

        K = TwoPeakK(self.profiles)
        sp = build_space(self.dim, ys, lams, self.dict_spec or DictSpec(), self.spec or QuadratureSpec())
        sol = solve_correction(sp, self.eps, K)
        rg = reduced_gradients(sp, sol, self.eps, K)
        self.last = (sp, sol)
        return rg.dlam, rg.dy

    def residual(self, vec) -> np.ndarray:
        t, x, lams, ys = self.unpack(vec)
        dl, dy = self.gradients(lams, ys)
        md = self.model
        out = []
        for k in range(2):
            b = self.beta[k]
            out.append(-t[k] ** (-b) * dl[k] * lams[k] ** (b + 1) / (self.eps * md.c_n_beta[k] * abs(md.a_sums[k])))
        for k in range(2):
            b = self.beta[k]
            out.extend(dy[k] * lams[k] ** (b - 1) / (self.eps * md.d_n_beta[k]))
        return np.array(out)


def _model_jacobian(system: ReducedSystem, vec, h=1e-6) -> np.ndarray:
    model_sys = ReducedSystem(system.dim, system.profiles, system.eps, system.model, "model")
    size = vec.size
    J = np.empty((size, size))
    for i in range(size):
        e = np.zeros(size)
        step = h * max(1.0, abs(vec[i]))
        e[i] = step
        J[:, i] = (model_sys.residual(vec + e) - model_sys.residual(vec - e)) / (2 * step)
    return J


def solve_full_reduced(dim, profiles, eps: float, source: str = "model", model=None, spec=None, dict_spec=None,
                       box=(0.01, 1000.0), tol: Optional[float] = None, max_iter: int = 30) -> FullReducedResult:
    """Solve the ``2n + 2`` rescaled equations for ``(t, x)``.

    Newton on the model source; chord iterations (model Jacobian, full
    residual) on the full source.  Starts from the model root.
    """
    from .constants import cached_interaction_constants, expansion_model
    from .integrate import QuadratureSpec

    dim = as_dimension(dim)
    if model is None:
        ic = cached_interaction_constants(dim.n, spec or QuadratureSpec())
        model = expansion_model(dim, profiles, spec or QuadratureSpec(), ic.c0, ic.c1)
    beta = tuple(p.beta for p in profiles)
    root = solve_reduced(model.mk, beta, dim, box)
    vec = np.concatenate([root.t, np.zeros(2 * dim.n)])
    system = ReducedSystem(dim, profiles, eps, model, source, spec, dict_spec)
    tol = tol if tol is not None else (1e-10 if source == "model" else 1e-8)
    trace = []
    growth = 0
    for it in range(max_iter + 1):
        r = system.residual(vec)
        rn = float(np.max(np.abs(r)))
        trace.append(rn)
        if rn <= tol:
            break
        if len(trace) > 1 and rn > trace[-2]:
            growth += 1
            if growth >= 3:
                raise ReducedError("reduced Newton diverges", trace)
        else:
            growth = 0
        J = _model_jacobian(system, vec)
        vec = vec - np.linalg.solve(J, r)
        if np.any(vec[:2] <= 0):
            raise ReducedError("reduced Newton left the positive quadrant", trace)
    else:
        raise ReducedError("reduced Newton did not converge", trace)
    t, x, lams, ys = system.unpack(vec)
    sp, sol = system.last if system.last is not None else (None, None)
    return FullReducedResult(source, float(eps), t, x, lams, ys, trace[-1], len(trace) - 1, trace, sp, sol)


def offset_block_degree(system: ReducedSystem, vec, radius: float = 0.5, axis: int = 0,
                        grid_res: int = 16) -> DegreeResult:
    """Degree of the offset equations on the ``(x^1_axis, x^2_axis)`` plane around ``vec``.

    The remaining offset coordinates enter through a positive diagonal, so
    the block degree equals this planar degree.
    """
    n = system.dim.n
    i1, i2 = 2 + axis, 2 + n + axis

    def fm(p):
        v = np.array(vec, dtype=float)
        v[i1] += p[0]
        v[i2] += p[1]
        r = system.residual(v)
        return np.array([r[i1], r[i2]])

    return brouwer_degree(fm, ((-radius, radius), (-radius, radius)), grid_res)


def scale_block_degree(system: ReducedSystem, vec, box=((0.25, 4.0), (0.25, 4.0)), grid_res: int = 16,
                       relative: bool = False) -> DegreeResult:
    """Degree of the scale equations in ``t`` with the offsets frozen at ``vec``.

    With ``relative`` the box is taken in units of the current ``t``.
    """

    def fm(p):
        v = np.array(vec, dtype=float)
        v[0], v[1] = (p[0] * vec[0], p[1] * vec[1]) if relative else (p[0], p[1])
        return system.residual(v)[:2]

    return brouwer_degree(fm, box, grid_res)
