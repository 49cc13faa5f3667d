"""Quadrature engines for bubble integrals on R^n.

Three deterministic/stochastic engines cover everything the toolkit needs:

* ``integrate_radial``: radial integrals on [0, inf) under the algebraic map
  ``r = s t / (1 - t)`` with Gauss-Legendre nodes in ``t``.
* ``two_center_rule`` / ``integrate_two_center``: integrands that depend on
  ``x`` only through the distances to two centres (plus, for callers that
  reduce transverse moments themselves, the axial coordinate).
* ``integrate_mc`` / ``symmetric_cloud``: importance sampling from a mixture of
  bubble densities for anisotropic integrands.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

from ._validation import as_point, check_positive, unit
from .bubble import as_dimension


class ConvergenceError(RuntimeError):
    """Raised when a refinement step changes a deterministic result by more than rel_tol."""


class PrecisionWarning(UserWarning):
    """Monte Carlo standard error above the requested relative precision."""


@dataclass(frozen=True)
class QuadratureSpec:
    radial_nodes: int = 64
    map_scale: float = 1.0
    transverse_nodes: int = 32
    mc_samples: int = 2**17
    seed: int = 20240607
    rel_tol: float = 1e-8
    mc_rel_tol: float = 0.05

    def __post_init__(self):
        if self.radial_nodes < 8 or self.transverse_nodes < 8:
            raise ValueError("node counts must be at least 8")
        if not 0 < self.rel_tol < 1 or not 0 < self.mc_rel_tol < 1:
            raise ValueError("relative tolerances must lie in (0, 1)")
        check_positive("map_scale", self.map_scale)
        if self.mc_samples < 16:
            raise ValueError("need at least 16 Monte Carlo samples")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def panel_nodes(self) -> int:
        return max(8, self.radial_nodes // 4)

    def refined(self) -> "QuadratureSpec":
        return replace(self, radial_nodes=2 * self.radial_nodes, transverse_nodes=2 * self.transverse_nodes)


def sphere_area(k: int) -> float:
    """Surface area of the unit sphere S^(k-1) in R^k."""
    return 2.0 * math.pi ** (k / 2.0) / math.gamma(k / 2.0)


def sphere_moment(dim, beta: float) -> float:
    """E|w_1|^beta for w uniform on the unit sphere of R^n."""
    n = as_dimension(dim).n if not isinstance(dim, int) else dim
    if not beta > -1:
        raise ValueError(f"sphere moment needs beta > -1, got {beta}")
    lg = special.gammaln
    return float(np.exp(lg((beta + 1) / 2) + lg(n / 2) - lg(0.5) - lg((n + beta) / 2)))


@lru_cache(maxsize=64)
def _gauss_legendre01(k: int):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def _gauss_jacobi(k: int, n: int):
    a = 0.5 * (n - 3)
    x, w = special.roots_jacobi(k, a, a)
    return x, w


def radial_rule(n: int, nodes: int, scale: float, breaks: Sequence[float] = ()):
    """Nodes ``r`` and weights (including ``r^(n-1)``) for integrals over [0, inf)."""
    cuts = sorted(b / (b + scale) for b in breaks if b > 0)
    edges = [0.0, *cuts, 1.0]
    t01, w01 = _gauss_legendre01(nodes)
    ts, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        ts.append(lo + (hi - lo) * t01)
        ws.append((hi - lo) * w01)
    t = np.concatenate(ts)
    wt = np.concatenate(ws)
    r = scale * t / (1.0 - t)
    w = wt * scale / (1.0 - t) ** 2 * r ** (n - 1)
    return r, w


def integrate_radial(f: Callable, dim, spec: QuadratureSpec = QuadratureSpec(), breaks: Sequence[float] = (),
                     check: bool = True) -> float:
    """Integrate ``f(r) r^(n-1)`` over [0, inf).

    ``breaks`` are radii where ``f`` has a kink; the Gauss panels are split
    there.  With ``check`` the rule is repeated at twice the node count and a
    ``ConvergenceError`` is raised if the two results differ by more than
    ``rel_tol`` times the integral of ``|f| r^(n-1)``.
    """
    n = as_dimension(dim).n
    r, w = radial_rule(n, spec.radial_nodes, spec.map_scale, breaks)
    vals = np.asarray(f(r), dtype=float)
    coarse = float(vals @ w)
    if not check:
        return coarse
    r2, w2 = radial_rule(n, 2 * spec.radial_nodes, spec.map_scale, breaks)
    vals2 = np.asarray(f(r2), dtype=float)
    fine = float(vals2 @ w2)
    scale = float(np.abs(vals2) @ w2)
    if abs(fine - coarse) > spec.rel_tol * max(scale, np.finfo(float).tiny):
        raise ConvergenceError(
            f"radial quadrature not converged: {coarse!r} vs {fine!r} (scale {scale:.3e})"
        )
    return fine


@dataclass(frozen=True)
class TwoCenterRule:
    """Cubature nodes for integrands that are axially symmetric about ``c1 -> c2``.

    ``s`` is the axial coordinate measured from ``c1`` along ``axis``, ``rho``
    the distance from the axis.  The weights already contain the area of the
    transverse sphere S^(n-2), so an integrand that depends on the transverse
    direction must be averaged over it by the caller.
    """

    n: int
    c1: np.ndarray
    c2: np.ndarray
    axis: np.ndarray
    d: float
    s: np.ndarray
    rho: np.ndarray
    w: np.ndarray
    scales: tuple = (1.0, 1.0)

    def first_share(self) -> np.ndarray:
        """Partition-of-unity weight of the first centre at each node."""
        if self.d == 0.0:
            return np.ones_like(self.s)
        return partition_weight(self.r1, self.r2, self.scales, self.n)

    @property
    def r1(self) -> np.ndarray:
        return np.hypot(self.s, self.rho)

    @property
    def r2(self) -> np.ndarray:
        return np.hypot(self.s - self.d, self.rho)

    def integrate(self, values) -> float:
        return float(np.asarray(values) @ self.w)

    def points(self, direction=None) -> np.ndarray:
        """Embed the nodes in R^n using one transverse direction."""
        if direction is None:
            direction = _orthogonal_to(self.axis)
        return self.c1 + np.outer(self.s, self.axis) + np.outer(self.rho, direction)


def _orthogonal_to(e: np.ndarray) -> np.ndarray:
    k = int(np.argmin(np.abs(e)))
    v = np.zeros_like(e)
    v[k] = 1.0
    v -= (v @ e) * e
    return unit(v)


def partition_weight(r1, r2, scales, n: int):
    """Smooth weight of the first centre in a two-centre partition of unity."""
    l1, l2 = scales
    a = np.log(l1**-2 + np.asarray(r1) ** 2)
    b = np.log(l2**-2 + np.asarray(r2) ** 2)
    # rho_j = (lam_j^-2 + r_j^2)^-n; weight rho_1 / (rho_1 + rho_2)
    return special.expit(n * (b - a))


def _polar_patch(n: int, scale: float, r_far: float, spec: QuadratureSpec):
    lo = math.log(math.exp(-8.0) / scale)
    hi = math.log(max(r_far, 1.0 / scale) * math.exp(14.0))
    panels = int(math.ceil(hi - lo))
    t01, w01 = _gauss_legendre01(spec.panel_nodes)
    h = (hi - lo) / panels
    u = (lo + h * (np.arange(panels)[:, None] + t01[None, :])).ravel()
    wu = np.tile(h * w01, panels)
    r = np.exp(u)
    wr = wu * r**n
    eta, weta = _gauss_jacobi(spec.transverse_nodes, n)
    rr = np.repeat(r, eta.size)
    ww = np.repeat(wr, eta.size) * np.tile(weta, r.size)
    ee = np.tile(eta, r.size)
    return rr * ee, rr * np.sqrt(1.0 - ee * ee), ww * sphere_area(n - 1)


def two_center_rule(c1, c2, dim, spec: QuadratureSpec = QuadratureSpec(), scales=(1.0, 1.0),
                    axis=None) -> TwoCenterRule:
    """Build the two-patch polar cubature.

    Each centre carries a polar patch (log-graded radial panels, Gauss-Jacobi
    in the polar angle); the integrand is split between them by the smooth
    partition of unity ``partition_weight``.  Coincident centres use a single
    patch, with ``axis`` (or the first coordinate axis) as the polar axis.
    """
    n = as_dimension(dim).n
    c1, c2 = as_point(c1), as_point(c2)
    l1, l2 = (check_positive("scale", s) for s in scales)
    delta = c2 - c1
    d = float(np.linalg.norm(delta))
    if d <= 1e-14 * max(1.0, float(np.linalg.norm(c1))):
        e = unit(axis) if axis is not None else np.eye(n)[0]
        s, rho, w = _polar_patch(n, max(l1, l2), 1.0 / min(l1, l2), spec)
        return TwoCenterRule(n, c1, c1.copy(), e, 0.0, s, rho, w, (l1, l2))
    e = delta / d
    s1, p1, w1 = _polar_patch(n, l1, d + 1.0 / l2, spec)
    s2, p2, w2 = _polar_patch(n, l2, d + 1.0 / l1, spec)
    s2 = s2 + d
    w1 = w1 * partition_weight(np.hypot(s1, p1), np.hypot(s1 - d, p1), (l1, l2), n)
    w2 = w2 * (1.0 - partition_weight(np.hypot(s2, p2), np.hypot(s2 - d, p2), (l1, l2), n))
    return TwoCenterRule(n, c1, c2, e, d, np.concatenate([s1, s2]), np.concatenate([p1, p2]),
                         np.concatenate([w1, w2]), (l1, l2))


def integrate_two_center(f: Callable, c1, c2, dim, spec: QuadratureSpec = QuadratureSpec(),
                         scales=(1.0, 1.0), check: bool = True) -> float:
    """Integrate ``f(r1, r2)`` over R^n, where ``r_j = |x - c_j|``."""
    rule = two_center_rule(c1, c2, dim, spec, scales)
    vals = np.asarray(f(rule.r1, rule.r2), dtype=float)
    value = rule.integrate(vals)
    if not check:
        return value
    fine_rule = two_center_rule(c1, c2, dim, spec.refined(), scales)
    fv = np.asarray(f(fine_rule.r1, fine_rule.r2), dtype=float)
    fine = fine_rule.integrate(fv)
    scale = fine_rule.integrate(np.abs(fv))
    if abs(fine - value) > spec.rel_tol * max(scale, np.finfo(float).tiny):
        raise ConvergenceError(f"two-centre quadrature not converged: {value!r} vs {fine!r}")
    return fine


# --- importance sampling -------------------------------------------------

def _bubble_density_norm(n: int) -> float:
    return sphere_area(n) * 0.5 * math.exp(special.betaln(n / 2, n / 2))


def mixture_density(x, centers, scales, mix=(0.5, 0.5)) -> np.ndarray:
    """Mixture of densities proportional to ``U_{c_j, lam_j}^(2*)``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    z = _bubble_density_norm(n)
    out = np.zeros(x.shape[:-1])
    for c, lam, pi in zip(centers, scales, mix):
        r2 = np.sum((x - np.asarray(c)) ** 2, axis=-1)
        out += pi * lam**n * (1.0 + lam * lam * r2) ** (-n) / z
    return out


def _sample_radii(n: int, u: np.ndarray) -> np.ndarray:
    b = stats.beta.ppf(u, n / 2, n / 2)
    return np.sqrt(b / (1.0 - b))


def _directions(rng, count: int, n: int) -> np.ndarray:
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def integrate_mc(f: Callable, dim, spec: QuadratureSpec = QuadratureSpec(), centers=None, scales=(1.0, 1.0),
                 mix=(0.5, 0.5)):
    """Importance-sampled estimate of the integral of ``f`` over R^n.

    Returns ``(value, standard_error)``.  Samples come from the 50/50 mixture
    of bubble densities at ``centers``; radii by inverse CDF, directions
    uniform.  A ``PrecisionWarning`` is emitted when the standard error
    exceeds ``mc_rel_tol * |value|``.
    """
    n = as_dimension(dim).n
    if centers is None:
        centers = (np.zeros(n), np.zeros(n))
    centers = [as_point(c) for c in centers]
    rng = np.random.default_rng(spec.seed)
    m = spec.mc_samples
    comp = rng.random(m) < mix[0]
    radii = _sample_radii(n, rng.random(m))
    dirs = _directions(rng, m, n)
    lam = np.where(comp, scales[0], scales[1])
    base = np.where(comp[:, None], centers[0], centers[1])
    x = base + (radii / lam)[:, None] * dirs
    ratio = np.asarray(f(x), dtype=float) / mixture_density(x, centers, scales, mix)
    value = float(np.mean(ratio))
    se = float(np.std(ratio, ddof=1) / math.sqrt(m))
    if se > spec.mc_rel_tol * abs(value):
        warnings.warn(f"Monte Carlo standard error {se:.3e} exceeds tolerance for value {value:.3e}",
                      PrecisionWarning, stacklevel=2)
    return value, se


@dataclass(frozen=True)
class Cloud:
    """Fixed weighted point set; ``sum(w * f(x))`` estimates the integral of ``f``."""

    x: np.ndarray
    w: np.ndarray
    component: np.ndarray
    group: np.ndarray

    def integrate(self, values) -> float:
        return float(np.asarray(values) @ self.w)

    def estimate(self, values):
        """``(value, standard_error)``; orbits are the independent units."""
        contrib = np.asarray(values, dtype=float) * self.w
        totals = np.bincount(self.group, weights=contrib)
        comp_of_group = np.bincount(self.group, weights=self.component) / np.bincount(self.group)
        var = 0.0
        for j in np.unique(self.component):
            t = totals[comp_of_group == j]
            if t.size > 1:
                var += t.size * np.var(t, ddof=1)
        return float(totals.sum()), float(np.sqrt(var))


def _sign_patterns(n: int) -> np.ndarray:
    k = np.arange(2**n)[:, None]
    return 1.0 - 2.0 * ((k >> np.arange(n)) & 1)


def symmetric_cloud(dim, centers, scales, spec: QuadratureSpec = QuadratureSpec()) -> Cloud:
    """Importance cloud closed under coordinate reflections about each centre.

    Each mixture component gets the same number of base samples with
    stratified radii (one per quantile stratum) and uniform directions; every
    base sample is expanded to its orbit under the 2^n coordinate sign flips.
    The estimator stays unbiased for the 50/50 mixture, and integrands that
    are odd in a coordinate about a centre integrate to exactly zero there.
    """
    n = as_dimension(dim).n
    centers = [as_point(c) for c in centers]
    flips = _sign_patterns(n)
    n_base = max(32, spec.mc_samples // (len(centers) * flips.shape[0]))
    rng = np.random.default_rng(spec.seed)
    xs, comps, groups = [], [], []
    for j, (c, lam) in enumerate(zip(centers, scales)):
        u = (np.arange(n_base) + rng.random(n_base)) / n_base
        xi = _sample_radii(n, u)[:, None] * _directions(rng, n_base, n)
        orbit = (xi[:, None, :] * flips[None, :, :]).reshape(-1, n)
        xs.append(c + orbit / lam)
        comps.append(np.full(orbit.shape[0], j))
        groups.append(j * n_base + np.repeat(np.arange(n_base), flips.shape[0]))
    x = np.concatenate(xs)
    q = mixture_density(x, centers, scales, [1.0 / len(centers)] * len(centers))
    return Cloud(x, 1.0 / (x.shape[0] * q), np.concatenate(comps), np.concatenate(groups))
