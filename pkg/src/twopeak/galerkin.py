"""Finite-dimensional Lyapunov-Schmidt reduction on a bubble dictionary.

The correction space orthogonal to both bubbles and their scale/centre
derivatives is discretised by a dictionary of bubbles and bubble derivatives
at a few scales around each concentration.  Inner products use
``<phi, psi> = int Delta^2(phi) psi`` with the bilaplacian images known in
closed form (``Delta^2 U = U^p`` and its parameter derivatives).

Integrals split into

* a deterministic part on the two-centre polar cubature, with ``K`` frozen to
  its critical values (blended by the cubature's partition of unity), and
* the anisotropic remainder ``eps (K - K_c)`` and everything nonlinear in the
  correction, on a reflection-symmetric importance cloud.

Differences that would cancel at the size of ``A`` are never formed: the
self-interaction terms are rewritten algebraically and interaction powers go
through ``power_diff``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from ._stable import power_diff, power_remainder
from ._validation import as_point
from .bubble import ConstantK, KProfile, TwoPeakK, as_dimension
from .constants import radial_dlam, radial_dy_factor, radial_value
from .integrate import Cloud, QuadratureSpec, partition_weight, symmetric_cloud, two_center_rule


class GalerkinError(RuntimeError):
    pass


class DivergenceError(GalerkinError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class DictSpec:
    value_scales: tuple = (0.5, 2**-0.5, 1.0, 2**0.5, 2.0)
    dlam_scales: tuple = (1.0,)
    dy_scales: tuple = (2**-0.5, 1.0, 2**0.5)
    cond_max: float = 1e12

    def __post_init__(self):
        for name in ("value_scales", "dlam_scales", "dy_scales"):
            vals = getattr(self, name)
            if 1.0 not in vals:
                raise ValueError(f"{name} must contain the unit scale (the constraint functions)")
            if any(s <= 0 for s in vals):
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Entry:
    bubble: int
    factor: float
    tag: str
    axis: int = -1

    def label(self) -> str:
        ax = f"{self.axis}" if self.tag == "dy" else ""
        return f"b{self.bubble}:{self.tag}{ax}@{self.factor:.6g}"


# --- pointwise evaluation ------------------------------------------------------

def _eval(dim, tag, axis, center, mu, X, image):
    d = X - center
    r = np.sqrt(np.einsum("...i,...i->...", d, d))
    u = radial_value(dim, mu, r)
    if tag == "value":
        f = u
    elif tag == "dlam":
        f = radial_dlam(dim, mu, r)
    else:
        f = radial_dy_factor(dim, mu, r) * d[..., axis]
    if not image:
        return f
    if tag == "value":
        return u**dim.p
    return dim.p * u ** (dim.p - 1) * f


@dataclass(frozen=True)
class _NodeFunctions:
    """Entries on the axisymmetric cubature as ``A + rho B (omega . dir)``."""

    A: np.ndarray
    B: np.ndarray
    dirs: np.ndarray


def _node_functions(dim, entries, lams, rule, image: bool) -> _NodeFunctions:
    n, p = dim.n, dim.p
    e = rule.axis
    rs = (rule.r1, rule.r2)
    offs = (0.0, rule.d)
    A = np.zeros((len(entries), rule.s.size))
    B = np.zeros_like(A)
    dirs = np.zeros((len(entries), n))
    for a, ent in enumerate(entries):
        r = rs[ent.bubble]
        mu = lams[ent.bubble] * ent.factor
        u = radial_value(dim, mu, r)
        if ent.tag == "value":
            A[a] = u**p if image else u
            continue
        if ent.tag == "dlam":
            f = radial_dlam(dim, mu, r)
            A[a] = p * u ** (p - 1) * f if image else f
            continue
        g = radial_dy_factor(dim, mu, r)
        if image:
            g = p * u ** (p - 1) * g
        A[a] = g * (rule.s - offs[ent.bubble]) * e[ent.axis]
        B[a] = g
        dirs[a, ent.axis] = 1.0
    return _NodeFunctions(A, B, dirs)


def _bilinear(fa: _NodeFunctions, fb: _NodeFunctions, rule, weight=None) -> np.ndarray:
    """``int (f_a)(f_b) w`` for all pairs, averaging the transverse direction exactly."""
    w = rule.w if weight is None else rule.w * weight
    out = (fa.A * w) @ fb.A.T
    if np.any(fa.B) and np.any(fb.B):
        e = rule.axis
        n = rule.n
        da, db = fa.dirs, fb.dirs
        mdir = (da @ db.T - np.outer(da @ e, db @ e)) / (n - 1)
        out = out + ((fa.B * (w * rule.rho**2)) @ fb.B.T) * mdir
    return out


# --- the space -----------------------------------------------------------------

@dataclass(eq=False)
class GalerkinSpace:
    n: int
    centers: tuple
    lams: tuple
    entries: list
    gram: np.ndarray
    constraint_idx: list
    basis: np.ndarray
    rule: object = field(repr=False)
    cloud: Cloud = field(repr=False)
    dict_spec: DictSpec = field(default_factory=DictSpec)
    dropped: list = field(default_factory=list)
    condition: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self):
        return as_dimension(self.n)

    @property
    def n_bubbles(self) -> int:
        return len(self.centers)

    @property
    def size(self) -> int:
        return len(self.entries)

    def index(self, bubble: int, tag: str, axis: int = -1, factor: float = 1.0) -> int:
        for a, e in enumerate(self.entries):
            if e.bubble == bubble and e.tag == tag and e.axis == axis and math.isclose(e.factor, factor):
                return a
        raise KeyError((bubble, tag, axis, factor))

    def value_index(self, j: int) -> int:
        return self.index(j, "value")

    def node_functions(self, image=False) -> _NodeFunctions:
        key = ("nodes", image)
        if key not in self._cache:
            self._cache[key] = _node_functions(self.dim, self.entries, self._rule_lams(), self.rule, image)
        return self._cache[key]

    def _rule_lams(self):
        return self.lams if len(self.lams) == 2 else (self.lams[0], self.lams[0])

    def cloud_values(self, image=False) -> np.ndarray:
        key = ("cloud", image)
        if key not in self._cache:
            dim = self.dim
            X = self.cloud.x
            self._cache[key] = np.stack([
                _eval(dim, e.tag, e.axis, self.centers[e.bubble], self.lams[e.bubble] * e.factor, X, image)
                for e in self.entries
            ])
        return self._cache[key]

    def evaluate(self, coef, X) -> np.ndarray:
        """Pointwise value of the dictionary expansion with coefficients ``coef``."""
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[:-1])
        dim = self.dim
        for c, e in zip(coef, self.entries):
            if c != 0.0:
                out += c * _eval(dim, e.tag, e.axis, self.centers[e.bubble], self.lams[e.bubble] * e.factor, X, False)
        return out

    def constraint_defect(self, coef) -> np.ndarray:
        """Relative constraint values ``<psi_c, v> / (|psi_c| |v|)``."""
        g = self.gram
        num = g[self.constraint_idx] @ coef
        vn = math.sqrt(max(float(coef @ g @ coef), 0.0))
        cn = np.sqrt(np.diag(g)[self.constraint_idx])
        return num / (cn * max(vn, 1e-300))

    def critical_values(self, K):
        return tuple(_k_reference(K, j, self.centers[j]) for j in range(self.n_bubbles))

    def k_blend_rule(self, kz) -> np.ndarray:
        if self.n_bubbles == 1:
            return np.full(self.rule.s.size, kz[0])
        share = self.rule.first_share()
        return share * kz[0] + (1 - share) * kz[1]

    def k_blend_cloud(self, kz) -> np.ndarray:
        if self.n_bubbles == 1:
            return np.full(self.cloud.x.shape[0], kz[0])
        X = self.cloud.x
        r1 = np.linalg.norm(X - self.centers[0], axis=-1)
        r2 = np.linalg.norm(X - self.centers[1], axis=-1)
        share = partition_weight(r1, r2, self.lams, self.n)
        return share * kz[0] + (1 - share) * kz[1]


def _k_reference(K, j, y) -> float:
    if isinstance(K, ConstantK):
        return float(K.value)
    if isinstance(K, TwoPeakK):
        return K.at_critical_point(j)
    if isinstance(K, KProfile):
        return float(K.k0)
    if hasattr(K, "at_critical_point"):
        return float(K.at_critical_point(j))
    return float(K(np.asarray(y)[None, :])[0])


def _entries(n, n_bubbles, ds: DictSpec):
    out = []
    for j in range(n_bubbles):
        out += [Entry(j, s, "value") for s in ds.value_scales]
        out += [Entry(j, s, "dlam") for s in ds.dlam_scales]
        out += [Entry(j, s, "dy", i) for s in ds.dy_scales for i in range(n)]
    return out


def _is_constraint(e: Entry) -> bool:
    return e.factor == 1.0


def _gram(dim, entries, lams, rule):
    img = _node_functions(dim, entries, lams, rule, True)
    fun = _node_functions(dim, entries, lams, rule, False)
    g = _bilinear(img, fun, rule)
    return 0.5 * (g + g.T)


def _condition(g) -> float:
    d = np.sqrt(np.diag(g))
    c = g / np.outer(d, d)
    ev = np.linalg.eigvalsh(c)
    return float(ev[-1] / ev[0]) if ev[0] > 0 else math.inf


def build_space(dim, y, lam, dict_spec: DictSpec = DictSpec(), spec: QuadratureSpec = QuadratureSpec(),
                single: bool = False) -> GalerkinSpace:
    """Dictionary, Gram matrix, constraints and an orthonormal basis of the correction space.

    ``single`` keeps only the first bubble (testing hook).
    """
    dim = as_dimension(dim)
    n = dim.n
    centers = tuple(as_point(c) for c in y)
    lams = tuple(float(l) for l in lam)
    if single:
        centers, lams = centers[:1], lams[:1]
    if any(c.shape != (n,) for c in centers):
        raise ValueError("centres must be points of R^n")
    if any(l <= 0 for l in lams):
        raise ValueError("scales must be positive")
    nb = len(centers)
    c2 = centers[1] if nb == 2 else centers[0]
    l2 = lams[1] if nb == 2 else lams[0]
    rule = two_center_rule(centers[0], c2, dim, spec, (lams[0], l2))
    cloud = symmetric_cloud(dim, list(centers), list(lams), spec)
    entries = _entries(n, nb, dict_spec)
    rule_lams = (lams[0], l2)
    g = _gram(dim, entries, rule_lams, rule)
    dropped = []
    cond = _condition(g)
    while cond > dict_spec.cond_max:
        # drop the non-constraint entry most correlated with another entry
        d = np.sqrt(np.diag(g))
        c = np.abs(g / np.outer(d, d))
        np.fill_diagonal(c, 0.0)
        cand = [a for a, e in enumerate(entries) if not _is_constraint(e)]
        if not cand:
            raise GalerkinError(f"Gram matrix singular (condition {cond:.3e}) with only constraint entries left")
        worst = max(cand, key=lambda a: c[a].max())
        dropped.append(entries[worst].label())
        keep = [a for a in range(len(entries)) if a != worst]
        entries = [entries[a] for a in keep]
        g = g[np.ix_(keep, keep)]
        cond = _condition(g)
    cidx = [a for a, e in enumerate(entries) if _is_constraint(e)]
    basis = _constraint_null_basis(g, cidx)
    return GalerkinSpace(n, centers, lams, entries, g, cidx, basis, rule, cloud, dict_spec, dropped, cond)


def _constraint_null_basis(g, cidx) -> np.ndarray:
    cm = g[cidx]
    scale = np.sqrt(np.diag(g))
    # work in diagonally scaled coordinates for a well-balanced SVD
    cs = cm / np.outer(scale[cidx], scale)
    _, sv, vt = np.linalg.svd(cs)
    rank = int(np.sum(sv > sv[0] * 1e-13))
    null = vt[rank:].T / scale[:, None]
    m = null.T @ g @ null
    m = 0.5 * (m + m.T)
    L = np.linalg.cholesky(m)
    basis = linalg.solve_triangular(L, null.T, lower=True).T
    # one re-orthogonalisation pass against the constraints in the G metric
    cg = g[cidx]
    mcc = cg[:, cidx]
    basis = basis - np.eye(g.shape[0])[:, cidx] @ np.linalg.solve(mcc, cg @ basis)
    m = basis.T @ g @ basis
    L = np.linalg.cholesky(0.5 * (m + m.T))
    return linalg.solve_triangular(L, basis.T, lower=True).T


# --- linear and quadratic forms ---------------------------------------------------

def alpha_hat_values(dim, kz, eps) -> tuple:
    dim = as_dimension(dim)
    return tuple(float((1.0 + eps * k) ** (-(dim.n - 4) / 8.0)) for k in kz)


@dataclass(eq=False)
class Forms:
    """Everything the fixed point needs, in dictionary and in reduced coordinates."""

    eps: float
    kz: tuple
    alpha_hat: tuple
    T: np.ndarray
    P: np.ndarray
    Pi: np.ndarray
    f: np.ndarray
    Q: np.ndarray
    metric: np.ndarray
    u0_coef: np.ndarray
    weight_cloud: np.ndarray = field(repr=False)
    u0_cloud: np.ndarray = field(repr=False)


def _u0_coef(space, ah) -> np.ndarray:
    c = np.zeros(space.size)
    for j, a in enumerate(ah):
        c[space.value_index(j)] = a
    return c


def assemble(space: GalerkinSpace, eps: float, K, alpha_hat=None) -> Forms:
    key = ("forms", float(eps), id(K), None if alpha_hat is None else tuple(alpha_hat))
    if key in space._cache:
        return space._cache[key]
    dim = space.dim
    p = dim.p
    nb = space.n_bubbles
    kz = space.critical_values(K)
    ah = tuple(alpha_hat) if alpha_hat is not None else alpha_hat_values(dim, kz, eps)
    rule, cloud = space.rule, space.cloud
    fun = space.node_functions(False)
    lams = space._rule_lams()

    # bubble values on cubature nodes and on the cloud
    u_nodes = [radial_value(dim, lams[0], rule.r1), radial_value(dim, lams[1], rule.r2)][:nb]
    X = cloud.x
    u_cloud = [radial_value(dim, space.lams[j], np.linalg.norm(X - space.centers[j], axis=-1)) for j in range(nb)]
    u0_nodes = sum(a * u for a, u in zip(ah, u_nodes))
    u0_cloud = sum(a * u for a, u in zip(ah, u_cloud))
    phi_cloud = space.cloud_values(False)

    k_cloud = K(X) if eps != 0.0 else np.zeros(X.shape[0])
    kc_nodes = space.k_blend_rule(kz)
    kc_cloud = space.k_blend_cloud(kz)
    cw = cloud.w

    # T_a = <u0, phi_a> - int (1 + eps K) u0^p phi_a
    g = space.gram
    T = np.zeros(space.size)
    for j in range(nb):
        T += (ah[j] - (1.0 + eps * kz[j]) * ah[j] ** p) * g[space.value_index(j)]
        if eps != 0.0:
            T -= eps * ah[j] ** p * (phi_cloud @ (cw * (k_cloud - kz[j]) * u_cloud[j] ** p))
    if nb == 2:
        inter_nodes = _interaction(ah[0] * u_nodes[0], ah[1] * u_nodes[1], p)
        T -= (fun.A * (rule.w * (1.0 + eps * kc_nodes) * inter_nodes)) @ np.ones(rule.s.size)
        # the B part of the dy entries integrates to zero against an axisymmetric weight
        if eps != 0.0:
            inter_cloud = _interaction(ah[0] * u_cloud[0], ah[1] * u_cloud[1], p)
            T -= eps * (phi_cloud @ (cw * (k_cloud - kc_cloud) * inter_cloud))

    # P_ab = p int (1 + eps K) u0^(p-1) phi_a phi_b
    P = p * _bilinear(fun, fun, rule, (1.0 + eps * kc_nodes) * u0_nodes ** (p - 1))
    if eps != 0.0:
        wc = cw * eps * p * (k_cloud - kc_cloud) * u0_cloud ** (p - 1)
        P += (phi_cloud * wc) @ phi_cloud.T
    P = 0.5 * (P + P.T)

    Pi = np.zeros((space.size, nb + space.basis.shape[1]))
    for j in range(nb):
        Pi[space.value_index(j), j] = 1.0
    Pi[:, nb:] = space.basis
    f = Pi.T @ T
    Q = Pi.T @ (g - P) @ Pi
    Q = 0.5 * (Q + Q.T)
    metric = Pi.T @ g @ Pi
    forms = Forms(eps, kz, ah, T, P, Pi, f, Q, 0.5 * (metric + metric.T), _u0_coef(space, ah),
                  cloud.w * (1.0 + eps * k_cloud), u0_cloud)
    space._cache[key] = forms
    return forms


def _interaction(a, b, p):
    """``(a + b)^p - a^p - b^p`` without cancellation against the larger power."""
    return np.where(a >= b, power_diff(a, b, p) - b**p, power_diff(b, a, p) - a**p)


def assemble_linear_form(space: GalerkinSpace, eps: float, K, alpha_hat=None) -> np.ndarray:
    """``f_eps`` in reduced coordinates: the alpha block first, then the projected basis."""
    return assemble(space, eps, K, alpha_hat).f


def assemble_quadratic_form(space: GalerkinSpace, eps: float, K, alpha_hat=None) -> np.ndarray:
    return assemble(space, eps, K, alpha_hat).Q


def remainder(space: GalerkinSpace, forms: Forms, w_coef) -> np.ndarray:
    """``int (1 + eps K)[(u0 + w)^p - u0^p - p u0^(p-1) w] phi_a`` for every entry."""
    phi = space.cloud_values(False)
    w = w_coef @ phi
    rem = power_remainder(forms.u0_cloud, w, space.dim.p)
    return phi @ (forms.weight_cloud * rem)


# --- the fixed point -------------------------------------------------------------

@dataclass
class FixedPointResult:
    omega: np.ndarray
    iterations: int
    steps: list
    converged: bool


def fixed_point(f, Q, dr, metric, tol: float = 1e-10, max_iter: int = 50) -> FixedPointResult:
    """Iterate ``omega <- -Q^-1 (f + dr(omega))`` from zero.

    Steps are measured in the ``metric`` norm; the loop stops once a step
    falls below ``tol * (1 + |omega|)``.  Step growth on three consecutive
    iterations raises ``DivergenceError`` with the step trace.
    """
    lu = linalg.lu_factor(Q)
    norm = lambda x: math.sqrt(max(float(x @ metric @ x), 0.0))
    omega = np.zeros_like(f)
    steps, growth = [], 0
    for it in range(1, max_iter + 1):
        new = -linalg.lu_solve(lu, f + dr(omega))
        step = norm(new - omega)
        steps.append(step)
        omega = new
        if step <= tol * (1.0 + norm(omega)):
            return FixedPointResult(omega, it, steps, True)
        if len(steps) >= 2 and step > steps[-2]:
            growth += 1
            if growth >= 3:
                raise DivergenceError("correction fixed point diverges", steps)
        else:
            growth = 0
    return FixedPointResult(omega, max_iter, steps, False)


@dataclass(eq=False)
class CorrectionSolution:
    alpha_hat: tuple
    alpha_bar: tuple
    v_coeffs: np.ndarray
    v_norm: float
    iterations: int
    steps: list
    multipliers: dict
    residual_norm: float
    omega: np.ndarray
    omega_norm: float
    f_norm: float
    qinv_norm: float
    w_coef: np.ndarray
    v_dict_coef: np.ndarray
    defect: np.ndarray
    eps: float
    kz: tuple

    @property
    def alpha(self) -> tuple:
        return tuple(a + b for a, b in zip(self.alpha_hat, self.alpha_bar))

    def to_dict(self, space: Optional[GalerkinSpace] = None) -> dict:
        out = {
            "alpha_hat": list(self.alpha_hat),
            "alpha_bar": list(self.alpha_bar),
            "v_coeffs": [float(x) for x in self.v_coeffs],
            "v_norm": self.v_norm,
            "iterations": self.iterations,
            "steps": [float(s) for s in self.steps],
            "multipliers": {k: [float(x) for x in np.ravel(v)] for k, v in self.multipliers.items()},
            "residual_norm": self.residual_norm,
            "omega_norm": self.omega_norm,
            "f_norm": self.f_norm,
            "qinv_norm": self.qinv_norm,
            "eps": self.eps,
        }
        if space is not None:
            out["dictionary"] = {
                "n": space.n,
                "centers": [list(map(float, c)) for c in space.centers],
                "lams": list(space.lams),
                "entries": [e.label() for e in space.entries],
                "dropped": list(space.dropped),
                "condition": space.condition,
            }
        return out

    def dumps(self, space=None) -> str:
        return json.dumps(self.to_dict(space), sort_keys=True, indent=2)


def _dual_norm(x, metric) -> float:
    return math.sqrt(max(float(x @ np.linalg.solve(metric, x)), 0.0))


def qinv_norm(Q, metric) -> float:
    """Operator norm of ``Q^-1`` with respect to ``metric``."""
    mu = linalg.eigh(Q, metric, eigvals_only=True)
    return float(1.0 / np.min(np.abs(mu)))


def solve_correction(space: GalerkinSpace, eps: float, K, alpha_hat=None, tol: float = 1e-10,
                     max_iter: int = 50) -> CorrectionSolution:
    forms = assemble(space, eps, K, alpha_hat)
    if not np.all(np.isfinite(forms.Q)) or abs(np.linalg.det(forms.Q / np.abs(forms.Q).max())) == 0.0:
        raise GalerkinError("quadratic form is singular on the reduced space")
    Pi = forms.Pi
    dr = lambda om: -Pi.T @ remainder(space, forms, Pi @ om)
    res = fixed_point(forms.f, forms.Q, dr, forms.metric, tol, max_iter)
    if not res.converged:
        raise DivergenceError("correction fixed point did not converge", res.steps)
    omega = res.omega
    nb = space.n_bubbles
    w_coef = Pi @ omega
    rem = remainder(space, forms, w_coef)
    defect = forms.T + (space.gram - forms.P) @ w_coef - rem
    c = omega[nb:]
    v_dict = space.basis @ c
    mult, resid = _multipliers(space, defect)
    norm = lambda x: math.sqrt(max(float(x @ forms.metric @ x), 0.0))
    return CorrectionSolution(
        alpha_hat=forms.alpha_hat,
        alpha_bar=tuple(float(x) for x in omega[:nb]),
        v_coeffs=c,
        v_norm=float(np.linalg.norm(c)),
        iterations=res.iterations,
        steps=res.steps,
        multipliers=mult,
        residual_norm=resid,
        omega=omega,
        omega_norm=norm(omega),
        f_norm=_dual_norm(forms.f, forms.metric),
        qinv_norm=qinv_norm(forms.Q, forms.metric),
        w_coef=w_coef,
        v_dict_coef=v_dict,
        defect=defect,
        eps=float(eps),
        kz=forms.kz,
    )


def _multipliers(space: GalerkinSpace, defect):
    """Solve ``M mu = defect_C`` on the constraint functions; return named multipliers and residual."""
    g = space.gram
    cidx = space.constraint_idx
    M = g[np.ix_(cidx, cidx)]
    mu = np.linalg.solve(M, defect[cidx])
    r = defect - g[:, cidx] @ mu
    resid = math.sqrt(max(float(r @ np.linalg.lstsq(g, r, rcond=None)[0]), 0.0))
    out = {"A": np.zeros(space.n_bubbles), "B": np.zeros(space.n_bubbles),
           "C": np.zeros((space.n_bubbles, space.n)), "mu": mu}
    for k, a in enumerate(cidx):
        e = space.entries[a]
        if e.tag == "value":
            out["A"][e.bubble] = mu[k]
        elif e.tag == "dlam":
            out["B"][e.bubble] = mu[k]
        else:
            out["C"][e.bubble, e.axis] = mu[k]
    return out, resid


def lagrange_multipliers(space: GalerkinSpace, solution: CorrectionSolution):
    """``(A_j, B_j, C_ji)`` and the coefficient matrix of the multiplier system."""
    cidx = space.constraint_idx
    M = space.gram[np.ix_(cidx, cidx)]
    m = solution.multipliers
    return m["A"], m["B"], m["C"], M


def multiplier_matrix(space: GalerkinSpace) -> tuple:
    cidx = space.constraint_idx
    return space.gram[np.ix_(cidx, cidx)], [space.entries[a] for a in cidx]


# --- reduced gradients and energy ---------------------------------------------------

def _param_derivative_images(space: GalerkinSpace, entry: Entry, param: str, axis: int, X, rel_h=1e-4):
    """Pointwise ``Delta^2`` of the parameter derivative of a constraint function, by central differences."""
    dim = space.dim
    j = entry.bubble
    c = space.centers[j]
    mu = space.lams[j] * entry.factor
    if param == "lam":
        h = rel_h * mu
        hi = _eval(dim, entry.tag, entry.axis, c, mu + h, X, True)
        lo = _eval(dim, entry.tag, entry.axis, c, mu - h, X, True)
    else:
        h = rel_h / mu
        shift = np.zeros(dim.n)
        shift[axis] = h
        hi = _eval(dim, entry.tag, entry.axis, c + shift, mu, X, True)
        lo = _eval(dim, entry.tag, entry.axis, c - shift, mu, X, True)
    return (hi - lo) / (2 * h)


@dataclass
class ReducedGradients:
    dlam: np.ndarray
    dy: np.ndarray
    partial_dlam: np.ndarray
    partial_dy: np.ndarray
    model_dlam: Optional[np.ndarray] = None
    model_dy: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        out = {"dlam": self.dlam.tolist(), "dy": self.dy.tolist()}
        if self.model_dlam is not None:
            out["model_dlam"] = self.model_dlam.tolist()
            out["model_dy"] = self.model_dy.tolist()
        return out


def reduced_gradients(space: GalerkinSpace, solution: CorrectionSolution, eps: float, K, model=None,
                      profiles=None) -> ReducedGradients:
    """Derivatives of the reduced energy in the scales and centres.

    The partial derivative at fixed ``(alpha, v)`` is ``alpha_k`` times the
    stationarity defect tested against the derivative function; the
    constraint coupling adds ``-sum_c mu_c <d psi_c, v>``, since ``v`` stays
    orthogonal to the moving constraint functions.
    """
    nb = space.n_bubbles
    n = space.n
    alpha = solution.alpha
    d = solution.defect
    mu = solution.multipliers["mu"]
    X = space.cloud.x
    v_cloud = solution.v_dict_coef @ space.cloud_values(False)
    vw = space.cloud.w * v_cloud
    cons = [space.entries[a] for a in space.constraint_idx]
    pl = np.array([alpha[k] * d[space.index(k, "dlam")] for k in range(nb)])
    py = np.array([[alpha[k] * d[space.index(k, "dy", i)] for i in range(n)] for k in range(nb)])
    dlam = pl.copy()
    dy = py.copy()
    for ci, e in enumerate(cons):
        if mu[ci] == 0.0:
            continue
        k = e.bubble
        dlam[k] -= mu[ci] * float(_param_derivative_images(space, e, "lam", -1, X) @ vw)
        for i in range(n):
            dy[k, i] -= mu[ci] * float(_param_derivative_images(space, e, "y", i, X) @ vw)
    out = ReducedGradients(dlam, dy, pl, py)
    if model is not None and profiles is not None and nb == 2:
        out.model_dlam = np.array([model.dlam(k, eps, space.lams) for k in range(2)])
        out.model_dy = np.array([
            model.dy(k, eps, space.lams, space.centers[k] - profiles[k].z, profiles[k].a,
                     space.centers[k] - space.centers[1 - k])
            for k in range(2)
        ])
    return out


def energy_value(space: GalerkinSpace, eps: float, K, alpha=None, w_coef=None) -> float:
    """``J = 1/2 |u|^2 - 1/2* int (1 + eps K)|u|^2*`` with ``u = sum alpha_j U_j + w``."""
    dim = space.dim
    nb = space.n_bubbles
    kz = space.critical_values(K)
    if alpha is None:
        alpha = alpha_hat_values(dim, kz, eps)
    u0c = _u0_coef(space, alpha)
    w = np.zeros(space.size) if w_coef is None else np.asarray(w_coef, dtype=float)
    uc = u0c + w
    quad = float(uc @ space.gram @ uc)
    rule, cloud = space.rule, space.cloud
    lams = space._rule_lams()
    ts = dim.two_star
    u_nodes = [radial_value(dim, lams[0], rule.r1), radial_value(dim, lams[1], rule.r2)][:nb]
    kc_nodes = space.k_blend_rule(kz)
    from .constants import a_closed_form

    A = a_closed_form(dim)
    # self terms in closed form, interaction on the cubature
    nonlin = sum(a**ts * (1.0 + eps * k) * A for a, k in zip(alpha, kz))
    if nb == 2:
        inter = _interaction(alpha[0] * u_nodes[0], alpha[1] * u_nodes[1], ts)
        nonlin += rule.integrate((1.0 + eps * kc_nodes) * inter)
    X = cloud.x
    u_cloud = [radial_value(dim, space.lams[j], np.linalg.norm(X - space.centers[j], axis=-1)) for j in range(nb)]
    u0_cloud = sum(a * u for a, u in zip(alpha, u_cloud))
    k_cloud = K(X) if eps != 0.0 else np.zeros(X.shape[0])
    if eps != 0.0:
        ref = np.zeros(X.shape[0])
        for j in range(nb):
            ref += (alpha[j] * u_cloud[j]) ** ts * (k_cloud - kz[j])
        if nb == 2:
            ref += _interaction(alpha[0] * u_cloud[0], alpha[1] * u_cloud[1], ts) * (k_cloud - space.k_blend_cloud(kz))
        nonlin += eps * cloud.integrate(ref)
    if np.any(w):
        wc = w @ space.cloud_values(False)
        full = np.abs(u0_cloud + wc) ** ts
        nonlin += cloud.integrate((1.0 + eps * k_cloud) * (full - u0_cloud**ts))
    return 0.5 * quad - nonlin / ts


def solution_u(space: GalerkinSpace, solution: CorrectionSolution):
    """Pointwise evaluator of ``u = sum alpha_j U_j + v``."""
    coef = _u0_coef(space, solution.alpha) + solution.v_dict_coef

    def u(X):
        return space.evaluate(coef, X)

    return u
