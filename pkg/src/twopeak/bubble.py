"""Closed-form bubble family for the critical biharmonic equation.

The bubble centred at ``y`` with concentration ``lam`` is

    U(x) = C_n * lam**m / (1 + lam**2 |x - y|**2)**m,    m = (n - 4) / 2,

and solves ``Delta^2 U = U**(2* - 1)`` on R^n.  Everything here is vectorised
over the leading axes of ``x`` (shape ``(..., n)``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._validation import as_point, as_points


@dataclass(frozen=True)
class Dimension:
    """Ambient dimension with its critical exponent and bubble constant."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 5:
            raise ValueError(f"dimension must be an integer >= 5, got {self.n}")

    @property
    def two_star(self) -> float:
        return 2.0 * self.n / (self.n - 4)

    @property
    def p(self) -> float:
        """Nonlinearity exponent 2* - 1."""
        return self.two_star - 1.0

    @property
    def m(self) -> float:
        """Decay exponent (n - 4) / 2 of the bubble profile."""
        return 0.5 * (self.n - 4)

    @property
    def c_n(self) -> float:
        n = self.n
        return float(((n - 4) * (n - 2) * n * (n + 2)) ** ((n - 4) / 8.0))

    @property
    def supports_pipeline(self) -> bool:
        # (1, n - 4) must be nonempty for the exponent of K
        return self.n >= 6


def as_dimension(dim) -> Dimension:
    return dim if isinstance(dim, Dimension) else Dimension(int(dim))


@dataclass(frozen=True)
class Bubble:
    y: np.ndarray
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "y", as_point(self.y))
        if not self.lam > 0:
            raise ValueError(f"bubble scale must be positive, got {self.lam}")
        object.__setattr__(self, "lam", float(self.lam))


def _check_bubble(dim: Dimension, b: Bubble) -> None:
    if b.y.shape != (dim.n,):
        raise ValueError(f"bubble centre has shape {b.y.shape}, expected ({dim.n},)")
    if not b.lam > 0:
        raise ValueError("bubble scale must be positive")


def _radius_sq(b: Bubble, x) -> np.ndarray:
    d = as_points(x, b.y.size) - b.y
    return np.einsum("...i,...i->...", d, d)


def bubble_value(dim, b: Bubble, x) -> np.ndarray:
    dim = as_dimension(dim)
    _check_bubble(dim, b)
    s = 1.0 + b.lam**2 * _radius_sq(b, x)
    return dim.c_n * b.lam**dim.m * s ** (-dim.m)


def bubble_grad_scale(dim, b: Bubble, x) -> np.ndarray:
    """Partial derivative of the bubble with respect to its scale."""
    dim = as_dimension(dim)
    _check_bubble(dim, b)
    q = b.lam**2 * _radius_sq(b, x)
    u = dim.c_n * b.lam**dim.m * (1.0 + q) ** (-dim.m)
    return u * (dim.m / b.lam) * (1.0 - q) / (1.0 + q)


def bubble_grad_center(dim, b: Bubble, x, i: int) -> np.ndarray:
    """Partial derivative with respect to the centre coordinate ``y_i``.

    ``i`` is a zero-based axis index.
    """
    dim = as_dimension(dim)
    _check_bubble(dim, b)
    if not 0 <= int(i) < dim.n:
        raise IndexError(f"axis {i} out of range for n={dim.n}")
    d = as_points(x, dim.n) - b.y
    q = b.lam**2 * np.einsum("...i,...i->...", d, d)
    u = dim.c_n * b.lam**dim.m * (1.0 + q) ** (-dim.m)
    return (dim.n - 4) * b.lam**2 * d[..., int(i)] * u / (1.0 + q)


def profile_bilaplacian(dim, r) -> np.ndarray:
    """Bilaplacian of the radial profile ``(1 + r^2)^(-m)``.

    Assembled as f'''' + 2(n-1) f'''/r + (n-1)(n-3) (f'' - f'/r)/r**2 with the
    quotients written in closed form, so ``r = 0`` needs no special case: the
    grouped terms are exactly the even-profile limit there.
    """
    dim = as_dimension(dim)
    n, m = dim.n, dim.m
    r = np.asarray(r, dtype=float)
    r2 = r * r
    s = 1.0 + r2
    k1 = m * (m + 1)
    k2 = k1 * (m + 2)
    k3 = k2 * (m + 3)
    d4 = 12 * k1 * s ** (-m - 2) - 48 * k2 * r2 * s ** (-m - 3) + 16 * k3 * r2 * r2 * s ** (-m - 4)
    d3_over_r = 12 * k1 * s ** (-m - 2) - 8 * k2 * r2 * s ** (-m - 3)
    d2_minus_d1_over_r2 = 4 * k1 * s ** (-m - 2)
    return d4 + 2 * (n - 1) * d3_over_r + (n - 1) * (n - 3) * d2_minus_d1_over_r2


def profile_laplacian(dim, r) -> np.ndarray:
    """Laplacian of ``(1 + r^2)^(-m)``: f'' + (n-1) f'/r."""
    dim = as_dimension(dim)
    n, m = dim.n, dim.m
    r2 = np.asarray(r, dtype=float) ** 2
    s = 1.0 + r2
    return -2 * m * n * s ** (-m - 1) + 4 * m * (m + 1) * r2 * s ** (-m - 2)


def bubble_residual(dim, b: Bubble, x) -> np.ndarray:
    """Pointwise ``Delta^2 U - U^(2*-1)``; zero up to round-off."""
    dim = as_dimension(dim)
    _check_bubble(dim, b)
    rho = b.lam * np.sqrt(_radius_sq(b, x))
    bilap = dim.c_n * b.lam ** (dim.m + 4) * profile_bilaplacian(dim, rho)
    u = dim.c_n * b.lam**dim.m * (1.0 + rho * rho) ** (-dim.m)
    return bilap - u**dim.p


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


@dataclass(frozen=True)
class KProfile:
    """Local model of K near a critical point ``z``.

    Inside ``|x - z| <= r0`` the value is ``k0 + sum_i a_i |x_i - z_i|^beta``.
    Outside, ``far_field`` is used; by default the model is frozen at the
    radial projection onto the sphere of radius ``r0`` and blended back to
    ``k0`` over ``[r0, 2 r0]``.
    """

    z: np.ndarray
    a: np.ndarray
    beta: float
    sigma: float = 0.5
    k0: float = 0.0
    r0: float = 0.25
    far_field: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        z = as_point(self.z)
        a = np.asarray(self.a, dtype=float).ravel()
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "a", a)
        n = z.size
        if a.size != n:
            raise ValueError(f"need {n} coefficients, got {a.size}")
        if n < 5:
            raise ValueError("K profiles need n >= 5")
        if np.any(a == 0):
            raise ValueError("every coefficient a_i must be nonzero")
        if not a.sum() < 0:
            raise ValueError(f"sum of coefficients must be negative, got {a.sum()}")
        if not 1.0 < self.beta < n - 4:
            raise ValueError(f"beta must lie in (1, {n - 4}), got {self.beta}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not self.r0 > 0:
            raise ValueError("model radius r0 must be positive")

    @property
    def n(self) -> int:
        return self.z.size

    @property
    def a_sum(self) -> float:
        return float(self.a.sum())

    def model_increment(self, x) -> np.ndarray:
        d = np.abs(as_points(x, self.n) - self.z)
        return (d**self.beta) @ self.a

    def _default_far(self, x):
        d = as_points(x, self.n) - self.z
        r = np.sqrt(np.einsum("...i,...i->...", d, d))
        scale = self.r0 / np.maximum(r, self.r0)
        clamped = (np.abs(d * scale[..., None]) ** self.beta) @ self.a
        return self.k0 + (1.0 - _smoothstep((r - self.r0) / self.r0)) * clamped

    def __call__(self, x) -> np.ndarray:
        return k_profile_value(self, x)


def k_profile_value(p: KProfile, x) -> np.ndarray:
    x = as_points(x, p.n)
    d = x - p.z
    r = np.sqrt(np.einsum("...i,...i->...", d, d))
    inside = r <= p.r0
    model = p.k0 + (np.abs(d) ** p.beta) @ p.a
    far = p.far_field(x) if p.far_field is not None else p._default_far(x)
    return np.where(inside, model, far)


@dataclass(frozen=True)
class ConstantK:
    """Spatially constant K, for checks where the weight must vanish or factor out."""

    value: float = 0.0

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], float(self.value))


class TwoPeakK:
    """Global K assembled from two local profiles.

    Each profile owns the ball of radius ``2 r0`` around its critical point.
    Between the balls the baseline is blended smoothly (C^1) along the axis
    from one profile's ``k0`` to the other's.
    """

    def __init__(self, profiles: Sequence[KProfile]):
        if len(profiles) != 2:
            raise ValueError("exactly two profiles are required")
        p1, p2 = profiles
        if p1.n != p2.n:
            raise ValueError("profiles live in different dimensions")
        sep = np.linalg.norm(p2.z - p1.z)
        if sep <= 2 * (p1.r0 + p2.r0):
            raise ValueError("profile regions overlap; shrink r0 or separate the critical points")
        self.profiles = (p1, p2)
        self._axis = (p2.z - p1.z) / sep
        self._sep = sep

    def at_critical_point(self, j: int) -> float:
        return float(self.profiles[j].k0)

    def __call__(self, x) -> np.ndarray:
        p1, p2 = self.profiles
        x = as_points(x, p1.n)
        d1 = np.linalg.norm(x - p1.z, axis=-1)
        d2 = np.linalg.norm(x - p2.z, axis=-1)
        s = (x - p1.z) @ self._axis
        lo, hi = 2 * p1.r0, self._sep - 2 * p2.r0
        ambient = p1.k0 + (p2.k0 - p1.k0) * _smoothstep((s - lo) / (hi - lo))
        out = np.where(d1 <= 2 * p1.r0, p1(x), ambient)
        return np.where(d2 <= 2 * p2.r0, p2(x), out)


@dataclass(frozen=True)
class PeakAnsatz:
    alpha: tuple
    bubbles: tuple

    def __post_init__(self):
        if len(self.alpha) != 2 or len(self.bubbles) != 2:
            raise ValueError("a two-peak ansatz needs two weights and two bubbles")
        if min(self.alpha) <= 0:
            raise ValueError("ansatz weights must be positive")
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))

    @property
    def n(self) -> int:
        return self.bubbles[0].y.size

    @property
    def eps12(self) -> float:
        return interaction_parameter(self.n, self.bubbles[0].lam, self.bubbles[1].lam)

    def value(self, x) -> np.ndarray:
        dim = Dimension(self.n)
        return sum(a * bubble_value(dim, b, x) for a, b in zip(self.alpha, self.bubbles))


def interaction_parameter(dim, lam1: float, lam2: float) -> float:
    dim = as_dimension(dim)
    return float((lam1 * lam2) ** (-dim.m))


@dataclass(frozen=True)
class SearchBox:
    """Admissible parameter region around two critical points."""

    mu: float
    centers: tuple

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        object.__setattr__(self, "centers", tuple(as_point(c) for c in self.centers))

    def contains(self, y, lam) -> bool:
        """Membership of ``(y, lam)`` in the closed-ball / open-ray region D_mu."""
        for yj, zj, lj in zip(y, self.centers, lam):
            if np.linalg.norm(as_point(yj) - zj) > self.mu or not lj > 1.0 / self.mu:
                return False
        return True

    def contains_ansatz(self, alpha, y, lam, v_norm: float) -> bool:
        if min(alpha) <= 0:
            return False
        if any(abs(a - 1.0) > self.mu for a in alpha):
            return False
        return self.contains(y, lam) and v_norm <= self.mu
