"""Cancellation-free differences of powers."""
import numpy as np


def power_diff(a, b, p: float):
    """``(a + b)^p - a^p`` for ``a > 0`` and ``a + b > 0``, accurate when ``|b| << a``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = b / a
        small = np.abs(ratio) < 0.5
        out = np.where(small, a**p * np.expm1(p * np.log1p(np.where(small, ratio, 0.0))), (a + b) ** p - a**p)
    return out


def power_remainder(a, b, p: float):
    """``(a + b)^p - a^p - p a^(p-1) b`` (second-order Taylor remainder)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = b / a
        # series in t is accurate far below the cancellation threshold of the direct form
        series = p * (p - 1) / 2 * t**2 * (1 + (p - 2) / 3 * t * (1 + (p - 3) / 4 * t * (1 + (p - 4) / 5 * t)))
        direct = np.expm1(p * np.log1p(np.where(np.abs(t) < 1, t, 0.0))) - p * t
        use_series = np.abs(t) < 1e-3
        mid = np.where(use_series, series, direct)
        u = a + b
        far = np.sign(u) * np.abs(u) ** p - a**p - p * a ** (p - 1) * b
        return np.where(np.abs(t) < 0.5, a**p * mid, far)
