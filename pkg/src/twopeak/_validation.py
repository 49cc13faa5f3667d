"""Input coercion shared across modules."""
import numpy as np


def as_point(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError(f"expected a point (1-D array), got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("point has non-finite coordinates")
    return y


def as_points(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (n,):
        raise ValueError(f"points must have trailing dimension {n}, got shape {x.shape}")
    return x


def check_positive(name: str, value) -> float:
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("cannot normalise the zero vector")
    return v / nrm
