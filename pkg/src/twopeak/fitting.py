"""Power-law regression in log-log coordinates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ScalingFit:
    samples: tuple
    exponent: float
    constant: float
    max_rel_dev: float
    window: tuple
    stderr: tuple = field(default=())

    def predict(self, x):
        return self.constant * np.asarray(x, dtype=float) ** self.exponent

    def to_dict(self) -> dict:
        return {
            "samples": [list(s) for s in self.samples],
            "exponent": self.exponent,
            "constant": self.constant,
            "max_rel_dev": self.max_rel_dev,
            "window": list(self.window),
        }


def fit_power_law(samples, stderr=None) -> ScalingFit:
    """Least-squares fit of ``value = c * x**p`` on log-log axes.

    ``samples`` is a sequence of ``(x, value)`` pairs.  All values must share
    one sign (the sign is carried by ``constant``); abscissae must be positive
    and strictly monotone.
    """
    pts = [(float(x), float(v)) for x, v in samples]
    if len(pts) < 4:
        raise ValueError(f"need at least 4 samples for a scaling fit, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    if np.any(x <= 0):
        raise ValueError("abscissae must be positive")
    dx = np.diff(x)
    if not (np.all(dx > 0) or np.all(dx < 0)):
        raise ValueError("abscissae must be strictly monotone")
    if np.any(v == 0) or not (np.all(v > 0) or np.all(v < 0)):
        raise ValueError("values must be nonzero and share one sign")
    sign = float(np.sign(v[0]))
    slope, intercept = np.polyfit(np.log(x), np.log(np.abs(v)), 1)
    const = sign * float(np.exp(intercept))
    pred = const * x**slope
    dev = float(np.max(np.abs(v / pred - 1.0)))
    return ScalingFit(
        samples=tuple(pts),
        exponent=float(slope),
        constant=const,
        max_rel_dev=dev,
        window=(float(x.min()), float(x.max())),
        stderr=tuple(float(s) for s in stderr) if stderr is not None else (),
    )
