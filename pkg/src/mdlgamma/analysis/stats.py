"""Log-log rate fits and Richardson extrapolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InconclusiveFit


@dataclass
class RateFit:
    x: list
    y: list
    slope: float
    intercept: float
    r2: float
    residual: float
    min_r2: float = 0.95

    @property
    def conclusive(self):
        return self.r2 >= self.min_r2

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "residual": self.residual, "points": [[float(a), float(b)] for a, b in zip(self.x, self.y)]}


def fit_rate(x, y, min_r2=0.95, strict=False) -> RateFit:
    """Least-squares fit of log y = slope * log x + intercept.

    With ``strict`` a fit with R^2 below ``min_r2`` raises :class:`InconclusiveFit`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise InconclusiveFit(f"need at least 3 points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InconclusiveFit("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, icpt), res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ np.array([slope, icpt])
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    fit = RateFit(x.tolist(), y.tolist(), float(slope), float(icpt), r2, float(np.sqrt(ss_res / len(x))), min_r2)
    if strict and not fit.conclusive:
        raise InconclusiveFit(f"R^2 = {r2:.3f} below {min_r2}")
    return fit


def richardson(h, values, p, n_points=3):
    """Extrapolate values(h) = a + sum_j b_j h^(p + j) to h = 0.

    Uses the ``n_points`` smallest h and fits the exponents p, p+1, ... exactly.
    """
    h = np.asarray(h, dtype=float)
    v = np.asarray(values, dtype=float)
    order = np.argsort(h)[:n_points]
    h, v = h[order], v[order]
    if len(h) < 2:
        raise InconclusiveFit("Richardson extrapolation needs at least 2 points")
    A = np.stack([np.ones_like(h)] + [h ** (p + j) for j in range(len(h) - 1)], axis=1)
    coef = np.linalg.solve(A, v)
    return float(coef[0])
