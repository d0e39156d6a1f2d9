"""Calibration of (alpha0, alpha1, beta1) and global rate measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import Kind, euclidean_ball, exact_functionals, flat_torus, round_sphere
from ..mdl import Loss, assemble
from ..mesh import FIRST_LAYER, build_mesh
from ..windows import default_windows
from .stats import fit_rate, richardson

DEFAULT_H = (0.2, 0.1, 0.05, 0.025)


@dataclass
class CalibrationResult:
    h: list
    alpha0: list
    alpha1: list
    beta1: list
    alpha0_extrap: float
    alpha1_extrap: float
    beta1_extrap: float
    predicted: dict
    dim: int = 2
    loss: str = "neglog"

    @property
    def constants(self):
        return (self.alpha0_extrap, self.alpha1_extrap, self.beta1_extrap)

    def rel_errors(self):
        p = self.predicted
        return {"alpha1": abs(self.alpha1_extrap / p["alpha1"] - 1.0),
                "beta1": abs(self.beta1_extrap / p["beta1"] - 1.0)}

    def to_dict(self):
        return {"dim": self.dim, "loss": self.loss, "h": list(self.h),
                "alpha0": list(self.alpha0), "alpha1": list(self.alpha1), "beta1": list(self.beta1),
                "extrapolated": {"alpha0": self.alpha0_extrap, "alpha1": self.alpha1_extrap,
                                 "beta1": self.beta1_extrap},
                "predicted": dict(self.predicted), "rel_errors": self.rel_errors()}


def calibration_geometries(dim=2):
    return {"torus": flat_torus(dim), "sphere": round_sphere(dim, 1.0), "ball": euclidean_ball(dim, 1.0)}


def calibrate(geoms=None, windows=None, loss=Loss(), rho0=0.0, hs=DEFAULT_H, dim=2) -> CalibrationResult:
    """Per-h estimates of the three constants and their Richardson limits.

    alpha0 from the torus (F_n / Vol), alpha1 from the sphere
    ((F_n - alpha0 Vol) / int R) and beta1 from the ball (first-layer excess
    over rho0 Vol divided by int K).
    """
    geoms = geoms or calibration_geometries(dim)
    windows = windows or default_windows(dim)
    hs = sorted(hs, reverse=True)
    if len(hs) < 3:
        raise ValueError("calibration needs at least three meshsizes")
    a0, a1, b1 = [], [], []
    ex_t = exact_functionals(geoms["torus"])
    ex_s = exact_functionals(geoms["sphere"])
    ex_b = exact_functionals(geoms["ball"])
    for h in hs:
        m = build_mesh(geoms["torus"], h)
        a0.append(assemble(m, windows, loss, rho0).total / ex_t.vol)
        m = build_mesh(geoms["sphere"], h)
        br = assemble(m, windows, loss, rho0)
        a1.append((br.total - a0[-1] * ex_s.vol) / ex_s.total_R)
        m = build_mesh(geoms["ball"], h)
        br = assemble(m, windows, loss, rho0)
        first = m.layer == FIRST_LAYER
        excess = br.first_layer_sum - rho0 * math.fsum(m.volumes[first].tolist())
        b1.append(excess / ex_b.total_K)
    predicted = {"alpha0": rho0, "alpha1": windows.mu2 / 6.0, "beta1": windows.mu1}
    return CalibrationResult(list(hs), a0, a1, b1, richardson(hs, a0, 2), richardson(hs, a1, 2),
                             richardson(hs, b1, 1), predicted, dim, loss.kind)


@dataclass
class RateResult:
    geometry: str
    rows: list
    fit: object = None
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {"geometry": self.geometry, "rows": self.rows,
                "fit": None if self.fit is None else self.fit.to_dict(), **self.extras}


def rates(geom, constants, hs=DEFAULT_H, windows=None, loss=Loss(), rho0=0.0) -> RateResult:
    """|F_n - F| against h for one geometry, with a log-log slope fit when F_n != F.

    Each row also carries the layer sums and ``h2_scaled_excess``: the excess
    F_n - c0 Vol multiplied by h^2, i.e. the aggregate under the alternative
    normalisation in which the curvature term carries an extra h^2.
    """
    windows = windows or default_windows(geom.dim)
    c0, c1, c2 = constants
    ex = exact_functionals(geom, c0, c1, c2)
    rows = []
    for h in sorted(hs, reverse=True):
        m = build_mesh(geom, h)
        br = assemble(m, windows, loss, rho0)
        err = abs(br.total - ex.F_limit)
        rows.append({"h": h, "F_n": br.total, "F_limit": ex.F_limit, "error": err,
                     "interior_sum": br.interior_sum, "first_layer_sum": br.first_layer_sum,
                     "deeper_sum": br.deeper_sum,
                     "h2_scaled_excess": h * h * (br.total - c0 * ex.vol)})
    errs = [r["error"] for r in rows]
    fit = None
    if geom.kind is not Kind.FLAT_TORUS and min(errs) > 0:
        fit = fit_rate([r["h"] for r in rows], errs)
    extras = {}
    if geom.kind is Kind.EUCLIDEAN_BALL:
        target = c2 * ex.total_K
        last = rows[-1]
        m = build_mesh(geom, last["h"])
        first_vol = math.fsum(m.volumes[m.layer == FIRST_LAYER].tolist())
        extras["boundary_target"] = target
        extras["first_layer_rel_error"] = abs(last["first_layer_sum"] - rho0 * first_vol - target) / abs(target)
    return RateResult(geom.kind.value, rows, fit, extras)


def per_cell_laws(hs=DEFAULT_H, windows=None, loss=Loss(), rho0=0.0, constants=None, dim=2):
    """Max per-cell residuals of the interior (sphere) and first-layer (ball) laws.

    The interior residual is |E / Vol - rho0 - alpha1 R| on the unit sphere
    and the first-layer residual is |(E - rho0 Vol) / base - beta1 K| on the
    unit ball.  ``constants`` default to the predicted (rho0, mu2/6, mu1).
    """
    windows = windows or default_windows(dim)
    if constants is None:
        constants = (rho0, windows.mu2 / 6.0, windows.mu1)
    _, a1, b1 = constants
    sph, ball = round_sphere(dim, 1.0), euclidean_ball(dim, 1.0)
    R = dim * (dim - 1.0)
    K = dim - 1.0
    hs = sorted(hs, reverse=True)
    interior, first = [], []
    for h in hs:
        m = build_mesh(sph, h)
        br = assemble(m, windows, loss, rho0)
        interior.append(float(np.max(np.abs(br.energies / m.volumes - rho0 - a1 * R))))
        m = build_mesh(ball, h)
        br = assemble(m, windows, loss, rho0)
        f = m.layer == FIRST_LAYER
        dens = (br.energies[f] - rho0 * m.volumes[f]) / m.base_area[f]
        first.append(float(np.max(np.abs(dens - b1 * K))))
    return {"h": hs, "interior_residual": interior, "first_layer_residual": first,
            "interior_fit": fit_rate(hs, interior), "first_layer_fit": fit_rate(hs, first)}
