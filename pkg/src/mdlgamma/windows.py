"""Averaging windows and their moments.

The interior window is radial, w(xi) = phi(|xi| / Lambda) / Z on the ball of
radius Lambda.  The boundary window is a product of a tangential radial window
in d - 1 dimensions and a one-dimensional normal profile w0 on [0, c_*].

Moments are computed on a polar tensor grid: Gauss-Legendre in the radius
times an equispaced angular rule (Gauss-Legendre in cos(theta) for the polar
angle in 3D).  The equispaced rule integrates trigonometric polynomials of
degree below its size exactly, so odd moments vanish to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from .errors import NegativeProfile, UnsupportedDimension, ZeroMass

RADIAL_PROFILES = {
    "quartic": lambda u: np.clip(1.0 - u * u, 0.0, None) ** 2,
    "epanechnikov": lambda u: np.clip(1.0 - u * u, 0.0, None),
    "uniform": lambda u: np.where(u <= 1.0, 1.0, 0.0),
}

NORMAL_PROFILES = {
    "triangular": lambda s: np.clip(1.0 - s, 0.0, None),
    "uniform": lambda s: np.where(s <= 1.0, 1.0, 0.0),
}


def gauss_interval(n, a, b):
    x, w = leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def polar_rule(dim, radius=1.0, order=20):
    """Points and measure weights for integrating over the ball B_radius in R^dim.

    Returns ``(unit_dirs, r, w)`` laid out as a tensor product: the point for
    radial node i and direction j is ``r[i] * unit_dirs[j]`` with weight
    ``w[i] * dir_weights[j]`` folded into ``w`` of shape (nr, ndir).
    """
    r, wr = gauss_interval(order, 0.0, radius)
    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
        wd = np.array([1.0, 1.0])
    elif dim == 2:
        n = 2 * order
        th = 2 * np.pi * np.arange(n) / n
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        wd = np.full(n, 2 * np.pi / n)
    elif dim == 3:
        c, wc = leggauss(order)
        n = 2 * order
        ph = 2 * np.pi * np.arange(n) / n
        s = np.sqrt(1 - c * c)
        dirs = np.stack([
            np.outer(s, np.cos(ph)).ravel(),
            np.outer(s, np.sin(ph)).ravel(),
            np.repeat(c, n),
        ], axis=1)
        wd = np.repeat(wc, n) * (2 * np.pi / n)
    else:
        raise UnsupportedDimension(f"polar rule for dimension {dim}")
    w = (wr * r ** (dim - 1))[:, None] * wd[None, :]
    return dirs, r, w


@dataclass(frozen=True)
class MomentReport:
    Z: float
    mu: float
    C: dict
    first: np.ndarray
    odd_residual: float
    isotropy_residual: float = 0.0

    def rows(self, kind):
        name = "mu2" if kind == "interior" else "mu1"
        out = [("Z", self.Z), (name, self.mu), ("odd_residual", self.odd_residual)]
        if kind == "interior":
            out.append(("isotropy_residual", self.isotropy_residual))
        out += [(f"C{k}", v) for k, v in sorted(self.C.items())]
        return out


@dataclass(frozen=True)
class InteriorWindow:
    """Radial window phi(|xi|/Lambda) on B_Lambda in R^dim, normalized to unit mass.

    ``shift`` translates the window (xi -> xi - shift); it exists only to
    build deliberately broken windows for the class check.
    """

    dim: int = 2
    profile: str = "quartic"
    support: float = 1.0
    order: int = 20
    shift: tuple = ()
    scale: float = 1.0

    def __post_init__(self):
        if not callable(self.profile) and self.profile not in RADIAL_PROFILES:
            raise ValueError(f"unknown radial profile {self.profile!r}")
        if self.support <= 0:
            raise ValueError("support must be positive")

    def phi(self, u):
        f = self.profile if callable(self.profile) else RADIAL_PROFILES[self.profile]
        return self.scale * f(np.asarray(u, dtype=float))

    def _raw_rule(self):
        dirs, r, w = polar_rule(self.dim, self.support, self.order)
        vals = self.phi(r / self.support)
        if np.any(vals < 0):
            raise NegativeProfile(f"profile {self.profile!r} is negative somewhere")
        return dirs, r, w * vals[:, None]

    @property
    def Z(self):
        _, _, w = self._raw_rule()
        return float(w.sum())

    def rule(self):
        """(dirs, r, weights) of the normalized window; weights sum to 1."""
        dirs, r, w = self._raw_rule()
        Z = w.sum()
        if not Z > 0:
            raise ZeroMass("window profile has zero mass")
        return dirs, r, w / Z

    def nodes(self):
        """Flattened points xi (N, dim) and weights (N,) of the normalized window."""
        dirs, r, w = self.rule()
        pts = r[:, None, None] * dirs[None, :, :]
        if self.shift:
            pts = pts + np.asarray(self.shift, dtype=float)
        return pts.reshape(-1, self.dim), w.ravel()

    def radial_weights(self):
        """Radial nodes and their angle-summed weights (for radial integrands)."""
        _, r, w = self.rule()
        return r, w.sum(axis=1)

    def moments(self) -> MomentReport:
        pts, w = self.nodes()
        first = w @ pts
        M2 = np.einsum("n,ni,nj->ij", w, pts, pts)
        mu2 = np.trace(M2) / self.dim
        iso = float(np.max(np.abs(M2 - mu2 * np.eye(self.dim))))
        third = np.einsum("n,ni,nj,nk->ijk", w, pts, pts, pts)
        odd = float(max(np.max(np.abs(first)), np.max(np.abs(third))))
        rad = np.linalg.norm(pts, axis=1)
        C = {k: float(w @ rad ** k) for k in range(1, 5)}
        return MomentReport(self.Z, float(mu2), C, first, odd, iso)

    def to_dict(self):
        out = {"profile": self.profile, "support": self.support, "order": self.order}
        if self.shift:
            out["shift"] = list(self.shift)
        return out


@dataclass(frozen=True)
class BoundaryWindow:
    """Normal profile w0 on [0, width] (width <= c_*) times a tangential radial window."""

    dim: int = 2
    profile: str = "triangular"
    c_star: float = 0.6
    width: float | None = None
    order: int = 20
    tangential_profile: str = "quartic"
    tangential_support: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not callable(self.profile) and self.profile not in NORMAL_PROFILES:
            raise ValueError(f"unknown normal profile {self.profile!r}")
        if not 0 < self.c_star < 1:
            raise ValueError("c_star must lie in (0, 1)")
        if self.width is not None and not 0 < self.width <= self.c_star:
            raise ValueError("normal window width must lie in (0, c_star]")

    @property
    def span(self):
        return self.c_star if self.width is None else self.width

    @property
    def tangential(self) -> InteriorWindow:
        return InteriorWindow(self.dim - 1, self.tangential_profile,
                              self.tangential_support, self.order)

    def w0_raw(self, tau):
        tau = np.asarray(tau, dtype=float)
        f = self.profile if callable(self.profile) else NORMAL_PROFILES[self.profile]
        return np.where((tau >= 0) & (tau <= self.span), self.scale * f(tau / self.span), 0.0)

    def normal_rule(self):
        """Gauss nodes tau in [0, span] and normalized weights."""
        tau, wt = gauss_interval(self.order, 0.0, self.span)
        vals = self.w0_raw(tau)
        if np.any(vals < 0):
            raise NegativeProfile("normal profile is negative somewhere")
        w = wt * vals
        if not w.sum() > 0:
            raise ZeroMass("normal profile has zero mass")
        return tau, w / w.sum()

    @property
    def Z(self):
        tau, wt = gauss_interval(self.order, 0.0, self.span)
        return float(wt @ self.w0_raw(tau))

    def w0(self, tau):
        return self.w0_raw(tau) / self.Z

    def moments(self) -> MomentReport:
        tau, w = self.normal_rule()
        C = {k: float(w @ tau ** k) for k in range(1, 5)}
        tm = self.tangential.moments()
        return MomentReport(self.Z, C[1], C, tm.first, tm.odd_residual, tm.isotropy_residual)

    def to_dict(self):
        out = {"profile": self.profile, "c_star": self.c_star, "order": self.order}
        if self.width is not None:
            out["width"] = self.width
        return out


@dataclass(frozen=True)
class WindowPair:
    interior: InteriorWindow
    boundary: BoundaryWindow

    @property
    def mu2(self):
        return self.interior.moments().mu

    @property
    def mu1(self):
        return self.boundary.moments().mu

    @property
    def dim(self):
        return self.interior.dim


def default_windows(dim=2, c_star=0.6) -> WindowPair:
    return WindowPair(InteriorWindow(dim), BoundaryWindow(dim, c_star=c_star))


# ---------------------------------------------------------------------------
# independent 1D oracles


def radial_moment_oracle(profile="quartic", dim=2, support=1.0):
    """mu2 from two scipy.quad radial integrals (independent of the tensor rule)."""
    phi = RADIAL_PROFILES[profile]
    num = integrate.quad(lambda r: r ** (dim + 1) * phi(r / support), 0, support, epsabs=1e-14, epsrel=1e-14)[0]
    den = integrate.quad(lambda r: r ** (dim - 1) * phi(r / support), 0, support, epsabs=1e-14, epsrel=1e-14)[0]
    return num / den / dim


def normal_moment_oracle(profile="triangular", span=0.6, k=1):
    w = NORMAL_PROFILES[profile]
    num = integrate.quad(lambda t: t ** k * w(t / span), 0, span, epsabs=1e-14, epsrel=1e-14)[0]
    den = integrate.quad(lambda t: w(t / span), 0, span, epsabs=1e-14, epsrel=1e-14)[0]
    return num / den


@dataclass
class WindowCheck:
    passed: bool
    rows: list = field(default_factory=list)

    def failures(self):
        return [r for r in self.rows if not r["ok"]]


def verify_window_class(window, odd_tol=1e-12, mass_tol=1e-12, iso_tol=1e-12) -> WindowCheck:
    """Check normalization, odd moments, isotropy and moment bounds.

    Failures are reported in the returned table, never raised.
    """
    rows = []

    def add(name, value, target, tol):
        resid = abs(value - target)
        rows.append({"name": name, "value": float(value), "target": float(target),
                     "residual": float(resid), "tol": tol, "ok": bool(resid <= tol)})

    if isinstance(window, WindowPair):
        a = verify_window_class(window.interior, odd_tol, mass_tol, iso_tol)
        b = verify_window_class(window.boundary, odd_tol, mass_tol, iso_tol)
        for r in a.rows:
            r["name"] = "interior." + r["name"]
        for r in b.rows:
            r["name"] = "boundary." + r["name"]
        return WindowCheck(a.passed and b.passed, a.rows + b.rows)

    try:
        m = window.moments()
    except (NegativeProfile, ZeroMass) as exc:
        return WindowCheck(False, [{"name": type(exc).__name__, "value": float("nan"),
                                    "target": 0.0, "residual": float("inf"),
                                    "tol": 0.0, "ok": False}])
    if isinstance(window, InteriorWindow):
        pts, w = window.nodes()
        add("mass", w.sum(), 1.0, mass_tol)
        for i, v in enumerate(m.first):
            add(f"first[{i}]", v, 0.0, odd_tol)
        add("odd", m.odd_residual, 0.0, odd_tol)
        add("isotropy", m.isotropy_residual, 0.0, iso_tol)
        bound = window.support + np.linalg.norm(window.shift) if window.shift else window.support
        for k, v in m.C.items():
            rows.append({"name": f"C{k}", "value": v, "target": bound ** k,
                         "residual": 0.0, "tol": 0.0, "ok": bool(v <= bound ** k)})
    else:
        _, w = window.normal_rule()
        add("mass", w.sum(), 1.0, mass_tol)
        for k, v in m.C.items():
            rows.append({"name": f"C{k}", "value": v, "target": window.c_star ** k,
                         "residual": 0.0, "tol": 0.0, "ok": bool(v <= window.c_star ** k)})
        if window.dim > 1:
            for i, v in enumerate(m.first):
                add(f"tangential.first[{i}]", v, 0.0, odd_tol)
    return WindowCheck(all(r["ok"] for r in rows), rows)
