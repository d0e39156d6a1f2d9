"""Analytic test geometries and their exact oracles.

Four families are supported:

* ``flat_torus``       -- R^d / (L_1 Z x ... x L_d Z), no boundary.
* ``round_sphere``     -- S^d of radius rho, no boundary.
* ``euclidean_ball``   -- closed ball of radius r in R^d, boundary S^{d-1}_r.
* ``perturbed_chart``  -- the flat 2-torus (or a flat strip with two straight
  edges) carrying the conformal metric (1 + psi) delta, where
  psi = a * max(0, 1 - |x - x0|^2 / rho_b^2)^2 is C^{1,1} but not C^2.

Points on the sphere are embedding vectors in R^{d+1}; every other family uses
its chart coordinates.  Curvature follows the outer-normal convention, so the
mean curvature of a round sphere bounding a ball is positive.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ChartDomainExceeded,
    NoBoundary,
    NonPositiveScale,
    UnsupportedDimension,
)


class Kind(str, enum.Enum):
    FLAT_TORUS = "flat_torus"
    ROUND_SPHERE = "round_sphere"
    EUCLIDEAN_BALL = "euclidean_ball"
    PERTURBED_CHART = "perturbed_chart"


def sphere_area(n):
    """Area of the unit n-sphere S^n in R^{n+1}."""
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


def ball_volume(d):
    """Volume of the unit ball in R^d."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class GeometrySpec:
    """Immutable descriptor of an analytic test manifold.

    Use the constructors :func:`flat_torus`, :func:`round_sphere`,
    :func:`euclidean_ball` and :func:`perturbed_chart` rather than building
    instances by hand; they validate the parameters.
    """

    kind: Kind
    dim: int
    periods: tuple = ()
    radius: float = 0.0
    amplitude: float = 0.0
    center: tuple = ()
    bump_radius: float = 0.0
    boundary: bool = False

    @property
    def has_boundary(self) -> bool:
        return self.kind is Kind.EUCLIDEAN_BALL or (
            self.kind is Kind.PERTURBED_CHART and self.boundary
        )

    @property
    def is_flat(self) -> bool:
        return self.kind in (Kind.FLAT_TORUS, Kind.EUCLIDEAN_BALL) or (
            self.kind is Kind.PERTURBED_CHART and self.amplitude == 0.0
        )

    @property
    def is_homogeneous(self) -> bool:
        """Whether the normal-chart density is the same function of z at every point."""
        return self.kind is not Kind.PERTURBED_CHART or self.amplitude == 0.0

    @property
    def reach(self) -> float:
        if self.kind is Kind.EUCLIDEAN_BALL:
            return self.radius
        if self.kind is Kind.PERTURBED_CHART and self.boundary:
            return self.periods[1] / 2.0
        return math.inf

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "dim": self.dim}
        if self.kind in (Kind.FLAT_TORUS, Kind.PERTURBED_CHART):
            out["periods"] = list(self.periods)
        if self.kind in (Kind.ROUND_SPHERE, Kind.EUCLIDEAN_BALL):
            out["radius"] = self.radius
        if self.kind is Kind.PERTURBED_CHART:
            out.update(
                amplitude=self.amplitude,
                center=list(self.center),
                bump_radius=self.bump_radius,
                boundary=self.boundary,
            )
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GeometrySpec":
        kind = Kind(data["kind"])
        dim = int(data["dim"])
        if kind is Kind.FLAT_TORUS:
            return flat_torus(dim, data.get("periods"))
        if kind is Kind.ROUND_SPHERE:
            return round_sphere(dim, data.get("radius", 1.0))
        if kind is Kind.EUCLIDEAN_BALL:
            return euclidean_ball(dim, data.get("radius", 1.0))
        return perturbed_chart(
            periods=data.get("periods", (1.0, 1.0)),
            amplitude=data.get("amplitude", 0.3),
            center=data.get("center"),
            bump_radius=data.get("bump_radius", 0.25),
            boundary=data.get("boundary", False),
        )


def _check_dim(dim, allowed=(2, 3)):
    if dim not in allowed:
        raise UnsupportedDimension(f"dimension {dim} not in {allowed}")


def flat_torus(dim=2, periods=None) -> GeometrySpec:
    _check_dim(dim)
    if periods is None:
        periods = (1.0,) * dim
    periods = tuple(float(p) for p in periods)
    if len(periods) != dim or min(periods) <= 0:
        raise ValueError(f"need {dim} positive periods, got {periods}")
    return GeometrySpec(Kind.FLAT_TORUS, dim, periods=periods)


def round_sphere(dim=2, radius=1.0) -> GeometrySpec:
    _check_dim(dim)
    if radius <= 0:
        raise NonPositiveScale(f"sphere radius must be positive, got {radius}")
    return GeometrySpec(Kind.ROUND_SPHERE, dim, radius=float(radius))


def euclidean_ball(dim=2, radius=1.0) -> GeometrySpec:
    _check_dim(dim)
    if radius <= 0:
        raise NonPositiveScale(f"ball radius must be positive, got {radius}")
    return GeometrySpec(Kind.EUCLIDEAN_BALL, dim, radius=float(radius))


def perturbed_chart(periods=(1.0, 1.0), amplitude=0.3, center=None,
                    bump_radius=0.25, boundary=False) -> GeometrySpec:
    """Flat 2-torus (or strip, if ``boundary``) with a C^{1,1} conformal bump.

    With ``boundary=True`` the chart is periodic in x1 and has straight edges
    at x2 = 0 and x2 = L2.  The bump must then stay clear of both edges so the
    metric is flat on a collar of width L2/4 around them.
    """
    periods = tuple(float(p) for p in periods)
    if len(periods) != 2 or min(periods) <= 0:
        raise UnsupportedDimension("perturbed_chart is two-dimensional")
    if center is None:
        center = (periods[0] / 2, periods[1] / 2)
    center = tuple(float(c) for c in center)
    if bump_radius <= 0:
        raise NonPositiveScale("bump radius must be positive")
    if amplitude <= -1.0:
        raise ValueError("amplitude must exceed -1 to keep the metric elliptic")
    if 2 * bump_radius >= min(periods):
        raise ValueError("bump must fit inside one period cell")
    if boundary:
        collar = periods[1] / 4
        if center[1] - bump_radius < collar or center[1] + bump_radius > periods[1] - collar:
            raise ValueError("bump must stay L2/4 away from the chart edges")
    return GeometrySpec(Kind.PERTURBED_CHART, 2, periods=periods,
                        amplitude=float(amplitude), center=center,
                        bump_radius=float(bump_radius), boundary=bool(boundary))


def rescale(geom: GeometrySpec, sigma: float) -> GeometrySpec:
    """Multiply every length of ``geom`` by ``sigma`` (g -> sigma^2 g in fixed coordinates)."""
    if not sigma > 0:
        raise NonPositiveScale(f"scale factor must be positive, got {sigma}")
    return replace(
        geom,
        periods=tuple(sigma * p for p in geom.periods),
        radius=sigma * geom.radius,
        center=tuple(sigma * c for c in geom.center),
        bump_radius=sigma * geom.bump_radius,
    )


# ---------------------------------------------------------------------------
# conformal bump


def _bump_offset(geom, x):
    """Minimum-image displacement x - x0 for the perturbed chart."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(geom.center)
    L = np.asarray(geom.periods)
    dx = x - c
    dx[..., 0] -= L[0] * np.round(dx[..., 0] / L[0])
    if not geom.boundary:
        dx[..., 1] -= L[1] * np.round(dx[..., 1] / L[1])
    return dx


def bump_factor(geom, x):
    """Conformal factor phi = 1 + psi and its gradient and Laplacian (a.e.)."""
    dx = _bump_offset(geom, x)
    rb2 = geom.bump_radius ** 2
    q = np.sum(dx * dx, axis=-1) / rb2
    a = geom.amplitude
    inside = q < 1.0
    one_q = np.where(inside, 1.0 - q, 0.0)
    phi = 1.0 + a * one_q ** 2
    grad = (-4.0 * a / rb2) * one_q[..., None] * dx
    lap = np.where(inside, -8.0 * a * (1.0 - 2.0 * q) / rb2, 0.0)
    return phi, grad, lap


class ConformalBumpField:
    """Metric field g = phi * delta of a perturbed chart, for geodesic shooting."""

    def __init__(self, geom):
        self.geom = geom

    def metric(self, x):
        phi, _, _ = bump_factor(self.geom, x)
        return phi[..., None, None] * np.eye(2)

    def metric_grad(self, x):
        # [..., k, i, j] = d_k g_ij
        _, grad, _ = bump_factor(self.geom, x)
        return grad[..., :, None, None] * np.eye(2)

    def gauss_curvature(self, x):
        phi, grad, lap = bump_factor(self.geom, x)
        lap_log = lap / phi - np.sum(grad * grad, axis=-1) / phi ** 2
        return -0.5 * lap_log / phi

    def geodesic_rhs(self, p, v):
        """Geodesic acceleration and Gauss curvature at p (closed form for g = phi delta)."""
        phi, grad, lap = bump_factor(self.geom, p)
        gv = np.sum(grad * v, axis=-1)
        vv = np.sum(v * v, axis=-1)
        acc = -(2.0 * v * gv[:, None] - vv[:, None] * grad) / (2.0 * phi[:, None])
        K = -0.5 * (lap / phi - np.sum(grad * grad, axis=-1) / phi ** 2) / phi
        return acc, K


def _christoffel(g, dg):
    """Gamma^k_ij from g[..., i, j] and dg[..., k, i, j] = d_k g_ij."""
    ginv = np.linalg.inv(g)
    # lower[..., l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    lower = (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, lower)


def _inv_sqrt_spd(g):
    w, v = np.linalg.eigh(g)
    return np.einsum("...ij,...j,...kj->...ik", v, 1.0 / np.sqrt(w), v)


def shoot_rays(field, x0, thetas, radii, substeps=2):
    """Jacobi-field length j(s) along unit-speed geodesics from ``x0``.

    For a two-dimensional metric the volume density in geodesic polar
    coordinates is j(s, theta) / s, where j'' = -K(gamma(s)) j, j(0) = 0,
    j'(0) = 1.  Rays start from ``x0[m]`` in the direction ``thetas[m]`` of a
    g-orthonormal frame; ``radii`` must be sorted and positive.

    Returns an array of shape (len(thetas), len(radii)).
    """
    x0 = np.asarray(x0, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    radii = np.asarray(radii, dtype=float)
    e = np.stack([np.cos(thetas), np.sin(thetas)], axis=-1)
    frame = _inv_sqrt_spd(field.metric(x0))
    p = x0.copy()
    v = np.einsum("...ij,...j->...i", frame, e)
    j = np.zeros(len(thetas))
    jp = np.ones(len(thetas))

    def rhs(p, v, j, jp):
        if hasattr(field, "geodesic_rhs"):
            acc, K = field.geodesic_rhs(p, v)
        else:
            gam = _christoffel(field.metric(p), field.metric_grad(p))
            acc = -np.einsum("...kij,...i,...j->...k", gam, v, v)
            K = field.gauss_curvature(p)
        return v, acc, jp, -K * j

    out = np.empty((len(thetas), len(radii)))
    s = 0.0
    for n, target in enumerate(radii):
        ds = (target - s) / substeps
        for _ in range(substeps):
            k1 = rhs(p, v, j, jp)
            k2 = rhs(*(y + 0.5 * ds * k for y, k in zip((p, v, j, jp), k1)))
            k3 = rhs(*(y + 0.5 * ds * k for y, k in zip((p, v, j, jp), k2)))
            k4 = rhs(*(y + ds * k for y, k in zip((p, v, j, jp), k3)))
            p, v, j, jp = (
                y + ds / 6.0 * (a + 2 * b + 2 * c + d)
                for y, a, b, c, d in zip((p, v, j, jp), k1, k2, k3, k4)
            )
        s = target
        out[:, n] = j
    return out


# ---------------------------------------------------------------------------
# charts and densities


def injectivity_radius(geom, x=None):
    """Radius of the normal chart at ``x`` (restricted to stay inside M)."""
    if geom.kind is Kind.FLAT_TORUS:
        return min(geom.periods) / 2
    if geom.kind is Kind.ROUND_SPHERE:
        return math.pi * geom.radius
    if geom.kind is Kind.EUCLIDEAN_BALL:
        if x is None:
            return geom.radius
        return geom.radius - np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    limit = min(geom.periods) / 2
    if geom.boundary and x is not None:
        x = np.asarray(x, dtype=float)
        return np.minimum(limit, np.minimum(x[..., 1], geom.periods[1] - x[..., 1]))
    return limit


def radial_density(geom, r):
    """Normal-chart volume density as a function of |z| (homogeneous geometries only)."""
    r = np.asarray(r, dtype=float)
    if geom.kind is Kind.ROUND_SPHERE:
        q = r / geom.radius
        return np.sinc(q / np.pi) ** (geom.dim - 1)
    if geom.is_flat:
        return np.ones_like(r)
    raise ValueError(f"{geom.kind.value} with a bump is not homogeneous")


def metric_density_normal(geom, x, z):
    """Exact sqrt(det g) in geodesic normal coordinates centred at ``x``.

    ``z`` may be a single offset of shape (d,) or a stack (..., d).
    """
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(z, axis=-1)
    inj = injectivity_radius(geom, x)
    if np.any(r >= inj):
        raise ChartDomainExceeded(f"|z| = {np.max(r):.6g} reaches the injectivity radius {np.min(inj):.6g}")
    if geom.is_homogeneous:
        out = radial_density(geom, r)
    else:
        zz = np.atleast_2d(z).reshape(-1, 2)
        rr = np.linalg.norm(zz, axis=-1)
        out = np.ones(len(zz))
        moving = rr > 0
        if np.any(moving):
            theta = np.arctan2(zz[moving, 1], zz[moving, 0])
            x0 = np.broadcast_to(np.asarray(x, dtype=float), (int(moving.sum()), 2))
            field = ConformalBumpField(geom)
            # rays have different lengths: shoot each to unit parameter on a rescaled metric
            # is awkward, so shoot each ray separately in a batch of one radius
            j = np.empty(int(moving.sum()))
            for i, (xi, th, ri) in enumerate(zip(x0, theta, rr[moving])):
                j[i] = shoot_rays(field, xi[None], np.array([th]), np.array([ri]), substeps=16)[0, 0]
            out[moving] = j / rr[moving]
        out = out.reshape(r.shape)
    return float(out) if np.ndim(out) == 0 else out


def fermi_density(geom, s, zt, t):
    """Exact volume density in Fermi coordinates (tangential zt, inward depth t).

    For the ball the tangential coordinates are normal coordinates on the
    boundary sphere, so the density factorises into the boundary-sphere
    density at zt times ((r - t)/r)^(d-1).
    """
    if not geom.has_boundary:
        raise NoBoundary(f"{geom.kind.value} has no boundary")
    t = np.asarray(t, dtype=float)
    zt = np.asarray(zt, dtype=float)
    if np.any(t < 0) or np.any(t >= geom.reach):
        raise ChartDomainExceeded("normal depth outside [0, reach)")
    if geom.kind is Kind.PERTURBED_CHART:
        # flat collar, enforced at construction
        if np.any(t >= geom.periods[1] / 4):
            raise ChartDomainExceeded("depth beyond the flat collar")
        return np.ones(np.broadcast_shapes(t.shape, zt.shape[:-1] if zt.ndim else ()))
    r = geom.radius
    d = geom.dim
    normal = ((r - t) / r) ** (d - 1)
    if d == 2:
        tang = 1.0
    else:
        rt = np.linalg.norm(zt, axis=-1)
        if np.any(rt >= math.pi * r / 2):
            raise ChartDomainExceeded("tangential offset beyond the boundary chart")
        tang = np.sinc(rt / (math.pi * r)) ** (d - 2)
    out = normal * tang
    return float(out) if np.ndim(out) == 0 else out


def curvature_oracles(geom):
    """Exact scalar curvature R(x) and boundary mean curvature K(s).

    Returns a pair of callables.  ``K`` raises :class:`NoBoundary` on closed
    geometries.  For the perturbed chart R is the a.e. closed form of the
    conformal metric; it jumps across the rim of the bump.
    """
    d = geom.dim

    if geom.kind is Kind.ROUND_SPHERE:
        value = d * (d - 1) / geom.radius ** 2

        def R(x):
            x = np.asarray(x, dtype=float)
            return np.full(x.shape[:-1], value) if x.ndim > 1 else value
    elif geom.kind is Kind.PERTURBED_CHART:
        field_ = ConformalBumpField(geom)

        def R(x):
            return 2.0 * field_.gauss_curvature(x)
    else:
        def R(x):
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0

    if geom.kind is Kind.EUCLIDEAN_BALL:
        kval = (d - 1) / geom.radius

        def K(s):
            s = np.asarray(s, dtype=float)
            return np.full(s.shape[:-1], kval) if s.ndim > 1 else kval
    elif geom.has_boundary:
        def K(s):
            s = np.asarray(s, dtype=float)
            return np.zeros(s.shape[:-1]) if s.ndim > 1 else 0.0
    else:
        def K(s):
            raise NoBoundary(f"{geom.kind.value} has no boundary")

    return R, K


@dataclass(frozen=True)
class ExactFunctionals:
    vol: float
    total_R: float
    area: float
    total_K: float
    F_limit: float
    constants: tuple = field(default=(0.0, 0.0, 0.0))


def exact_functionals(geom, c0=0.0, c1=0.0, c2=0.0) -> ExactFunctionals:
    """Closed-form volume, total scalar curvature, boundary area and total mean curvature."""
    d = geom.dim
    if geom.kind is Kind.FLAT_TORUS:
        vol, total_R, area, total_K = math.prod(geom.periods), 0.0, 0.0, 0.0
    elif geom.kind is Kind.ROUND_SPHERE:
        vol = sphere_area(d) * geom.radius ** d
        total_R = d * (d - 1) / geom.radius ** 2 * vol
        area = total_K = 0.0
    elif geom.kind is Kind.EUCLIDEAN_BALL:
        r = geom.radius
        vol = ball_volume(d) * r ** d
        total_R = 0.0
        area = sphere_area(d - 1) * r ** (d - 1)
        total_K = (d - 1) / r * area
    else:
        # integral of a (1 - q)^2 over the disc is a pi rho_b^2 / 3; Gauss-Bonnet
        # on the torus (or the strip with flat, straight edges) forces total R = 0
        vol = math.prod(geom.periods) + geom.amplitude * math.pi * geom.bump_radius ** 2 / 3
        total_R = 0.0
        area = 2.0 * geom.periods[0] if geom.boundary else 0.0
        total_K = 0.0
    F = c0 * vol + c1 * total_R + c2 * total_K
    return ExactFunctionals(vol, total_R, area, total_K, F, (c0, c1, c2))
