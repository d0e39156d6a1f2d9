"""Structured, boundary-fitted meshes of the analytic test geometries.

* torus  -- uniform grid of d-cubes;
* sphere -- equiangular cubed sphere (6 faces for S^2, 8 for S^3);
* ball   -- polar rings (d = 2) or spherical shells with a cubed-sphere
  angular partition (d = 3).  The outermost ring is the first boundary layer.

A mesh is stored as parallel arrays (one entry per cell) rather than a list
of cell objects; :meth:`Mesh.cell` builds a :class:`Cell` view on demand.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InterfaceTouchesBoundary, MeshsizeTooLarge, UnsupportedDimension
from .geometry import Kind, exact_functionals

INTERIOR, FIRST_LAYER, DEEPER_LAYER = 0, 1, 2
LAYER_NAMES = {INTERIOR: "interior", FIRST_LAYER: "first", DEEPER_LAYER: "deeper"}


@dataclass(frozen=True)
class Cell:
    id: int
    anchor: np.ndarray
    volume: float
    layer: int
    band: int
    depth: float
    base_area: float
    footpoint: np.ndarray
    diameter: float


@dataclass
class Mesh:
    geom: object
    h: float
    c_star: float
    anchors: np.ndarray        # (N, d) chart coords; (N, d+1) embedding on spheres
    volumes: np.ndarray
    layer: np.ndarray
    band: np.ndarray           # normal-depth band index, -1 on closed manifolds
    depth: np.ndarray          # t_c, nan on closed manifolds
    base_area: np.ndarray      # boundary footprint area, 0 off the first layer
    footpoints: np.ndarray
    diameters: np.ndarray
    min_angle_deg: float
    hausdorff: float = 0.0
    aspect_bound: float = 4.0
    theta0_deg: float = 30.0
    extra: dict = None

    def __len__(self):
        return len(self.volumes)

    @property
    def dim(self):
        return self.geom.dim

    @property
    def n_cells(self):
        return len(self.volumes)

    def cell(self, i) -> Cell:
        return Cell(int(i), self.anchors[i], float(self.volumes[i]), int(self.layer[i]),
                    int(self.band[i]), float(self.depth[i]), float(self.base_area[i]),
                    self.footpoints[i], float(self.diameters[i]))

    @property
    def cells(self):
        return [self.cell(i) for i in range(len(self))]

    def mask(self, layer):
        return self.layer == layer

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cell_id", "layer", "t_c", "volume", "base_area"])
        for i in range(len(self)):
            w.writerow([i, LAYER_NAMES[int(self.layer[i])], _fmt(self.depth[i]),
                        _fmt(self.volumes[i]), _fmt(self.base_area[i])])
        return buf.getvalue()


def _fmt(x):
    return "" if not np.isfinite(x) else repr(float(x))


# ---------------------------------------------------------------------------
# cubed-sphere helpers


def _face_area_unit(u0, u1, v0, v1):
    """Area on the unit S^2 of the gnomonic rectangle [u0,u1] x [v0,v1]."""
    def F(u, v):
        return np.arctan(u * v / np.sqrt(1 + u * u + v * v))
    return F(u1, v1) - F(u0, v1) - F(u1, v0) + F(u0, v0)


def _cubed_s2(n):
    """Equiangular cubed-sphere partition of S^2 with n x n cells per face.

    Returns centres (N, 3), unit areas (N,), corners (N, 4, 3) on the unit sphere
    and per-cell (axis, sign, alpha bounds...) rows.
    """
    a = np.linspace(-np.pi / 4, np.pi / 4, n + 1)
    t = np.tan(a)
    am = 0.5 * (a[1:] + a[:-1])
    tm = np.tan(am)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    area = _face_area_unit(t[i], t[i + 1], t[j], t[j + 1])
    centres, areas, corners, info = [], [], [], []
    for axis in range(3):
        b, c = [k for k in range(3) if k != axis]
        for sign in (1.0, -1.0):
            def embed(u, v):
                p = np.zeros(u.shape + (3,))
                p[..., axis] = sign
                p[..., b] = u
                p[..., c] = v
                return p / np.linalg.norm(p, axis=-1, keepdims=True)
            centres.append(embed(tm[i], tm[j]))
            areas.append(area)
            cu = np.stack([t[i], t[i + 1], t[i + 1], t[i]], axis=1)
            cv = np.stack([t[j], t[j], t[j + 1], t[j + 1]], axis=1)
            corners.append(embed(cu, cv))
            info.append(np.stack([np.full(len(i), axis), np.full(len(i), sign),
                                  a[i], a[i + 1], a[j], a[j + 1]], axis=1))
    return np.concatenate(centres), np.concatenate(areas), np.concatenate(corners), np.concatenate(info)


def _cubed_s3(n, order=6):
    """Equiangular partition of S^3 by the 8 cubical faces of the tesseract."""
    a = np.linspace(-np.pi / 4, np.pi / 4, n + 1)
    am = 0.5 * (a[1:] + a[:-1])
    x, w = leggauss(order)
    half = 0.5 * (a[1:] - a[:-1])
    A = half[:, None] * x[None, :] + am[:, None]
    U = np.tan(A)
    DU = half[:, None] * w[None, :] / np.cos(A) ** 2
    # unit volume of cell (i,j,k): sum over tensor nodes of (1+|u|^2)^-2 du dv dw
    uu = U ** 2
    s = uu[:, None, None, :, None, None] + uu[None, :, None, None, :, None] + uu[None, None, :, None, None, :]
    f = (1 + s) ** -2 * DU[:, None, None, :, None, None] * DU[None, :, None, None, :, None] \
        * DU[None, None, :, None, None, :]
    vol = f.sum(axis=(3, 4, 5)).ravel()
    t = np.tan(a)
    tm = np.tan(am)
    I, J, K = (g.ravel() for g in np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij"))
    bits = np.array([[(m >> 0) & 1, (m >> 1) & 1, (m >> 2) & 1] for m in range(8)])
    centres, vols, corners, info = [], [], [], []
    for axis in range(4):
        others = [k for k in range(4) if k != axis]
        for sign in (1.0, -1.0):
            def embed(u, v, q):
                p = np.zeros(u.shape + (4,))
                p[..., axis] = sign
                p[..., others[0]] = u
                p[..., others[1]] = v
                p[..., others[2]] = q
                return p / np.linalg.norm(p, axis=-1, keepdims=True)
            centres.append(embed(tm[I], tm[J], tm[K]))
            vols.append(vol)
            cu = t[I[:, None] + bits[None, :, 0]]
            cv = t[J[:, None] + bits[None, :, 1]]
            cq = t[K[:, None] + bits[None, :, 2]]
            corners.append(embed(cu, cv, cq))
            info.append(np.stack([np.full(len(I), axis), np.full(len(I), sign),
                                  a[I], a[I + 1], a[J], a[J + 1], a[K], a[K + 1]], axis=1))
    return np.concatenate(centres), np.concatenate(vols), np.concatenate(corners), np.concatenate(info)


def _geodesic(p, q):
    c = np.clip(np.sum(p * q, axis=-1), -1.0, 1.0)
    return np.arccos(c)


def _corner_angles(corners, spherical):
    """Minimum corner angle (degrees) of hypercube-indexed cells.

    ``corners`` has shape (N, 2^k, D); corner m is adjacent to m ^ (1 << a).
    On the unit sphere edge directions are projected to the tangent space.
    """
    N, M, D = corners.shape
    k = int(round(math.log2(M)))
    best = np.full(N, 180.0)
    for m in range(M):
        P = corners[:, m]
        tangents = []
        for a in range(k):
            Q = corners[:, m ^ (1 << a)]
            e = Q - P
            if spherical:
                e = Q - np.sum(P * Q, axis=-1, keepdims=True) * P
            tangents.append(e / np.linalg.norm(e, axis=-1, keepdims=True))
        for a in range(k):
            for b in range(a + 1, k):
                c = np.clip(np.sum(tangents[a] * tangents[b], axis=-1), -1, 1)
                best = np.minimum(best, np.degrees(np.arccos(c)))
    return float(best.min())


# ---------------------------------------------------------------------------
# builders


def build_mesh(geom, h, c_star=0.6) -> Mesh:
    """Boundary-fitted, shape-regular mesh of ``geom`` at meshsize ``h``."""
    if geom.dim not in (2, 3):
        raise UnsupportedDimension(f"no mesher for dimension {geom.dim}")
    if not h > 0:
        raise MeshsizeTooLarge("meshsize must be positive")
    if geom.kind in (Kind.FLAT_TORUS, Kind.PERTURBED_CHART):
        return _torus_mesh(geom, h, c_star)
    if geom.kind is Kind.ROUND_SPHERE:
        return _sphere_mesh(geom, h, c_star)
    if geom.kind is Kind.EUCLIDEAN_BALL:
        if h >= geom.reach / 4:
            raise MeshsizeTooLarge(f"h = {h} must be below reach/4 = {geom.reach / 4}")
        return _ball_mesh_2d(geom, h, c_star) if geom.dim == 2 else _ball_mesh_3d(geom, h, c_star)
    raise UnsupportedDimension(geom.kind)


def _torus_mesh(geom, h, c_star):
    L = np.asarray(geom.periods)
    n = np.rint(L / h).astype(int)
    if np.any(n < 4):
        raise MeshsizeTooLarge(f"h = {h} leaves fewer than 4 cells per period")
    dx = L / n
    if np.any(np.abs(dx - h) > 0.01 * h):
        raise ValueError(f"h = {h} does not divide the periods {tuple(L)} within 1%")
    axes = [(np.arange(k) + 0.5) * s for k, s in zip(n, dx)]
    anchors = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    N = len(anchors)
    if geom.kind is Kind.PERTURBED_CHART:
        volumes = _bump_cell_volumes(geom, n, dx)
    else:
        volumes = np.full(N, float(np.prod(dx)))
    layer = np.full(N, INTERIOR, dtype=np.int8)
    band = np.full(N, -1)
    depth = np.full(N, np.nan)
    base = np.zeros(N)
    if geom.kind is Kind.PERTURBED_CHART and geom.boundary:
        y = anchors[:, 1]
        depth = np.minimum(y, L[1] - y)
        band = np.floor(depth / h + 1e-9).astype(int)
        first = depth <= c_star * h
        layer[first] = FIRST_LAYER
        layer[~first & (depth < geom.reach / 2)] = DEEPER_LAYER
        base[first] = dx[0]
    foot = np.full_like(anchors, np.nan)
    if geom.kind is Kind.PERTURBED_CHART and geom.boundary:
        fy = np.where(anchors[:, 1] < L[1] / 2, 0.0, L[1])
        foot = np.stack([anchors[:, 0], fy], axis=1)
        foot[layer != FIRST_LAYER] = np.nan
    diam = np.full(N, float(np.linalg.norm(dx)))
    return Mesh(geom, h, c_star, anchors, volumes, layer, band, depth, base, foot, diam, 90.0)


def _bump_cell_volumes(geom, n, dx):
    """Exact cell volumes of the conformal bump metric (area element 1 + psi in 2D)."""
    from scipy import integrate
    a, rb = geom.amplitude, geom.bump_radius
    cx, cy = geom.center
    L = geom.periods

    def col_integral(x, y0, y1):
        # integral over y in [y0, y1] of a (1 - ((x-cx)^2 + (y-cy)^2)/rb^2)^2 on the disc
        X = x - cx
        X -= L[0] * np.round(X / L[0])
        r2 = rb * rb - X * X
        if r2 <= 0:
            return 0.0
        half = math.sqrt(r2)
        lo, hi = max(y0 - cy, -half), min(y1 - cy, half)
        if geom.boundary is False:
            # the bump never wraps in y because 2 rb < L2
            pass
        if hi <= lo:
            return 0.0

        def anti(y):
            # antiderivative of (r2 - y^2)^2 / rb^4
            return (r2 * r2 * y - 2 * r2 * y ** 3 / 3 + y ** 5 / 5) / rb ** 4
        return a * (anti(hi) - anti(lo))

    vols = np.full((n[0], n[1]), dx[0] * dx[1])
    xs = np.arange(n[0] + 1) * dx[0]
    ys = np.arange(n[1] + 1) * dx[1]
    for i in range(n[0]):
        x0, x1 = xs[i], xs[i + 1]
        Xl = (x0 - cx) - L[0] * np.round((0.5 * (x0 + x1) - cx) / L[0])
        if abs(Xl + 0.5 * dx[0]) > rb + dx[0]:
            continue
        brk = [x for x in (cx - rb, cx + rb) if x0 < x < x1]
        for j in range(n[1]):
            y0, y1 = ys[j], ys[j + 1]
            if min(abs(y0 - cy), abs(y1 - cy)) > rb and not (y0 <= cy <= y1):
                continue
            v = integrate.quad(col_integral, x0, x1, args=(y0, y1), points=brk or None,
                               epsabs=1e-15, epsrel=1e-13, limit=200)[0]
            vols[i, j] += v
    return vols.ravel()


def _sphere_mesh(geom, h, c_star):
    rho = geom.radius
    n = max(2, math.ceil(rho * math.pi / 2 / h))
    if rho * math.pi / 2 / h < 2:
        raise MeshsizeTooLarge(f"h = {h} too coarse for a sphere of radius {rho}")
    if geom.dim == 2:
        centres, unit, corners, info = _cubed_s2(n)
        diam = rho * np.maximum(_geodesic(corners[:, 0], corners[:, 2]),
                                _geodesic(corners[:, 1], corners[:, 3]))
        # reorder corners into binary (u-bit, v-bit) layout for the angle check
        ang = _corner_angles(corners[:, [0, 1, 3, 2]], spherical=True)
    else:
        centres, unit, corners, info = _cubed_s3(n)
        diam = rho * np.max([_geodesic(corners[:, m], corners[:, 7 - m]) for m in range(4)], axis=0)
        ang = _corner_angles(corners, spherical=True)
    N = len(unit)
    return Mesh(geom, h, c_star, rho * centres, rho ** geom.dim * unit,
                np.full(N, INTERIOR, dtype=np.int8), np.full(N, -1), np.full(N, np.nan),
                np.zeros(N), np.full((N, geom.dim + 1), np.nan), diam, ang,
                extra={"faces": info})


def sphere_cell_quadrature(mesh, idx=None, order=6):
    """Tensor Gauss points (n, q^d, d+1) and volume weights (n, q^d) inside sphere cells."""
    info = mesh.extra["faces"] if idx is None else mesh.extra["faces"][idx]
    d = mesh.dim
    rho = mesh.geom.radius
    x, w = leggauss(order)
    lo = info[:, 2::2]
    hi = info[:, 3::2]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    grids = np.meshgrid(*([np.arange(order)] * d), indexing="ij")
    sel = np.stack([g.ravel() for g in grids], axis=1)          # (q^d, d)
    A = mid[:, None, :] + half[:, None, :] * x[sel][None]       # (n, q^d, d)
    W = np.prod(half[:, None, :] * w[sel][None], axis=-1)
    U = np.tan(A)
    W = W * np.prod(1.0 / np.cos(A) ** 2, axis=-1) * (1 + np.sum(U * U, axis=-1)) ** (-(d + 1) / 2)
    P = np.zeros(U.shape[:2] + (d + 1,))
    n = len(info)
    axis = info[:, 0].astype(int)
    sign = info[:, 1]
    for k in range(n):
        others = [m for m in range(d + 1) if m != axis[k]]
        P[k][:, axis[k]] = sign[k]
        P[k][:, others] = U[k]
    P /= np.linalg.norm(P, axis=-1, keepdims=True)
    return rho * P, rho ** d * W


def _classify_depth(depth, h, c_star, reach, outermost):
    band = np.floor(depth / h + 1e-9).astype(int)
    layer = np.full(len(depth), INTERIOR, dtype=np.int8)
    layer[(depth < reach / 2)] = DEEPER_LAYER
    layer[outermost & (depth <= c_star * h * (1 + 1e-12))] = FIRST_LAYER
    return layer, band


def _ball_mesh_2d(geom, h, c_star):
    r = geom.radius
    nr = int(round(r / h))
    dr = r / nr
    anchors, vols, depth, base, foot, diam, outer = [], [], [], [], [], [], []
    min_ang = 90.0
    for k in range(nr):
        r0, r1 = k * dr, (k + 1) * dr
        rm = 0.5 * (r0 + r1)
        m = max(3, int(round(2 * math.pi * rm / h)))
        dth = 2 * math.pi / m
        th = (np.arange(m) + 0.5) * dth
        anchors.append(rm * np.stack([np.cos(th), np.sin(th)], axis=1))
        vols.append(np.full(m, 0.5 * (r1 * r1 - r0 * r0) * dth))
        depth.append(np.full(m, r - rm))
        is_outer = k == nr - 1
        outer.append(np.full(m, is_outer))
        base.append(np.full(m, r * dth if is_outer else 0.0))
        f = r * np.stack([np.cos(th), np.sin(th)], axis=1)
        if not is_outer:
            f[:] = np.nan
        foot.append(f)
        chord = 2 * r1 * math.sin(dth / 2)
        diag = math.sqrt(r0 * r0 + r1 * r1 - 2 * r0 * r1 * math.cos(dth))
        diam.append(np.full(m, max(chord, diag, dr)))
        if k == 0:
            min_ang = min(min_ang, math.degrees(dth))
    anchors = np.concatenate(anchors)
    depth = np.concatenate(depth)
    outer = np.concatenate(outer)
    layer, band = _classify_depth(depth, h, c_star, geom.reach, outer)
    return Mesh(geom, h, c_star, anchors, np.concatenate(vols), layer, band, depth,
                np.concatenate(base), np.concatenate(foot), np.concatenate(diam), min_ang)


def _ball_mesh_3d(geom, h, c_star):
    r = geom.radius
    nr = int(round(r / h))
    dr = r / nr
    anchors, vols, depth, base, foot, diam, outer = [], [], [], [], [], [], []
    min_ang = 90.0
    cache = {}
    for k in range(nr):
        r0, r1 = k * dr, (k + 1) * dr
        rm = 0.5 * (r0 + r1)
        n = 1 if k == 0 else max(1, math.ceil(rm * math.pi / 2 / h))
        if n not in cache:
            cache[n] = _cubed_s2(n)
        cen, unit, corners, _ = cache[n]
        m = len(unit)
        anchors.append(rm * cen)
        vols.append((r1 ** 3 - r0 ** 3) / 3 * unit)
        depth.append(np.full(m, r - rm))
        is_outer = k == nr - 1
        outer.append(np.full(m, is_outer))
        base.append(r * r * unit if is_outer else np.zeros(m))
        foot.append(r * cen if is_outer else np.full((m, 3), np.nan))
        ang_diam = np.maximum(_geodesic(corners[:, 0], corners[:, 2]),
                              _geodesic(corners[:, 1], corners[:, 3]))
        diam.append(np.maximum(np.sqrt(dr * dr + (2 * r1 * np.sin(ang_diam / 2)) ** 2), dr))
        min_ang = min(min_ang, _corner_angles(corners[:, [0, 1, 3, 2]], spherical=True))
    anchors = np.concatenate(anchors)
    depth = np.concatenate(depth)
    outer = np.concatenate(outer)
    layer, band = _classify_depth(depth, h, c_star, geom.reach, outer)
    return Mesh(geom, h, c_star, anchors, np.concatenate(vols), layer, band, depth,
                np.concatenate(base), np.concatenate(foot), np.concatenate(diam), min_ang)


# ---------------------------------------------------------------------------
# diagnostics


def classify_layers(mesh: Mesh) -> dict:
    """Counts per layer kind and per normal-depth band."""
    out = {"interior": int(np.sum(mesh.layer == INTERIOR)),
           "first": int(np.sum(mesh.layer == FIRST_LAYER)),
           "deeper": int(np.sum(mesh.layer == DEEPER_LAYER)),
           "bands": {}}
    if mesh.geom.has_boundary:
        b, c = np.unique(mesh.band, return_counts=True)
        out["bands"] = {int(k): int(v) for k, v in zip(b, c)}
    return out


def shape_report(mesh: Mesh) -> dict:
    ex = exact_functionals(mesh.geom)
    total = math.fsum(mesh.volumes)
    ratio = float(mesh.diameters.max() / mesh.diameters.min())
    rep = {
        "n_cells": len(mesh),
        "h": mesh.h,
        "diameter_min": float(mesh.diameters.min()),
        "diameter_max": float(mesh.diameters.max()),
        "aspect_ratio": ratio,
        "min_angle_deg": mesh.min_angle_deg,
        "hausdorff_boundary_error": mesh.hausdorff,
        "volume_rel_error": abs(total - ex.vol) / ex.vol,
    }
    if mesh.geom.has_boundary:
        rep["base_area_rel_error"] = abs(math.fsum(mesh.base_area) - ex.area) / ex.area
    flags = []
    if ratio > mesh.aspect_bound:
        flags.append("aspect")
    if mesh.min_angle_deg < mesh.theta0_deg:
        flags.append("min_angle")
    if rep["volume_rel_error"] > 1e-10:
        flags.append("volume_partition")
    rep["violations"] = flags
    return rep


# ---------------------------------------------------------------------------
# regions for the quasi-additivity experiment


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float


@dataclass(frozen=True)
class HalfPlane:
    """{x : normal . x > offset}."""
    normal: tuple
    offset: float


class ConvexRegion:
    """Intersection of disks and half-planes in the plane (bounded: at least one disk)."""

    def __init__(self, *constraints):
        if not any(isinstance(c, Disk) for c in constraints):
            raise ValueError("region must contain a disk to be bounded")
        self.constraints = tuple(constraints)

    def __and__(self, other):
        return ConvexRegion(*(self.constraints + other.constraints))

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for c in self.constraints:
            if isinstance(c, Disk):
                ok &= np.linalg.norm(x - np.asarray(c.center), axis=-1) <= c.radius + tol
            else:
                ok &= x @ np.asarray(c.normal) - c.offset >= -tol
        return ok

    def _projections(self, c, x):
        if isinstance(c, Disk):
            ctr = np.asarray(c.center)
            v = x - ctr
            nv = np.linalg.norm(v, axis=-1, keepdims=True)
            nv = np.where(nv == 0, 1.0, nv)
            return ctr + c.radius * v / nv
        n = np.asarray(c.normal) / np.linalg.norm(c.normal)
        off = c.offset / np.linalg.norm(c.normal)
        return x - (x @ n - off)[..., None] * n

    def _vertices(self):
        pts = []
        cs = self.constraints
        for i in range(len(cs)):
            for j in range(i + 1, len(cs)):
                pts.extend(_intersect(cs[i], cs[j]))
        pts = [p for p in pts if self.contains(p, tol=1e-12)]
        return np.array(pts).reshape(-1, 2)

    def distance(self, x):
        """Exact Euclidean distance from points ``x`` (..., 2) to the region."""
        x = np.asarray(x, dtype=float)
        best = np.full(x.shape[:-1], np.inf)
        for c in self.constraints:
            q = self._projections(c, x)
            d = np.linalg.norm(q - x, axis=-1)
            best = np.where(self.contains(q, tol=1e-12), np.minimum(best, d), best)
        for v in self._vertices():
            best = np.minimum(best, np.linalg.norm(x - v, axis=-1))
        return np.where(self.contains(x), 0.0, best)

    def boundary_pieces(self):
        """List of (constraint, t0, t1) parameter intervals forming the boundary."""
        pieces = []
        for i, c in enumerate(self.constraints):
            others = [o for k, o in enumerate(self.constraints) if k != i]
            ts = []
            for o in others:
                for p in _intersect(c, o):
                    ts.append(_param(c, p))
            if isinstance(c, Disk):
                ts = sorted(set(t % (2 * math.pi) for t in ts))
                if not ts:
                    mids = [(0.0, 2 * math.pi)]
                else:
                    mids = [(ts[k], ts[k + 1]) for k in range(len(ts) - 1)]
                    mids.append((ts[-1], ts[0] + 2 * math.pi))
            else:
                ts = sorted(ts)
                mids = [(ts[k], ts[k + 1]) for k in range(len(ts) - 1)]
            for t0, t1 in mids:
                if t1 - t0 < 1e-15:
                    continue
                if self.contains(_point(c, 0.5 * (t0 + t1)), tol=1e-12):
                    pieces.append((c, t0, t1))
        return pieces

    def perimeter(self):
        total = 0.0
        for c, t0, t1 in self.boundary_pieces():
            total += (t1 - t0) * (c.radius if isinstance(c, Disk) else 1.0)
        return total

    def boundary_samples(self, n=2000):
        pts = [np.array([_point(c, t) for t in np.linspace(t0, t1, n)])
               for c, t0, t1 in self.boundary_pieces()]
        return np.concatenate(pts) if pts else np.zeros((0, 2))


def _line_frame(c):
    n = np.asarray(c.normal, dtype=float)
    nn = np.linalg.norm(n)
    n = n / nn
    base = n * (c.offset / nn)
    tangent = np.array([-n[1], n[0]])
    return base, tangent


def _point(c, t):
    if isinstance(c, Disk):
        return np.asarray(c.center) + c.radius * np.array([math.cos(t), math.sin(t)])
    base, tangent = _line_frame(c)
    return base + t * tangent


def _param(c, p):
    if isinstance(c, Disk):
        v = np.asarray(p) - np.asarray(c.center)
        return math.atan2(v[1], v[0])
    base, tangent = _line_frame(c)
    return float((np.asarray(p) - base) @ tangent)


def _intersect(a, b):
    """Intersection points of the boundaries of two constraints."""
    if isinstance(a, HalfPlane) and isinstance(b, Disk):
        a, b = b, a
    if isinstance(a, Disk) and isinstance(b, Disk):
        c0, c1 = np.asarray(a.center, float), np.asarray(b.center, float)
        d = np.linalg.norm(c1 - c0)
        if d == 0 or d > a.radius + b.radius or d < abs(a.radius - b.radius):
            return []
        x = (d * d + a.radius ** 2 - b.radius ** 2) / (2 * d)
        y2 = a.radius ** 2 - x * x
        e = (c1 - c0) / d
        perp = np.array([-e[1], e[0]])
        y = math.sqrt(max(y2, 0.0))
        return [c0 + x * e + y * perp, c0 + x * e - y * perp]
    if isinstance(a, Disk):
        base, tangent = _line_frame(b)
        ctr = np.asarray(a.center, float)
        t0 = (ctr - base) @ tangent
        foot = base + t0 * tangent
        dist2 = float(np.sum((foot - ctr) ** 2))
        if dist2 > a.radius ** 2:
            return []
        s = math.sqrt(a.radius ** 2 - dist2)
        return [foot + s * tangent, foot - s * tangent]
    # two lines
    b0, t0 = _line_frame(a)
    b1, t1 = _line_frame(b)
    M = np.array([t0, -t1]).T
    if abs(np.linalg.det(M)) < 1e-15:
        return []
    s = np.linalg.solve(M, b1 - b0)
    return [b0 + s[0] * t0]


@dataclass
class RegionSelection:
    in_A: np.ndarray
    in_B: np.ndarray
    in_union: np.ndarray
    in_inter: np.ndarray
    perimeter: float


def select_region(mesh: Mesh, A: ConvexRegion, B: ConvexRegion, delta=0.0, margin=None) -> RegionSelection:
    """Cell memberships for A, B, A u B and A n B at mesoscale ``delta``.

    A cell belongs to a set X when its block of radius ``delta`` around the
    anchor meets X, i.e. dist(x_c, X) < delta (or x_c in X when delta = 0).
    The perimeter of A n B comes from the analytic region, never the mesh.
    """
    if mesh.dim != 2 or mesh.geom.kind is Kind.ROUND_SPHERE:
        raise UnsupportedDimension("regions are implemented for planar charts")
    inter = A & B
    if mesh.geom.kind is Kind.EUCLIDEAN_BALL:
        eps0 = mesh.h if margin is None else margin
        pts = inter.boundary_samples()
        reach = np.linalg.norm(pts, axis=1).max() if len(pts) else 0.0
        if reach > mesh.geom.radius - eps0:
            raise InterfaceTouchesBoundary(
                f"interface reaches |x| = {reach:.4g}, closer than {eps0} to the boundary")
    x = mesh.anchors

    def member(R):
        d = R.distance(x)
        return (d < delta) if delta > 0 else (d == 0)
    a, b, ab = member(A), member(B), member(inter)
    return RegionSelection(a, b, a | b, ab, inter.perimeter())
