"""The discrete functional F_n: cell features, flat references, losses and assembly.

Feature
    phi(c) is the window average of the exact volume density in a chart
    centred on the cell: the geodesic normal chart at the anchor for interior
    and deeper-layer cells, the Fermi chart at the boundary footpoint for
    first-layer cells.  A Euclidean (half-)space gives phi = 1 exactly.

Energy
    interior / deeper:  E = rho0 Vol(c) + h^-2 Vol(c) [l(phi) - l(ref)]
    first layer:        E = rho0 Vol(c) + h^-1 A(c)   [l(phi) - l(ref)]

where A(c) is the boundary footprint area and ref = 1 unless an adaptive
scan supplies a history-dependent reference.  With l'(1) = -1 the interior
density tends to rho0 + (mu2/6) R and the first-layer density A^-1 E tends
to mu1 K.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ChartDomainExceeded, FeatureOutOfRange, NotFirstLayer
from .geometry import (ConformalBumpField, Kind, fermi_density, injectivity_radius,
                       metric_density_normal, radial_density, shoot_rays)
from .mesh import DEEPER_LAYER, FIRST_LAYER, INTERIOR, LAYER_NAMES, sphere_cell_quadrature
from .windows import InteriorWindow

K_FEAT = (0.5, 1.5)


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True)
class Loss:
    """Per-cell code-length loss; both built-ins satisfy l(1) = 0 and l'(1) = -1."""

    kind: str = "neglog"

    def __post_init__(self):
        if self.kind not in ("neglog", "quadratic"):
            raise ValueError(f"unknown loss {self.kind!r}")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "neglog":
            return -np.log(u)
        v = 1.0 - u
        return v + 0.5 * v * v

    def d1(self, u):
        u = np.asarray(u, dtype=float)
        return -1.0 / u if self.kind == "neglog" else u - 2.0

    def d2(self, u):
        u = np.asarray(u, dtype=float)
        return 1.0 / (u * u) if self.kind == "neglog" else np.ones_like(u)

    def bounds(self, feat=K_FEAT):
        """sup |l'| and sup |l''| over the compact feature set."""
        u = np.linspace(*feat, 2001)
        return float(np.max(np.abs(self.d1(u)))), float(np.max(np.abs(self.d2(u))))


# ---------------------------------------------------------------------------
# features


@dataclass(frozen=True)
class FeatureVector:
    phi: float
    chart: str   # "normal" or "fermi"


def _check_range(phi, where=""):
    phi = np.asarray(phi)
    bad = (phi < K_FEAT[0]) | (phi > K_FEAT[1]) | ~np.isfinite(phi)
    if np.any(bad):
        raise FeatureOutOfRange(f"feature {phi[bad].ravel()[0]!r} outside {K_FEAT}{where}")


def interior_phi(geom, anchors, h, window: InteriorWindow, exploit_symmetry=True, chunk=256):
    """Window-averaged normal-chart density at each anchor (vectorised)."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    n = len(anchors)
    reach = h * (window.support + (np.linalg.norm(window.shift) if window.shift else 0.0))
    inj = np.broadcast_to(injectivity_radius(geom, anchors), (n,))
    if np.any(reach >= inj):
        raise ChartDomainExceeded(
            f"window radius {reach:.4g} reaches the injectivity radius {float(np.min(inj)):.4g}")
    if geom.is_homogeneous:
        if window.shift:
            pts, w = window.nodes()
            val = float(w @ radial_density(geom, h * np.linalg.norm(pts, axis=1)))
        else:
            r, w = window.radial_weights()
            val = float(w @ radial_density(geom, h * r))
        if exploit_symmetry:
            return np.full(n, val)
        out = np.empty(n)
        pts, w = window.nodes()
        for i in range(n):
            out[i] = w @ metric_density_normal(geom, anchors[i], h * pts)
        return out
    if window.shift or geom.dim != 2:
        pts, w = window.nodes()
        return np.array([w @ metric_density_normal(geom, a, h * pts) for a in anchors])
    return shoot_window_average(ConformalBumpField(geom), anchors, h, window, chunk,
                                support=_bump_support(geom, anchors, reach))


def _bump_support(geom, anchors, reach):
    """Cells whose window misses the bump see the flat metric exactly."""
    from .geometry import _bump_offset
    dist = np.linalg.norm(_bump_offset(geom, anchors), axis=-1)
    return dist < geom.bump_radius + reach * 1.05


def shoot_window_average(field, anchors, h, window, chunk=256, support=None):
    """Window average of the normal-chart density of a 2D metric field by geodesic shooting.

    Anchors outside ``support`` (boolean mask) are assigned the flat value 1.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    n = len(anchors)
    out = np.ones(n)
    todo = np.flatnonzero(support) if support is not None else np.arange(n)
    dirs, r, w = window.rule()
    thetas = np.arctan2(dirs[:, 1], dirs[:, 0])
    nd = len(thetas)
    for s in range(0, len(todo), chunk):
        ids = todo[s:s + chunk]
        a = anchors[ids]
        m = len(a)
        x0 = np.repeat(a, nd, axis=0)
        th = np.tile(thetas, m)
        j = shoot_rays(field, x0, th, h * r)                    # (m*nd, nr)
        dens = (j / (h * r)).reshape(m, nd, len(r))
        out[ids] = np.einsum("mdr,rd->m", dens, w)
    return out


def boundary_phi(geom, footpoints, h, bwindow, exploit_symmetry=True):
    """Window-averaged Fermi-chart density for first-layer footpoints."""
    footpoints = np.atleast_2d(np.asarray(footpoints, dtype=float))
    n = len(footpoints)
    zt, wt = bwindow.tangential.nodes()
    tau, wn = bwindow.normal_rule()

    def one(s):
        dens = fermi_density(geom, s, h * zt[:, None, :], h * tau[None, :])
        dens = np.broadcast_to(dens, (len(wt), len(wn)))
        return float(wt @ dens @ wn)

    if exploit_symmetry and geom.kind in (Kind.EUCLIDEAN_BALL, Kind.PERTURBED_CHART):
        # both boundaries are homogeneous: the density does not depend on the footpoint
        return np.full(n, one(footpoints[0] if n else None))
    return np.array([one(s) for s in footpoints])


def compute_features(mesh, windows, exploit_symmetry=True, check=True):
    """Feature value of every cell of ``mesh`` (normal chart off the first layer)."""
    geom = mesh.geom
    phi = np.empty(len(mesh))
    first = mesh.layer == FIRST_LAYER
    rest = ~first
    if np.any(rest):
        phi[rest] = interior_phi(geom, mesh.anchors[rest], mesh.h, windows.interior, exploit_symmetry)
    if np.any(first):
        phi[first] = boundary_phi(geom, mesh.footpoints[first], mesh.h, windows.boundary, exploit_symmetry)
    if check:
        _check_range(phi)
    return phi


def feature_interior(cell, geom, window, h) -> FeatureVector:
    phi = interior_phi(geom, cell.anchor[None], h, window)[0]
    _check_range(phi, f" at cell {cell.id}")
    return FeatureVector(float(phi), "normal")


def feature_boundary(cell, geom, bwindow, h) -> FeatureVector:
    if cell.layer != FIRST_LAYER:
        raise NotFirstLayer(f"cell {cell.id} is {LAYER_NAMES[cell.layer]}")
    phi = boundary_phi(geom, cell.footpoint[None], h, bwindow)[0]
    _check_range(phi, f" at cell {cell.id}")
    return FeatureVector(float(phi), "fermi")


# ---------------------------------------------------------------------------
# flat references


@dataclass(frozen=True)
class FlatRef:
    matched_volume: float
    model_volume: float
    lam: float
    ref_feature: float = 1.0
    variant: str = "primary"


def _sphere_chart_moments(mesh, idx, order=6):
    """Per-cell chart volume and second moments of normal coordinates on a round sphere.

    Returns (vol_chart, vol_true, M2) where vol_chart = int_c dV / J, and M2 is
    the d x d matrix int_c z z^T dV / J in an orthonormal tangent frame at the
    anchor (first axis along the cell's first equiangular direction).
    """
    geom = mesh.geom
    rho, d = geom.radius, geom.dim
    P, W = sphere_cell_quadrature(mesh, idx, order)
    X = mesh.anchors[idx] / rho                                   # (n, d+1) unit
    U = P / rho
    c = np.clip(np.einsum("nqk,nk->nq", U, X), -1.0, 1.0)
    s = rho * np.arccos(c)                                        # geodesic distance
    J = np.sinc(s / (np.pi * rho)) ** (d - 1)
    tang = U - c[..., None] * X[:, None, :]
    nt = np.linalg.norm(tang, axis=-1, keepdims=True)
    dirn = np.where(nt > 0, tang / np.where(nt > 0, nt, 1.0), 0.0)
    Z = s[..., None] * dirn                                       # tangent vectors in R^{d+1}
    # tangent frame from the first d-1 equiangular axes of each cell (Gram-Schmidt)
    info = mesh.extra["faces"][idx]
    axis = info[:, 0].astype(int)
    frame = np.zeros((len(idx), d, d + 1))
    for k in range(len(idx)):
        others = [m for m in range(d + 1) if m != axis[k]]
        B = np.eye(d + 1)[others]
        B = B - np.outer(B @ X[k], X[k])
        q, _ = np.linalg.qr(B.T)
        frame[k] = q.T[:d]
    z = np.einsum("nqk,nik->nqi", Z, frame)
    wv = W / J
    vol_chart = wv.sum(axis=1)
    M2 = np.einsum("nq,nqi,nqj->nij", wv, z, z)
    return vol_chart, W.sum(axis=1), M2


def flat_refs(mesh, variant="primary", idx=None):
    """Flat reference data for many cells: (matched_volume, model_volume, lam) arrays.

    ``primary`` rescales the Euclidean chart image of the cell isotropically by
    1 + lam so its volume equals Vol_g(c) exactly.  ``alternate`` uses the
    anisotropic stretch diag(1 + lam_k) with lam_k = -(1/6) Ric_kk <z_k^2>,
    which matches the volume only through the second-order density expansion.
    """
    if variant not in ("primary", "alternate"):
        raise ValueError(f"unknown flat_ref variant {variant!r}")
    geom = mesh.geom
    d = geom.dim
    idx = np.arange(len(mesh)) if idx is None else np.asarray(idx)
    vol = mesh.volumes[idx]
    if geom.kind is not Kind.ROUND_SPHERE:
        model = vol.copy()
        first = mesh.layer[idx] == FIRST_LAYER
        if geom.kind is Kind.EUCLIDEAN_BALL and np.any(first):
            # half-space model: Fermi-chart image of a ring cell is a slab of the footprint
            depth = mesh.depth[idx][first]
            model[first] = mesh.base_area[idx][first] * 2 * depth
        lam = (vol / model) ** (1.0 / d) - 1.0
        matched = vol.copy() if variant == "primary" else model * (1 + lam) ** d
        return matched, model, lam
    vchart, _, M2 = _sphere_chart_moments(mesh, idx)
    if variant == "primary":
        return vol.copy(), vchart, (vol / vchart) ** (1.0 / d) - 1.0
    ric = (d - 1) / geom.radius ** 2
    lam_k = -(ric / 6.0) * np.einsum("nii->ni", M2) / vchart[:, None]
    matched = vchart * np.prod(1.0 + lam_k, axis=1)
    return matched, vchart, lam_k.mean(axis=1)


def flat_ref_for(mesh, i, variant="primary") -> FlatRef:
    m, v, lam = flat_refs(mesh, variant, [i])
    return FlatRef(float(m[0]), float(v[0]), float(lam[0]), 1.0, variant)


# ---------------------------------------------------------------------------
# energies and assembly


def cell_energies(mesh, phi, loss: Loss, rho0=0.0, ref=None, volumes=None):
    """Per-cell energies E_n(c) for feature values ``phi``.

    ``ref`` overrides the flat reference feature (default 1) and ``volumes``
    overrides the volume used in the aggregation (default Vol_g(c)).
    """
    h = mesh.h
    vol = mesh.volumes if volumes is None else volumes
    ref = 1.0 if ref is None else ref
    dl = loss(phi) - loss(ref)
    first = mesh.layer == FIRST_LAYER
    scale = np.where(first, mesh.base_area / h, vol / (h * h))
    return rho0 * vol + scale * dl, dl


def cell_energy(cell, geom, windows, loss, rho0, h):
    """Energy of one cell (slow path, mirrors :func:`cell_energies`)."""
    if cell.layer == FIRST_LAYER:
        phi = feature_boundary(cell, geom, windows.boundary, h).phi
        return rho0 * cell.volume + cell.base_area / h * (loss(phi) - loss(1.0))
    phi = feature_interior(cell, geom, windows.interior, h).phi
    return rho0 * cell.volume + cell.volume / h ** 2 * (loss(phi) - loss(1.0))


@dataclass
class ScanOrder:
    perm: np.ndarray
    mode: str = "static"          # "static" or "adaptive"
    r_n: float | None = None      # mesoscale in cells; default h^-1/2

    @classmethod
    def random(cls, n, seed, mode="static", r_n=None):
        return cls(np.random.default_rng(seed).permutation(n), mode, r_n)

    @classmethod
    def identity(cls, n, mode="static", r_n=None):
        return cls(np.arange(n), mode, r_n)

    def __post_init__(self):
        self.perm = np.asarray(self.perm)
        if self.mode not in ("static", "adaptive"):
            raise ValueError(f"unknown scan mode {self.mode!r}")
        if not np.array_equal(np.sort(self.perm), np.arange(len(self.perm))):
            raise ValueError("scan order is not a permutation of the cell ids")


@dataclass
class EnergyBreakdown:
    energies: np.ndarray
    features: np.ndarray
    dl: np.ndarray
    region: np.ndarray
    interior_sum: float
    first_layer_sum: float
    deeper_sum: float
    total: float
    h: float
    a_n: float
    rho0: float

    def to_csv(self, mesh) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cell_id", "layer", "feature", "delta_loss", "energy"])
        for i in np.flatnonzero(self.region):
            w.writerow([int(i), LAYER_NAMES[int(mesh.layer[i])], repr(float(self.features[i])),
                        repr(float(self.dl[i])), repr(float(self.energies[i]))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"interior_sum": self.interior_sum, "first_layer_sum": self.first_layer_sum,
                "deeper_sum": self.deeper_sum, "total": self.total, "h": self.h,
                "a_n": self.a_n, "rho0": self.rho0}


def neighbour_pairs(mesh, radius):
    """All ordered pairs (i, j), i != j, of anchors closer than ``radius`` (geodesic)."""
    geom = mesh.geom
    pts = mesh.anchors
    if geom.kind is Kind.ROUND_SPHERE:
        rad = 2 * geom.radius * math.sin(min(radius / (2 * geom.radius), math.pi / 2))
        tree = cKDTree(pts)
    elif geom.kind in (Kind.FLAT_TORUS, Kind.PERTURBED_CHART) and not geom.has_boundary:
        tree = cKDTree(np.mod(pts, geom.periods), boxsize=geom.periods)
        rad = radius
    else:
        tree = cKDTree(pts)
        rad = radius
    pairs = tree.query_pairs(rad, output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros(0, int), np.zeros(0, int)
    i = np.concatenate([pairs[:, 0], pairs[:, 1]])
    j = np.concatenate([pairs[:, 1], pairs[:, 0]])
    return i, j


def adaptive_reference(mesh, phi, scan: ScanOrder, pairs=None):
    """Running mean of features of earlier-scanned neighbours within R_n = r_n h (1 if none)."""
    h = mesh.h
    r_n = scan.r_n if scan.r_n is not None else h ** -0.5
    if pairs is None:
        pairs = neighbour_pairs(mesh, r_n * h)
    i, j = pairs
    rank = np.empty(len(scan.perm), dtype=np.int64)
    rank[scan.perm] = np.arange(len(scan.perm))
    earlier = rank[j] < rank[i]
    n = len(mesh)
    cnt = np.bincount(i[earlier], minlength=n)
    tot = np.bincount(i[earlier], weights=phi[j[earlier]], minlength=n)
    return np.where(cnt > 0, tot / np.maximum(cnt, 1), 1.0)


def _fsum_masked(values, mask):
    return math.fsum(values[mask].tolist())


def assemble(mesh, windows, loss=Loss(), rho0=0.0, scan: ScanOrder | None = None,
             region=None, phi=None, volumes=None, pairs=None) -> EnergyBreakdown:
    """Assemble F_n over ``region`` (boolean mask or id list; default all cells).

    Static sums use exactly rounded summation (math.fsum), so the result does
    not depend on the scan order.  In adaptive mode the reference feature of
    each cell is the mean feature of neighbours scanned before it.
    """
    n = len(mesh)
    if region is None:
        mask = np.ones(n, dtype=bool)
    else:
        region = np.asarray(region)
        if region.dtype == bool:
            if region.shape != (n,):
                raise ValueError("region mask has the wrong length")
            mask = region
        else:
            if region.size and (region.min() < 0 or region.max() >= n):
                raise IndexError("region contains ids that are not in the mesh")
            mask = np.zeros(n, dtype=bool)
            mask[region] = True
    if phi is None:
        phi = compute_features(mesh, windows)
    ref = None
    if scan is not None and scan.mode == "adaptive":
        ref = adaptive_reference(mesh, phi, scan, pairs)
    E, dl = cell_energies(mesh, phi, loss, rho0, ref, volumes)
    parts = [_fsum_masked(E, mask & (mesh.layer == k)) for k in (INTERIOR, FIRST_LAYER, DEEPER_LAYER)]
    return EnergyBreakdown(E, phi, dl, mask, parts[0], parts[1], parts[2], math.fsum(parts),
                           mesh.h, mesh.h ** (2 - mesh.dim), rho0)
