"""Mollification of sampled two-dimensional chart metrics.

A :class:`SampledChartMetric` stores the components (g11, g12, g22) on a
uniform grid.  Axis 0 (s) is always periodic.  Axis 1 (t) is either periodic
or bounded by two straight edges at t = 0 and t = L2 with grid nodes on both
edges.

The smoothing operator blends an interior mollification with a reflected one
near the edges:

    S[g] = (1 - chi) * S_int[g] + chi * S_refl[g]

where chi is a quintic-smoothstep cutoff equal to 1 within t_b / 2 of an
edge and 0 beyond t_b = c * reach.  Reflection is the pullback under
(s, t) -> (s, -t): g11 and g22 are extended evenly and g12 oddly.  The odd
extension is continuous only when g12 = 0 on the edge, as in a Fermi chart.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage, signal

from .errors import GridTooSmall, RadiusExceedsReach, ResolutionTooCoarse
from .geometry import bump_factor

COMPONENTS = ("g11", "g12", "g22")
_MAGIC = b"MDLGRID1"
_HEADER = struct.Struct("<8sIII4dI")


@dataclass(frozen=True)
class SampledChartMetric:
    g: np.ndarray               # (n1, n2, 3)
    spacing: tuple              # (dx1, dx2)
    origin: tuple = (0.0, 0.0)
    boundary: bool = False      # straight edges at t = 0 and t = L2

    def __post_init__(self):
        if self.g.ndim != 3 or self.g.shape[2] != 3:
            raise ValueError("samples must have shape (n1, n2, 3)")

    @property
    def shape(self):
        return self.g.shape[:2]

    @property
    def periods(self):
        n1, n2 = self.shape
        L2 = (n2 - 1) * self.spacing[1] if self.boundary else n2 * self.spacing[1]
        return (n1 * self.spacing[0], L2)

    @property
    def reach(self):
        return self.periods[1] / 2 if self.boundary else math.inf

    def coords(self):
        n1, n2 = self.shape
        x1 = self.origin[0] + self.spacing[0] * np.arange(n1)
        x2 = self.origin[1] + self.spacing[1] * np.arange(n2)
        return np.meshgrid(x1, x2, indexing="ij")

    def matrices(self):
        g = self.g
        return np.stack([np.stack([g[..., 0], g[..., 1]], -1),
                         np.stack([g[..., 1], g[..., 2]], -1)], -2)

    def eigen_bounds(self):
        """(lambda_ell, Lambda_ell) over all nodes."""
        tr = self.g[..., 0] + self.g[..., 2]
        det = self.g[..., 0] * self.g[..., 2] - self.g[..., 1] ** 2
        disc = np.sqrt(np.maximum(tr * tr / 4 - det, 0.0))
        return float(np.min(tr / 2 - disc)), float(np.max(tr / 2 + disc))

    def sqrt_det(self):
        return np.sqrt(self.g[..., 0] * self.g[..., 2] - self.g[..., 1] ** 2)

    def __add__(self, other):
        return replace(self, g=self.g + other.g)

    @classmethod
    def from_function(cls, fn, n, spacing, origin=(0.0, 0.0), boundary=False):
        """Sample ``fn(x1, x2) -> (..., 3)`` on an (n1, n2) grid."""
        n1, n2 = n
        x1 = origin[0] + spacing[0] * np.arange(n1)
        x2 = origin[1] + spacing[1] * np.arange(n2)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        return cls(np.asarray(fn(X1, X2), dtype=float), tuple(spacing), tuple(origin), boundary)


def bump_metric_fn(geom):
    """Component function of the perturbed-chart metric for sampling."""
    def fn(x1, x2):
        phi, _, _ = bump_factor(geom, np.stack([x1, x2], axis=-1))
        return np.stack([phi, np.zeros_like(phi), phi], axis=-1)
    return fn


def sample_perturbed(geom, n, cell_centred=False):
    """Sample a perturbed chart on an n x n (periodic) or n x (n+1) (strip) grid."""
    L1, L2 = geom.periods
    dx = (L1 / n, L2 / n)
    if geom.boundary:
        return SampledChartMetric.from_function(bump_metric_fn(geom), (n, n + 1), dx, (0.0, 0.0), True)
    origin = (dx[0] / 2, dx[1] / 2) if cell_centred else (0.0, 0.0)
    return SampledChartMetric.from_function(bump_metric_fn(geom), (n, n), dx, origin, False)


# ---------------------------------------------------------------------------
# binary grid files


def write_grid(path, metric: SampledChartMetric):
    n1, n2 = metric.shape
    head = _HEADER.pack(_MAGIC, 1, n1, n2, *metric.spacing, *metric.origin, int(metric.boundary))
    body = np.ascontiguousarray(metric.g, dtype="<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(body)


def read_grid(path) -> SampledChartMetric:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError("grid file is truncated")
    magic, version, n1, n2, dx1, dx2, o1, o2, flags = _HEADER.unpack_from(data)
    if magic != _MAGIC or version != 1:
        raise ValueError("not a metric grid file")
    body = data[_HEADER.size:]
    if len(body) != n1 * n2 * 3 * 8:
        raise ValueError("grid body size does not match the header")
    g = np.frombuffer(body, dtype="<f8").reshape(n1, n2, 3).astype(float)
    return SampledChartMetric(g, (dx1, dx2), (o1, o2), bool(flags & 1))


# ---------------------------------------------------------------------------
# smoothing


@dataclass(frozen=True)
class MollifierSpec:
    radius: float
    profile: str = "quartic"

    def kernel(self, spacing):
        """Discrete 2D kernel on the grid, normalised so its weights sum to 1."""
        dx1, dx2 = spacing
        k1 = int(math.ceil(self.radius / dx1))
        k2 = int(math.ceil(self.radius / dx2))
        x1 = dx1 * np.arange(-k1, k1 + 1)
        x2 = dx2 * np.arange(-k2, k2 + 1)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        u = np.sqrt(X1 ** 2 + X2 ** 2) / self.radius
        if self.profile == "quartic":
            w = np.clip(1 - u * u, 0, None) ** 2
        elif self.profile == "epanechnikov":
            w = np.clip(1 - u * u, 0, None)
        else:
            raise ValueError(f"unknown mollifier profile {self.profile!r}")
        # symmetrise exactly so the kernel is even to the last bit
        w = 0.25 * (w + w[::-1] + w[:, ::-1] + w[::-1, ::-1])
        return w / w.sum()


def _convolve(f, kern, pad_t, odd=False, periodic_t=False):
    """Convolution periodic in axis 0; axis 1 periodic, reflected or edge-padded."""
    k1, k2 = kern.shape[0] // 2, kern.shape[1] // 2
    if f.shape[0] < k1 or f.shape[1] < k2:
        raise GridTooSmall("kernel wider than the grid")
    fp = np.pad(f, ((k1, k1), (0, 0)), mode="wrap")
    if periodic_t:
        fp = np.pad(fp, ((0, 0), (k2, k2)), mode="wrap")
    elif pad_t == "reflect":
        fp = np.pad(fp, ((0, 0), (k2, k2)), mode="reflect")
        if odd:
            fp[:, :k2] *= -1.0
            fp[:, -k2:] *= -1.0
    else:
        fp = np.pad(fp, ((0, 0), (k2, k2)), mode="edge")
    return signal.fftconvolve(fp, kern, mode="valid")


def smoothstep5(x):
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10 - 15 * x + 6 * x * x)


def boundary_cutoff(t_edge, t_b):
    """chi: 1 on [0, t_b / 2], 0 on [t_b, inf), quintic smoothstep in between."""
    t_a = 0.5 * t_b
    return 1.0 - smoothstep5((t_edge - t_a) / (t_b - t_a))


def smooth(metric: SampledChartMetric, moll: MollifierSpec, c=0.45) -> SampledChartMetric:
    """Apply the blended smoothing operator S_eps to a sampled metric."""
    eps = moll.radius
    if max(metric.spacing) > eps / 8 * (1 + 1e-9):
        raise ResolutionTooCoarse(f"grid spacing {max(metric.spacing):.4g} exceeds eps/8 = {eps / 8:.4g}")
    kern = moll.kernel(metric.spacing)
    if not metric.boundary:
        out = np.stack([_convolve(metric.g[..., k], kern, None, periodic_t=True) for k in range(3)], -1)
        return replace(metric, g=out)
    t_b = c * metric.reach
    if eps > t_b / 2:
        raise RadiusExceedsReach(f"eps = {eps} exceeds c*reach/2 = {t_b / 2}")
    refl = np.stack([_convolve(metric.g[..., k], kern, "reflect", odd=(k == 1)) for k in range(3)], -1)
    inner = np.stack([_convolve(metric.g[..., k], kern, "edge") for k in range(3)], -1)
    _, X2 = metric.coords()
    L2 = metric.periods[1]
    t_edge = np.minimum(X2 - metric.origin[1], metric.origin[1] + L2 - X2)
    chi = boundary_cutoff(t_edge, t_b)[..., None]
    return replace(metric, g=chi * refl + (1.0 - chi) * inner)


# ---------------------------------------------------------------------------
# finite-difference curvature


def _d(f, axis, dx, periodic):
    if periodic:
        return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2 * dx)
    return np.gradient(f, dx, axis=axis, edge_order=2)


def _d2(f, axis, dx, periodic):
    if periodic:
        return (np.roll(f, -1, axis) - 2 * f + np.roll(f, 1, axis)) / (dx * dx)
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / (dx * dx)
    out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / (dx * dx)
    out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / (dx * dx)
    return np.moveaxis(out, 0, axis)


def _metric_derivatives(metric):
    """g, dg[..., k, i, j] = d_k g_ij and d2g[..., a, k, i, j] = d_a d_k g_ij on the grid."""
    G = metric.matrices()
    per = (True, not metric.boundary)
    h = metric.spacing
    dG = np.stack([_d(G, a, h[a], per[a]) for a in (0, 1)], axis=-3)
    mixed = _d(_d(G, 0, h[0], True), 1, h[1], per[1])
    d2G = np.stack([np.stack([_d2(G, 0, h[0], True), mixed], axis=-3),
                    np.stack([mixed, _d2(G, 1, h[1], per[1])], axis=-3)], axis=-4)
    return G, dG, d2G


def _curvature_from_derivatives(G, dG, d2G):
    """Scalar curvature, Christoffel symbols and inverse metric from pointwise derivatives."""
    Ginv = np.linalg.inv(G)
    # L[..., m, i, k] = d_i g_km + d_k g_im - d_m g_ik
    L = np.einsum("...ikm->...mik", dG) + np.einsum("...kim->...mik", dG) - dG
    gam = 0.5 * np.einsum("...lm,...mik->...lik", Ginv, L)
    # d_j of L and of the inverse metric
    dL = (np.einsum("...jikm->...jmik", d2G) + np.einsum("...jkim->...jmik", d2G) - d2G)
    dGinv = -np.einsum("...la,...jab,...bm->...jlm", Ginv, dG, Ginv)
    dgam = 0.5 * (np.einsum("...jlm,...mik->...jlik", dGinv, L)
                  + np.einsum("...lm,...jmik->...jlik", Ginv, dL))
    # Ric_ik = d_l Gam^l_ik - d_k Gam^l_il + Gam^l_lm Gam^m_ik - Gam^l_km Gam^m_il
    ric = (np.einsum("...llik->...ik", dgam) - np.einsum("...klil->...ik", dgam)
           + np.einsum("...llm,...mik->...ik", gam, gam) - np.einsum("...lkm,...mil->...ik", gam, gam))
    return np.einsum("...ik,...ik->...", Ginv, ric), gam, Ginv


@dataclass
class CurvatureFields:
    R: np.ndarray
    K_lower: np.ndarray | None = None   # along t = 0
    K_upper: np.ndarray | None = None   # along t = L2


def curvature_fd(metric: SampledChartMetric) -> CurvatureFields:
    """Scalar curvature on the grid and edge mean curvature by finite differences.

    First and second derivatives of the samples use second-order central
    stencils, and second-order one-sided stencils across the edges of a
    bounded chart.  The edge mean curvature uses the outer normal, so a chart
    of the disc near its rim gives K = 1/r > 0.
    """
    n1, n2 = metric.shape
    if n1 < 5 or n2 < 5:
        raise GridTooSmall(f"grid {metric.shape} too small for curvature stencils")
    R, gam, Ginv = _curvature_from_derivatives(*_metric_derivatives(metric))
    if not metric.boundary:
        return CurvatureFields(R)

    def edge(row, sign):
        g11 = metric.g[:, row, 0]
        gtt_inv = Ginv[:, row, 1, 1]
        return sign * gam[:, row, 1, 0, 0] / (g11 * np.sqrt(gtt_inv))
    return CurvatureFields(R, edge(0, 1.0), edge(n2 - 1, -1.0))


def reference_curvature(metric_fn, X1, X2, step, chunk=200_000):
    """Scalar curvature of an analytic 2D metric by nested central differences of size ``step``.

    Used as the fine-grid oracle: the stencil is much smaller than the grid
    spacing of the metric under test.
    """
    shape = X1.shape
    x1, x2 = X1.ravel(), X2.ravel()
    out = np.empty(x1.size)

    def mats(a, b):
        g = metric_fn(a, b)
        return np.stack([np.stack([g[..., 0], g[..., 1]], -1), np.stack([g[..., 1], g[..., 2]], -1)], -2)

    def gamma(a, b):
        G = mats(a, b)
        d1 = (mats(a + step, b) - mats(a - step, b)) / (2 * step)
        d2 = (mats(a, b + step) - mats(a, b - step)) / (2 * step)
        dG = np.stack([d1, d2], axis=-3)
        Ginv = np.linalg.inv(G)
        lower = np.einsum("...ijl->...lij", dG) + np.einsum("...jil->...lij", dG) - dG
        return 0.5 * np.einsum("...kl,...lij->...kij", Ginv, lower), Ginv

    for s in range(0, x1.size, chunk):
        a, b = x1[s:s + chunk], x2[s:s + chunk]
        gam, Ginv = gamma(a, b)
        dg1 = (gamma(a + step, b)[0] - gamma(a - step, b)[0]) / (2 * step)
        dg2 = (gamma(a, b + step)[0] - gamma(a, b - step)[0]) / (2 * step)
        dgam = np.stack([dg1, dg2], axis=-4)
        ric = (np.einsum("...llik->...ik", dgam) - np.einsum("...klil->...ik", dgam)
               + np.einsum("...llm,...mik->...ik", gam, gam) - np.einsum("...lkm,...mil->...ik", gam, gam))
        out[s:s + chunk] = np.einsum("...ik,...ik->...", Ginv, ric)
    return out.reshape(shape)


def perturbed_reference(geom, metric: SampledChartMetric, refine=8):
    """Fine-stencil oracle R_g on the grid nodes of ``metric`` (zero off the bump).

    The bump metric is flat outside its disc, so nodes farther than
    rho_b + 2 * step from the centre get R = 0 exactly.
    """
    X1, X2 = metric.coords()
    step = min(metric.spacing) / refine
    R = np.zeros(X1.shape)
    from .geometry import _bump_offset
    dist = np.linalg.norm(_bump_offset(geom, np.stack([X1, X2], -1)), axis=-1)
    near = dist < geom.bump_radius + 3 * step
    R[near] = reference_curvature(bump_metric_fn(geom), X1[near], X2[near], step)
    K = np.zeros(metric.shape[0]) if metric.boundary else None
    return R, K


# ---------------------------------------------------------------------------
# discrete norms


def c0_norm(diff):
    return float(np.max(np.abs(diff)))


def c1_norm(diff, metric: SampledChartMetric):
    """max |f| + max |central differences of f| over nodes and components."""
    per = (True, not metric.boundary)
    d = [np.max(np.abs(_d(diff, a, metric.spacing[a], per[a]))) for a in (0, 1)]
    return c0_norm(diff) + float(max(d))


def l1_norm(f, metric: SampledChartMetric):
    """Integral of |f| dV_g over the chart (trapezoid in t when bounded)."""
    w2 = np.full(metric.shape[1], metric.spacing[1])
    if metric.boundary:
        w2[0] *= 0.5
        w2[-1] *= 0.5
    return float(np.sum(np.abs(f) * metric.sqrt_det() * w2[None, :]) * metric.spacing[0])


def l1_line(f, dx, g11=None):
    """Integral of |f| along an edge; ``g11`` gives the induced length element."""
    ds = dx if g11 is None else dx * np.sqrt(g11)
    return float(np.sum(np.abs(f) * ds))


# ---------------------------------------------------------------------------
# stability experiment


@dataclass
class StabilityRow:
    eps: float
    c0: float
    c1: float
    R_l1: float
    K_l1: float
    eig_min: float
    eig_max: float


def stability_experiment(metric: SampledChartMetric, eps_list, R_ref, K_ref=None, c=0.45):
    """Table of smoothing errors for each radius in ``eps_list`` (largest first)."""
    rows = []
    for eps in eps_list:
        sm = smooth(metric, MollifierSpec(eps), c=c)
        diff = sm.g - metric.g
        curv = curvature_fd(sm)
        R_err = l1_norm(curv.R - R_ref, metric)
        K_err = 0.0
        if metric.boundary:
            Kr = np.zeros(metric.shape[0]) if K_ref is None else K_ref
            K_err = (l1_line(curv.K_lower - Kr, metric.spacing[0], metric.g[:, 0, 0])
                     + l1_line(curv.K_upper - Kr, metric.spacing[0], metric.g[:, -1, 0]))
        lo, hi = sm.eigen_bounds()
        rows.append(StabilityRow(float(eps), c0_norm(diff), c1_norm(diff, metric), R_err, K_err, lo, hi))
    return rows


# ---------------------------------------------------------------------------
# interpolated metric field (for geodesic shooting through sampled metrics)


class SampledField:
    """Cubic-spline interpolant of a sampled metric, its derivatives and curvature."""

    def __init__(self, metric: SampledChartMetric, pad=8):
        self.sampled = metric
        self.pad = pad
        per = (True, not metric.boundary)
        g = metric.g
        dg = np.stack([_d(g, a, metric.spacing[a], per[a]) for a in (0, 1)], axis=-2)  # (n1, n2, 2, 3)
        K = 0.5 * curvature_fd(metric).R
        self._arrays = [self._prep(a) for a in
                        [g[..., k] for k in range(3)] + [dg[..., a, k] for a in (0, 1) for k in range(3)] + [K]]

    def _prep(self, a):
        p = self.pad
        a = np.pad(a, ((p, p), (0, 0)), mode="wrap")
        a = np.pad(a, ((0, 0), (p, p)), mode="wrap" if not self.sampled.boundary else "reflect")
        return ndimage.spline_filter(a, order=3, mode="nearest")

    def _grid_coords(self, x):
        m = self.sampled
        L1, L2 = m.periods
        u = np.mod(x[..., 0] - m.origin[0], L1) / m.spacing[0] + self.pad
        v = x[..., 1] - m.origin[1]
        if not m.boundary:
            v = np.mod(v, L2)
        v = v / m.spacing[1] + self.pad
        return np.stack([u.ravel(), v.ravel()])

    def _eval(self, x):
        x = np.asarray(x, dtype=float)
        c = self._grid_coords(x)
        vals = [ndimage.map_coordinates(a, c, order=3, mode="nearest", prefilter=False)
                for a in self._arrays]
        return [v.reshape(x.shape[:-1]) for v in vals]

    @staticmethod
    def _mat(a, b, c):
        return np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)

    def metric_at(self, x):
        v = self._eval(x)
        return self._mat(*v[0:3])

    def metric(self, x):
        return self.metric_at(x)

    def metric_grad(self, x):
        v = self._eval(x)
        return np.stack([self._mat(*v[3:6]), self._mat(*v[6:9])], axis=-3)

    def gauss_curvature(self, x):
        return self._eval(x)[9]

    def geodesic_rhs(self, p, v):
        vals = self._eval(p)
        G = self._mat(*vals[0:3])
        dG = np.stack([self._mat(*vals[3:6]), self._mat(*vals[6:9])], axis=-3)
        Ginv = np.linalg.inv(G)
        lower = np.einsum("...ijl->...lij", dG) + np.einsum("...jil->...lij", dG) - dG
        gam = 0.5 * np.einsum("...kl,...lij->...kij", Ginv, lower)
        acc = -np.einsum("...kij,...i,...j->...k", gam, v, v)
        return acc, vals[9]
