"""Diagnostics built on top of the assembly: locality, scan order, layers, scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import _bump_offset, euclidean_ball, exact_functionals, perturbed_chart, rescale, round_sphere
from ..mdl import Loss, ScanOrder, assemble, compute_features, flat_refs, neighbour_pairs, shoot_window_average
from ..mesh import FIRST_LAYER, ConvexRegion, Disk, HalfPlane, build_mesh, select_region
from ..smoothing import MollifierSpec, SampledField, sample_perturbed, smooth
from ..windows import InteriorWindow, WindowPair, default_windows
from .stats import fit_rate


def _rows_fit(rows, xkey, ykey):
    x = [r[xkey] for r in rows]
    y = [r[ykey] for r in rows]
    if len(x) < 3 or min(y) <= 0:
        return None
    return fit_rate(x, y)


# ---------------------------------------------------------------------------
# locality defect


def default_regions():
    """A = disk of radius .5, B = half of the disk of radius .6 (x1 > 0)."""
    A = ConvexRegion(Disk((0.0, 0.0), 0.5))
    B = ConvexRegion(Disk((0.0, 0.0), 0.6), HalfPlane((1.0, 0.0), 0.0))
    return A, B


def disjoint_regions():
    A = ConvexRegion(Disk((-0.45, 0.0), 0.25))
    B = ConvexRegion(Disk((0.45, 0.0), 0.25))
    return A, B


@dataclass
class DefectReport:
    rows: list
    fit: object
    controls: dict = field(default_factory=dict)

    def to_dict(self):
        return {"rows": self.rows, "fit": None if self.fit is None else self.fit.to_dict(),
                "controls": self.controls}


def _ie_defect(mesh, E, sel):
    def F(mask):
        return math.fsum(E[mask].tolist())
    return abs(F(sel.in_union) - F(sel.in_A) - F(sel.in_B) + F(sel.in_inter))


def quasi_additivity(h=0.01, r_list=(4, 8, 16, 32), regions=None, windows=None, loss=Loss(), rho0=1.0,
                     geom=None) -> DefectReport:
    """Inclusion-exclusion defect of F_n on mesoscale neighbourhoods of A, B.

    The defect |F(A u B) - F(A) - F(B) + F(A n B)| at delta_n = r_n h is
    divided by Per(A n B) and fitted against delta_n.  Controls use A = B and
    two disjoint regions further apart than 2 delta_n.
    """
    geom = geom or euclidean_ball(2, 1.0)
    windows = windows or default_windows(2)
    A, B = regions or default_regions()
    mesh = build_mesh(geom, h)
    E = assemble(mesh, windows, loss, rho0).energies
    rows = []
    same, disj = [], []
    dA, dB = disjoint_regions()
    for r in r_list:
        delta = r * h
        sel = select_region(mesh, A, B, delta)
        D = _ie_defect(mesh, E, sel)
        rows.append({"r_n": r, "delta": delta, "defect": D, "perimeter": sel.perimeter,
                     "normalised": D / sel.perimeter})
        same.append(_ie_defect(mesh, E, select_region(mesh, A, A, delta)))
        if 2 * delta < 0.4:
            disj.append(_ie_defect(mesh, E, select_region(mesh, dA, dB, delta)))
    fit = _rows_fit(rows, "delta", "normalised")
    return DefectReport(rows, fit, {"identical_max": max(same), "disjoint_max": max(disj) if disj else 0.0})


# ---------------------------------------------------------------------------
# scan-order indifference


@dataclass
class ScanReport:
    rows: list
    ratio: float
    static_max: float

    def to_dict(self):
        return {"rows": self.rows, "ratio": self.ratio, "static_max": self.static_max}


def scan_indifference(geom=None, hs=(0.2, 0.1, 0.05, 0.025), n_pairs=10, seed=0, windows=None,
                      loss=Loss(), rho0=0.0) -> ScanReport:
    """Spread of F_n over random scan-order pairs, static and adaptive.

    For each h, ``n_pairs`` pairs of seeded permutations are drawn.  The
    adaptive defect max |F_sigma - F_tau| is normalised by delta_n * Area(boundary)
    with delta_n = R_n = h^(1/2); on closed geometries Vol is used instead.
    """
    geom = geom or euclidean_ball(2, 1.0)
    windows = windows or default_windows(geom.dim)
    ex = exact_functionals(geom)
    measure = ex.area if geom.has_boundary else ex.vol
    rng = np.random.default_rng(seed)
    rows = []
    static_max = 0.0
    for h in sorted(hs, reverse=True):
        mesh = build_mesh(geom, h)
        phi = compute_features(mesh, windows)
        r_n = h ** -0.5
        pairs = neighbour_pairs(mesh, r_n * h)
        n = len(mesh)
        adapt, stat = [], []
        for _ in range(n_pairs):
            s1, s2 = rng.integers(0, 2 ** 32, size=2)
            tot = []
            for mode in ("adaptive", "static"):
                a = assemble(mesh, windows, loss, rho0, ScanOrder.random(n, int(s1), mode, r_n), phi=phi, pairs=pairs)
                b = assemble(mesh, windows, loss, rho0, ScanOrder.random(n, int(s2), mode, r_n), phi=phi, pairs=pairs)
                tot.append(abs(a.total - b.total))
            adapt.append(tot[0])
            stat.append(tot[1])
        delta = r_n * h
        dmax = max(adapt)
        static_max = max(static_max, max(stat))
        rows.append({"h": h, "delta_n": delta, "pairs": n_pairs, "adaptive_max": dmax,
                     "static_max": max(stat), "normalised": dmax / (delta * measure)})
    norm = [r["normalised"] for r in rows]
    pos = [v for v in norm if v > 0]
    ratio = max(pos) / min(pos) if pos and min(norm) > 0 else (1.0 if max(norm) == 0 else math.inf)
    return ScanReport(rows, ratio, static_max)


# ---------------------------------------------------------------------------
# boundary layers


@dataclass
class LayerReport:
    rows: list
    fit: object
    h_rows: list
    c_ratio: float

    def to_dict(self):
        return {"rows": self.rows, "fit": None if self.fit is None else self.fit.to_dict(),
                "h_rows": self.h_rows, "c_ratio": self.c_ratio}


def _layer_sum(mesh, E, lo, hi):
    t = mesh.depth
    mask = (t >= lo - 1e-12) & (t <= hi + 1e-12) & (mesh.layer != FIRST_LAYER)
    return math.fsum(np.abs(E[mask]).tolist())


def boundary_layer_sums(h=0.05, eps_list=(0.2, 0.3, 0.4, 0.5), h_list=(0.1, 0.05, 0.025), eps_fixed=0.3,
               windows=None, loss=Loss(), rho0=1.0, geom=None) -> LayerReport:
    """Sum of |E_n(c)| over cells with depth in [c* h, eps] on the ball.

    Fitted against eps at fixed h, and the constant C = S / (eps Area) is
    tracked across h at fixed eps.
    """
    geom = geom or euclidean_ball(2, 1.0)
    windows = windows or default_windows(geom.dim)
    area = exact_functionals(geom).area
    mesh = build_mesh(geom, h)
    E = assemble(mesh, windows, loss, rho0).energies
    rows = []
    for eps in eps_list:
        S = _layer_sum(mesh, E, mesh.c_star * h, eps)
        rows.append({"eps": eps, "sum": S, "C": S / (eps * area)})
    h_rows = []
    for hh in h_list:
        m = build_mesh(geom, hh)
        Eh = assemble(m, windows, loss, rho0).energies
        S = _layer_sum(m, Eh, m.c_star * hh, eps_fixed)
        h_rows.append({"h": hh, "eps": eps_fixed, "sum": S, "C": S / (eps_fixed * area)})
    Cs = [r["C"] for r in h_rows]
    return LayerReport(rows, _rows_fit(rows, "eps", "sum"), h_rows, max(Cs) / min(Cs))


# ---------------------------------------------------------------------------
# flat reference quasi-uniqueness


@dataclass
class UniquenessReport:
    rows: list
    fit: object

    def to_dict(self):
        return {"rows": self.rows, "fit": None if self.fit is None else self.fit.to_dict()}


def flat_ref_uniqueness(geom=None, hs=(0.2, 0.1, 0.05, 0.025), windows=None, loss=Loss(),
                        rho0=1.0) -> UniquenessReport:
    """Per-cell energy gap between the primary and alternate flat references.

    Both references are admissible: each maps the cell onto a flat model
    whose volume matches Vol_g(c) to second order.  The gap is reported as
    max_c |E_alt - E_prim| / Vol_g(c).
    """
    geom = geom or round_sphere(2, 1.0)
    windows = windows or default_windows(geom.dim)
    rows = []
    for h in sorted(hs, reverse=True):
        mesh = build_mesh(geom, h)
        phi = compute_features(mesh, windows)
        m1, _, lam1 = flat_refs(mesh, "primary")
        m2, _, lam2 = flat_refs(mesh, "alternate")
        br1 = assemble(mesh, windows, loss, rho0, phi=phi, volumes=m1)
        br2 = assemble(mesh, windows, loss, rho0, phi=phi, volumes=m2)
        gap = np.abs(br2.energies - br1.energies) / mesh.volumes
        rows.append({"h": h, "gap": float(gap.max()), "lam_max": float(np.abs(lam1).max()),
                     "total_gap": abs(br2.total - br1.total)})
    return UniquenessReport(rows, _rows_fit(rows, "h", "gap"))


# ---------------------------------------------------------------------------
# scaling


@dataclass
class ScalingReport:
    rows: list
    passed: bool
    tolerances: dict

    def to_dict(self):
        return {"rows": self.rows, "passed": self.passed, "tolerances": self.tolerances}


def _components(geom, h, windows, loss, rho0):
    mesh = build_mesh(geom, h)
    br = assemble(mesh, windows, loss, rho0)
    vol = math.fsum(mesh.volumes.tolist())
    first = mesh.layer == FIRST_LAYER
    vfirst = math.fsum(mesh.volumes[first].tolist())
    bulk = br.interior_sum + br.deeper_sum
    curv = bulk - rho0 * (vol - vfirst)
    bnd = br.first_layer_sum - rho0 * vfirst
    return {"volume": rho0 * vol, "curvature": curv, "boundary": bnd}


def scaling_test(geom, sigmas=(0.5, 2.0, 4.0), h=0.1, windows=None, loss=Loss(), rho0=1.0,
                 vol_tol=1e-10, rel_tol=0.01) -> ScalingReport:
    """Rescale the geometry and meshsize by sigma and compare the three components.

    Volume terms must scale as sigma^d, curvature and boundary terms as sigma^(d-2).
    """
    windows = windows or default_windows(geom.dim)
    d = geom.dim
    base = _components(geom, h, windows, loss, rho0)
    rows = []
    ok = True
    for s in sigmas:
        comp = _components(rescale(geom, s), s * h, windows, loss, rho0)
        row = {"sigma": s}
        for key, p, tol in (("volume", d, vol_tol), ("curvature", d - 2, rel_tol), ("boundary", d - 2, rel_tol)):
            expect = base[key] * s ** p
            err = abs(comp[key] - expect)
            # components that vanish identically (flat interiors) are compared
            # against the rounding level of the volume term
            floor = 1e-12 * abs(base["volume"]) * s ** d
            rel = err / max(abs(expect), floor) if floor > 0 or expect != 0 else err
            good = rel <= tol
            row[key] = comp[key]
            row[key + "_expected"] = expect
            row[key + "_rel_error"] = rel
            ok &= bool(good)
        rows.append(row)
    return ScalingReport(rows, ok, {"volume": vol_tol, "curvature": rel_tol, "boundary": rel_tol})


# ---------------------------------------------------------------------------
# window-shape invariance


def window_invariance(profiles=("quartic", "epanechnikov", "uniform"), hs=(0.1, 0.05, 0.025), loss=Loss()):
    """Calibrated alpha1 per radial profile, compared with mu2 / 6."""
    from .calibration import calibrate
    rows = []
    for prof in profiles:
        win = WindowPair(InteriorWindow(2, prof), default_windows(2).boundary)
        cal = calibrate(windows=win, loss=loss, hs=hs)
        rows.append({"profile": prof, "mu2": win.mu2, "alpha1": cal.alpha1_extrap,
                     "predicted": win.mu2 / 6.0, "rel_error": cal.rel_errors()["alpha1"]})
    return rows


# ---------------------------------------------------------------------------
# recovery with smoothed metrics


def recovery(geom=None, hs=(0.1, 0.05, 0.025), eta=0.5, windows=None, loss=Loss(), rho0=1.0,
             constants=None, nodes_per_cell=16):
    """F_n of the metric mollified at eps_n = eta h against the limit of the raw metric.

    The smoothed metric is sampled cell-centred with ``nodes_per_cell`` nodes
    per mesh cell in each direction, so a midpoint rule gives the smoothed
    cell volumes.  Features come from geodesic shooting through a spline
    interpolant.  The table is informational.
    """
    geom = geom or perturbed_chart()
    windows = windows or default_windows(2)
    if constants is None:
        constants = (rho0, windows.mu2 / 6.0, windows.mu1)
    ex = exact_functionals(geom, *constants)
    rows = []
    for h in sorted(hs, reverse=True):
        mesh = build_mesh(geom, h)
        n_cells = int(round(geom.periods[0] / h))
        n = n_cells * nodes_per_cell
        raw = assemble(mesh, windows, loss, rho0)
        sm = smooth(sample_perturbed(geom, n, cell_centred=True), MollifierSpec(eta * h))
        dA = sm.sqrt_det() * sm.spacing[0] * sm.spacing[1]
        k = nodes_per_cell
        vols = dA.reshape(n_cells, k, n_cells, k).sum(axis=(1, 3)).ravel()
        field_ = SampledField(sm)
        off = np.linalg.norm(_bump_offset(geom, mesh.anchors), axis=1)
        support = off < geom.bump_radius + eta * h + h * windows.interior.support * 1.05
        phi = shoot_window_average(field_, mesh.anchors, h, windows.interior, support=support)
        E = rho0 * vols + vols / h ** 2 * (loss(phi) - loss(1.0))
        F_s = math.fsum(E.tolist())
        rows.append({"h": h, "eps_n": eta * h, "F_n_smoothed": F_s, "F_n_raw": raw.total,
                     "F_limit": ex.F_limit, "error_smoothed": abs(F_s - ex.F_limit),
                     "error_raw": abs(raw.total - ex.F_limit)})
    return rows



# ---------------------------------------------------------------------------
# smoothing stability


def smoothing_geometry():
    """Strip with a conformal bump kept well inside the collar-free zone."""
    return perturbed_chart(amplitude=0.3, center=(0.5, 0.5), bump_radius=0.25, boundary=True)


def smoothing_stability(geom=None, n=1280, eps_factors=(0.2, 0.1, 0.05, 0.025), c=0.45, refine=8, metric=None):
    """Mollify the sampled strip metric at eps = factor * bump radius.

    ``metric`` may supply a stored sample of ``geom`` (e.g. from a grid file)
    instead of sampling it on an n x (n+1) grid.

    Returns a dict with the error table, C1 slope fit, the curvature reference
    norm ||R_g||_L1 and flat controls (torus and ball-collar style flat strip).
    """
    from ..smoothing import l1_norm, perturbed_reference, stability_experiment
    geom = geom or smoothing_geometry()
    if metric is None:
        metric = sample_perturbed(geom, n)
    R_ref, K_ref = perturbed_reference(geom, metric, refine)
    eps = [f * geom.bump_radius for f in eps_factors]
    rows = stability_experiment(metric, eps, R_ref, K_ref, c)
    flat = sample_perturbed(perturbed_chart(amplitude=0.0, center=(0.5, 0.5), bump_radius=0.25, boundary=True),
                            max(64, 2 * math.ceil(8 / eps[0])))
    flat_rows = stability_experiment(flat, [eps[0]], np.zeros(flat.shape[:2]), None, c)
    table = [r.__dict__.copy() for r in rows]
    return {"rows": table, "R_norm": l1_norm(R_ref, metric),
            "c1_fit": _rows_fit(table, "eps", "c1"),
            "flat_controls": {"c0": flat_rows[0].c0, "R_l1": flat_rows[0].R_l1, "K_l1": flat_rows[0].K_l1}}
