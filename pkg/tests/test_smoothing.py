import math

import numpy as np
import pytest
import sympy as sp

from mdlgamma import geometry as G
from mdlgamma.errors import GridTooSmall, RadiusExceedsReach, ResolutionTooCoarse
from mdlgamma.mdl import shoot_window_average
from mdlgamma.smoothing import (MollifierSpec, SampledChartMetric, SampledField, boundary_cutoff, c1_norm,
                                curvature_fd, l1_norm, read_grid, sample_perturbed, smooth,
                                stability_experiment, write_grid)
from mdlgamma.windows import default_windows


def band_metric(n, a=0.6, b=2.2):
    """Spherical band t in [a, b] with g = sin(t)^2 ds^2 + dt^2, s periodic over 2 pi."""
    def fn(s, t):
        return np.stack([np.sin(t) ** 2, 0 * t, 1 + 0 * t], -1)
    ds, dt = 2 * np.pi / n, (b - a) / (n - 1)
    return SampledChartMetric.from_function(fn, (n, n), (ds, dt), (0.0, a), True)


def test_band_curvature_second_order():
    errs, kerr = [], []
    for n in (40, 80):
        c = curvature_fd(band_metric(n))
        errs.append(np.max(np.abs(c.R - 2.0)))
        kerr.append(max(np.max(np.abs(c.K_lower + 1 / math.tan(0.6))),
                        np.max(np.abs(c.K_upper - 1 / math.tan(2.2)))))
    assert errs[0] / errs[1] > 3.5
    assert kerr[0] / kerr[1] > 3.5
    assert errs[1] < 5e-3 and kerr[1] < 5e-3


def test_general_metric_against_symbolic_curvature():
    x, y = sp.symbols("x y", real=True)
    two_pi = 2 * sp.pi
    g11 = 1 + sp.Rational(3, 10) * sp.sin(two_pi * x) * sp.cos(two_pi * y)
    g12 = sp.Rational(1, 5) * sp.sin(two_pi * (x + y))
    g22 = 1 + sp.Rational(1, 4) * sp.cos(two_pi * x)
    g = sp.Matrix([[g11, g12], [g12, g22]])
    gi = g.inv()
    X = (x, y)
    gam = [[[sum(gi[l, m] * (sp.diff(g[m, i], X[k]) + sp.diff(g[m, k], X[i]) - sp.diff(g[i, k], X[m]))
                 for m in range(2)) / 2 for k in range(2)] for i in range(2)] for l in range(2)]
    ric = [[sum(sp.diff(gam[l][i][k], X[l]) - sp.diff(gam[l][i][l], X[k])
                + sum(gam[l][l][m] * gam[m][i][k] - gam[l][k][m] * gam[m][i][l] for m in range(2))
                for l in range(2)) for k in range(2)] for i in range(2)]
    R = sp.lambdify((x, y), sum(gi[i, k] * ric[i][k] for i in range(2) for k in range(2)), "numpy")
    comp = [sp.lambdify((x, y), c, "numpy") for c in (g11, g12, g22)]

    def fn(a, b):
        return np.stack([np.broadcast_to(c(a, b), a.shape) for c in comp], -1)
    errs = []
    for n in (32, 64):
        m = SampledChartMetric.from_function(fn, (n, n), (1 / n, 1 / n))
        X1, X2 = m.coords()
        errs.append(np.max(np.abs(curvature_fd(m).R - R(X1, X2))))
    assert errs[0] / errs[1] > 3.5


def test_kernel_normalised_and_even():
    k = MollifierSpec(0.05).kernel((0.004, 0.005))
    assert k.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.array_equal(k, k[::-1, ::-1])
    with pytest.raises(ValueError):
        MollifierSpec(0.05, "gaussian").kernel((0.01, 0.01))


def test_cutoff_values():
    tb = 0.2
    t = np.array([0.0, 0.1, 0.15, 0.2, 0.3])
    chi = boundary_cutoff(t, tb)
    assert chi[0] == 1 and chi[1] == 1 and chi[2] == pytest.approx(0.5) and chi[3] == 0 and chi[4] == 0
    assert np.all(np.diff(boundary_cutoff(np.linspace(0, 0.3, 301), tb)) <= 0)


@pytest.mark.parametrize("boundary", [False, True])
def test_constant_metric_is_fixed(boundary):
    n = 128
    g = np.zeros((n, n + boundary, 3))
    # edge charts are orthogonal (g12 = 0 on the edge), which the odd reflection relies on
    g[..., 0], g[..., 1], g[..., 2] = 2.0, 0.0 if boundary else 0.3, 1.5
    m = SampledChartMetric(g, (1 / n, 1 / n), (0.0, 0.0), boundary)
    out = smooth(m, MollifierSpec(0.08))
    assert np.max(np.abs(out.g - g)) < 1e-13


def test_guards():
    m = sample_perturbed(G.perturbed_chart(boundary=True, center=(0.5, 0.5)), 160)
    with pytest.raises(ResolutionTooCoarse):
        smooth(m, MollifierSpec(0.02))
    with pytest.raises(RadiusExceedsReach):
        smooth(m, MollifierSpec(0.2))
    tiny = SampledChartMetric(np.ones((4, 4, 3)), (0.25, 0.25))
    with pytest.raises(GridTooSmall):
        curvature_fd(tiny)


def test_grid_roundtrip(tmp_path):
    m = sample_perturbed(G.perturbed_chart(boundary=True, center=(0.5, 0.5)), 32)
    p = tmp_path / "g.bin"
    write_grid(p, m)
    raw = p.read_bytes()
    assert raw[:8] == b"MDLGRID1" and len(raw) == 56 + 32 * 33 * 3 * 8
    back = read_grid(p)
    assert np.array_equal(back.g, m.g) and back.boundary and back.spacing == m.spacing
    p.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_grid(p)
    p.write_bytes(b"NOTAGRID" + raw[8:])
    with pytest.raises(ValueError):
        read_grid(p)


def test_small_stability_run():
    geom = G.perturbed_chart(amplitude=0.3, center=(0.5, 0.5), bump_radius=0.25, boundary=True)
    m = sample_perturbed(geom, 320)
    from mdlgamma.smoothing import perturbed_reference
    R_ref, K_ref = perturbed_reference(geom, m, refine=4)
    rows = stability_experiment(m, [0.05, 0.025], R_ref, K_ref)
    assert rows[1].c1 < rows[0].c1 and rows[1].R_l1 < rows[0].R_l1
    assert all(r.K_l1 < 1e-10 for r in rows)
    # the metric is phi * delta with phi >= 1, and averaging keeps it so
    assert all(r.eig_min >= 1 - 1e-12 for r in rows)
    assert l1_norm(np.ones(m.shape), m) == pytest.approx(1.0 + 0.3 * math.pi * 0.25 ** 2 / 3, rel=1e-3)
    assert c1_norm(np.zeros_like(m.g), m) == 0.0


def test_sampled_field_matches_analytic_shooting():
    g = G.perturbed_chart()
    h = 0.05
    n = 320
    sm = sample_perturbed(g, n, cell_centred=True)
    field = SampledField(sm)
    pts = np.array([[0.5, 0.5], [0.45, 0.6], [0.3, 0.5]])
    ana = G.ConformalBumpField(g)
    assert np.allclose(field.metric(pts), ana.metric(pts), atol=1e-6)
    W = default_windows(2).interior
    a = shoot_window_average(field, pts, h, W)
    b = shoot_window_average(ana, pts, h, W)
    assert np.max(np.abs(a - b)) < 1e-5
