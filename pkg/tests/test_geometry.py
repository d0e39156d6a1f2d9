import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy import integrate

from mdlgamma import geometry as G
from mdlgamma.errors import ChartDomainExceeded, NoBoundary, NonPositiveScale, UnsupportedDimension


def test_constructors_validate():
    with pytest.raises(UnsupportedDimension):
        G.flat_torus(4)
    with pytest.raises(ValueError):
        G.round_sphere(2, -1.0)
    with pytest.raises(ValueError):
        G.perturbed_chart(amplitude=-1.5)
    with pytest.raises(ValueError):
        # bump must stay a quarter width away from the strip edges
        G.perturbed_chart(center=(0.5, 0.2), bump_radius=0.25, boundary=True)


@pytest.mark.parametrize("geom", [G.flat_torus(2), G.round_sphere(3, 2.0), G.euclidean_ball(2),
                                  G.perturbed_chart(boundary=True)])
def test_spec_roundtrip(geom):
    assert G.GeometrySpec.from_dict(geom.to_dict()) == geom


def test_reach_and_flags():
    assert G.euclidean_ball(2, 0.7).reach == 0.7
    assert math.isinf(G.round_sphere(2).reach)
    assert G.perturbed_chart(boundary=True).reach == 0.5
    assert G.flat_torus(3).is_flat and not G.round_sphere(2).is_flat
    assert G.perturbed_chart(amplitude=0.0).is_flat


def test_rescale():
    g = G.rescale(G.round_sphere(2, 1.0), 3.0)
    assert g.radius == 3.0
    t = G.rescale(G.flat_torus(2, (1.0, 2.0)), 0.5)
    assert t.periods == (0.5, 1.0)
    with pytest.raises(NonPositiveScale):
        G.rescale(g, 0.0)


def test_sphere_radial_density_values():
    g = G.round_sphere(2, 1.0)
    assert G.radial_density(g, np.array([0.1]))[0] == pytest.approx(math.sin(0.1) / 0.1, abs=1e-15)
    g3 = G.round_sphere(3, 2.0)
    q = 0.3
    assert G.radial_density(g3, np.array([q]))[0] == pytest.approx((2 * math.sin(q / 2) / q) ** 2, abs=1e-15)


def test_fermi_density_ball():
    b2 = G.euclidean_ball(2, 1.0)
    assert G.fermi_density(b2, None, np.zeros(1), np.array([0.1])) == pytest.approx(0.9)
    b3 = G.euclidean_ball(3, 1.0)
    val = G.fermi_density(b3, None, np.array([[0.0, 0.0]]), np.array([0.05]))
    assert float(np.squeeze(val)) == pytest.approx(0.95 ** 2)
    with pytest.raises(NoBoundary):
        G.fermi_density(G.round_sphere(2), None, np.zeros(1), np.array([0.1]))


def test_curvature_oracles():
    R, K = G.curvature_oracles(G.euclidean_ball(3, 2.0))
    assert K(np.zeros((4, 3))) == pytest.approx(np.ones(4))
    assert R(np.zeros(3)) == 0.0
    Rs, _ = G.curvature_oracles(G.round_sphere(3, 2.0))
    assert Rs(np.zeros(4)) == pytest.approx(1.5)
    _, Kt = G.curvature_oracles(G.flat_torus(2))
    with pytest.raises(NoBoundary):
        Kt(np.zeros(2))


def test_exact_functionals_sphere():
    ex = G.exact_functionals(G.round_sphere(2), 1.0, 0.5, 0.0)
    assert ex.vol == pytest.approx(4 * math.pi)
    assert ex.total_R == pytest.approx(8 * math.pi)
    assert ex.F_limit == pytest.approx(4 * math.pi + 4 * math.pi)


def test_bump_volume_matches_quadrature():
    g = G.perturbed_chart(amplitude=0.3, bump_radius=0.25)
    def f(y, x):
        phi, _, _ = G.bump_factor(g, np.array([x, y]))
        return float(phi)
    c = g.center
    extra, _ = integrate.dblquad(lambda y, x: f(y, x) - 1.0, c[0] - 0.25, c[0] + 0.25,
                                 lambda x: c[1] - 0.25, lambda x: c[1] + 0.25, epsabs=1e-12)
    ex = G.exact_functionals(g)
    assert ex.vol == pytest.approx(1.0 + extra, abs=1e-9)
    assert ex.total_R == 0.0  # Gauss-Bonnet on the torus


def test_bump_curvature_matches_symbolic():
    a, rb = 0.3, 0.25
    x, y = sp.symbols("x y", real=True)
    phi = 1 + a * (1 - (x ** 2 + y ** 2) / rb ** 2) ** 2
    K = -sp.simplify((sp.diff(sp.log(phi), x, 2) + sp.diff(sp.log(phi), y, 2)) / (2 * phi))
    Kf = sp.lambdify((x, y), K, "numpy")
    g = G.perturbed_chart(amplitude=a, bump_radius=rb)
    field = G.ConformalBumpField(g)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-0.17, 0.17, size=(50, 2))
    got = field.gauss_curvature(pts + np.asarray(g.center))
    assert np.allclose(got, Kf(pts[:, 0], pts[:, 1]), rtol=1e-12, atol=1e-12)


class StereographicSphere:
    """Unit sphere in stereographic coordinates, g = 4 / (1 + |x|^2)^2 delta (K = 1)."""

    def metric(self, x):
        lam = 4.0 / (1.0 + np.sum(x * x, axis=-1)) ** 2
        return lam[..., None, None] * np.eye(2)

    def metric_grad(self, x):
        r2 = np.sum(x * x, axis=-1)
        dlam = -16.0 * x / (1.0 + r2[..., None]) ** 3
        return dlam[..., :, None, None] * np.eye(2)

    def gauss_curvature(self, x):
        return np.ones(x.shape[:-1])


def test_shoot_rays_generic_path_on_sphere():
    x0 = np.array([[0.3, -0.2]] * 8)
    th = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    s = np.array([0.1, 0.2, 0.4])
    j = G.shoot_rays(StereographicSphere(), x0, th, s, substeps=16)
    assert np.allclose(j, np.sin(s)[None, :], atol=1e-9)


def test_metric_density_normal_perturbed_flat_far_away():
    g = G.perturbed_chart()
    x = np.array([0.02, 0.02])  # far from the bump centred at (.5, .5)
    z = np.array([[0.01, 0.0], [0.0, -0.02]])
    assert np.allclose(G.metric_density_normal(g, x, z), 1.0, atol=1e-14)
    with pytest.raises(ChartDomainExceeded):
        G.metric_density_normal(G.round_sphere(2), np.array([0, 0, 1.0]), np.array([[4.0, 0.0]]))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(1e-3, 0.5))
def test_sphere_density_scale_invariance(rho, q):
    """Density at geodesic distance q on radius rho equals density at q / rho on the unit sphere."""
    a = G.radial_density(G.round_sphere(2, rho), np.array([q * rho]))
    b = G.radial_density(G.round_sphere(2, 1.0), np.array([q]))
    assert a[0] == pytest.approx(b[0], rel=1e-13)
