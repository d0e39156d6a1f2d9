import math

import numpy as np
import pytest

from mdlgamma import geometry as G
from mdlgamma.errors import InterfaceTouchesBoundary, MeshsizeTooLarge
from mdlgamma.mesh import (DEEPER_LAYER, FIRST_LAYER, INTERIOR, ConvexRegion, Disk, HalfPlane, build_mesh,
                           classify_layers, select_region, shape_report, sphere_cell_quadrature)


@pytest.mark.parametrize("geom,h", [
    (G.flat_torus(2), 0.1), (G.flat_torus(3), 0.2), (G.round_sphere(2), 0.1), (G.round_sphere(3), 0.2),
    (G.euclidean_ball(2), 0.05), (G.euclidean_ball(3), 0.1), (G.perturbed_chart(), 0.05),
    (G.perturbed_chart(boundary=True), 0.05),
])
def test_volumes_partition_exactly(geom, h):
    m = build_mesh(geom, h)
    rep = shape_report(m)
    assert rep["volume_rel_error"] <= 1e-12
    if geom.has_boundary:
        assert rep["base_area_rel_error"] <= 1e-12
    assert "volume_partition" not in rep["violations"]


def test_ball_counts_frozen():
    m = build_mesh(G.euclidean_ball(2), 0.1)
    assert len(m) == 314
    assert classify_layers(m)["first"] == 60


def test_layers_on_ball():
    m = build_mesh(G.euclidean_ball(2), 0.05)
    first = m.layer == FIRST_LAYER
    assert np.all(m.depth[first] <= m.c_star * m.h)
    assert np.all(m.depth[m.layer == DEEPER_LAYER] < 0.5)
    assert np.all(m.depth[m.layer == INTERIOR] >= 0.5 - 1e-12)
    # footpoints lie on the boundary
    assert np.allclose(np.linalg.norm(m.footpoints[first], axis=1), 1.0)
    assert math.fsum(m.base_area[first]) == pytest.approx(2 * math.pi, rel=1e-13)


def test_sphere_quadrature_weights():
    m = build_mesh(G.round_sphere(2), 0.2)
    idx = np.arange(0, len(m), 7)
    P, W = sphere_cell_quadrature(m, idx)
    assert np.allclose(W.sum(axis=1), m.volumes[idx], rtol=1e-13)
    assert np.allclose(np.linalg.norm(P, axis=-1), 1.0)


def test_meshsize_too_large():
    with pytest.raises(MeshsizeTooLarge):
        build_mesh(G.euclidean_ball(2), 0.3)


def test_shape_bounds_sphere():
    rep = shape_report(build_mesh(G.round_sphere(2), 0.1))
    assert rep["aspect_ratio"] <= 4 and rep["min_angle_deg"] >= 30
    assert rep["violations"] == []


def test_csv_columns():
    m = build_mesh(G.euclidean_ball(2), 0.2)
    lines = m.to_csv().splitlines()
    assert lines[0] == "cell_id,layer,t_c,volume,base_area"
    assert len(lines) == len(m) + 1


# regions

def _regions():
    A = ConvexRegion(Disk((0.0, 0.0), 0.5))
    B = ConvexRegion(Disk((0.0, 0.0), 0.6), HalfPlane((1.0, 0.0), 0.0))
    return A, B


def test_intersection_perimeter():
    A, B = _regions()
    assert (A & B).perimeter() == pytest.approx(math.pi / 2 + 1.0, rel=1e-12)


def test_distance_against_boundary_samples():
    A, B = _regions()
    R = A & B
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, size=(300, 2))
    d = R.distance(x)
    bs = R.boundary_samples(20000)
    brute = np.min(np.linalg.norm(x[:, None, :] - bs[None, :, :], axis=-1), axis=1)
    outside = ~R.contains(x)
    assert np.all(d[~outside] == 0)
    assert np.allclose(d[outside], brute[outside], atol=2e-4)


def test_select_region_and_margin():
    m = build_mesh(G.euclidean_ball(2), 0.05)
    A, B = _regions()
    sel = select_region(m, A, B, delta=0.1)
    assert np.all(sel.in_inter <= (sel.in_A & sel.in_B))
    assert np.array_equal(sel.in_union, sel.in_A | sel.in_B)
    big = ConvexRegion(Disk((0.0, 0.0), 0.99))
    with pytest.raises(InterfaceTouchesBoundary):
        select_region(m, big, big)
    with pytest.raises(ValueError):
        ConvexRegion(HalfPlane((1.0, 0.0), 0.0))
