import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdlgamma import geometry as G
from mdlgamma.errors import FeatureOutOfRange, NotFirstLayer
from mdlgamma.mdl import (Loss, ScanOrder, adaptive_reference, assemble, cell_energy, compute_features,
                          feature_boundary, feature_interior, flat_ref_for, flat_refs, interior_phi,
                          neighbour_pairs, boundary_phi)
from mdlgamma.mesh import FIRST_LAYER, INTERIOR, build_mesh
from mdlgamma.windows import InteriorWindow, default_windows

W2, W3 = default_windows(2), default_windows(3)

# window averages of the sphere density sinc(h r)^(d-1) under the quartic window,
# 30-digit mpmath quadrature of the radial integrals
SPHERE_FEATURE = {
    (2, 0.2): 0.99833466603194754787, (2, 0.1): 0.99958341665674681901, (2, 0.05): 0.99989583854151165981,
    (3, 0.2): 0.99556631340798061499, (3, 0.1): 0.99888956203063108363, (3, 0.05): 0.99972226430571770047,
}
# 3-ball first layer: triangular normal profile on [0, .6] times a quartic disk window,
# density (1 - h tau)^2 sinc(h |z|); mpmath double quadrature
BALL3_FEATURE = {0.2: 0.92086389594786841398, 0.1: 0.96019983004047099219}


@pytest.mark.parametrize("d,h", sorted(SPHERE_FEATURE))
def test_sphere_feature_frozen(d, h):
    a = np.zeros((1, d + 1))
    a[0, -1] = 1.0
    W = W2 if d == 2 else W3
    assert interior_phi(G.round_sphere(d), a, h, W.interior)[0] == pytest.approx(SPHERE_FEATURE[d, h], abs=1e-14)


@pytest.mark.parametrize("h", sorted(BALL3_FEATURE))
def test_ball3_boundary_feature_frozen(h):
    val = boundary_phi(G.euclidean_ball(3), np.array([[0.0, 0.0, 1.0]]), h, W3.boundary)[0]
    assert val == pytest.approx(BALL3_FEATURE[h], abs=1e-14)


def test_ball2_boundary_feature_is_linear():
    # 2D Fermi density is 1 - t, so the feature is 1 - h mu1 exactly
    for h in (0.2, 0.05):
        val = boundary_phi(G.euclidean_ball(2), np.array([[1.0, 0.0]]), h, W2.boundary)[0]
        assert val == pytest.approx(1 - 0.2 * h, abs=1e-15)


def test_symmetry_shortcut_matches_pointwise():
    m = build_mesh(G.round_sphere(2), 0.2)
    idx = np.arange(0, len(m), 17)
    fast = interior_phi(m.geom, m.anchors[idx], m.h, W2.interior, exploit_symmetry=True)
    slow = interior_phi(m.geom, m.anchors[idx], m.h, W2.interior, exploit_symmetry=False)
    assert np.allclose(fast, slow, atol=1e-13)


def test_perturbed_features_flat_outside_bump():
    g = G.perturbed_chart()
    m = build_mesh(g, 0.05)
    phi = compute_features(m, W2)
    far = np.linalg.norm(m.anchors - np.asarray(g.center), axis=1) > 0.25 + 0.06
    assert np.all(phi[far] == 1.0)
    assert np.any(np.abs(phi[~far] - 1.0) > 1e-4)


def test_losses():
    for kind in ("neglog", "quadratic"):
        L = Loss(kind)
        assert L(1.0) == 0.0 and L.d1(1.0) == -1.0
    with pytest.raises(ValueError):
        Loss("l1")
    assert Loss().bounds() == pytest.approx((2.0, 4.0))


def test_cell_energy_slow_path_matches_vectorised():
    m = build_mesh(G.euclidean_ball(2), 0.1)
    br = assemble(m, W2, Loss(), 0.3)
    for i in (0, len(m) // 2, len(m) - 1):
        assert cell_energy(m.cell(i), m.geom, W2, Loss(), 0.3, m.h) == pytest.approx(br.energies[i], rel=1e-13)


def test_feature_entry_points():
    m = build_mesh(G.euclidean_ball(2), 0.1)
    i_first = int(np.flatnonzero(m.layer == FIRST_LAYER)[0])
    i_int = int(np.flatnonzero(m.layer == INTERIOR)[0])
    assert feature_boundary(m.cell(i_first), m.geom, W2.boundary, m.h).chart == "fermi"
    assert feature_interior(m.cell(i_int), m.geom, W2.interior, m.h).phi == 1.0
    with pytest.raises(NotFirstLayer):
        feature_boundary(m.cell(i_int), m.geom, W2.boundary, m.h)


def test_feature_out_of_range():
    # uniform window of geodesic radius 3: average of sin(r)/r is 2 (1 - cos 3) / 9 < .5
    wide = InteriorWindow(2, "uniform", support=30.0)
    m = build_mesh(G.round_sphere(2), 0.1)
    from mdlgamma.windows import WindowPair
    with pytest.raises(FeatureOutOfRange):
        compute_features(m, WindowPair(wide, W2.boundary))


def test_per_cell_interior_law_second_order():
    res = []
    for h in (0.1, 0.05):
        m = build_mesh(G.round_sphere(2), h)
        br = assemble(m, W2)
        res.append(np.max(np.abs(br.energies / m.volumes - 2 * W2.mu2 / 6)))
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.02)


def test_first_layer_sum_tends_to_mu1_times_perimeter():
    m = build_mesh(G.euclidean_ball(2), 0.025)
    br = assemble(m, W2)
    assert br.first_layer_sum == pytest.approx(0.2 * 2 * math.pi, rel=0.005)
    assert br.interior_sum == 0.0 and br.deeper_sum == 0.0


def test_assemble_region_and_ids():
    m = build_mesh(G.euclidean_ball(2), 0.1)
    full = assemble(m, W2, rho0=1.0)
    ids = np.arange(0, len(m), 2)
    part = assemble(m, W2, rho0=1.0, region=ids)
    mask = np.zeros(len(m), bool)
    mask[ids] = True
    assert part.total == assemble(m, W2, rho0=1.0, region=mask).total
    assert part.total < full.total
    with pytest.raises(IndexError):
        assemble(m, W2, region=[len(m)])
    lines = part.to_csv(m).splitlines()
    assert lines[0] == "cell_id,layer,feature,delta_loss,energy" and len(lines) == len(ids) + 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_static_total_independent_of_scan(seed):
    m = build_mesh(G.round_sphere(2), 0.2)
    a = assemble(m, W2, rho0=0.7, scan=ScanOrder.random(len(m), seed))
    b = assemble(m, W2, rho0=0.7, scan=ScanOrder.identity(len(m)))
    assert a.total == b.total


def test_scan_order_validation():
    with pytest.raises(ValueError):
        ScanOrder(np.array([0, 0, 1]))
    with pytest.raises(ValueError):
        ScanOrder(np.arange(3), mode="greedy")


def test_adaptive_reference_properties():
    m = build_mesh(G.euclidean_ball(2), 0.1)
    phi = np.full(len(m), 0.9)
    scan = ScanOrder.random(len(m), 5, "adaptive")
    ref = adaptive_reference(m, phi, scan)
    first_scanned = scan.perm[0]
    assert ref[first_scanned] == 1.0
    rest = np.ones(len(m), bool)
    rest[first_scanned] = False
    # every other cell with an earlier neighbour averages constant features exactly
    assert np.all((ref[rest] == 1.0) | np.isclose(ref[rest], 0.9, atol=1e-15))


def test_neighbour_pairs_symmetric_and_periodic():
    m = build_mesh(G.flat_torus(2), 0.1)
    i, j = neighbour_pairs(m, 0.105)
    # every cell on the torus has exactly 4 neighbours at distance h (wrap-around included)
    assert np.all(np.bincount(i, minlength=len(m)) == 4)
    assert set(zip(i.tolist(), j.tolist())) == set(zip(j.tolist(), i.tolist()))


def test_flat_refs():
    m = build_mesh(G.round_sphere(2), 0.1)
    matched, model, lam = flat_refs(m, "primary")
    assert np.array_equal(matched, m.volumes)
    alt, _, _ = flat_refs(m, "alternate")
    assert np.max(np.abs(alt / matched - 1)) < 1e-6
    ref = flat_ref_for(m, 3)
    assert ref.ref_feature == 1.0 and ref.matched_volume == m.volumes[3]
    with pytest.raises(ValueError):
        flat_refs(m, "other")
