"""Acceptance suite: twelve criteria at their stated tolerances.

Each test prints (and records for the terminal summary) one PASS/FAIL line.
"""

import filecmp
import math
import time

import pytest

from mdlgamma import geometry as G
from mdlgamma.analysis import calibration, experiments
from mdlgamma.cli import main
from mdlgamma.mesh import FIRST_LAYER, build_mesh
from mdlgamma.windows import default_windows, verify_window_class

HS = (0.2, 0.1, 0.05, 0.025)
W2 = default_windows(2)


def test_criterion_01_window_moments(record_criterion):
    t0 = time.perf_counter()
    w = default_windows(2)
    mu2, mu1 = w.mu2, w.mu1
    odd = w.interior.moments().odd_residual
    chk = verify_window_class(w)
    dt = time.perf_counter() - t0
    ok = abs(mu2 - 1 / 8) <= 1e-10 and odd <= 1e-12 and abs(mu1 - 0.2) <= 1e-10 and chk.passed and dt < 1.0
    record_criterion(1, "window moments", ok,
                     f"|mu2-1/8|={abs(mu2 - 0.125):.1e} odd={odd:.1e} |mu1-.2|={abs(mu1 - 0.2):.1e} t={dt:.2f}s")
    assert ok


@pytest.fixture(scope="module")
def laws():
    t0 = time.perf_counter()
    res = calibration.per_cell_laws(HS, W2)
    return res, time.perf_counter() - t0


def test_criterion_02_interior_per_cell_law(laws, record_criterion):
    res, dt = laws
    s = res["interior_fit"].slope
    ok = s >= 1.8 and dt < 60
    record_criterion(2, "interior per-cell law (sphere)", ok, f"slope={s:.3f} t={dt:.1f}s")
    assert ok


def test_criterion_03_first_layer_per_cell_law(laws, record_criterion):
    res, _ = laws
    s = res["first_layer_fit"].slope
    ok = s >= 0.8
    record_criterion(3, "first-layer per-cell law (ball)", ok, f"slope={s:.3f}")
    assert ok


@pytest.fixture(scope="module")
def calib():
    t0 = time.perf_counter()
    cal = calibration.calibrate(hs=HS, rho0=1.0)
    return cal, time.perf_counter() - t0


def test_criterion_04_calibration(calib, record_criterion):
    cal, dt = calib
    a0 = max(abs(a - 1.0) for a in cal.alpha0)
    rel = cal.rel_errors()
    ok = a0 <= 1e-10 and rel["alpha1"] <= 0.02 and rel["beta1"] <= 0.02 and dt < 120
    record_criterion(4, "calibration", ok, f"alpha0 err={a0:.1e} alpha1 rel={rel['alpha1']:.1e} "
                                           f"beta1 rel={rel['beta1']:.1e} t={dt:.1f}s")
    assert ok


def test_criterion_05_global_rates(calib, record_criterion):
    cal, _ = calib
    sph = calibration.rates(G.round_sphere(2), cal.constants, HS, rho0=1.0)
    ball = calibration.rates(G.euclidean_ball(2), cal.constants, HS, rho0=1.0)
    # first-layer sum against the predicted beta1 * Per at the finest h
    m_first = ball.extras["first_layer_rel_error"]
    last = ball.rows[-1]
    m = build_mesh(G.euclidean_ball(2), last["h"])
    vfirst = math.fsum(m.volumes[m.layer == FIRST_LAYER].tolist())
    pred = abs(last["first_layer_sum"] - vfirst - 0.2 * 2 * math.pi) / (0.2 * 2 * math.pi)
    ok = (sph.fit.slope >= 1.8 and 0.8 <= ball.fit.slope <= 1.5 and m_first <= 0.02 and pred <= 0.02)
    record_criterion(5, "global rates", ok, f"sphere slope={sph.fit.slope:.3f} ball slope={ball.fit.slope:.3f} "
                                            f"first-layer rel={pred:.2e}")
    assert ok


def test_criterion_06_quasi_additivity(record_criterion):
    r = experiments.quasi_additivity(h=0.01, r_list=(4, 8, 16, 32))
    c = max(r.controls.values())
    ok = r.fit.slope >= 0.8 and c <= 1e-12
    record_criterion(6, "quasi-additivity defect", ok, f"slope={r.fit.slope:.3f} controls={c:.1e}")
    assert ok


def test_criterion_07_scan_indifference(record_criterion):
    r = experiments.scan_indifference(G.euclidean_ball(2), HS, n_pairs=10, seed=0)
    ok = all(row["pairs"] >= 10 for row in r.rows) and r.ratio < 3 and r.static_max <= 1e-12
    record_criterion(7, "scan-order indifference", ok, f"ratio={r.ratio:.2f} static={r.static_max:.1e}")
    assert ok


def test_criterion_08_boundary_layers(record_criterion):
    r = experiments.boundary_layer_sums(h=0.05, eps_list=(0.2, 0.3, 0.4, 0.5), h_list=(0.1, 0.05, 0.025))
    ok = 0.8 <= r.fit.slope <= 1.2 and r.c_ratio <= 2
    record_criterion(8, "boundary-layer sum", ok, f"slope={r.fit.slope:.3f} C ratio={r.c_ratio:.2f}")
    assert ok


def test_criterion_09_flat_reference_uniqueness(record_criterion):
    r = experiments.flat_ref_uniqueness(hs=HS)
    ok = r.fit.slope > 2
    record_criterion(9, "flat reference quasi-uniqueness", ok, f"gap slope={r.fit.slope:.3f}")
    assert ok


@pytest.mark.slow
def test_criterion_10_smoothing_stability(record_criterion):
    r = experiments.smoothing_stability(n=1280, eps_factors=(0.2, 0.1, 0.05, 0.025))
    R = [row["R_l1"] for row in r["rows"]]
    dec = all(b < a for a, b in zip(R, R[1:]))
    frac = R[-1] / r["R_norm"]
    flat = max(r["flat_controls"].values())
    K = max(row["K_l1"] for row in r["rows"])
    ok = r["c1_fit"].slope >= 0.9 and dec and frac <= 0.05 and flat <= 1e-10
    record_criterion(10, "smoothing stability", ok, f"C1 slope={r['c1_fit'].slope:.3f} R final={frac:.2%} "
                                                    f"flat={flat:.1e} K_L1 max={K:.1e}")
    assert ok


def test_criterion_11_scaling(record_criterion):
    reps = [experiments.scaling_test(g, h=h) for g, h in ((G.round_sphere(2), 0.1), (G.euclidean_ball(2), 0.1),
                                                         (G.round_sphere(3), 0.2), (G.euclidean_ball(3), 0.2))]
    vol = max(row["volume_rel_error"] for r in reps for row in r.rows)
    oth = max(max(row["curvature_rel_error"], row["boundary_rel_error"]) for r in reps for row in r.rows)
    ok = all(r.passed for r in reps) and vol <= 1e-10 and oth <= 0.01
    record_criterion(11, "scaling", ok, f"volume rel={vol:.1e} curvature/boundary rel={oth:.1e}")
    assert ok


@pytest.mark.slow
def test_criterion_12_protocol_end_to_end(tmp_path, record_criterion, capsys):
    times = []
    for tag in ("a", "b"):
        t0 = time.perf_counter()
        code = main(["protocol", "--seed", "11", "--out", str(tmp_path / tag)])
        times.append(time.perf_counter() - t0)
        assert code == 0
    t0 = time.perf_counter()
    code3 = main(["protocol", "--dim", "3", "--seed", "11", "--out", str(tmp_path / "d3")])
    t3 = time.perf_counter() - t0
    capsys.readouterr()
    csvs = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", csvs, shallow=False)
    ok = max(times) < 300 and code3 == 0 and t3 < 900 and not mismatch and not errors and len(match) == len(csvs)
    record_criterion(12, "protocol end to end", ok, f"d=2 {max(times):.0f}s, d=3 {t3:.0f}s, "
                                                    f"{len(match)}/{len(csvs)} CSVs byte-identical")
    assert ok
