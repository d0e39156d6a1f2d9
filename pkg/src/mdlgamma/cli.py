"""Command line interface.

Exit codes: 0 when every graded check passes, 1 when a check fails and 2 for
usage, configuration or input errors.  Outputs go to --out, else
$MDLGAMMA_OUT, else ./mdlgamma_out.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from . import __version__, report
from .analysis import calibration, experiments
from .analysis.protocol import run_protocol, windows_from_config
from .config import RunConfig
from .errors import MdlGammaError
from .geometry import euclidean_ball, flat_torus, round_sphere
from .mdl import Loss
from .windows import verify_window_class

log = logging.getLogger("mdlgamma")

GEOMS = {"torus": flat_torus, "sphere": round_sphere, "ball": euclidean_ball}


def _floats(s):
    try:
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _ints(s):
    try:
        return tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig.for_dim(args.dim)
    for key in ("seed", "loss", "rho0", "c_star", "interior", "boundary"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "h", None):
        cfg.h = args.h
    return cfg.validate()


def _print_checks(checks):
    ok = True
    for name, value, thr, good in checks:
        print(f"{'PASS' if good else 'FAIL'}  {name:<32s} {value:.6g}  ({thr})")
        ok &= bool(good)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify_windows(args):
    cfg = _config(args)
    win = windows_from_config(cfg)
    chk = verify_window_class(win)
    out = report.output_dir(args.out)
    report.write_bundle(out, "windows", {"rows": chk.rows, "passed": chk.passed}, {"windows": chk.rows})
    for r in chk.rows:
        print(f"{'ok  ' if r['ok'] else 'FAIL'}  {r['name']:<28s} {r['value']:.12g}")
    print(f"mu2 = {win.mu2:.15g}  mu1 = {win.mu1:.15g}")
    return 0 if chk.passed else 1


def cmd_calibrate(args):
    cfg = _config(args)
    cal = calibration.calibrate(windows=windows_from_config(cfg), loss=Loss(cfg.loss), rho0=cfg.rho0,
                                hs=cfg.h, dim=cfg.dim)
    rows = [{"h": h, "alpha0": a, "alpha1": b, "beta1": c}
            for h, a, b, c in zip(cal.h, cal.alpha0, cal.alpha1, cal.beta1)]
    report.write_bundle(report.output_dir(args.out), "calibration", cal.to_dict(), {"calibration": rows})
    rel = cal.rel_errors()
    a0 = max(abs(a - cfg.rho0) for a in cal.alpha0)
    for k, v in zip(("alpha0", "alpha1", "beta1"), cal.constants):
        print(f"{k} = {v:.12g}   predicted {cal.predicted[k]:.12g}")
    return _print_checks([("alpha0", a0, "<= 1e-10", a0 <= 1e-10),
                          ("alpha1_rel", rel["alpha1"], "<= 0.02", rel["alpha1"] <= 0.02),
                          ("beta1_rel", rel["beta1"], "<= 0.02", rel["beta1"] <= 0.02)])


def cmd_rates(args):
    cfg = _config(args)
    win = windows_from_config(cfg)
    loss = Loss(cfg.loss)
    if args.calibrated:
        consts = calibration.calibrate(windows=win, loss=loss, rho0=cfg.rho0, hs=cfg.h, dim=cfg.dim).constants
    else:
        consts = (cfg.rho0, win.mu2 / 6.0, win.mu1)
    geom = GEOMS[args.geometry](cfg.dim)
    r = calibration.rates(geom, consts, cfg.h, win, loss, cfg.rho0)
    report.write_bundle(report.output_dir(args.out), f"rates_{args.geometry}", r.to_dict(),
                        {f"rates_{args.geometry}": r.rows}, {f"rates_{args.geometry}": r.fit})
    for row in r.rows:
        print(f"h = {row['h']:<8g} F_n = {row['F_n']:.12g}  |F_n - F| = {row['error']:.4e}")
    if args.geometry == "torus":
        e = max(row["error"] for row in r.rows)
        return _print_checks([("torus_error", e, "<= 1e-10", e <= 1e-10)])
    s = r.fit.slope
    if args.geometry == "sphere":
        return _print_checks([("slope", s, ">= 1.8", s >= 1.8)])
    fe = r.extras["first_layer_rel_error"]
    return _print_checks([("slope", s, "in [0.8, 1.5]", 0.8 <= s <= 1.5),
                          ("first_layer_rel", fe, "<= 0.02", fe <= 0.02)])


def cmd_scan_test(args):
    cfg = _config(args)
    geom = GEOMS[args.geometry](cfg.dim)
    r = experiments.scan_indifference(geom, cfg.h, args.pairs, cfg.seed, windows_from_config(cfg),
                                      Loss(cfg.loss), cfg.rho0)
    report.write_bundle(report.output_dir(args.out), "scan", r.to_dict(), {"scan": r.rows})
    for row in r.rows:
        print(f"h = {row['h']:<8g} max|F_s - F_t| = {row['adaptive_max']:.4e}  normalised {row['normalised']:.4e}")
    return _print_checks([("normalised_ratio", r.ratio, "< 3", r.ratio < 3),
                          ("static", r.static_max, "<= 1e-12", r.static_max <= 1e-12)])


def cmd_quasi_add(args):
    cfg = _config(args)
    r = experiments.quasi_additivity(args.mesh_h, args.r, windows=windows_from_config(cfg), loss=Loss(cfg.loss))
    report.write_bundle(report.output_dir(args.out), "locality", r.to_dict(), {"locality": r.rows},
                        {"locality": r.fit})
    for row in r.rows:
        print(f"delta = {row['delta']:<8g} defect = {row['defect']:.4e}  / Per = {row['normalised']:.4e}")
    c = max(r.controls.values())
    return _print_checks([("slope", r.fit.slope, ">= 0.8", r.fit.slope >= 0.8),
                          ("controls", c, "<= 1e-12", c <= 1e-12)])


def cmd_smooth_test(args):
    from .smoothing import read_grid, sample_perturbed, write_grid
    geom = experiments.smoothing_geometry()
    if args.save_grid:
        write_grid(args.save_grid, sample_perturbed(geom, args.n))
        print(f"wrote {args.save_grid}")
    metric = read_grid(args.grid) if args.grid else None
    r = experiments.smoothing_stability(geom, n=args.n, eps_factors=args.eps, metric=metric)
    rows = r["rows"]
    report.write_bundle(report.output_dir(args.out), "smoothing", r | {"c1_fit": r["c1_fit"].to_dict()},
                        {"smoothing": rows}, {"smoothing_c1": r["c1_fit"]})
    for row in rows:
        print(f"eps = {row['eps']:<8g} C1 = {row['c1']:.4e}  R_L1 = {row['R_l1']:.4e}  K_L1 = {row['K_l1']:.2e}")
    R = [row["R_l1"] for row in rows]
    dec = all(b < a for a, b in zip(R, R[1:]))
    frac = R[-1] / r["R_norm"]
    flat = max(r["flat_controls"].values())
    return _print_checks([("c1_slope", r["c1_fit"].slope, ">= 0.9", r["c1_fit"].slope >= 0.9),
                          ("R_decreasing", float(dec), "strictly decreasing", dec),
                          ("R_final_fraction", frac, "<= 0.05", frac <= 0.05),
                          ("flat_controls", flat, "<= 1e-10", flat <= 1e-10)])


def cmd_scaling_test(args):
    cfg = _config(args)
    geom = GEOMS[args.geometry](cfg.dim)
    r = experiments.scaling_test(geom, args.sigma, args.mesh_h, windows_from_config(cfg), Loss(cfg.loss))
    report.write_bundle(report.output_dir(args.out), "scaling", r.to_dict(), {"scaling": r.rows})
    for row in r.rows:
        print(f"sigma = {row['sigma']:<6g} vol {row['volume_rel_error']:.2e}  "
              f"curv {row['curvature_rel_error']:.2e}  bnd {row['boundary_rel_error']:.2e}")
    return 0 if r.passed else 1


def cmd_protocol(args):
    cfg = _config(args)
    if args.sections:
        cfg.sections = tuple(s.strip() for s in args.sections.split(",") if s.strip())
        cfg.validate()
    t0 = time.perf_counter()
    rep = run_protocol(cfg)
    out = report.output_dir(args.out)
    report.write_bundle(out, "protocol", rep.to_dict(), rep.tables, rep.fits)
    doc = {"data": rep.to_dict()}
    for line in report.summary_lines(doc):
        print(line)
    print(f"{'PASSED' if rep.passed else 'FAILED'} in {time.perf_counter() - t0:.1f} s; outputs in {out}")
    return 0 if rep.passed else 1


def cmd_report(args):
    doc = report.read_json(args.input)
    if doc.get("kind") != "protocol":
        print(f"{args.input} holds a {doc.get('kind')!r} report; expected 'protocol'", file=sys.stderr)
        return 2
    for line in report.summary_lines(doc):
        print(line)
    report.svgs_from_report(doc, report.output_dir(args.out))
    return 0 if doc["data"].get("passed") else 1


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="mdlgamma", description="Cell-wise description-length functionals on meshes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, hs=True):
        sp.add_argument("--out", help="output directory (default $MDLGAMMA_OUT or ./mdlgamma_out)")
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--dim", type=int, default=2, choices=(2, 3))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--loss", choices=("neglog", "quadratic"))
        sp.add_argument("--rho0", type=float)
        sp.add_argument("--c-star", dest="c_star", type=float)
        sp.add_argument("--interior", help="interior radial profile")
        sp.add_argument("--boundary", help="boundary normal profile")
        if hs:
            sp.add_argument("--h", type=_floats, help="comma-separated meshsizes")

    sp = sub.add_parser("verify-windows", help="check window normalisation and moments")
    common(sp, hs=False)
    sp.set_defaults(func=cmd_verify_windows)

    sp = sub.add_parser("calibrate", help="estimate alpha0, alpha1, beta1")
    common(sp)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("rates", help="global convergence rate on one geometry")
    common(sp)
    sp.add_argument("--geometry", choices=tuple(GEOMS), default="sphere")
    sp.add_argument("--calibrated", action="store_true", help="use calibrated instead of predicted constants")
    sp.set_defaults(func=cmd_rates)

    sp = sub.add_parser("scan-test", help="scan-order indifference")
    common(sp)
    sp.add_argument("--geometry", choices=("ball", "torus", "sphere"), default="ball")
    sp.add_argument("--pairs", type=int, default=10)
    sp.set_defaults(func=cmd_scan_test)

    sp = sub.add_parser("quasi-add", help="locality defect against the mesoscale")
    common(sp, hs=False)
    sp.add_argument("--mesh-h", type=float, default=0.01)
    sp.add_argument("--r", type=_ints, default=(4, 8, 16, 32), help="comma-separated r_n values")
    sp.set_defaults(func=cmd_quasi_add)

    sp = sub.add_parser("smooth-test", help="mollifier stability on a sampled strip metric")
    sp.add_argument("--out")
    sp.add_argument("--n", type=int, default=1280)
    sp.add_argument("--eps", type=_floats, default=(0.2, 0.1, 0.05, 0.025),
                    help="radii as multiples of the bump radius")
    sp.add_argument("--grid", help="binary grid file holding a sample of the reference strip metric")
    sp.add_argument("--save-grid", help="write the sampled metric to this binary grid file")
    sp.set_defaults(func=cmd_smooth_test)

    sp = sub.add_parser("scaling-test", help="rescaling invariance of the three components")
    common(sp, hs=False)
    sp.add_argument("--geometry", choices=tuple(GEOMS), default="sphere")
    sp.add_argument("--sigma", type=_floats, default=(0.5, 2.0, 4.0))
    sp.add_argument("--mesh-h", type=float, default=0.1)
    sp.set_defaults(func=cmd_scaling_test)

    sp = sub.add_parser("protocol", help="run the full validation protocol")
    common(sp)
    sp.add_argument("--sections", help="comma-separated subset of sections")
    sp.set_defaults(func=cmd_protocol)

    sp = sub.add_parser("report", help="summarise a protocol JSON report and redraw its plots")
    sp.add_argument("input")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MdlGammaError, OSError, ValueError) as exc:
        print(f"mdlgamma: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
