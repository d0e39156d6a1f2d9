"""Mollify a sampled bumpy metric and watch the curvature error shrink.

    python3 demos/smoothing_demo.py [n]
"""

import sys

from mdlgamma.analysis.experiments import smoothing_geometry, smoothing_stability

n = int(sys.argv[1]) if len(sys.argv) > 1 else 640
res = smoothing_stability(smoothing_geometry(), n=n, eps_factors=(0.2, 0.1, 0.05))
print(f"grid {n}x{n}, ||R||_L1 = {res['R_norm']:.4f}")
print(f"{'eps':>8s} {'C0':>10s} {'C1':>10s} {'R L1':>10s} {'K L1':>10s}")
for r in res["rows"]:
    print(f"{r['eps']:8.4f} {r['c0']:10.3e} {r['c1']:10.3e} {r['R_l1']:10.3e} {r['K_l1']:10.3e}")
print(f"C1 slope {res['c1_fit'].slope:.3f}")
