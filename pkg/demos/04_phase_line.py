"""Optimal four-point geometry along theta1 = 0.128 as theta2 varies.

Between the rhomboid and rectangle regimes the search finds a centred
parallelogram, which none of the named shapes describe; the second part
compares it with the best rhomboid and rectangle at theta2 = 0.07.

Run: python3 demos/04_phase_line.py [n_starts]   (minutes per grid point)
"""
import sys

import numpy as np

from imspe_lab import CovarianceParams, Design, PrecisionContext, SearchConfig, classify, imspe, phase_sweep
from imspe_lab.studies import phase_boundaries

n_starts = int(sys.argv[1]) if len(sys.argv) > 1 else 3
ctx = PrecisionContext(60)

# %% sweep
grid = [(0.128, float(t)) for t in np.logspace(-5, 0, 11)]
records = phase_sweep(grid, cfg=SearchConfig(rng_seed=1), n_starts=n_starts, ctx=ctx)
for r in records:
    print(f"theta2 {r.theta[1]:.2e}  {r.label.value:20s}  IMSPE {float(r.imspe):.6e}  {r.status}")
for t1, t2, a, b in phase_boundaries(records):
    print(f"boundary near theta2 = {t2:.2e}: {a.value} -> {b.value}")

# %% the parallelogram at theta2 = 0.07
p = CovarianceParams((0.128, 0.07))
shapes = {
    "parallelogram": [[0.8269, 0.5804], [-0.8269, -0.5804], [0.3937, -0.5518], [-0.3937, 0.5518]],
    "rhomboid": [[1.0, 0], [-1.0, 0], [0, 0.6295], [0, -0.6295]],
    "rectangle": [[0.5732, 0.5748], [-0.5732, 0.5748], [0.5732, -0.5748], [-0.5732, -0.5748]],
}
for name, pts in shapes.items():
    d = Design(np.array(pts))
    print(f"{name:14s} IMSPE {float(imspe(d, p, ctx).imspe):.6e}  label {classify(d).value}")
