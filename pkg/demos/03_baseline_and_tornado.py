"""Random designs never beat the twin optimum.

Draws uniform random four-point designs, compares each with the optimum, and
shows how the gap narrows as the x1 half-spread approaches 0.767.

Run: python3 demos/03_baseline_and_tornado.py [n_samples]
"""
import sys

import numpy as np

from imspe_lab import CovarianceParams, Design, PrecisionContext, imspe, random_baseline, tornado_data

n_samples = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
ctx = PrecisionContext(60)
params = CovarianceParams((0.128, 0.00016))
ref = imspe(Design.with_twins([[-0.767117, 0.0], [0.767117, 0.0]], (0.0, 0.0), (0.0, 1e-6)), params, ctx).imspe

rep = random_baseline(n_samples, params, ref, seed=11, ctx=ctx)
print(f"{rep.evaluated} designs, {rep.count_below} below the optimum, min gap {float(rep.min_gap):.3e}")

# %% histogram of log10 gap
for lo, count in zip(rep.hist_edges[:-1], rep.hist_counts):
    if count:
        print(f"[{lo:5.1f}, {lo + 0.5:5.1f})  {'#' * max(1, int(60 * count / rep.evaluated))} {count}")

# %% tornado: best gap per bin of d = half the x1 spread
pairs = np.array(tornado_data(rep, ref))
bins = np.linspace(0, 1, 11)
idx = np.digitize(pairs[:, 0], bins) - 1
for b in range(10):
    sel = pairs[idx == b, 1]
    if sel.size:
        print(f"d in [{bins[b]:.1f}, {bins[b + 1]:.1f}): n={sel.size:4d}  min log10 gap {sel.min():6.2f}")
