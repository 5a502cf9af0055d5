"""IMSPE as the twin pair opens up along each axis.

Along x2 the value rises like delta^2 from its limit (a minimum); along x1 it
falls (a maximum), and the two limits differ, so the objective has no single
value at zero separation.

Run: python3 demos/02_twin_profiles.py
"""
import numpy as np

from imspe_lab import CovarianceParams, Design, PrecisionContext, hue_grid, imspe, twin_profile
from imspe_lab.studies import loglog_slope, quadratic_coefficient, richardson_limit

ctx = PrecisionContext(60)
params = CovarianceParams((0.128, 0.00016))
base = Design.with_twins([[-0.767117, 0.0], [0.767117, 0.0]], (0.0, 0.0), (0.0, 1e-6))
deltas = np.logspace(-4, -2, 9)

# %% profiles and their delta -> 0 limits
for axis in (1, 2):
    vals = [p.imspe for p in twin_profile(base, params, axis, deltas, ctx)]
    lim = richardson_limit(deltas[:3], vals[:3])
    line = f"axis {axis}: limit {float(lim):.10e}  quadratic coefficient {quadratic_coefficient(deltas, vals):+.3e}"
    if axis == 2:
        line += f"  log-log slope {loglog_slope(deltas, vals, lim):.4f}"
    print(line)

# %% log10 gap over twin positions (coarse grid; the center is the reference itself)
ref = imspe(base, params, ctx).imspe
n = 7
nodes = hue_grid(base, params, n, ref, ctx)
G = np.array([nd.gap for nd in nodes]).reshape(n, n)
np.set_printoptions(precision=2, suppress=True, linewidth=120)
print("log10 gap, rows v = -1..1, columns u = -1..1")
print(G)
