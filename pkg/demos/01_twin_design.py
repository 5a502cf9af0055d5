"""Evaluate the four-point twin design at theta = (0.128, 0.00016) and let
coordinate descent polish it.

Run: python3 demos/01_twin_design.py
"""
import numpy as np

from imspe_lab import CovarianceParams, Design, PrecisionContext, ccd_minimize, classify, imspe
from imspe_lab.highprec import to_text

ctx = PrecisionContext(60)
params = CovarianceParams((0.128, 0.00016))

# %% the six-digit listing: two outer points on x1, a twin pair at the origin along x2
design = Design.with_twins([[-0.767117, 0.0], [0.767117, 0.0]], (0.0, 0.0), (0.0, 1e-6))
res = imspe(design, params, ctx)
print("IMSPE      ", to_text(res.imspe, 25))
print("digits used", res.digits_used, "| digits lost", round(res.digits_lost, 1))
print("label      ", classify(design).value)

# %% a twin pair is not a duplicate point: merging it loses most of the benefit
merged = Design(np.array([[-0.767117, 0.0], [0.767117, 0.0], [0.0, 0.0]]))
print("three points only:", to_text(imspe(merged, params, ctx).imspe, 10))

# %% descent from the listing moves the outer points by about 1e-6
polished = ccd_minimize(design, params, ctx=ctx)
print("sweeps", polished.sweeps, "converged", polished.converged)
print("outer x1 ", polished.design.free_points()[:, 0])
print("IMSPE    ", to_text(polished.imspe, 25))
