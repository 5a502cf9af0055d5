"""Experiment drivers: phase classification and sweeps, twin-separation
profiles, the twin hue grid and tornado-plot data.

These return plain records; CSV writing lives in :mod:`imspe_lab.cli`.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import DegenerateDesignError, IllConditionedError, ImspeLabError, UnsupportedDesignError
from .highprec import DEFAULT_CONTEXT, BigReal, PrecisionContext
from .imspe import gap_value, imspe
from .kernel import CovarianceParams, Design
from .search import SearchConfig, _default_jobs, _ordered_map, multistart

CLASSIFY_TOL = 1e-5
TWIN_THRESHOLD = 1e-3


class PhaseLabel(enum.Enum):
    FOUR_IN_LINE = "4-in-line"
    RHOMBOID_WITH_TWINS = "rhomboid-with-twins"
    RHOMBOID = "rhomboid"
    RECTANGLE = "rectangle"
    SQUARE = "square"
    UNCLASSIFIED = "unclassified"


# position of each phase between the 4-in-line end and the theta1 == theta2 square
PHASE_ORDER = {
    PhaseLabel.FOUR_IN_LINE: 0,
    PhaseLabel.RHOMBOID_WITH_TWINS: 1,
    PhaseLabel.RHOMBOID: 2,
    PhaseLabel.RECTANGLE: 3,
    PhaseLabel.SQUARE: 4,
}


@dataclass
class PhaseRecord:
    theta: tuple
    design: Optional[Design]
    imspe: Optional[BigReal]
    label: PhaseLabel
    status: str = "ok"


@dataclass(frozen=True)
class ProfilePoint:
    delta: float
    axis: int
    imspe: BigReal


# ---------------------------------------------------------------------------
# classification


def _on_axis_pair(p, q, tol):
    """p, q symmetric about the origin and both on one coordinate axis.
    Returns the axis index the pair lies along (0 or 1) or None."""
    if np.max(np.abs(p + q)) > tol:
        return None
    if abs(p[1]) <= tol and abs(q[1]) <= tol:
        return 0
    if abs(p[0]) <= tol and abs(q[0]) <= tol:
        return 1
    return None


def _grid_half_widths(P, tol):
    """Half side lengths (a, b) if P is a centred axis-oriented rectangle."""
    halves = []
    for k in (0, 1):
        order = np.argsort(P[:, k], kind="stable")
        lo, hi = P[order[:2], k], P[order[2:], k]
        if abs(lo[0] - lo[1]) > tol or abs(hi[0] - hi[1]) > tol:
            return None
        if abs(lo.mean() + hi.mean()) > tol:
            return None
        half = (hi.mean() - lo.mean()) / 2
        if half <= tol:
            return None
        halves.append(half)
    # each column pair must hold one low and one high ordinate
    order = np.argsort(P[:, 0], kind="stable")
    for pair in (order[:2], order[2:]):
        if np.sign(P[pair[0], 1]) == np.sign(P[pair[1], 1]):
            return None
    return halves


def classify(design: Design, tol: float = CLASSIFY_TOL,
             twin_threshold: float = TWIN_THRESHOLD) -> PhaseLabel:
    """Geometric phase of a four-point, two-factor design.

    Checks run in a fixed order (twins, 4-in-line, square/rectangle,
    rhomboid), which makes the labels mutually exclusive.
    """
    if design.N != 4 or design.D != 2:
        raise UnsupportedDesignError(f"classify needs N=4, D=2 (got N={design.N}, D={design.D})")
    P = np.asarray(design.points, dtype=float)

    pairs = sorted((float(np.max(np.abs(P[i] - P[j]))), i, j)
                   for i, j in itertools.combinations(range(4), 2))
    sep, i, j = pairs[0]
    if sep < twin_threshold:
        others = [r for r in range(4) if r not in (i, j)]
        bary = (P[i] + P[j]) / 2
        if np.max(np.abs(bary)) <= tol and _on_axis_pair(P[others[0]], P[others[1]], tol) is not None:
            return PhaseLabel.RHOMBOID_WITH_TWINS
        return PhaseLabel.UNCLASSIFIED

    spread = np.ptp(P, axis=0)
    if spread[0] <= tol or spread[1] <= tol:
        return PhaseLabel.FOUR_IN_LINE

    halves = _grid_half_widths(P, tol)
    if halves is not None:
        return PhaseLabel.SQUARE if abs(halves[0] - halves[1]) <= tol else PhaseLabel.RECTANGLE

    for a, b in ((0, 1), (0, 2), (0, 3)):
        rest = [r for r in range(4) if r not in (a, b)]
        ax1 = _on_axis_pair(P[a], P[b], tol)
        ax2 = _on_axis_pair(P[rest[0]], P[rest[1]], tol)
        if ax1 is not None and ax2 is not None and ax1 != ax2:
            d1 = float(np.max(np.abs(P[a])))
            d2 = float(np.max(np.abs(P[rest[0]])))
            if abs(d1 - d2) > tol:
                return PhaseLabel.RHOMBOID
    return PhaseLabel.UNCLASSIFIED


# ---------------------------------------------------------------------------
# phase sweep


def _sweep_point(args):
    theta, sigma_z2, n_starts, n_points, cfg, ctx, tol, twin_threshold = args
    params = CovarianceParams(theta, sigma_z2)
    try:
        best = multistart(n_starts, params, cfg, ctx, n_points=n_points, jobs=1)
    except ImspeLabError as exc:
        return PhaseRecord(tuple(theta), None, None, PhaseLabel.UNCLASSIFIED, f"error:{exc}")
    try:
        label = classify(best.design, tol, twin_threshold)
    except UnsupportedDesignError:
        label = PhaseLabel.UNCLASSIFIED
    status = "ok" if best.converged else "not_converged"
    return PhaseRecord(tuple(theta), best.design, best.imspe, label, status)


def phase_sweep(theta_grid: Sequence, params_base: CovarianceParams = None,
                cfg: SearchConfig = SearchConfig(), ctx: PrecisionContext = DEFAULT_CONTEXT, *,
                n_starts: int = 8, n_points: int = 4, tol: float = CLASSIFY_TOL,
                twin_threshold: float = TWIN_THRESHOLD, jobs: Optional[int] = None) -> list:
    """Multistart optimum and phase label at every theta pair, in grid order."""
    grid = [tuple(float(t) for t in th) for th in theta_grid]
    if not grid:
        raise ValueError("theta grid is empty")
    sigma_z2 = params_base.sigma_z2 if params_base is not None else 1.0
    items = [(th, sigma_z2, n_starts, n_points, cfg, ctx, tol, twin_threshold) for th in grid]
    return _ordered_map(_sweep_point, items, _default_jobs(jobs))


def phase_boundaries(records: Sequence[PhaseRecord]) -> list:
    """(theta1, theta2_boundary, label_below, label_above) for each label
    change along constant-theta1 lines; boundary is the grid midpoint."""
    out = []
    lines = {}
    for r in records:
        lines.setdefault(r.theta[0], []).append(r)
    for t1 in sorted(lines):
        line = sorted(lines[t1], key=lambda r: r.theta[1])
        for lo, hi in zip(line, line[1:]):
            if lo.label != hi.label:
                out.append((t1, (lo.theta[1] + hi.theta[1]) / 2, lo.label, hi.label))
    return out


def labels_monotone(records: Sequence[PhaseRecord]) -> bool:
    """True when, along each constant-theta1 line, phases step towards the
    square as theta2 approaches theta1 from either side.

    Monotone rank on each side means every phase occupies one contiguous
    run there, so no label comes back after being left. Any label outside
    the named sequence fails the check.
    """
    lines = {}
    for r in records:
        lines.setdefault(r.theta[0], []).append(r)
    for t1, line in lines.items():
        line = sorted(line, key=lambda r: r.theta[1])
        if any(r.label not in PHASE_ORDER for r in line):
            return False
        below = [PHASE_ORDER[r.label] for r in line if r.theta[1] <= t1]
        above = [PHASE_ORDER[r.label] for r in line if r.theta[1] >= t1]
        if any(b < a for a, b in zip(below, below[1:])):
            return False
        if any(b > a for a, b in zip(above, above[1:])):
            return False
    return True


def rectangle_widths(records: Sequence[PhaseRecord]) -> list:
    """Width in log10(theta2) of the rectangle phase on each constant-theta1
    line, with the mean log10 IMSPE of those rectangle designs.

    Reported for comparing widths at different IMSPE levels; nothing is
    asserted about the trend.
    """
    out = []
    lines = {}
    for r in records:
        lines.setdefault(r.theta[0], []).append(r)
    for t1 in sorted(lines):
        rect = [r for r in lines[t1] if r.label is PhaseLabel.RECTANGLE and r.imspe is not None]
        if not rect:
            out.append((t1, None, 0.0))
            continue
        t2 = [math.log10(r.theta[1]) for r in rect]
        level = float(np.mean([math.log10(float(r.imspe)) for r in rect]))
        out.append((t1, level, max(t2) - min(t2)))
    return out


# ---------------------------------------------------------------------------
# twin profiles


def _with_delta(base: Design, delta) -> Design:
    if base.twin is None:
        raise ValueError("base design needs a twin pair")
    return Design.with_twins(base.free_points(), base.twin.barycenter, delta)


def _axis_vector(D: int, axis: int, size: float) -> list:
    if not 1 <= axis <= D:
        raise ValueError(f"axis must be in 1..{D}")
    v = [0.0] * D
    v[axis - 1] = float(size)
    return v


def twin_profile(base: Design, params: CovarianceParams, axis: int, deltas: Sequence[float],
                 ctx: PrecisionContext = DEFAULT_CONTEXT) -> list:
    """IMSPE as the twin half-separation runs over ``deltas`` along ``axis``
    (1-based), barycenter and other points held fixed."""
    deltas = [float(d) for d in deltas]
    if any(d <= 0 for d in deltas):
        raise ValueError("deltas must be positive")
    if deltas != sorted(deltas):
        raise ValueError("deltas must be sorted ascending")
    out = []
    for d in deltas:
        design = _with_delta(base, _axis_vector(base.D, axis, d))
        out.append(ProfilePoint(d, axis, imspe(design, params, ctx).imspe))
    return out


def richardson_limit(deltas: Sequence[float], values: Sequence) -> BigReal:
    """Zero-separation limit of f(delta) = L + c delta^2 + e delta^4 through
    three samples."""
    if len(deltas) != 3 or len(values) != 3:
        raise ValueError("need exactly three samples")
    prec = max(v.precision if isinstance(v, BigReal) else 53 for v in values)
    with gmpy2.context(precision=max(prec, 64)):
        h = [mpfr(d) ** 2 for d in deltas]
        f = [mpfr(v) for v in values]
        # Neville extrapolation to h = 0 of the quadratic in h
        p01 = (f[0] * h[1] - f[1] * h[0]) / (h[1] - h[0])
        p12 = (f[1] * h[2] - f[2] * h[1]) / (h[2] - h[1])
        return (p01 * h[2] - p12 * h[0]) / (h[2] - h[0])


def loglog_slope(deltas: Sequence[float], values: Sequence, limit) -> float:
    """Least-squares slope of log|f - limit| against log delta."""
    x = np.log([float(d) for d in deltas])
    y = []
    for v in values:
        with gmpy2.context(precision=max(getattr(v, "precision", 53), 64)):
            y.append(float(gmpy2.log(abs(mpfr(v) - mpfr(limit)))))
    return float(np.polyfit(x, np.array(y), 1)[0])


def quadratic_coefficient(deltas: Sequence[float], values: Sequence) -> float:
    """Coefficient c of delta^2 in a least-squares fit f = L + c delta^2 + e delta^4."""
    ref = values[0]
    d = np.array([float(v) for v in deltas])
    y = []
    for v in values:
        with gmpy2.context(precision=max(getattr(v, "precision", 53), 64)):
            y.append(float(mpfr(v) - mpfr(ref)))
    A = np.column_stack([d ** 2 - d[0] ** 2, d ** 4 - d[0] ** 4])
    coef, *_ = np.linalg.lstsq(A, np.array(y), rcond=None)
    return float(coef[0])


# ---------------------------------------------------------------------------
# hue grid and tornado data


@dataclass(frozen=True)
class HueNode:
    u: float
    v: float
    gap: float
    status: str = "ok"


def _normalized_delta(delta):
    nz = [x for x in delta if x != 0.0]
    if nz and nz[0] < 0:
        return [-x + 0.0 for x in delta]
    return [x + 0.0 for x in delta]


def _hue_node(args):
    base, params, u, v, reference, ctx = args
    bt = base.twin.barycenter
    delta = [u - bt[0], v - bt[1]]
    try:
        if delta == [0.0, 0.0]:
            # the origin is multivalued; take the lowest directional value
            size = math.hypot(*base.twin.delta) or 1e-6
            values = [imspe(_with_delta(base, _axis_vector(2, ax, size)), params, ctx).imspe
                      for ax in (1, 2)]
            value = min(values)
        else:
            value = imspe(_with_delta(base, _normalized_delta(delta)), params, ctx).imspe
    except (IllConditionedError, DegenerateDesignError, ValueError) as exc:
        return HueNode(u, v, math.nan, f"error:{type(exc).__name__}")
    return HueNode(u, v, float(gap_value(value, reference)))


def hue_grid(base: Design, params: CovarianceParams, grid_n: int, reference_imspe,
             ctx: PrecisionContext = DEFAULT_CONTEXT, *, jobs: Optional[int] = None) -> list:
    """Shifted log gap over [-1, 1]^2 as one twin moves and the other mirrors
    it through the fixed barycenter.

    Nodes are returned row-major (v outer, u inner). Failed nodes carry NaN
    and a non-"ok" status.
    """
    if base.twin is None or base.D != 2:
        raise ValueError("hue grid needs a two-factor base design with a twin pair")
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    axis = np.linspace(-1.0, 1.0, grid_n).tolist()
    items = [(base, params, u, v, reference_imspe, ctx) for v in axis for u in axis]
    return _ordered_map(_hue_node, items, _default_jobs(jobs))


def tornado_data(report, reference_imspe) -> list:
    """(d, log10(IMSPE - reference)) per baseline sample, where d is the
    largest half-distance in x1 between two points of the sample."""
    out = []
    for rec in report.records:
        if rec.status != "ok":
            continue
        x1 = rec.design.points[:, 0]
        d = float((x1.max() - x1.min()) / 2)
        with gmpy2.context(precision=max(rec.imspe.precision, 64)):
            diff = rec.imspe - mpfr(reference_imspe)
            if diff > 0:
                gap = float(gmpy2.log10(diff))
            elif diff == 0:
                gap = -math.inf
            else:
                gap = math.nan
        out.append((d, gap))
    return out
