"""Cyclic coordinate descent for IMSPE-optimal designs, multistart, the
uniform-random baseline, and symmetry canonicalisation.

Coordinates are visited point-major. Each one gets a 1-D minimisation: a
uniform grid over its feasible interval (plus the current value) brackets
the best cell, then golden-section search shrinks the bracket to
``coord_tol``. A move is accepted only if it strictly lowers the IMSPE.

When two free points come within ``twin_merge_tol`` of each other in every
coordinate they are re-expressed as barycenter + half-offset, and the search
carries on over those coordinates so the pair can travel as a unit while the
offset keeps shrinking without catastrophic subtraction.

Small covariance parameters make some coordinates strongly coupled, and plain
cycling then crawls. With ``extrapolate`` on, each sweep ends with a
derivative-free line search along the sweep's net displacement.
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import DegenerateDesignError, IllConditionedError
from .highprec import DEFAULT_CONTEXT, BigReal, PrecisionContext
from .imspe import IncrementalEvaluator, gap_value, imspe
from .kernel import CovarianceParams, Design, TwinSpec

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_INF = mpfr("inf")

# RNG stream families: SeedSequence(seed, spawn_key=(family, index))
STREAM_MULTISTART = 0
STREAM_BASELINE = 1


@dataclass(frozen=True)
class SearchConfig:
    coord_tol: float = 1e-10
    obj_tol: float = 1e-20
    max_sweeps: int = 200
    line_search_grid: int = 33
    rng_seed: int = 0
    twin_merge_tol: float = 1e-3
    extrapolate: bool = True

    def __post_init__(self):
        if not self.coord_tol > 0 or not self.obj_tol > 0:
            raise ValueError("coord_tol and obj_tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.line_search_grid < 2:
            raise ValueError("line_search_grid must be >= 2")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ValueError("rng_seed must fit in 64 unsigned bits")


@dataclass
class SearchResult:
    design: Design
    imspe: BigReal
    sweeps: int
    converged: bool
    trace: list = field(default_factory=list)
    start_index: Optional[int] = None
    evaluations: int = 0


def rng_for(seed: int, family: int, index: int) -> np.random.Generator:
    """PCG64 substream ``index`` of stream ``family``; portable across
    platforms and independent of evaluation order."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(family, index))))


def random_design(n_points: int, dim: int, seed: int, index: int,
                  family: int = STREAM_MULTISTART) -> Design:
    rng = rng_for(seed, family, index)
    return Design(rng.uniform(-1.0, 1.0, size=(n_points, dim)))


# ---------------------------------------------------------------------------
# coordinate descent


def _coordinates(design: Design):
    """Point-major list of (kind, index, dim) scalar coordinates."""
    coords = []
    n_free = design.free_points().shape[0]
    for i in range(n_free):
        for k in range(design.D):
            coords.append(("row", i, k))
    if design.twin is not None:
        for k in range(design.D):
            coords.append(("bary", None, k))
        for k in range(design.D):
            coords.append(("delta", None, k))
    return coords


def _get(design: Design, coord) -> float:
    kind, i, k = coord
    if kind == "row":
        return float(design.points[i, k])
    if kind == "bary":
        return design.twin.barycenter[k]
    return design.twin.delta[k]


def _bounds(design: Design, coord) -> tuple[float, float]:
    kind, _, k = coord
    if kind == "row":
        return -1.0, 1.0
    if kind == "bary":
        r = 1.0 - abs(design.twin.delta[k])
    else:
        r = 1.0 - abs(design.twin.barycenter[k])
    return -r, r


def _moved(design: Design, coord, value: float) -> tuple[Design, dict]:
    kind, i, k = coord
    if kind == "row":
        pts = np.array(design.points)
        pts[i, k] = value
        return Design(pts, design.twin), {"row": i, "value": value}
    bt = list(design.twin.barycenter)
    dl = list(design.twin.delta)
    if kind == "bary":
        bt[k] = value
        change = {"bary": value}
    else:
        dl[k] = value
        change = {"delta": value}
    return Design(np.array(design.points), TwinSpec(bt, dl)), change


class _LineSearch:
    def __init__(self, evaluator: IncrementalEvaluator):
        self.ev = evaluator
        self.count = 0

    def f(self, coord, value: float):
        design = self.ev.design
        try:
            cand, change = _moved(design, coord, value)
            self.count += 1
            return self.ev.trial(cand, coord[2], **change).imspe
        except (DegenerateDesignError, IllConditionedError, ArithmeticError, ValueError):
            return _INF

    def minimize(self, coord, f_current, cfg: SearchConfig):
        """Return (best_value, best_f) for one coordinate."""
        x0 = _get(self.ev.design, coord)
        lo, hi = _bounds(self.ev.design, coord)
        nodes = sorted(set(np.linspace(lo, hi, cfg.line_search_grid).tolist()) | {x0})
        vals = []
        for x in nodes:
            vals.append(f_current if x == x0 else self.f(coord, x))
        b = min(range(len(nodes)), key=lambda j: (vals[j], j))
        best_x, best_f = nodes[b], vals[b]
        a = nodes[max(b - 1, 0)]
        c = nodes[min(b + 1, len(nodes) - 1)]
        x1 = c - _GOLDEN * (c - a)
        x2 = a + _GOLDEN * (c - a)
        f1 = self.f(coord, x1)
        f2 = self.f(coord, x2)
        while c - a > cfg.coord_tol:
            if f1 < f2:
                c, x2, f2 = x2, x1, f1
                x1 = c - _GOLDEN * (c - a)
                f1 = self.f(coord, x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + _GOLDEN * (c - a)
                f2 = self.f(coord, x2)
            for x, fx in ((x1, f1), (x2, f2)):
                if fx < best_f:
                    best_x, best_f = x, fx
        return best_x, best_f


def _merge_twins(design: Design, tol: float) -> Optional[Design]:
    """Re-express the closest pair within ``tol`` as a twin pair."""
    if design.twin is not None or design.N < 2:
        return None
    pts = design.points
    best = None
    for i, j in itertools.combinations(range(design.N), 2):
        sep = float(np.max(np.abs(pts[i] - pts[j])))
        if sep < tol and (best is None or sep < best[0]):
            best = (sep, i, j)
    if best is None:
        return None
    _, i, j = best
    others = [pts[r] for r in range(design.N) if r not in (i, j)]
    bary = (pts[i] + pts[j]) / 2.0
    delta = (pts[i] - pts[j]) / 2.0
    others = np.array(others).reshape(-1, design.D)
    return Design.with_twins(others, bary, delta)


def _as_vector(design: Design) -> np.ndarray:
    return np.array([_get(design, c) for c in _coordinates(design)])


def _from_vector(template: Design, z: np.ndarray) -> Design:
    D = template.D
    if template.twin is None:
        return Design(z.reshape(-1, D))
    nf = (template.N - 2) * D
    return Design.with_twins(z[:nf].reshape(-1, D), z[nf:nf + D], z[nf + D:])


def _extrapolate(template: Design, z0, direction, f0, params, cfg, ctx):
    """Line search along ``direction`` from ``z0``: geometric bracketing of
    the step, then golden section. Returns (design, f) or None."""

    def f(t):
        try:
            return imspe(_from_vector(template, z0 + t * direction), params, ctx).imspe
        except (DegenerateDesignError, IllConditionedError, ValueError):
            return _INF

    ts, fs = [0.0], [f0]
    t = 0.25
    while t < 1e8:
        ft = f(t)
        if ft == _INF:
            break
        ts.append(t)
        fs.append(ft)
        if len(fs) > 2 and fs[-1] > fs[-2]:
            break
        t *= 2.0
    b = min(range(len(ts)), key=lambda j: (fs[j], j))
    if b == 0:
        return None
    best_t, best_f = ts[b], fs[b]
    a, c = ts[b - 1], ts[min(b + 1, len(ts) - 1)]
    scale = float(np.max(np.abs(direction)))
    x1, x2 = c - _GOLDEN * (c - a), a + _GOLDEN * (c - a)
    f1, f2 = f(x1), f(x2)
    while (c - a) * scale > cfg.coord_tol:
        if f1 < f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - _GOLDEN * (c - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (c - a)
            f2 = f(x2)
        for x, fx in ((x1, f1), (x2, f2)):
            if fx < best_f:
                best_t, best_f = x, fx
    if not best_f < f0:
        return None
    return _from_vector(template, z0 + best_t * direction), best_f


def ccd_minimize(initial: Design, params: CovarianceParams,
                 cfg: SearchConfig = SearchConfig(),
                 ctx: PrecisionContext = DEFAULT_CONTEXT) -> SearchResult:
    """Cyclic coordinate descent from ``initial``.

    Stops when a full sweep moves no coordinate by ``coord_tol`` or more and
    improves the IMSPE by less than ``obj_tol``, or after ``max_sweeps``.
    """
    if initial.D != params.D:
        raise ValueError("design and theta dimensions differ")
    ev = IncrementalEvaluator(initial, params, ctx)
    f_cur = ev.current().imspe
    ls = _LineSearch(ev)
    trace = [(0, f_cur)]
    converged = False
    sweeps = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        sweeps = sweep
        f_start = f_cur
        z_start = _as_vector(ev.design)
        max_move = 0.0
        merged_now = False
        for coord in _coordinates(ev.design):
            x_old = _get(ev.design, coord)
            x_new, f_new = ls.minimize(coord, f_cur, cfg)
            if f_new < f_cur and x_new != x_old:
                cand, change = _moved(ev.design, coord, x_new)
                res = ev.trial(cand, coord[2], **change)
                ev.commit()
                f_cur = res.imspe
                max_move = max(max_move, abs(x_new - x_old))
            merged = _merge_twins(ev.design, cfg.twin_merge_tol)
            if merged is not None:
                try:
                    f_merged = imspe(merged, params, ctx).imspe
                except (IllConditionedError, DegenerateDesignError):
                    f_merged = _INF
                if f_merged <= f_cur:
                    ev.reset(merged)
                    f_cur = f_merged
                    max_move = max(max_move, cfg.coord_tol)
                    merged_now = True
                    break
        if cfg.extrapolate and not merged_now:
            z_end = _as_vector(ev.design)
            step = z_end - z_start
            if np.any(step != 0):
                jump = _extrapolate(ev.design, z_end, step, f_cur, params, cfg, ctx)
                if jump is not None:
                    ev.reset(jump[0])
                    f_cur = jump[1]
                    max_move = max(max_move, float(np.max(np.abs(_as_vector(jump[0]) - z_end))))
        trace.append((sweep, f_cur))
        if max_move < cfg.coord_tol and f_start - f_cur < cfg.obj_tol:
            converged = True
            break
    design = canonicalize(ev.design, params.theta)
    return SearchResult(design, f_cur, sweeps, converged, trace, evaluations=ls.count)


# ---------------------------------------------------------------------------
# multistart and baseline


def _default_jobs(jobs: Optional[int]) -> int:
    if jobs is None:
        jobs = int(os.environ.get("IMSPE_LAB_JOBS", "1"))
    return max(1, int(jobs))


def _ordered_map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _run_start(args):
    index, n_points, params, cfg, ctx = args
    start = random_design(n_points, params.D, cfg.rng_seed, index)
    res = ccd_minimize(start, params, cfg, ctx)
    res.start_index = index
    return res


def multistart(n_starts: int, params: CovarianceParams, cfg: SearchConfig = SearchConfig(),
               ctx: PrecisionContext = DEFAULT_CONTEXT, *, n_points: int = 4,
               jobs: Optional[int] = None, return_all: bool = False):
    """Best of ``n_starts`` descents from seeded uniform-random designs."""
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    items = [(s, n_points, params, cfg, ctx) for s in range(n_starts)]
    results = _ordered_map(_run_start, items, _default_jobs(jobs))
    best = min(results, key=lambda r: (r.imspe, r.start_index))
    return (best, results) if return_all else best


@dataclass
class BaselineRecord:
    index: int
    design: Design
    imspe: Optional[BigReal]
    gap: Optional[BigReal]
    status: str = "ok"


@dataclass
class BaselineReport:
    n_samples: int
    skipped: int
    count_below: int
    min_gap: Optional[BigReal]
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    records: list

    @property
    def evaluated(self) -> int:
        return self.n_samples - self.skipped


HIST_EDGES = np.arange(-16.0, 0.0 + 0.25, 0.5)


def _eval_sample(args):
    index, design, params, reference, ctx = args
    try:
        value = imspe(design, params, ctx).imspe
    except (IllConditionedError, DegenerateDesignError) as exc:
        return BaselineRecord(index, design, None, None, f"error:{type(exc).__name__}")
    with gmpy2.context(precision=value.precision):
        gap = value - mpfr(reference)
    return BaselineRecord(index, design, value, gap)


def random_baseline(n_samples: int, params: CovarianceParams, reference_imspe, seed: int,
                    ctx: PrecisionContext = DEFAULT_CONTEXT, *, n_points: int = 4,
                    jobs: Optional[int] = None, designs: Optional[list] = None) -> BaselineReport:
    """Evaluate uniform-random designs against a reference IMSPE.

    Sample ``i`` is drawn from RNG substream (STREAM_BASELINE, i). ``designs``
    overrides the draws (used to plant known designs in tests). The histogram
    bins log10(max(gap, 0) + 1e-16), clipped to [-16, 0].
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if designs is None:
        designs = [random_design(n_points, params.D, seed, i, STREAM_BASELINE) for i in range(n_samples)]
    elif len(designs) != n_samples:
        raise ValueError("len(designs) must equal n_samples")
    ref = mpfr(reference_imspe) if not isinstance(reference_imspe, BigReal) else reference_imspe
    items = [(i, d, params, ref, ctx) for i, d in enumerate(designs)]
    records = _ordered_map(_eval_sample, items, _default_jobs(jobs))
    ok = [r for r in records if r.status == "ok"]
    skipped = n_samples - len(ok)
    count_below = sum(1 for r in ok if r.gap < 0)
    min_gap = min((r.gap for r in ok), default=None)
    logs = [float(gap_value(max(float(r.gap), 0.0), 0.0)) for r in ok]
    clipped = np.clip(logs, HIST_EDGES[0], HIST_EDGES[-1])
    counts, _ = np.histogram(clipped, bins=HIST_EDGES)
    return BaselineReport(n_samples, skipped, count_below, min_gap, HIST_EDGES.copy(), counts, records)


# ---------------------------------------------------------------------------
# canonical form


def _factor_perms(D: int, theta) -> list:
    if theta is None:
        return [tuple(range(D))]
    theta = tuple(float(t) for t in theta)
    return [p for p in itertools.permutations(range(D)) if all(theta[p[k]] == theta[k] for k in range(D))]


def _transform_rows(rows: np.ndarray, signs, perm) -> np.ndarray:
    return rows[:, list(perm)] * np.asarray(signs, dtype=float) + 0.0


def canonicalize(design: Design, theta=None) -> Design:
    """Unique representative of ``design`` under its symmetry group.

    The group is per-coordinate sign flips, row permutations and, when
    ``theta`` is given, factor permutations that leave theta unchanged. The
    chosen element minimises the lexicographic order of the row-sorted
    point matrix. A twin pair stays in the last two rows with its offset
    sign normalised so the first nonzero component is positive.
    """
    D = design.D
    best = None
    for perm in _factor_perms(D, theta):
        for signs in itertools.product((1.0, -1.0), repeat=D):
            pts = _transform_rows(design.points, signs, perm)
            key = tuple(itertools.chain.from_iterable(sorted(map(tuple, pts.tolist()))))
            if best is None or key < best[0]:
                best = (key, signs, perm)
    _, signs, perm = best
    free = _transform_rows(design.free_points(), signs, perm)
    free = np.array(sorted(map(tuple, free.tolist())), dtype=float).reshape(-1, D)
    if design.twin is None:
        return Design(free)
    bt = _transform_rows(np.array([design.twin.barycenter]), signs, perm)[0]
    dl = _transform_rows(np.array([design.twin.delta]), signs, perm)[0]
    nz = [v for v in dl if v != 0.0]
    if nz and nz[0] < 0:
        dl = -dl + 0.0
    return Design.with_twins(free, bt, dl)
