"""Gaussian-covariance building blocks: covariance entries, the one-factor
integrals, the S functions and the bordered L and R matrices.

Everything factorises over input dimensions, so the matrices are assembled
from per-dimension tables (:class:`FactorTables`). The search code relies on
that: moving one coordinate only recomputes one row of one table.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import DomainError, DegenerateDesignError
from .highprec import DEFAULT_CONTEXT, BigReal, PrecisionContext


@dataclass(frozen=True)
class TwinSpec:
    """A twin pair stored as barycenter and half-offset: points are
    ``barycenter + delta`` and ``barycenter - delta``."""

    barycenter: tuple
    delta: tuple

    def __post_init__(self):
        object.__setattr__(self, "barycenter", tuple(float(v) for v in self.barycenter))
        object.__setattr__(self, "delta", tuple(float(v) for v in self.delta))
        if len(self.barycenter) != len(self.delta):
            raise ValueError("barycenter and delta must have the same length")

    def exact_points(self) -> tuple[list[Fraction], list[Fraction]]:
        bt = [Fraction(v) for v in self.barycenter]
        dl = [Fraction(v) for v in self.delta]
        return [b + d for b, d in zip(bt, dl)], [b - d for b, d in zip(bt, dl)]


@dataclass(frozen=True, eq=False)
class Design:
    """N points in [-1, 1]^D.

    With ``twin`` set, the last two rows of ``points`` are the twins
    ``x_t + delta`` and ``x_t - delta`` (rounded to float for display); the
    kernel always rebuilds them from ``twin`` itself.
    """

    points: np.ndarray
    twin: Optional[TwinSpec] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be an N x D array with N, D >= 1, got shape {pts.shape}")
        if self.twin is not None:
            D = pts.shape[1]
            if len(self.twin.barycenter) != D:
                raise ValueError("twin spec dimension does not match points")
            if pts.shape[0] < 2:
                raise ValueError("a twin design needs at least two points")
            plus, minus = self.twin.exact_points()
            for k in range(D):
                for label, v in (("first twin", plus[k]), ("second twin", minus[k])):
                    if abs(v) > 1:
                        raise DomainError(f"{label} coordinate {k + 1} = {float(v)!r} outside [-1, 1]")
            pts[-2] = [float(v) for v in plus]
            pts[-1] = [float(v) for v in minus]
        for i, row in enumerate(pts):
            for k, v in enumerate(row):
                if not np.isfinite(v) or abs(v) > 1.0:
                    raise DomainError(f"point {i + 1} coordinate {k + 1} = {v!r} outside [-1, 1]")
        pts += 0.0  # drop negative zeros
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def D(self) -> int:
        return self.points.shape[1]

    @classmethod
    def with_twins(cls, others, barycenter, delta) -> "Design":
        """Build a design from the non-twin rows plus one twin pair."""
        others = np.asarray(others, dtype=float).reshape(-1, len(barycenter))
        twin = TwinSpec(barycenter, delta)
        filler = np.zeros((2, len(barycenter)))
        return cls(np.vstack([others, filler]), twin)

    def free_points(self) -> np.ndarray:
        """Rows that are not part of the twin pair."""
        return self.points[:-2] if self.twin is not None else self.points

    def exact_rows(self) -> list[list[Fraction]]:
        rows = [[Fraction(v) for v in r] for r in self.free_points()]
        if self.twin is not None:
            plus, minus = self.twin.exact_points()
            rows += [plus, minus]
        return rows

    def check_distinct(self):
        """Raise DegenerateDesignError if two points coincide exactly."""
        if self.twin is None:
            rows = [tuple(r) for r in self.points.tolist()]
        else:
            rows = [tuple(r) for r in self.exact_rows()]
        seen = {}
        for i, r in enumerate(rows):
            if r in seen:
                raise DegenerateDesignError(f"points {seen[r] + 1} and {i + 1} coincide at {[float(v) for v in r]}")
            seen[r] = i

    def without_twin(self) -> "Design":
        return Design(self.points)

    def __eq__(self, other):
        if not isinstance(other, Design):
            return NotImplemented
        return self.twin == other.twin and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.points.tobytes(), self.points.shape, self.twin))

    def __repr__(self):
        rows = ", ".join("(" + ", ".join(f"{v:.6g}" for v in r) + ")" for r in self.points)
        tw = f", twin={self.twin}" if self.twin is not None else ""
        return f"Design([{rows}]{tw})"


@dataclass(frozen=True)
class CovarianceParams:
    theta: tuple
    sigma_z2: float = 1.0

    def __post_init__(self):
        th = tuple(float(t) for t in np.atleast_1d(self.theta))
        if not th:
            raise ValueError("theta must have at least one entry")
        for k, t in enumerate(th):
            if not t > 0 or not np.isfinite(t):
                raise DomainError(f"theta[{k + 1}] = {t!r} must be a positive finite number")
        if not self.sigma_z2 > 0:
            raise DomainError(f"sigma_z2 = {self.sigma_z2!r} must be positive")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "sigma_z2", float(self.sigma_z2))

    @property
    def D(self) -> int:
        return len(self.theta)


@dataclass(frozen=True)
class CovMatrices:
    L: list
    R: list


# ---------------------------------------------------------------------------
# scalar formulas (all run inside an active MPFR context)


@dataclass(frozen=True)
class _FactorConsts:
    theta: BigReal
    c1: BigReal  # sqrt(pi / (16 theta))
    c2: BigReal  # sqrt(pi / (32 theta))
    s1: BigReal  # sqrt(theta)
    s2: BigReal  # sqrt(2 theta)


def _consts(theta: float) -> _FactorConsts:
    t = mpfr(theta)
    pi = gmpy2.const_pi()
    return _FactorConsts(t, gmpy2.sqrt(pi / (16 * t)), gmpy2.sqrt(pi / (32 * t)),
                         gmpy2.sqrt(t), gmpy2.sqrt(2 * t))


def _erf_pair(s, a):
    return gmpy2.erf(s * (1 + a)) + gmpy2.erf(s * (1 - a))


def _check_theta(theta):
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta!r}")


def cov_entry(xi: Sequence, xj: Sequence, params: CovarianceParams,
              ctx: PrecisionContext = DEFAULT_CONTEXT) -> BigReal:
    """sigma_z^2 * exp(-sum_k theta_k (xi_k - xj_k)^2)."""
    if len(xi) != len(xj) or len(xi) != params.D:
        raise ValueError("dimension mismatch")
    with ctx.local():
        q = mpfr(0)
        for t, a, b in zip(params.theta, xi, xj):
            d = mpfr(a) - mpfr(b)
            q += mpfr(t) * d * d
        return mpfr(params.sigma_z2) * gmpy2.exp(-q)


def I1(theta_k, a, ctx: PrecisionContext = DEFAULT_CONTEXT) -> BigReal:
    """Half the integral of exp(-theta (a - x)^2) over x in [-1, 1]."""
    _check_theta(theta_k)
    with ctx.local():
        c = _consts(theta_k)
        return c.c1 * _erf_pair(c.s1, mpfr(a))


def I2(theta_k, a, b, ctx: PrecisionContext = DEFAULT_CONTEXT) -> BigReal:
    """Half the integral of exp(-theta [(a - x)^2 + (b - x)^2]) over [-1, 1]."""
    _check_theta(theta_k)
    with ctx.local():
        c = _consts(theta_k)
        a, b = mpfr(a), mpfr(b)
        d = a - b
        return c.c2 * _erf_pair(c.s2, (a + b) / 2) * gmpy2.exp(-c.theta * d * d / 2)


def S_l(xi: Sequence, params: CovarianceParams, l: int,
        ctx: PrecisionContext = DEFAULT_CONTEXT) -> BigReal:
    if l not in (1, 2):
        raise DomainError(f"l must be 1 or 2, got {l!r}")
    if len(xi) != params.D:
        raise ValueError("dimension mismatch")
    with ctx.local():
        out = mpfr(params.sigma_z2) ** l
        for t, a in zip(params.theta, xi):
            c = _consts(t)
            if l == 1:
                out *= c.c1 * _erf_pair(c.s1, mpfr(a))
            else:
                out *= c.c2 * _erf_pair(c.s2, mpfr(a))
        return out


# ---------------------------------------------------------------------------
# per-dimension tables


@dataclass
class _DimTable:
    x: list          # coordinates of every row (twin rows rebuilt from x_t +- delta)
    f1: list         # one-point factor per row
    g: list          # symmetric pair factor, no exponential
    q: list          # symmetric theta * (x_i - x_j)^2
    bary: Optional[BigReal] = None
    delta: Optional[BigReal] = None

    def copy(self) -> "_DimTable":
        return _DimTable(list(self.x), list(self.f1), [list(r) for r in self.g],
                         [list(r) for r in self.q], self.bary, self.delta)


@dataclass
class TablePatch:
    """A trial modification of one dimension, ready to commit."""

    k: int
    table: _DimTable
    L: list
    R: list


class FactorTables:
    """Per-dimension erf/exponent tables for one design at one precision.

    ``L`` and ``R`` hold the assembled bordered matrices. :meth:`trial`
    recomputes only the rows touched by a coordinate change and returns a
    patch; :meth:`commit` adopts it. Results are bit-identical to a fresh
    build of the patched design.
    """

    def __init__(self, design: Design, params: CovarianceParams, bits: int):
        if design.D != params.D:
            raise ValueError(f"design has D={design.D} but theta has {params.D} entries")
        self.bits = bits
        self.N = design.N
        self.D = design.D
        self.twin = design.twin is not None
        with gmpy2.context(precision=bits):
            self.sz2 = mpfr(params.sigma_z2)
            self.sz4 = self.sz2 * self.sz2
            self.consts = [_consts(t) for t in params.theta]
            self.dims = []
            free = design.free_points()
            for k in range(self.D):
                xs = [mpfr(float(v)) for v in free[:, k]]
                bary = delta = None
                if self.twin:
                    bary = mpfr(design.twin.barycenter[k])
                    delta = mpfr(design.twin.delta[k])
                    xs += [bary + delta, bary - delta]
                self.dims.append(self._fresh_table(k, xs, bary, delta))
            self.L, self.R = self._assemble(self.dims)

    # -- table construction -------------------------------------------------
    def _pair(self, c: _FactorConsts, t: _DimTable, i: int, j: int):
        n = self.N
        if self.twin and {i, j} == {n - 2, n - 1}:
            g = c.c2 * _erf_pair(c.s2, t.bary)
            q = 4 * c.theta * t.delta * t.delta
        else:
            g = c.c2 * _erf_pair(c.s2, (t.x[i] + t.x[j]) / 2)
            d = t.x[i] - t.x[j]
            q = c.theta * d * d
        return g, q

    def _fresh_table(self, k, xs, bary, delta) -> _DimTable:
        c = self.consts[k]
        n = self.N
        t = _DimTable(xs, [c.c1 * _erf_pair(c.s1, x) for x in xs],
                      [[None] * n for _ in range(n)], [[None] * n for _ in range(n)],
                      bary, delta)
        for i in range(n):
            for j in range(i, n):
                g, q = self._pair(c, t, i, j)
                t.g[i][j] = t.g[j][i] = g
                t.q[i][j] = t.q[j][i] = q
        return t

    def _entry(self, dims, i, j):
        qs = dims[0].q[i][j]
        gp = dims[0].g[i][j]
        for t in dims[1:]:
            qs = qs + t.q[i][j]
            gp = gp * t.g[i][j]
        half = gmpy2.exp(-qs / 2)
        return self.sz2 * half * half, self.sz4 * gp * half

    def _border(self, dims, i):
        p = dims[0].f1[i]
        for t in dims[1:]:
            p = p * t.f1[i]
        return self.sz2 * p

    def _assemble(self, dims):
        n = self.N
        zero = mpfr(0)
        L = [[zero] * (n + 1) for _ in range(n + 1)]
        R = [[zero] * (n + 1) for _ in range(n + 1)]
        R[0][0] = mpfr(1)
        for i in range(n):
            L[0][i + 1] = L[i + 1][0] = self.sz2
            R[0][i + 1] = R[i + 1][0] = self._border(dims, i)
            for j in range(i, n):
                v, r = self._entry(dims, i, j)
                L[i + 1][j + 1] = L[j + 1][i + 1] = v
                R[i + 1][j + 1] = R[j + 1][i + 1] = r
        return L, R

    # -- incremental updates -----------------------------------------------
    def trial(self, k: int, *, row: Optional[int] = None, value=None,
              bary=None, delta=None) -> TablePatch:
        """Patch dimension ``k``: either move free ``row`` to ``value`` or
        change the twin barycenter / delta component (pass one of them)."""
        with gmpy2.context(precision=self.bits):
            c = self.consts[k]
            t = self.dims[k].copy()
            n = self.N
            if row is not None:
                if self.twin and row >= n - 2:
                    raise ValueError("twin rows move through bary/delta")
                rows = [row]
                t.x[row] = mpfr(value)
            else:
                if not self.twin:
                    raise ValueError("design has no twin pair")
                if bary is not None:
                    t.bary = mpfr(bary)
                if delta is not None:
                    t.delta = mpfr(delta)
                rows = [n - 2, n - 1]
                t.x[n - 2] = t.bary + t.delta
                t.x[n - 1] = t.bary - t.delta
            for r in rows:
                t.f1[r] = c.c1 * _erf_pair(c.s1, t.x[r])
                for j in range(n):
                    g, q = self._pair(c, t, r, j)
                    t.g[r][j] = t.g[j][r] = g
                    t.q[r][j] = t.q[j][r] = q
            dims = list(self.dims)
            dims[k] = t
            L = [list(r) for r in self.L]
            R = [list(r) for r in self.R]
            for r in rows:
                R[0][r + 1] = R[r + 1][0] = self._border(dims, r)
                for j in range(n):
                    v, rr = self._entry(dims, r, j)
                    L[r + 1][j + 1] = L[j + 1][r + 1] = v
                    R[r + 1][j + 1] = R[j + 1][r + 1] = rr
        return TablePatch(k, t, L, R)

    def commit(self, patch: TablePatch):
        self.dims[patch.k] = patch.table
        self.L, self.R = patch.L, patch.R


def build_matrices(design: Design, params: CovarianceParams,
                   ctx: PrecisionContext = DEFAULT_CONTEXT) -> CovMatrices:
    tables = FactorTables(design, params, ctx.bits)
    return CovMatrices(tables.L, tables.R)


def build_L(design: Design, params: CovarianceParams, ctx: PrecisionContext = DEFAULT_CONTEXT) -> list:
    """Bordered covariance matrix: 0 corner, sigma_z^2 border, V inside."""
    return build_matrices(design, params, ctx).L


def build_R(design: Design, params: CovarianceParams, ctx: PrecisionContext = DEFAULT_CONTEXT) -> list:
    """Domain-averaged outer product of (1, v_1, ..., v_N)."""
    return build_matrices(design, params, ctx).R
