"""IMSPE = 1 - tr(L^-1 R) with precision escalation.

Proximal points make L nearly singular; the singular parts of L^-1 R cancel
in the trace, so the value is fine provided enough digits are carried. Each
evaluation checks two things and retries at higher precision if either
fails: the elimination must not hit a negligible pivot, and the trace must
not have lost more than half the working digits to cancellation. The loss
estimate adds the digits eaten by elimination (largest entry over smallest
pivot) to those eaten by the final subtraction (largest trace summand over
the result).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import gmpy2
from gmpy2 import mpfr

from .errors import IllConditionedError, SingularMatrixError
from .highprec import DEFAULT_CONTEXT, BigReal, PrecisionContext, lu_solve
from .kernel import CovarianceParams, Design, FactorTables

GAP_FLOOR = "1e-16"


@dataclass(frozen=True)
class ImspeResult:
    imspe: BigReal
    digits_used: int
    escalations: int
    min_pivot: BigReal
    digits_lost: float = 0.0

    def __float__(self):
        return float(self.imspe)


class _Cancelled(Exception):
    def __init__(self, lost, min_pivot):
        self.lost = lost
        self.min_pivot = min_pivot


def _trace_value(L, R, digits: int):
    """1 - tr(L^-1 R) in the active context, or raise on lost accuracy."""
    X, min_pivot = lu_solve(L, R, mpfr(10) ** (4 - digits))
    tr = mpfr(0)
    biggest = mpfr(1)
    for i in range(len(X)):
        s = X[i][i]
        tr += s
        a = abs(s)
        if a > biggest:
            biggest = a
    value = 1 - tr
    if value == 0 or not gmpy2.is_finite(value):
        raise _Cancelled(math.inf, min_pivot)
    scale = max(abs(v) for row in L for v in row)
    lost = float(gmpy2.log10(biggest / abs(value))) + float(gmpy2.log10(scale / min_pivot))
    if lost > digits / 2:
        raise _Cancelled(lost, min_pivot)
    return value, min_pivot, lost


def _escalating(evaluate, ctx: PrecisionContext) -> ImspeResult:
    """Run ``evaluate(level_ctx)`` up the precision ladder."""
    level = ctx
    escalations = 0
    last_pivot = None
    last_reason = ""
    while level is not None:
        try:
            with level.local():
                value, pivot, lost = evaluate(level)
            return ImspeResult(value, level.digits, escalations, pivot, lost)
        except SingularMatrixError as exc:
            last_pivot = exc.pivot
            last_reason = f"near-zero pivot {float(exc.pivot):.3e}"
        except _Cancelled as exc:
            last_pivot = exc.min_pivot
            last_reason = f"{exc.lost:.1f} digits lost to cancellation"
        nxt = level.escalated()
        if nxt is None:
            break
        level = nxt
        escalations += 1
    raise IllConditionedError(
        f"no trustworthy IMSPE at {level.digits} digits ({last_reason})",
        level.digits, escalations, last_pivot)


def imspe(design: Design, params: CovarianceParams,
          ctx: PrecisionContext = DEFAULT_CONTEXT) -> ImspeResult:
    """Normalised integrated mean-squared prediction error of ``design``.

    Raises DegenerateDesignError for exactly coincident points and
    IllConditionedError when ``ctx.max_digits`` is not enough.
    """
    design.check_distinct()

    def evaluate(level):
        tables = FactorTables(design, params, level.bits)
        return _trace_value(tables.L, tables.R, level.digits)

    return _escalating(evaluate, ctx)


def gap_value(value, reference) -> BigReal:
    """log10(value - reference + 1e-16); NaN when the argument is negative."""
    with gmpy2.context(precision=max(_prec(value), _prec(reference), 64)):
        arg = mpfr(value) - mpfr(reference) + mpfr(GAP_FLOOR)
        if arg <= 0:
            return mpfr("nan")
        return gmpy2.log10(arg)


def _prec(x) -> int:
    return x.precision if isinstance(x, BigReal) else 53


def imspe_gap(design: Design, params: CovarianceParams, reference_imspe,
              ctx: PrecisionContext = DEFAULT_CONTEXT) -> BigReal:
    """Shifted log gap to a reference IMSPE, floored at 1e-16 (gives -16 at
    zero gap)."""
    return gap_value(imspe(design, params, ctx).imspe, reference_imspe)


class IncrementalEvaluator:
    """IMSPE of a design that changes one coordinate at a time.

    Keeps :class:`FactorTables` per precision level. :meth:`trial` evaluates
    a candidate change (escalating as needed) and :meth:`commit` adopts the
    last successful trial. Values agree bit-for-bit with :func:`imspe`.
    """

    def __init__(self, design: Design, params: CovarianceParams,
                 ctx: PrecisionContext = DEFAULT_CONTEXT):
        self.params = params
        self.ctx = ctx
        self.design = design
        self._tables: dict[int, FactorTables] = {}
        self._pending: Optional[dict] = None

    def _tables_at(self, level: PrecisionContext) -> FactorTables:
        t = self._tables.get(level.digits)
        if t is None:
            t = FactorTables(self.design, self.params, level.bits)
            self._tables[level.digits] = t
        return t

    def current(self) -> ImspeResult:
        self.design.check_distinct()

        def evaluate(level):
            t = self._tables_at(level)
            return _trace_value(t.L, t.R, level.digits)

        return _escalating(evaluate, self.ctx)

    def trial(self, candidate: Design, k: int, **change) -> ImspeResult:
        """Evaluate ``candidate``, which differs from the committed design by
        ``change`` in dimension ``k`` (see :meth:`FactorTables.trial`)."""
        candidate.check_distinct()
        patches = {}

        def evaluate(level):
            patch = self._tables_at(level).trial(k, **change)
            patches[level.digits] = patch
            return _trace_value(patch.L, patch.R, level.digits)

        self._pending = None
        result = _escalating(evaluate, self.ctx)
        self._pending = {"design": candidate, "patches": patches}
        return result

    def commit(self):
        if self._pending is None:
            raise RuntimeError("no successful trial to commit")
        patches = self._pending["patches"]
        for digits in list(self._tables):
            if digits in patches:
                self._tables[digits].commit(patches[digits])
            else:
                del self._tables[digits]
        self.design = self._pending["design"]
        self._pending = None

    def reset(self, design: Design):
        self.design = design
        self._tables.clear()
        self._pending = None
