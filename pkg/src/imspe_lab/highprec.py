"""Extended-precision reals and the handful of special functions the IMSPE
formulas need.

Values are ``gmpy2.mpfr`` numbers (MPFR under the hood); a
:class:`PrecisionContext` only says how many decimal digits to carry. Every
public function here enters its own MPFR context, so callers never have to
touch gmpy2 state directly. Hot loops elsewhere in the package enter the
context once via :meth:`PrecisionContext.local` and call gmpy2 themselves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import gmpy2
from gmpy2 import mpfr

from .errors import DomainError, SingularMatrixError

BigReal = type(mpfr(0))

_LOG2_10 = math.log2(10.0)
_GUARD_BITS = 4


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision in decimal digits plus the escalation policy.

    ``digits`` is the starting precision; evaluators that detect trouble
    multiply it by ``escalation_factor`` until ``max_digits`` is reached.
    """

    digits: int = 60
    max_digits: int = 960
    escalation_factor: int = 2

    def __post_init__(self):
        if int(self.digits) != self.digits or self.digits < 16:
            raise ValueError(f"digits must be an integer >= 16, got {self.digits!r}")
        if self.max_digits < self.digits:
            raise ValueError("max_digits must be >= digits")
        if self.escalation_factor < 2:
            raise ValueError("escalation_factor must be >= 2")

    @property
    def bits(self) -> int:
        return digits_to_bits(self.digits)

    def local(self):
        """MPFR context manager at this precision."""
        return gmpy2.context(precision=self.bits)

    def with_digits(self, digits: int) -> "PrecisionContext":
        return PrecisionContext(digits, max(self.max_digits, digits), self.escalation_factor)

    def escalated(self) -> "PrecisionContext | None":
        """Next context in the escalation ladder, or None at the ceiling."""
        if self.digits >= self.max_digits:
            return None
        nxt = min(self.digits * self.escalation_factor, self.max_digits)
        return PrecisionContext(nxt, self.max_digits, self.escalation_factor)


DEFAULT_CONTEXT = PrecisionContext()


def digits_to_bits(digits: int) -> int:
    return int(math.ceil(digits * _LOG2_10)) + _GUARD_BITS


def to_big(x, ctx: PrecisionContext = DEFAULT_CONTEXT) -> BigReal:
    """Convert an int, float, decimal string or mpfr to a BigReal at ctx."""
    with ctx.local():
        return mpfr(x)


def to_text(x: BigReal, digits: int) -> str:
    """Scientific-notation text with exactly ``digits`` significant digits."""
    if digits < 1:
        raise ValueError("digits must be positive")
    x = mpfr(x) if not isinstance(x, BigReal) else x
    if gmpy2.is_nan(x):
        return "nan"
    if gmpy2.is_infinite(x):
        return "inf" if x > 0 else "-inf"
    mant, exp, _ = x.digits(10, digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    if gmpy2.is_zero(x):
        mant, exp = "0" * digits, 1
    body = mant[0] + ("." + mant[1:] if len(mant) > 1 else "")
    return f"{sign}{body}e{exp - 1:+d}"


def from_text(text: str, ctx: PrecisionContext = DEFAULT_CONTEXT) -> BigReal:
    with ctx.local():
        return mpfr(text.strip())


def _checked(x) -> BigReal:
    x = mpfr(x)
    if not gmpy2.is_finite(x):
        raise DomainError(f"non-finite argument: {x}")
    return x


def erf(x, ctx: PrecisionContext = DEFAULT_CONTEXT) -> BigReal:
    """Error function, correctly rounded at ``ctx.bits``.

    Odd symmetry is exact: erf(-x) is computed as -erf(x).
    """
    with ctx.local():
        x = _checked(x)
        if x < 0:
            return -gmpy2.erf(-x)
        return gmpy2.erf(x)


def exp_hp(x, ctx: PrecisionContext = DEFAULT_CONTEXT) -> BigReal:
    with ctx.local():
        return gmpy2.exp(_checked(x))


def sqrt_hp(x, ctx: PrecisionContext = DEFAULT_CONTEXT) -> BigReal:
    with ctx.local():
        x = _checked(x)
        if x < 0:
            raise DomainError(f"sqrt of negative number {x}")
        return gmpy2.sqrt(x)


def pi_hp(ctx: PrecisionContext = DEFAULT_CONTEXT) -> BigReal:
    with ctx.local():
        return gmpy2.const_pi()


def lu_solve(M: Sequence[Sequence], B: Sequence[Sequence], tiny) -> tuple[list[list], BigReal]:
    """Gaussian elimination with partial pivoting, in the current MPFR context.

    Returns ``(X, min_pivot)``. Raises SingularMatrixError when a pivot falls
    below ``tiny`` times the largest entry of ``M``. Rows of ``M`` and ``B``
    are copied, never modified.
    """
    n = len(M)
    m = len(B[0]) if n else 0
    A = [list(M[r]) + list(B[r]) for r in range(n)]
    width = n + m
    scale = max((abs(v) for row in M for v in row), default=mpfr(0))
    if scale == 0:
        raise SingularMatrixError(mpfr(0))
    threshold = tiny * scale
    min_pivot = None
    for c in range(n):
        p = c
        best = abs(A[c][c])
        for r in range(c + 1, n):
            v = abs(A[r][c])
            if v > best:
                p, best = r, v
        if best <= threshold:
            raise SingularMatrixError(best)
        if p != c:
            A[c], A[p] = A[p], A[c]
        min_pivot = best if min_pivot is None or best < min_pivot else min_pivot
        row_c = A[c]
        piv = row_c[c]
        for r in range(c + 1, n):
            row_r = A[r]
            f = row_r[c] / piv
            if f:
                for q in range(c + 1, width):
                    row_r[q] -= f * row_c[q]
                row_r[c] = mpfr(0)
    X = [[None] * m for _ in range(n)]
    for col in range(m):
        for r in range(n - 1, -1, -1):
            row = A[r]
            s = row[n + col]
            for q in range(r + 1, n):
                s -= row[q] * X[q][col]
            X[r][col] = s / row[r]
    return X, min_pivot


def solve_sym(M, B, ctx: PrecisionContext = DEFAULT_CONTEXT) -> list[list]:
    """Solve ``M X = B`` for symmetric (possibly indefinite) ``M``.

    The bordered IMSPE matrix has a zero in its corner, so this pivots rather
    than using Cholesky. A pivot smaller than ``10**(4 - digits)`` relative to
    the largest entry raises :class:`SingularMatrixError`, which callers treat
    as a request for more precision.
    """
    n = len(M)
    if any(len(row) != n for row in M):
        raise ValueError("M must be square")
    if len(B) != n:
        raise ValueError("B must have as many rows as M")
    with ctx.local():
        Mb = [[mpfr(v) for v in row] for row in M]
        Bb = [[mpfr(v) for v in row] for row in B]
        tiny = mpfr(10) ** (4 - ctx.digits)
        X, _ = lu_solve(Mb, Bb, tiny)
        return X
