"""Design CSV reading and writing.

One point per row, D numeric columns, optional header. A header may name a
``twin_group`` column; the two rows with a non-empty value there form the
twin pair and must come last. Twin rows are written as exact decimals so
that barycenter and offset survive a round trip bit for bit.
"""
from __future__ import annotations

import csv
import io
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import DesignParseError, DomainError
from .kernel import Design

TWIN_COLUMN = "twin_group"


def _number(text: str, line: int, col: int) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise DesignParseError(f"column {col}: not a number: {text.strip()!r}", line) from None


def _is_header(cells: Sequence[str]) -> bool:
    for c in cells:
        try:
            Fraction(c.strip())
        except (ValueError, ZeroDivisionError):
            return True
    return False


def _twin_from_rows(a: Sequence[Fraction], b: Sequence[Fraction]):
    bary = tuple(float((x + y) / 2) for x, y in zip(a, b))
    delta = tuple(float((x - y) / 2) for x, y in zip(a, b))
    return bary, delta


def parse_design(text: str, twin_barycenter: Optional[Sequence[float]] = None,
                 twin_delta: Optional[Sequence[float]] = None) -> Design:
    """Parse design CSV text.

    ``twin_barycenter``/``twin_delta`` append a twin pair to the rows read,
    as an alternative to marking rows in a ``twin_group`` column.
    """
    rows = []
    twin_rows = []
    header = None
    twin_col = None
    width = None
    for lineno, cells in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not cells or all(not c.strip() for c in cells) or cells[0].lstrip().startswith("#"):
            continue
        if header is None and not rows and not twin_rows and _is_header(cells):
            header = [c.strip() for c in cells]
            if TWIN_COLUMN in header:
                twin_col = header.index(TWIN_COLUMN)
                if twin_col != len(header) - 1:
                    raise DesignParseError(f"{TWIN_COLUMN} must be the last column", lineno)
            width = len(header)
            continue
        if width is None:
            width = len(cells)
        if len(cells) != width:
            raise DesignParseError(f"expected {width} columns, found {len(cells)}", lineno)
        tag = ""
        if twin_col is not None:
            tag = cells[twin_col].strip()
            cells = cells[:twin_col]
        values = [_number(c, lineno, k + 1) for k, c in enumerate(cells)]
        for k, v in enumerate(values):
            if abs(v) > 1:
                raise DesignParseError(f"coordinate {k + 1} = {float(v)!r} outside [-1, 1]", lineno)
        if tag:
            twin_rows.append((lineno, tag, values))
        else:
            if twin_rows:
                raise DesignParseError("twin rows must come after all other rows", lineno)
            rows.append(values)
    n_total = len(rows) + len(twin_rows)
    if n_total == 0:
        raise DesignParseError("design file has no points")
    D = len((rows or [t[2] for t in twin_rows])[0])
    if D == 0:
        raise DesignParseError("design file has no coordinate columns")

    twin = None
    if twin_rows:
        if len(twin_rows) != 2 or twin_rows[0][1] != twin_rows[1][1]:
            raise DesignParseError("exactly two rows must share one twin_group value", twin_rows[0][0])
        if twin_barycenter is not None or twin_delta is not None:
            raise DesignParseError("twin pair given both in the file and as options")
        twin = _twin_from_rows(twin_rows[0][2], twin_rows[1][2])
    elif twin_barycenter is not None or twin_delta is not None:
        if twin_barycenter is None or twin_delta is None:
            raise DesignParseError("twin barycenter and delta must be given together")
        if len(twin_barycenter) != D or len(twin_delta) != D:
            raise DesignParseError(f"twin barycenter and delta need {D} components")
        twin = (tuple(float(v) for v in twin_barycenter), tuple(float(v) for v in twin_delta))

    free = np.array([[float(v) for v in r] for r in rows], dtype=float).reshape(len(rows), D)
    try:
        if twin is None:
            return Design(free)
        return Design.with_twins(free, *twin)
    except DomainError as exc:
        raise DesignParseError(str(exc)) from None


def read_design(path, **twin) -> Design:
    with open(path, newline="") as fh:
        return parse_design(fh.read(), **twin)


def exact_decimal(q: Fraction) -> str:
    """Terminating decimal expansion of a dyadic rational."""
    num, den = q.numerator, q.denominator
    k = den.bit_length() - 1
    if den != 1 << k:
        raise ValueError("denominator is not a power of two")
    sign = "-" if num < 0 else ""
    digits = str(abs(num) * 5 ** k)
    if k == 0:
        return sign + digits
    digits = digits.rjust(k + 1, "0")
    whole, frac = digits[:-k], digits[-k:].rstrip("0")
    return sign + whole + ("." + frac if frac else "")


def format_design(design: Design) -> str:
    """Design CSV text, with a header and a twin_group column when needed."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    cols = [f"x{k + 1}" for k in range(design.D)]
    if design.twin is None:
        w.writerow(cols)
        for r in design.points:
            w.writerow([repr(float(v)) for v in r])
        return out.getvalue()
    w.writerow(cols + [TWIN_COLUMN])
    for r in design.free_points():
        w.writerow([repr(float(v)) for v in r] + [""])
    for r in design.twin.exact_points():
        w.writerow([exact_decimal(v) for v in r] + ["1"])
    return out.getvalue()


def write_design(path, design: Design):
    with open(path, "w", newline="") as fh:
        fh.write(format_design(design))
