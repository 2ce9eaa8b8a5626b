"""Determinant formulas with a pinned operation order.

Every function here only uses ``+``, ``-`` and ``*`` on whatever scalars it is
given, so the same code runs on Python floats, numpy arrays (float64, float32
or object arrays of ints), :class:`certpred.exact.ExactScalar` and
:class:`certpred.error_engine.ExprNode`.  The float predicates and the error
analysis therefore always describe the same computation.

Order conventions:

* minors are expanded along their first column, terms summed left to right
  (``x1*(y2*z3 - y3*z2) - x2*(...) + x3*(...)``);
* squared norms are left-associated (``(x*x + y*y) + z*z``);
* the insphere determinant is expanded along its last (squared norm) column,
  each term computed as ``minor * norm`` and the signed terms combined as a
  balanced binary tree, ``(t1 - t0) + (t3 - t2)`` in three dimensions.
"""

from __future__ import annotations

from typing import Any, Sequence

Rows = Sequence[Sequence[Any]]


def squared_norm(row: Sequence[Any]) -> Any:
    acc = row[0] * row[0]
    for x in row[1:]:
        acc = acc + x * x
    return acc


def _minor(rows: Rows, idx: tuple[int, ...], col: int, memo: dict) -> Any:
    key = (idx, col)
    if key in memo:
        return memo[key]
    if len(idx) == 1:
        value = rows[idx[0]][col]
    else:
        value = None
        for k, i in enumerate(idx):
            rest = idx[:k] + idx[k + 1:]
            term = rows[i][col] * _minor(rows, rest, col + 1, memo)
            if value is None:
                value = term
            elif k % 2:
                value = value - term
            else:
                value = value + term
    memo[key] = value
    return value


def orientation(rows: Rows) -> Any:
    """Determinant of the square matrix ``rows`` (delta rows of delta coordinates)."""
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ValueError(f"orientation needs a square matrix, got {n} rows")
    return _minor(rows, tuple(range(n)), 0, {})


def _combine(left: tuple[bool, Any], right: tuple[bool, Any]) -> tuple[bool, Any]:
    lneg, lval = left
    rneg, rval = right
    if lneg == rneg:
        return lneg, lval + rval
    if rneg:
        return False, lval - rval
    return False, rval - lval


def _balanced(terms: list[tuple[bool, Any]]) -> tuple[bool, Any]:
    if len(terms) == 1:
        return terms[0]
    mid = (len(terms) + 1) // 2
    return _combine(_balanced(terms[:mid]), _balanced(terms[mid:]))


def insphere(rows: Rows) -> Any:
    """Lifted determinant of delta+1 points of dimension delta.

    Row ``i`` is ``(x_i1, ..., x_id, |p_i|^2)``; the sign says on which side of
    the sphere through the first delta points and the origin the last point
    lies (positive outside when the first delta points are positively
    oriented).
    """
    n = len(rows)
    dim = n - 1
    if dim < 1 or any(len(r) != dim for r in rows):
        raise ValueError(f"insphere needs {n - 1}-dimensional points, got rows {[len(r) for r in rows]}")
    norms = [squared_norm(r) for r in rows]
    memo: dict = {}
    terms = []
    for i in range(n):
        rest = tuple(j for j in range(n) if j != i)
        term = _minor(rows, rest, 0, memo) * norms[i]
        terms.append(((i + dim) % 2 == 1, term))
    negative, value = _balanced(terms)
    # holds for every dimension 1..6 with the alternating cofactor signs
    assert not negative, "unbalanced sign pattern"
    return value
