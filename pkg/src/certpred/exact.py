"""Exact arithmetic on dyadic inputs.

Coordinates are binary floats, hence dyadic rationals.  Multiplying every
coordinate of an instance by ``2**scale`` turns them into integers, and the
predicate determinants are homogeneous, so their sign can be decided with
plain Python integers.

``SCALE = 1074`` makes every finite binary64 value integral.  The predicate
paths instead use the smallest scale (at least ``MIN_SCALE``) that works for
the coordinates at hand, which keeps the integers short for typical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from . import formulas

SCALE = 1074
MIN_SCALE = 53


class DomainError(ValueError):
    """Input outside the supported domain (non-finite, out of range, wrong shape)."""


class WeightMismatchError(TypeError):
    """Addition of exact scalars of different degree or scale."""


@dataclass(frozen=True)
class ExactScalar:
    """``mag * 2**(-scale * weight)``, with ``weight`` the degree in the inputs."""

    mag: int
    weight: int = 1
    scale: int = SCALE

    def _check(self, other: "ExactScalar") -> None:
        if not isinstance(other, ExactScalar):
            raise TypeError(f"cannot combine ExactScalar with {type(other).__name__}")
        if self.weight != other.weight or self.scale != other.scale:
            raise WeightMismatchError(
                f"weight/scale mismatch: ({self.weight}, {self.scale}) vs ({other.weight}, {other.scale})"
            )

    def __add__(self, other: "ExactScalar") -> "ExactScalar":
        self._check(other)
        return ExactScalar(self.mag + other.mag, self.weight, self.scale)

    def __sub__(self, other: "ExactScalar") -> "ExactScalar":
        self._check(other)
        return ExactScalar(self.mag - other.mag, self.weight, self.scale)

    def __mul__(self, other: "ExactScalar") -> "ExactScalar":
        if not isinstance(other, ExactScalar):
            raise TypeError(f"cannot combine ExactScalar with {type(other).__name__}")
        if self.scale != other.scale:
            raise WeightMismatchError(f"scale mismatch: {self.scale} vs {other.scale}")
        return ExactScalar(self.mag * other.mag, self.weight + other.weight, self.scale)

    def __neg__(self) -> "ExactScalar":
        return ExactScalar(-self.mag, self.weight, self.scale)

    def to_fraction(self) -> Fraction:
        return Fraction(self.mag, 1 << (self.scale * self.weight))

    def sign(self) -> int:
        return (self.mag > 0) - (self.mag < 0)


def add(a: ExactScalar, b: ExactScalar) -> ExactScalar:
    return a + b


def sub(a: ExactScalar, b: ExactScalar) -> ExactScalar:
    return a - b


def mul(a: ExactScalar, b: ExactScalar) -> ExactScalar:
    return a * b


def sign_of(a: ExactScalar) -> int:
    return a.sign()


def required_scale(values: Iterable[float], minimum: int = MIN_SCALE) -> int:
    """Smallest scale >= ``minimum`` that makes every value an integer."""
    scale = minimum
    for x in values:
        x = float(x)
        if not math.isfinite(x):
            raise DomainError(f"non-finite coordinate {x!r}")
        if x == 0.0:
            continue
        den = x.as_integer_ratio()[1]
        scale = max(scale, den.bit_length() - 1)
    return scale


def from_float(x: float, scale: int = SCALE) -> ExactScalar:
    """Exact conversion of a coordinate in [-1, 1].

    Raises :class:`DomainError` for non-finite or out-of-range values and when
    ``x`` is not a multiple of ``2**-scale`` (see :func:`required_scale`).
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"non-finite coordinate {x!r}")
    if abs(x) > 1.0:
        raise DomainError(f"coordinate {x!r} out of [-1,1]")
    num, den = x.as_integer_ratio()
    shift = den.bit_length() - 1
    if shift > scale:
        raise DomainError(f"{x!r} is not a multiple of 2**-{scale}; use a larger scale")
    return ExactScalar(num << (scale - shift), 1, scale)


def _exact_rows(points: Sequence[Sequence[float]]) -> list[list[ExactScalar]]:
    scale = required_scale(c for p in points for c in p)
    return [[from_float(c, scale) for c in p] for p in points]


def bareiss_determinant(matrix: Sequence[Sequence[int]]) -> int:
    """Fraction-free Gaussian elimination on an integer matrix."""
    a = [list(map(int, row)) for row in matrix]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        pivot = a[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * pivot - a[i][k] * a[k][j]) // prev
        prev = pivot
    return sign * a[n - 1][n - 1]


def orientation_value(points: Sequence[Sequence[float]]) -> Fraction:
    """Exact determinant of the coordinate matrix."""
    rows = _exact_rows(points)
    dim = len(rows)
    if dim <= 4:
        return formulas.orientation(rows).to_fraction()
    scale = rows[0][0].scale
    det = bareiss_determinant([[e.mag for e in row] for row in rows])
    return Fraction(det, 1 << (scale * dim))


def insphere_value(points: Sequence[Sequence[float]]) -> Fraction:
    """Exact value of the lifted insphere determinant."""
    rows = _exact_rows(points)
    dim = len(rows) - 1
    if dim <= 4:
        return formulas.insphere(rows).to_fraction()
    scale = rows[0][0].scale
    det = bareiss_determinant([[e.mag for e in row] + [sum(e.mag * e.mag for e in row)] for row in rows])
    return Fraction(det, 1 << (scale * (dim + 2)))


def _sign(v: Fraction) -> int:
    return (v > 0) - (v < 0)


def orientation_sign(points: Sequence[Sequence[float]]) -> int:
    return _sign(orientation_value(points))


def insphere_sign(points: Sequence[Sequence[float]]) -> int:
    return _sign(insphere_value(points))
