"""Statically filtered orientation and insphere predicates.

Each predicate evaluates the determinant in floating point with the operation
order of :mod:`certpred.formulas`, compares the magnitude with the threshold
derived by :mod:`certpred.error_engine` for that exact order, and only falls
back to exact integer arithmetic when the float value is too small to trust.

The ``*_many`` functions do the same on numpy arrays of shape
``(n, points, dim)`` and are used by the Monte Carlo harness.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import error_engine, exact, formulas
from .exact import DomainError

Point = Sequence[float]


class DegenerateError(ArithmeticError):
    """The points and the origin are affinely dependent."""


class Certificate(str, enum.Enum):
    FLOAT = "FloatCertified"
    EXACT = "ExactFallback"


@dataclass(frozen=True)
class PredicateResult:
    sign: int
    certificate: Certificate
    float_value: float
    threshold: float


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, ...]
    radius_squared: float

    def __post_init__(self):
        if not self.radius_squared >= 0.0:
            raise ValueError("radius_squared must be non-negative")


def _check_precision(precision: int) -> None:
    if precision not in error_engine.PRECISIONS:
        raise ValueError(f"precision must be 53 or 24, got {precision}")


def _validate(points: Sequence[Point], count: int | None, dim: int | None) -> tuple[int, int]:
    if dim is None:
        if not points:
            raise DomainError("no points given")
        dim = len(points[0])
    if not 1 <= dim <= error_engine.MAX_DIM:
        raise DomainError(f"dimension must be in [1, 6], got {dim}")
    expected = count(dim) if callable(count) else count
    if len(points) != expected:
        raise DomainError(f"expected {expected} points of dimension {dim}, got {len(points)}")
    for p in points:
        if len(p) != dim:
            raise DomainError(f"point {tuple(p)} is not {dim}-dimensional")
        for c in p:
            if not math.isfinite(c):
                raise DomainError(f"non-finite coordinate {c!r}")
            if abs(c) > 1.0:
                raise DomainError(f"coordinate {c!r} out of [-1,1]")
    return dim, expected


def round_to_single(points: Sequence[Point]) -> list[tuple[float, ...]]:
    """Round coordinates to the nearest binary32 value."""
    return [tuple(float(np.float32(c)) for c in p) for p in points]


def _is_single(points: Sequence[Point]) -> bool:
    return all(float(np.float32(c)) == c for p in points for c in p)


def _float_rows(points: Sequence[Point], precision: int) -> list[list]:
    if precision == 53:
        return [[float(c) for c in p] for p in points]
    if not _is_single(points):
        raise DomainError("24-bit mode needs coordinates already rounded to binary32 (see round_to_single)")
    # numpy float32 scalars round every operation to binary32
    return [[np.float32(c) for c in p] for p in points]


def orientation_float(points: Sequence[Point], dim: int | None = None, precision: int = 53) -> float:
    """Determinant of the ``dim`` x ``dim`` coordinate matrix in float arithmetic."""
    _check_precision(precision)
    _validate(points, lambda d: d, dim)
    return float(formulas.orientation(_float_rows(points, precision)))


def insphere_float(points: Sequence[Point], dim: int | None = None, precision: int = 53) -> float:
    """Lifted insphere determinant of ``dim + 1`` points in float arithmetic."""
    _check_precision(precision)
    _validate(points, lambda d: d + 1, dim)
    return float(formulas.insphere(_float_rows(points, precision)))


def _filtered(value: float, thr: float, exact_sign) -> PredicateResult:
    if abs(value) > thr:
        return PredicateResult(1 if value > 0 else -1, Certificate.FLOAT, value, thr)
    return PredicateResult(exact_sign(), Certificate.EXACT, value, thr)


def insphere_predicate(points: Sequence[Point], dim: int | None = None, precision: int = 53) -> PredicateResult:
    """Sign of the insphere determinant, certified by the static filter or computed exactly."""
    value = insphere_float(points, dim, precision)
    thr = error_engine.threshold(len(points) - 1, precision, "insphere")
    return _filtered(value, thr, lambda: exact.insphere_sign(points))


def orientation_predicate(points: Sequence[Point], dim: int | None = None, precision: int = 53) -> PredicateResult:
    value = orientation_float(points, dim, precision)
    thr = error_engine.threshold(len(points), precision, "orientation")
    return _filtered(value, thr, lambda: exact.orientation_sign(points))


def _replace_column(rows: list[list], col: int, values: list) -> list[list]:
    return [row[:col] + [v] + row[col + 1:] for row, v in zip(rows, values)]


def circumsphere_through_origin(points: Sequence[Point], dim: int | None = None) -> Sphere:
    """Sphere through the ``dim`` given points and the origin.

    Solves ``sum_j c_j x_ij = |p_i|^2`` by Cramer's rule; the center is
    ``c / 2`` and the squared radius ``|c / 2|^2``.  Raises
    :class:`DegenerateError` only when the system is exactly singular.
    """
    dim, _ = _validate(points, lambda d: d, dim)
    if exact.orientation_sign(points) == 0:
        raise DegenerateError("points are affinely dependent with the origin")
    rows = [[float(c) for c in p] for p in points]
    rhs = [formulas.squared_norm(r) for r in rows]
    det = formulas.orientation(rows)
    if det != 0.0:
        center = tuple(formulas.orientation(_replace_column(rows, j, rhs)) / det / 2.0 for j in range(dim))
    else:
        # float determinant underflowed or cancelled; solve with rationals
        frows = [[Fraction(c) for c in r] for r in rows]
        frhs = [formulas.squared_norm(r) for r in frows]
        fdet = formulas.orientation(frows)
        center = tuple(float(formulas.orientation(_replace_column(frows, j, frhs)) / fdet / 2) for j in range(dim))
    return Sphere(center, formulas.squared_norm(list(center)))


def power_of_point(p: Point, sphere: Sphere) -> float:
    """``|p - center|^2 - r^2``: positive outside the sphere, negative inside."""
    if len(p) != len(sphere.center):
        raise DomainError("point and sphere dimensions differ")
    return formulas.squared_norm([float(a) - b for a, b in zip(p, sphere.center)]) - sphere.radius_squared


def decomposition(points: Sequence[Point]) -> tuple[float, float, float]:
    """``(insphere, orientation, power)`` for ``dim + 1`` points.

    The insphere determinant equals the orientation of the first ``dim``
    points times the power of the last point with respect to their sphere
    through the origin.
    """
    dim, _ = _validate(points, lambda d: d + 1, None)
    sphere = circumsphere_through_origin(points[:dim])
    return insphere_float(points), orientation_float(points[:dim]), power_of_point(points[dim], sphere)


# -- vectorised evaluation ---------------------------------------------------

def _columns(coords: np.ndarray) -> list[list[np.ndarray]]:
    return [[coords[:, i, j] for j in range(coords.shape[2])] for i in range(coords.shape[1])]


def _check_batch(coords: np.ndarray, extra: int) -> int:
    if coords.ndim != 3 or coords.shape[1] != coords.shape[2] + extra:
        raise DomainError(f"expected shape (n, dim+{extra}, dim), got {coords.shape}")
    dim = coords.shape[2]
    if not 1 <= dim <= error_engine.MAX_DIM:
        raise DomainError(f"dimension must be in [1, 6], got {dim}")
    return dim


def insphere_float_many(coords: np.ndarray, precision: int = 53) -> np.ndarray:
    """Float insphere values for ``coords`` of shape ``(n, dim + 1, dim)``.

    Returns float64 values; in 24-bit mode the arithmetic is done in float32
    on inputs rounded to float32 by the caller.
    """
    _check_precision(precision)
    _check_batch(coords, 1)
    dtype = np.float64 if precision == 53 else np.float32
    arr = np.asarray(coords)
    if precision == 24 and arr.dtype != np.float32:
        cast = arr.astype(np.float32)
        if not np.array_equal(cast, arr):
            raise DomainError("24-bit mode needs coordinates already rounded to binary32")
        arr = cast
    return formulas.insphere(_columns(arr.astype(dtype, copy=False))).astype(np.float64)


def orientation_float_many(coords: np.ndarray, precision: int = 53) -> np.ndarray:
    _check_precision(precision)
    _check_batch(coords, 0)
    dtype = np.float64 if precision == 53 else np.float32
    return formulas.orientation(_columns(np.asarray(coords).astype(dtype, copy=False))).astype(np.float64)


def _integer_columns(coords: np.ndarray) -> tuple[list[list[np.ndarray]], int]:
    arr = np.asarray(coords, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > 1.0):
        raise DomainError("coordinates must be finite and in [-1,1]")
    scaled = np.ldexp(arr, exact.MIN_SCALE)
    if np.all(scaled == np.trunc(scaled)):
        ints = scaled.astype(np.int64).astype(object)
        scale = exact.MIN_SCALE
    else:
        scale = exact.required_scale(arr.ravel())
        ints = np.empty(arr.shape, dtype=object)
        flat = ints.reshape(-1)
        for k, x in enumerate(arr.ravel()):
            flat[k] = exact.from_float(float(x), scale).mag
    return _columns(ints), scale


def exact_insphere_many(coords: np.ndarray) -> tuple[np.ndarray, int]:
    """Exact insphere determinants as an object array of ints and their scale.

    The value of entry ``k`` is ``ints[k] * 2**(-scale * (dim + 2))``.
    """
    dim = _check_batch(coords, 1)
    cols, scale = _integer_columns(coords)
    if dim <= 4:
        return formulas.insphere(cols), scale
    n = coords.shape[0]
    out = np.empty(n, dtype=object)
    for k in range(n):
        rows = [[c[k] for c in row] for row in cols]
        out[k] = exact.bareiss_determinant([r + [sum(v * v for v in r)] for r in rows])
    return out, scale


def exact_orientation_many(coords: np.ndarray) -> tuple[np.ndarray, int]:
    dim = _check_batch(coords, 0)
    cols, scale = _integer_columns(coords)
    if dim <= 4:
        return formulas.orientation(cols), scale
    n = coords.shape[0]
    out = np.empty(n, dtype=object)
    for k in range(n):
        out[k] = exact.bareiss_determinant([[c[k] for c in row] for row in cols])
    return out, scale


def exact_signs(values: np.ndarray) -> np.ndarray:
    return np.sign(values).astype(np.int8)


def exact_abs_float(values: np.ndarray, scale: int, degree: int) -> np.ndarray:
    """``|values| * 2**(-scale * degree)`` as float64, each rounded once to nearest."""
    shift = scale * degree
    mags = np.abs(values)
    if shift <= 900:
        # int -> float rounds correctly; the power-of-two rescale is exact here
        return np.ldexp(mags.astype(np.float64), -shift)
    return np.array([float(Fraction(int(v), 1 << shift)) for v in mags], dtype=np.float64)
