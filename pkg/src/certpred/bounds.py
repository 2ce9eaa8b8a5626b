"""Closed-form tail bounds for orientation, power-of-point and insphere values.

Points are uniform in the unit ball ``B`` or the cube ``C = [-1, 1]^d``.  All
constants are recomputed from their closed forms; probabilities are clamped
to ``[0, 1]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from . import error_engine

MAX_DIM = 6
# tight bound for the one-dimensional insphere value: 17 * 2**(1/3) / 4 * V**(2/3)
DIM1_COEFF = 17 * 2 ** (1 / 3) / 4
DIM1_EXPONENT = 2 / 3


class Domain(str, enum.Enum):
    BALL = "ball"
    CUBE = "cube"


def _check_dim(delta: int, lo: int = 1) -> None:
    if not lo <= delta <= MAX_DIM:
        raise ValueError(f"dimension must be in [{lo}, {MAX_DIM}], got {delta}")


def _clamp(p: float) -> float:
    return min(1.0, max(0.0, p))


def ball_volume(delta: int) -> float:
    """Volume of the unit ball in dimension ``delta`` (``delta = 0`` gives 1)."""
    if delta < 0:
        raise ValueError("dimension must be non-negative")
    return math.pi ** (delta / 2) / math.gamma(delta / 2 + 1)


def sigma(delta: int) -> float:
    """Density bound of the orientation value for points in the ball."""
    _check_dim(delta)
    return delta * ball_volume(delta - 1) ** delta / ball_volume(delta) ** (delta - 1)


def psi(delta: int) -> float:
    """Density bound of the orientation value for points in the cube."""
    _check_dim(delta)
    v = ball_volume(delta)
    return delta * v * ball_volume(delta - 1) ** delta * delta ** (delta * (delta - 1) / 2) / 2 ** (delta * delta)


@dataclass(frozen=True)
class AnalyticConstants:
    delta: int
    v_delta: float
    sigma_delta: float
    psi_delta: float


def constants(delta: int) -> AnalyticConstants:
    return AnalyticConstants(delta, ball_volume(delta), sigma(delta), psi(delta))


def _domain(domain: Domain | str) -> Domain:
    return Domain(domain.value if isinstance(domain, Domain) else str(domain).lower())


def orientation_tail(delta: int, v: float, domain: Domain | str = Domain.BALL) -> float:
    """Bound on P(|orientation| <= v) for ``delta`` random points."""
    if v < 0:
        raise ValueError("v must be non-negative")
    coeff = sigma(delta) if _domain(domain) is Domain.BALL else psi(delta)
    return _clamp(coeff * v)


def power_coefficient(delta: int, domain: Domain | str = Domain.BALL) -> float:
    _check_dim(delta)
    if _domain(domain) is Domain.BALL:
        return float(delta)
    return delta * ball_volume(delta) / 2**delta


def power_tail(delta: int, v: float, domain: Domain | str = Domain.BALL) -> float:
    """Bound on P(|power(p, S)| <= v) for a fixed sphere and random ``p``."""
    if v < 0:
        raise ValueError("v must be non-negative")
    return _clamp(power_coefficient(delta, domain) * v)


def product_tail(a: float, b: float, v: float) -> float:
    """Bound on P(ab <= v) when a has density <= A and P(b <= t | a) <= B t.

    ``(A + B) v + A B v ln(1/v)``, not clamped.
    """
    if not 0 < v <= 1:
        raise ValueError("v must be in (0, 1]")
    return (a + b) * v + a * b * v * math.log(1 / v)


@dataclass(frozen=True)
class TailBound:
    """``log_coeff * V ln(1/V) + linear_coeff * V``, or ``linear_coeff * V**exponent`` in 1D."""

    delta: int
    domain: Domain
    linear_coeff: float
    log_coeff: float
    exponent: float = 1.0

    def evaluate(self, v: float) -> float:
        if v < 0:
            raise ValueError("v must be non-negative")
        if v == 0:
            return 0.0
        if self.exponent != 1.0:
            return _clamp(self.linear_coeff * v**self.exponent)
        return _clamp(self.log_coeff * v * math.log(1 / v) + self.linear_coeff * v)

    __call__ = evaluate


def insphere_tail_bound(delta: int, domain: Domain | str = Domain.BALL) -> TailBound:
    _check_dim(delta)
    dom = _domain(domain)
    if delta == 1:
        return TailBound(1, dom, DIM1_COEFF, 0.0, DIM1_EXPONENT)
    a = sigma(delta) if dom is Domain.BALL else psi(delta)
    b = power_coefficient(delta, dom)
    return TailBound(delta, dom, a + b, a * b)


def insphere_tail(delta: int, v: float, domain: Domain | str = Domain.BALL) -> float:
    """Bound on P(|insphere| <= v) for ``delta + 1`` random points."""
    return insphere_tail_bound(delta, domain).evaluate(v)


def failure_probability(
    delta: int = 3,
    precision: int = 53,
    domain: Domain | str = Domain.CUBE,
    threshold: float | None = None,
) -> float:
    """Probability that the static insphere filter has to fall back.

    Evaluates the insphere tail bound at the filter threshold, by default the
    one derived by the error engine for ``delta`` and ``precision``.
    """
    if threshold is None:
        threshold = error_engine.threshold(delta, precision, "insphere")
    return insphere_tail(delta, threshold, domain)
