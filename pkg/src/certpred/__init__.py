"""Statically filtered exact geometric predicates with derived error thresholds."""

from .bounds import Domain, failure_probability, insphere_tail
from .error_engine import DyadicBound, analyze, threshold
from .exact import DomainError, ExactScalar, from_float
from .predicates import (
    Certificate,
    DegenerateError,
    PredicateResult,
    Sphere,
    circumsphere_through_origin,
    insphere_float,
    insphere_predicate,
    orientation_float,
    orientation_predicate,
    power_of_point,
)

__version__ = "0.1.0"
