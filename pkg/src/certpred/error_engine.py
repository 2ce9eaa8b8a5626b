"""Forward error analysis for static filters.

Expression DAGs are built by running the shared determinant formulas on
:class:`ExprNode` inputs.  :func:`analyze` then propagates a magnitude bound
and an absolute error bound through every node with the classic rules, using
a unit roundoff ``u = 2**-(m+1)`` for an ``m``-bit mantissa::

    mag(x +- y) = mag(x) + mag(y)
    err(x +- y) = err(x) + err(y) + (mag(x) + mag(y)) * u
    mag(x * y)  = mag(x) * mag(y)
    err(x * y)  = mag(x) * err(y) + mag(y) * err(x) + mag(x) * mag(y) * u

Inputs have magnitude 1 and error ``u``.  All bound arithmetic is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache

from . import formulas

MAX_DIM = 6
PRECISIONS = (24, 53)


@dataclass(frozen=True)
class DyadicBound:
    """Non-negative ``mantissa * 2**exponent``, kept with an odd mantissa."""

    mantissa: int
    exponent: int = 0

    def __post_init__(self):
        m, e = self.mantissa, self.exponent
        if m < 0:
            raise ValueError("DyadicBound must be non-negative")
        if m == 0:
            e = 0
        else:
            tz = (m & -m).bit_length() - 1
            m >>= tz
            e += tz
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "exponent", e)

    @classmethod
    def pow2(cls, exponent: int) -> "DyadicBound":
        return cls(1, exponent)

    def __add__(self, other: "DyadicBound") -> "DyadicBound":
        e = min(self.exponent, other.exponent)
        return DyadicBound(
            (self.mantissa << (self.exponent - e)) + (other.mantissa << (other.exponent - e)), e
        )

    def __mul__(self, other: "DyadicBound") -> "DyadicBound":
        return DyadicBound(self.mantissa * other.mantissa, self.exponent + other.exponent)

    def to_fraction(self) -> Fraction:
        if self.exponent >= 0:
            return Fraction(self.mantissa << self.exponent)
        return Fraction(self.mantissa, 1 << -self.exponent)

    def __lt__(self, other: "DyadicBound") -> bool:
        return self.to_fraction() < other.to_fraction()

    def __le__(self, other: "DyadicBound") -> bool:
        return self.to_fraction() <= other.to_fraction()

    def __float__(self) -> float:
        return float(self.to_fraction())

    def ceil_float(self) -> float:
        """Smallest binary64 value that is >= the bound."""
        exact = self.to_fraction()
        f = float(exact)
        if Fraction(f) < exact:
            f = math.nextafter(f, math.inf)
        return f

    def in_units(self, exponent: int) -> Fraction:
        """The bound expressed as a multiple of ``2**exponent``."""
        return self.to_fraction() / Fraction(2) ** exponent

    def __str__(self) -> str:
        if self.mantissa == 0:
            return "0"
        if self.exponent == 0:
            return str(self.mantissa)
        if self.exponent > 0 and self.exponent < 16:
            return str(self.mantissa << self.exponent)
        if self.mantissa == 1:
            return f"2^{self.exponent}"
        return f"{self.mantissa}*2^{self.exponent}"


ONE = DyadicBound(1)


class StructureError(ValueError):
    """The expression graph is not a DAG."""


@dataclass(frozen=True, eq=False)
class ExprNode:
    """Node of an expression DAG; operators build new nodes."""

    kind: str
    children: tuple = ()
    label: str = ""

    def __post_init__(self):
        arity = {"input": 0, "add": 2, "sub": 2, "mul": 2}
        if self.kind not in arity:
            raise ValueError(f"unknown node kind {self.kind!r}")
        if len(self.children) != arity[self.kind]:
            raise ValueError(f"{self.kind} node needs {arity[self.kind]} children")

    def __add__(self, other: "ExprNode") -> "ExprNode":
        return ExprNode("add", (self, other))

    def __sub__(self, other: "ExprNode") -> "ExprNode":
        return ExprNode("sub", (self, other))

    def __mul__(self, other: "ExprNode") -> "ExprNode":
        return ExprNode("mul", (self, other))

    def render(self) -> str:
        if self.kind == "input":
            return self.label
        a, b = (c.render() for c in self.children)
        if self.kind == "mul":
            if self.children[0].kind in ("add", "sub"):
                a = f"({a})"
            if self.children[1].kind in ("add", "sub"):
                b = f"({b})"
            return f"{a}*{b}"
        if self.kind == "sub" and self.children[1].kind in ("add", "sub"):
            b = f"({b})"
        return f"{a} {'+' if self.kind == 'add' else '-'} {b}"


def Input(label: str = "") -> ExprNode:
    return ExprNode("input", (), label)


@dataclass(frozen=True)
class TableRow:
    label: str
    description: str
    expression: str
    mag: DyadicBound
    err: DyadicBound


@dataclass(frozen=True)
class FilterReport:
    """Result of :func:`analyze`: the root bounds plus one row per node class.

    Nodes built the same way from the same classes of children share a row
    (and necessarily the same bounds), which reproduces the compact
    hand-written tables usually given for such analyses.
    """

    threshold: DyadicBound
    mag_bound: DyadicBound
    rows: list[TableRow]
    mantissa_bits: int
    node_count: int
    notes: tuple[str, ...] = ()

    @property
    def threshold_float(self) -> float:
        return self.threshold.ceil_float()

    def to_dict(self) -> dict:
        return {
            "mantissa_bits": self.mantissa_bits,
            "unit_roundoff": f"2^-{self.mantissa_bits + 1}",
            "threshold": str(self.threshold),
            "threshold_float": self.threshold_float,
            "magnitude_bound": str(self.mag_bound),
            "node_count": self.node_count,
            "rows": [
                {
                    "ref": r.label,
                    "description": r.description,
                    "expression": r.expression,
                    "upper_bound": str(r.mag),
                    "error_bound": str(r.err),
                    "error_bound_float": float(r.err),
                }
                for r in self.rows
            ],
            "notes": list(self.notes),
        }


def _topological(root: ExprNode) -> list[ExprNode]:
    order: list[ExprNode] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        key = id(node)
        if expanded:
            state[key] = 2
            order.append(node)
            continue
        st = state.get(key)
        if st == 2:
            continue
        if st == 1:
            raise StructureError("cycle in expression graph")
        state[key] = 1
        stack.append((node, True))
        for child in reversed(node.children):
            cst = state.get(id(child))
            if cst == 1:
                raise StructureError("cycle in expression graph")
            if cst is None:
                stack.append((child, False))
    return order


def analyze(root: ExprNode, mantissa_bits: int = 53) -> FilterReport:
    if mantissa_bits < 1:
        raise ValueError("mantissa_bits must be positive")
    u = DyadicBound.pow2(-(mantissa_bits + 1))
    bounds: dict[int, tuple[DyadicBound, DyadicBound]] = {}
    classes: dict[tuple, int] = {}
    node_class: dict[int, int] = {}
    rows: list[TableRow] = []

    for node in _topological(root):
        if node.kind == "input":
            mag, err = ONE, u
            key: tuple = ("in",)
            desc = "entry"
        else:
            (ma, ea), (mb, eb) = (bounds[id(c)] for c in node.children)
            if node.kind == "mul":
                mag = ma * mb
                err = ma * eb + mb * ea + mag * u
                op = "x"
            else:
                mag = ma + mb
                err = ea + eb + mag * u
                op = "+"
            kids = tuple(sorted(node_class[id(c)] for c in node.children))
            key = (op, kids)
            desc = f"X{kids[0] + 1} {op} X{kids[1] + 1}"
        bounds[id(node)] = (mag, err)
        if key not in classes:
            classes[key] = len(rows)
            text = node.render()
            rows.append(TableRow(f"X{len(rows) + 1}", desc, text if len(text) <= 40 else "", mag, err))
        node_class[id(node)] = classes[key]

    mag, err = bounds[id(root)]
    return FilterReport(err, mag, rows, mantissa_bits, len(bounds))


_AXES = "xyzwuv"


def input_points(count: int, dim: int) -> list[list[ExprNode]]:
    """Labelled input nodes, ``x1, y1, z1, ...`` for up to three coordinates."""
    names = _AXES[:dim] if dim <= 3 else [f"c{j + 1}_" for j in range(dim)]
    return [[Input(f"{names[j]}{i + 1}") for j in range(dim)] for i in range(count)]


def _check_dim(dim: int) -> None:
    if not 1 <= dim <= MAX_DIM:
        raise ValueError(f"dimension must be in [1, {MAX_DIM}], got {dim}")


def build_insphere_dag(dim: int) -> ExprNode:
    _check_dim(dim)
    return formulas.insphere(input_points(dim + 1, dim))


def build_orientation_dag(dim: int) -> ExprNode:
    _check_dim(dim)
    return formulas.orientation(input_points(dim, dim))


@lru_cache(maxsize=None)
def filter_report(dim: int, mantissa_bits: int = 53, test: str = "insphere") -> FilterReport:
    if test == "insphere":
        root = build_insphere_dag(dim)
    elif test == "orientation":
        root = build_orientation_dag(dim)
    else:
        raise ValueError(f"unknown test {test!r}")
    report = analyze(root, mantissa_bits)
    if test == "insphere" and dim == 3:
        report = replace(report, notes=tuple(reference_notes(report)))
    return report


def threshold(dim: int, mantissa_bits: int = 53, test: str = "insphere") -> float:
    """Static filter threshold: the root error bound rounded up to binary64."""
    if mantissa_bits not in PRECISIONS:
        raise ValueError(f"mantissa_bits must be one of {PRECISIONS}")
    return filter_report(dim, mantissa_bits, test).threshold_float


# Hand-computed table for the 3D insphere test with 53-bit mantissas, as
# (magnitude bound, error bound) per row X1..X10.
REFERENCE_INSPHERE3_53 = (
    (DyadicBound(1), DyadicBound(1, -54)),
    (DyadicBound(1), DyadicBound(3, -54)),
    (DyadicBound(2), DyadicBound(1, -51)),
    (DyadicBound(2), DyadicBound(5, -53)),
    (DyadicBound(4), DyadicBound(3, -51)),
    (DyadicBound(6), DyadicBound(5, -51)),
    (DyadicBound(3), DyadicBound(7, -53)),
    (DyadicBound(18), DyadicBound(111, -53)),
    (DyadicBound(36), DyadicBound(120, -52)),
    (DyadicBound(72), DyadicBound(129, -51)),
)
REFERENCE_THRESHOLD_53 = DyadicBound(129, -51)
REFERENCE_THRESHOLD_24 = DyadicBound(129, -22)


def reference_table(mantissa_bits: int) -> tuple[tuple[DyadicBound, DyadicBound], ...]:
    """Reference rows rescaled to the unit roundoff of ``mantissa_bits``."""
    shift = 53 - mantissa_bits
    return tuple((mag, DyadicBound(err.mantissa, err.exponent + shift)) for mag, err in REFERENCE_INSPHERE3_53)


def reference_deviations(report: FilterReport) -> list[tuple[str, TableRow, DyadicBound, DyadicBound]]:
    """Rows whose bounds differ from the reference table: (ref, row, ref mag, ref err)."""
    ref = reference_table(report.mantissa_bits)
    if len(report.rows) != len(ref):
        raise ValueError("report does not have the layout of the 3D insphere table")
    out = []
    for row, (mag, err) in zip(report.rows, ref):
        if row.mag != mag or row.err != err:
            out.append((row.label, row, mag, err))
    return out


def reference_notes(report: FilterReport) -> list[str]:
    notes = []
    for label, row, mag, err in reference_deviations(report):
        if label == "X4":
            notes.append(
                f"X4: literal product rule gives mag(X1)*err(X3) + mag(X3)*err(X1) + mag(X4)*u = {row.err}; "
                f"reference value {err} drops the mag(X3)*err(X1) term"
            )
        else:
            notes.append(f"{label}: engine {row.err} vs reference {err} (propagated from X4)")
    return notes
