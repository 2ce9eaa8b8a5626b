"""Independent oracles and instance generators shared by the test modules."""

from __future__ import annotations

import itertools
import struct
from fractions import Fraction
from functools import lru_cache

import numpy as np

from certpred import error_engine, predicates


def bits_to_fraction(x: float) -> Fraction:
    """Decode an IEEE 754 binary64 bit pattern into an exact rational."""
    (bits,) = struct.unpack("<Q", struct.pack("<d", x))
    sign = -1 if bits >> 63 else 1
    expo = (bits >> 52) & 0x7FF
    frac = bits & ((1 << 52) - 1)
    if expo == 0x7FF:
        raise ValueError("not finite")
    if expo == 0:
        value = Fraction(frac, 1 << 1074)
    else:
        value = Fraction((1 << 52) | frac) * Fraction(2) ** (expo - 1075)
    return sign * value


def leibniz_det(matrix) -> Fraction:
    n = len(matrix)
    total = Fraction(0)
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = Fraction(1)
        for i, j in enumerate(perm):
            term *= matrix[i][j]
        total += -term if inversions % 2 else term
    return total


def oracle_insphere(points) -> Fraction:
    rows = [[bits_to_fraction(c) for c in p] for p in points]
    return leibniz_det([r + [sum(c * c for c in r)] for r in rows])


def oracle_orientation(points) -> Fraction:
    return leibniz_det([[bits_to_fraction(c) for c in p] for p in points])


@lru_cache(maxsize=None)
def lattice_spheres(dim: int, max_center: int = 4) -> tuple[np.ndarray, ...]:
    """Integer points (origin excluded) on spheres through the origin with integer centers.

    Only spheres carrying at least ``dim + 1`` such points are kept.  ``P`` lies
    on the sphere with center ``C`` through the origin iff ``|P|^2 = 2 P.C``.
    """
    reach = 2 * max_center
    axis = np.arange(-2 * reach, 2 * reach + 1)
    grid = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), -1).reshape(-1, dim)
    grid = grid[np.any(grid != 0, axis=1)]
    norms = np.einsum("ij,ij->i", grid, grid)
    spheres = []
    for center in itertools.product(range(-max_center, max_center + 1), repeat=dim):
        c = np.array(center)
        if not c.any():
            continue
        on = grid[norms == 2 * grid @ c]
        if len(on) >= dim + 1:
            spheres.append(on)
    return tuple(spheres)


def cospherical_instances(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` exactly cospherical instances (with the origin) of shape ``(n, dim+1, dim)``."""
    spheres = lattice_spheres(dim)
    out = np.empty((n, dim + 1, dim))
    for k in range(n):
        pts = spheres[rng.integers(len(spheres))]
        pick = rng.choice(len(pts), dim + 1, replace=False)
        out[k] = pts[pick]
    reach = max(np.abs(s).max() for s in spheres)
    scale = 2.0 ** -int(np.ceil(np.log2(reach)))
    # extra power-of-two shrink keeps the configurations exactly cospherical
    shrink = 2.0 ** -rng.integers(0, 4, size=(n, 1, 1))
    return out * scale * shrink


def perturb_ulps(coords: np.ndarray, rng: np.random.Generator, max_ulps: int = 16) -> np.ndarray:
    """Move one random coordinate per instance by 0..max_ulps ulps in a random direction."""
    out = coords.copy()
    n = out.shape[0]
    flat = out.reshape(n, -1)
    col = rng.integers(flat.shape[1], size=n)
    steps = rng.integers(0, max_ulps + 1, size=n)
    target = np.where(rng.random(n) < 0.5, -np.inf, np.inf)
    idx = np.arange(n)
    for s in range(max_ulps):
        live = steps > s
        flat[idx[live], col[live]] = np.nextafter(flat[idx[live], col[live]], target[live])
    return np.clip(out, -1.0, 1.0)


def uniform_instances(dim: int, n: int, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
    count = dim + 1 if count is None else count
    return 2.0 * rng.random((n, count, dim)) - 1.0


def error_bound_violations(coords: np.ndarray, precision: int) -> int:
    """Count instances where |float - exact| exceeds the derived insphere threshold.

    The comparison is exact: everything is scaled to integers.
    """
    dim = coords.shape[2]
    if precision == 24:
        coords = coords.astype(np.float32).astype(np.float64)
    approx = predicates.insphere_float_many(coords, precision)
    values, scale = predicates.exact_insphere_many(coords)
    shift = scale * (dim + 2)
    thr = error_engine.filter_report(dim, precision).threshold
    limit = thr.mantissa << (thr.exponent + shift)
    scaled = np.ldexp(approx, shift)
    fine = np.isfinite(scaled) & (scaled == np.trunc(scaled))
    violations = 0
    if fine.any():
        approx_int = np.array([int(v) for v in scaled[fine]], dtype=object)
        violations += int(np.count_nonzero(np.abs(approx_int - values[fine]) > limit))
    for k in np.flatnonzero(~fine):
        exact_value = Fraction(int(values[k]), 1 << shift)
        if abs(Fraction(approx[k]) - exact_value) > thr.to_fraction():
            violations += 1
    return violations


def certified_wrong(coords: np.ndarray, precision: int) -> tuple[int, int]:
    """(certified-but-wrong count, certified count) for the insphere filter."""
    dim = coords.shape[2]
    if precision == 24:
        coords = coords.astype(np.float32).astype(np.float64)
    approx = predicates.insphere_float_many(coords, precision)
    certified = np.abs(approx) > error_engine.threshold(dim, precision)
    values, _ = predicates.exact_insphere_many(coords)
    wrong = certified & (np.sign(approx).astype(np.int8) != predicates.exact_signs(values))
    return int(wrong.sum()), int(certified.sum())


def near_sphere_instances(dim: int, n: int, rng: np.random.Generator, log_range=(-17, -8)) -> np.ndarray:
    """Instances whose last point sits a log-uniform relative distance off the sphere.

    This pushes |insphere| toward the filter threshold from both sides.
    """
    out = []
    while sum(len(o) for o in out) < n:
        base = 0.5 * (2.0 * rng.random((n, dim, dim)) - 1.0)
        rhs = np.einsum("nij,nij->ni", base, base)
        ok = np.abs(np.linalg.det(base)) > 1e-3
        base, rhs = base[ok], rhs[ok]
        center = 0.5 * np.linalg.solve(base, rhs[..., None])[..., 0]
        radius = np.linalg.norm(center, axis=1)
        direction = rng.normal(size=center.shape)
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        eps = 10.0 ** rng.uniform(*log_range, size=len(center)) * np.where(rng.random(len(center)) < 0.5, -1, 1)
        last = center + (radius * (1 + eps))[:, None] * direction
        inst = np.concatenate([base, last[:, None, :]], axis=1)
        out.append(inst[np.all(np.abs(inst) <= 1.0, axis=(1, 2))])
    return np.concatenate(out)[:n]
