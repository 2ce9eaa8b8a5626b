"""Monte Carlo tail-probability and filter-rate experiments.

Trials are grouped in fixed blocks of ``BLOCK`` consecutive trial indices.
Block ``b`` draws from ``Philox(key=seed).jumped(b)``, a counter-based stream
of its own, so the partition of blocks among worker processes cannot change
any result.  Per-block results are integer counters that are summed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bounds, error_engine, predicates
from .bounds import Domain

BLOCK = 1 << 15
SCHEMA = "certpred.experiment/1"
CSV_HEADER = ("V", "empirical", "stderr", "analytic_ball", "analytic_cube", "samples")


def default_v_grid() -> tuple[float, ...]:
    """24 log-spaced thresholds per decade from 1e-8 up to (not including) 1e-1."""
    return tuple(10.0 ** (-8 + k / 24) for k in range(7 * 24))


@dataclass(frozen=True)
class ExperimentConfig:
    delta: int
    domain: Domain = Domain.BALL
    samples: int = 100_000
    v_grid: tuple[float, ...] = field(default_factory=default_v_grid)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not 1 <= self.delta <= bounds.MAX_DIM:
            raise ValueError(f"delta must be in [1, {bounds.MAX_DIM}]")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        grid = tuple(sorted(float(v) for v in self.v_grid))
        if not grid or any(not 0 < v < 1 for v in grid):
            raise ValueError("v_grid values must lie in (0, 1)")
        object.__setattr__(self, "v_grid", grid)
        object.__setattr__(self, "domain", Domain(self.domain))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["domain"] = self.domain.value
        d["v_grid"] = list(self.v_grid)
        return d


@dataclass(frozen=True)
class ExperimentRow:
    v: float
    empirical: float
    stderr: float
    analytic_ball: float
    analytic_cube: float
    samples: int


@dataclass(frozen=True)
class FilterOutcome:
    samples: int
    fallbacks: int
    certified_wrong: int

    @property
    def fallback_rate(self) -> float:
        return self.fallbacks / self.samples

    @property
    def stderr(self) -> float:
        p = self.fallback_rate
        return math.sqrt(p * (1 - p) / self.samples)


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed).jumped(block))


def sample_points(rng: np.random.Generator, n: int, delta: int, domain: Domain | str) -> np.ndarray:
    """``n`` uniform points of shape ``(n, delta)`` in the cube or ball.

    Coordinates are ``2u - 1`` with ``u`` a 53-bit uniform, hence exact
    multiples of ``2**-52``.  Ball points are drawn by rejection from the cube.
    """
    domain = Domain(domain)
    if domain is Domain.CUBE:
        return 2.0 * rng.random((n, delta)) - 1.0
    out = np.empty((n, delta))
    filled = 0
    while filled < n:
        want = n - filled
        cand = 2.0 * rng.random((int(want * 2**delta / bounds.ball_volume(delta)) + 16, delta)) - 1.0
        keep = cand[np.einsum("ij,ij->i", cand, cand) <= 1.0][:want]
        out[filled:filled + len(keep)] = keep
        filled += len(keep)
    return out


def sample_point(rng: np.random.Generator, delta: int, domain: Domain | str) -> tuple[float, ...]:
    return tuple(sample_points(rng, 1, delta, domain)[0].tolist())


def _sample_instances(seed: int, block: int, n: int, delta: int, domain: Domain) -> np.ndarray:
    rng = block_rng(seed, block)
    return sample_points(rng, n * (delta + 1), delta, domain).reshape(n, delta + 1, delta)


def _blocks(samples: int) -> list[tuple[int, int]]:
    return [(b, min(BLOCK, samples - b * BLOCK)) for b in range((samples + BLOCK - 1) // BLOCK)]


def exact_abs_insphere(coords: np.ndarray) -> np.ndarray:
    values, scale = predicates.exact_insphere_many(coords)
    return predicates.exact_abs_float(values, scale, coords.shape[2] + 2)


def _tail_block(args) -> np.ndarray:
    seed, block, n, delta, domain, grid = args
    absval = np.sort(exact_abs_insphere(_sample_instances(seed, block, n, delta, domain)))
    return np.searchsorted(absval, np.asarray(grid), side="right").astype(np.int64)


def _filter_block(args) -> tuple[int, int]:
    seed, block, n, delta, domain, precision = args
    coords = _sample_instances(seed, block, n, delta, domain)
    if precision == 24:
        coords = coords.astype(np.float32).astype(np.float64)
    approx = predicates.insphere_float_many(coords, precision)
    thr = error_engine.threshold(delta, precision, "insphere")
    certified = np.abs(approx) > thr
    values, _ = predicates.exact_insphere_many(coords)
    wrong = certified & (np.sign(approx).astype(np.int8) != predicates.exact_signs(values))
    return int(n - certified.sum()), int(wrong.sum())


def _run(fn, tasks: list, workers: int) -> list:
    if workers == 1 or len(tasks) == 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def run_tail_experiment(cfg: ExperimentConfig) -> list[ExperimentRow]:
    """Empirical P(|insphere| <= V) over ``cfg.v_grid`` from exact values."""
    tasks = [(cfg.seed, b, n, cfg.delta, cfg.domain, cfg.v_grid) for b, n in _blocks(cfg.samples)]
    counts = np.zeros(len(cfg.v_grid), dtype=np.int64)
    for c in _run(_tail_block, tasks, cfg.workers):
        counts += c
    ball = bounds.insphere_tail_bound(cfg.delta, Domain.BALL)
    cube = bounds.insphere_tail_bound(cfg.delta, Domain.CUBE)
    rows = []
    for v, k in zip(cfg.v_grid, counts.tolist()):
        p = k / cfg.samples
        rows.append(ExperimentRow(v, p, math.sqrt(p * (1 - p) / cfg.samples), ball(v), cube(v), cfg.samples))
    return rows


def run_filter_experiment(cfg: ExperimentConfig, precision: int = 53) -> FilterOutcome:
    """Fallback rate of the static insphere filter, checked against exact signs."""
    if precision not in error_engine.PRECISIONS:
        raise ValueError("precision must be 53 or 24")
    tasks = [(cfg.seed, b, n, cfg.delta, cfg.domain, precision) for b, n in _blocks(cfg.samples)]
    fallbacks = wrong = 0
    for f, w in _run(_filter_block, tasks, cfg.workers):
        fallbacks += f
        wrong += w
    return FilterOutcome(cfg.samples, fallbacks, wrong)


def log_log_slope(rows: list[ExperimentRow], v_min: float, v_max: float) -> float:
    """Least-squares slope of log(empirical) against log(V) over nonzero rows in range."""
    pts = [(math.log(r.v), math.log(r.empirical)) for r in rows if v_min <= r.v <= v_max and r.empirical > 0]
    if len(pts) < 2:
        raise ValueError("not enough nonzero rows in range to fit a slope")
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def rows_to_csv(rows: list[ExperimentRow]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([repr(r.v), repr(r.empirical), repr(r.stderr), repr(r.analytic_ball), repr(r.analytic_cube), r.samples])
    return buf.getvalue()


def rows_to_json(rows: list[ExperimentRow], cfg: ExperimentConfig) -> str:
    payload = {
        "schema": SCHEMA,
        "config": cfg.to_dict(),
        "rows": [dict(zip(CSV_HEADER, (r.v, r.empirical, r.stderr, r.analytic_ball, r.analytic_cube, r.samples))) for r in rows],
    }
    return json.dumps(payload, indent=2)
