"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
import time
from typing import Sequence, TextIO

from . import bounds, error_engine, harness, predicates
from .exact import DomainError

EXIT_USAGE = 1
EXIT_DATA = 2
CI_ENV = "CERTPRED_CI"
PREDICATE_SCHEMA = "certpred.predicate/1"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_SPLIT = re.compile(r"[,\s]+")


def parse_coordinate(token: str) -> float:
    """Decimal or C99 hexadecimal float (``0x1.8p-3``)."""
    t = token.strip()
    try:
        if "0x" in t.lower():
            return float.fromhex(t)
        return float(t)
    except ValueError:
        raise ValueError(f"cannot parse coordinate {token!r}") from None


def parse_rows(stream: TextIO, per_row: int):
    """Yield ``(line_number, coordinates)``; blank lines and ``#`` comments are skipped."""
    for lineno, line in enumerate(stream, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        tokens = [t for t in _SPLIT.split(text) if t]
        if len(tokens) != per_row:
            raise DataError(f"line {lineno}: expected {per_row} coordinates, got {len(tokens)}")
        try:
            coords = [parse_coordinate(t) for t in tokens]
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        for c in coords:
            if not c == c or abs(c) > 1.0:
                raise DataError(f"line {lineno}: coordinate {c!r} out of [-1,1]")
        yield lineno, coords


def cmd_predicate(args, out: TextIO) -> int:
    dim = args.dim
    count = dim if args.test == "orientation" else dim + 1
    fn = predicates.orientation_predicate if args.test == "orientation" else predicates.insphere_predicate
    records = []
    for lineno, coords in parse_rows(args.input, count * dim):
        pts = [tuple(coords[i * dim:(i + 1) * dim]) for i in range(count)]
        if args.precision == 24:
            pts = predicates.round_to_single(pts)
        try:
            res = fn(pts, dim, args.precision)
        except DomainError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        records.append({
            "line": lineno,
            "sign": res.sign,
            "certificate": res.certificate.value,
            "float_value": res.float_value,
            "threshold": res.threshold,
        })
    if args.format == "json":
        json.dump({"schema": PREDICATE_SCHEMA, "test": args.test, "dim": dim,
                   "precision": args.precision, "results": records}, out, indent=2)
        out.write("\n")
    else:
        w = csv.writer(out, lineterminator="\n")
        if args.format == "csv":
            out.write(f"# schema: {PREDICATE_SCHEMA}\n")
            w.writerow(["line", "sign", "certificate", "float_value", "threshold"])
        for r in records:
            if args.format == "csv":
                w.writerow([r["line"], r["sign"], r["certificate"], repr(r["float_value"]), repr(r["threshold"])])
            else:
                out.write(f"{r['sign']:+d} {r['certificate']} {r['float_value']!r} {r['threshold']!r}\n")
    return 0


def format_report(report: error_engine.FilterReport, reference: list | None) -> str:
    lines = [f"forward error analysis, {report.mantissa_bits}-bit mantissa, u = 2^-{report.mantissa_bits + 1}"]
    u = error_engine.DyadicBound.pow2(-(report.mantissa_bits + 1)).to_fraction()
    header = f"{'ref':<5} {'description':<12} {'typical expression':<42} {'upper bound':>11}  {'error bound':<16} {'err/u':>6}"
    if reference is not None:
        header += "  reference (err/u)"
    lines += [header, "-" * len(header)]
    flagged = {label: (m, e) for label, _, m, e in reference or []}
    for row in report.rows:
        line = (f"{row.label:<5} {row.description:<12} {row.expression:<42} {str(row.mag):>11}  "
                f"{str(row.err):<16} {str(row.err.to_fraction() / u):>6}")
        if reference is not None:
            if row.label in flagged:
                ref_err = flagged[row.label][1]
                line += f"  * differs: {ref_err} ({ref_err.to_fraction() / u})"
            else:
                line += "  matches"
        lines.append(line)
    lines.append(f"threshold = {report.threshold} ~ {report.threshold_float:.6g} (rounded up: {report.threshold_float!r})")
    for note in report.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def cmd_bounds(args, out: TextIO) -> int:
    report = error_engine.filter_report(args.dim, args.precision, args.test)
    reference = None
    if args.test == "insphere" and args.dim == 3:
        reference = error_engine.reference_deviations(report)
    if args.format == "json":
        d = report.to_dict()
        d.update(schema="certpred.bounds/1", test=args.test, dim=args.dim)
        if reference is not None:
            d["reference_deviations"] = [{"ref": label, "engine": str(row.err), "reference": str(e)} for label, row, _, e in reference]
        json.dump(d, out, indent=2)
        out.write("\n")
    elif args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        out.write("# schema: certpred.bounds/1\n")
        w.writerow(["ref", "description", "upper_bound", "error_bound", "error_bound_float"])
        for r in report.rows:
            w.writerow([r.label, r.description, str(r.mag), str(r.err), repr(float(r.err))])
    else:
        out.write(format_report(report, reference))
    return 0


def constants_table() -> list[dict]:
    rows = []
    for d in range(1, bounds.MAX_DIM + 1):
        c = bounds.constants(d)
        ball = bounds.insphere_tail_bound(d, "ball")
        cube = bounds.insphere_tail_bound(d, "cube")
        rows.append({
            "delta": d,
            "v_delta": c.v_delta,
            "sigma_delta": c.sigma_delta,
            "psi_delta": c.psi_delta,
            "ball_log_coeff": ball.log_coeff,
            "ball_linear_coeff": ball.linear_coeff,
            "cube_log_coeff": cube.log_coeff,
            "cube_linear_coeff": cube.linear_coeff,
            "exponent": ball.exponent,
        })
    return rows


def cmd_constants(args, out: TextIO) -> int:
    rows = constants_table()
    if args.format == "json":
        json.dump({"schema": "certpred.constants/1", "rows": rows}, out, indent=2)
        out.write("\n")
    elif args.format == "csv":
        out.write("# schema: certpred.constants/1\n")
        w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    else:
        out.write(f"{'delta':>5} {'v':>9} {'sigma':>9} {'psi':>13}   {'ball bound':<26} {'cube bound':<30}\n")
        for r in rows:
            if r["delta"] == 1:
                bb = cb = f"{r['ball_linear_coeff']:.4g} V^(2/3)"
            else:
                bb = f"{r['ball_log_coeff']:.4g} V ln(1/V) + {r['ball_linear_coeff']:.4g} V"
                cb = f"{r['cube_log_coeff']:.4g} V ln(1/V) + {r['cube_linear_coeff']:.4g} V"
            out.write(f"{r['delta']:>5} {r['v_delta']:>9.4f} {r['sigma_delta']:>9.4f} {r['psi_delta']:>13.6g}   {bb:<26} {cb:<30}\n")
    return 0


def _parse_grid(text: str | None) -> tuple[float, ...]:
    if not text:
        return harness.default_v_grid()
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"bad --v-grid {text!r}") from None


def cmd_simulate(args, out: TextIO) -> int:
    seed = args.seed
    if seed is None:
        if os.environ.get(CI_ENV) == "1":
            raise UsageError(f"--seed is required when {CI_ENV}=1")
        seed = time.time_ns() % 2**64
        print(f"certpred: using seed {seed}", file=sys.stderr)
    try:
        cfg = harness.ExperimentConfig(args.dim, args.domain, args.samples, _parse_grid(args.v_grid), seed, args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.mode == "tail":
        rows = harness.run_tail_experiment(cfg)
        out.write(harness.rows_to_json(rows, cfg) + "\n" if args.format == "json" else harness.rows_to_csv(rows))
        return 0
    res = harness.run_filter_experiment(cfg, args.precision)
    record = {
        "fallback_rate": res.fallback_rate,
        "stderr": res.stderr,
        "fallbacks": res.fallbacks,
        "certified_wrong": res.certified_wrong,
        "samples": res.samples,
        "analytic_failure_bound": bounds.failure_probability(args.dim, args.precision, args.domain),
    }
    if args.format == "json":
        json.dump({"schema": "certpred.filter/1", "config": cfg.to_dict(), "precision": args.precision, **record}, out, indent=2)
        out.write("\n")
    else:
        out.write("# schema: certpred.filter/1\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(list(record))
        w.writerow([repr(v) if isinstance(v, float) else v for v in record.values()])
    return 0


def _dim(text: str) -> int:
    d = int(text)
    if not 1 <= d <= 6:
        raise argparse.ArgumentTypeError("dimension must be in [1, 6]")
    return d


def _positive(text: str) -> int:
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="certpred", description="Statically filtered geometric predicates and their failure bounds.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("predicate", help="evaluate predicates on point rows read from a file or stdin")
    sp.add_argument("input", nargs="?", type=argparse.FileType("r"), default=sys.stdin)
    sp.add_argument("--dim", type=_dim, required=True)
    sp.add_argument("--test", choices=["orientation", "insphere"], default="insphere")
    sp.add_argument("--precision", type=int, choices=[53, 24], default=53)
    sp.add_argument("--format", choices=["text", "csv", "json"], default="text")
    sp.set_defaults(func=cmd_predicate)

    sb = sub.add_parser("bounds", help="forward error table and static filter threshold")
    sb.add_argument("--dim", type=_dim, default=3)
    sb.add_argument("--precision", type=int, choices=[53, 24], default=53)
    sb.add_argument("--test", choices=["orientation", "insphere"], default="insphere")
    sb.add_argument("--format", choices=["text", "csv", "json"], default="text")
    sb.set_defaults(func=cmd_bounds)

    sc = sub.add_parser("constants", help="ball volumes, density constants and insphere tail bounds")
    sc.add_argument("--format", choices=["text", "csv", "json"], default="text")
    sc.set_defaults(func=cmd_constants)

    ss = sub.add_parser("simulate", help="Monte Carlo tail or filter-rate experiment")
    ss.add_argument("--dim", type=_dim, required=True)
    ss.add_argument("--domain", choices=["ball", "cube"], default="ball")
    ss.add_argument("--samples", type=_positive, default=100_000)
    ss.add_argument("--seed", type=int, default=None)
    ss.add_argument("--v-grid", default=None, help="comma-separated thresholds in (0,1)")
    ss.add_argument("--workers", type=_positive, default=1)
    ss.add_argument("--mode", choices=["tail", "filter"], default="tail")
    ss.add_argument("--precision", type=int, choices=[53, 24], default=53)
    ss.add_argument("--format", choices=["csv", "json"], default="csv")
    ss.set_defaults(func=cmd_simulate)
    return p


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"certpred: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"certpred: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def run(argv: Sequence[str]) -> tuple[int, str]:
    """Run the CLI in-process and capture stdout; usage errors return their exit code."""
    buf = io.StringIO()
    try:
        code = main(argv, buf)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_USAGE
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
