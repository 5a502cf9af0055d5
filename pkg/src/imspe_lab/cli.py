"""Command-line interface: ``imspe-lab <command> ...``.

Every command that writes files also writes ``<output>.manifest.json`` next
to its main output. ``imspe-lab replay <manifest>`` re-runs the recorded
command and, for the same tool version, rewrites identical bytes.

Exit codes: 0 success, 2 usage, 3 parse, 4 numerical, 5 nonconvergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from gmpy2 import mpfr

from . import __version__
from .designio import format_design, read_design, write_design
from .errors import DesignParseError, IllConditionedError, ImspeLabError, UnsupportedDesignError
from .highprec import PrecisionContext, to_text
from .imspe import imspe
from .kernel import CovarianceParams
from .search import STREAM_BASELINE, SearchConfig, multistart, random_baseline, random_design
from .studies import (CLASSIFY_TOL, TWIN_THRESHOLD, classify, hue_grid, loglog_slope,
                      phase_sweep, richardson_limit, tornado_data, twin_profile)

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERICAL, EXIT_NONCONVERGED = 0, 2, 3, 4, 5
DEFAULT_PRINT_DIGITS = 20
DEFAULT_WORK_DIGITS = 60
GUARD_DIGITS = 10
SUCCESS_FRACTION = 0.99


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    command: str
    config: dict
    artifact_paths: list = field(default_factory=list)
    tool_version: str = __version__

    def write(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        return cls(**data)


def manifest_path(output) -> str:
    p = Path(output)
    return str(p.with_name(p.stem + ".manifest.json"))


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str) -> list:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _logspace(text: str) -> list:
    parts = text.split(",")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError("expected LO,HI,COUNT") from None
    if len(parts) != 3 or lo <= 0 or hi <= 0 or n < 1:
        raise argparse.ArgumentTypeError("expected LO,HI,COUNT with positive bounds")
    return np.logspace(math.log10(lo), math.log10(hi), n).tolist()


def _theta(args, D=None) -> CovarianceParams:
    theta = tuple(args.theta)
    if D is not None and len(theta) != D:
        raise CliError(f"--theta needs {D} values, got {len(theta)}", EXIT_USAGE)
    try:
        return CovarianceParams(theta, args.sigma_z2)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None


def _ctx(args) -> PrecisionContext:
    work = max(args.digits + GUARD_DIGITS, DEFAULT_WORK_DIGITS) if args.digits else DEFAULT_WORK_DIGITS
    try:
        return PrecisionContext(digits=work, max_digits=max(args.max_digits, work))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None


def _print_digits(args) -> int:
    return args.digits or DEFAULT_PRINT_DIGITS


def _fmt(x, args) -> str:
    return to_text(x, _print_digits(args))


def _load_design(args, path=None):
    try:
        return read_design(path or args.design, twin_barycenter=args.twin_barycenter,
                           twin_delta=args.twin_delta)
    except OSError as exc:
        raise CliError(f"cannot read design file: {exc}", EXIT_PARSE) from None


def _search_config(args) -> SearchConfig:
    return SearchConfig(coord_tol=args.coord_tol, max_sweeps=args.max_sweeps, rng_seed=args.seed,
                        twin_merge_tol=args.merge_tol, extrapolate=not args.no_extrapolate)


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _finish(args, outputs, argv):
    """Write the manifest for ``outputs`` (first one names the sidecar)."""
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    config["argv"] = list(argv)
    RunManifest(args.command, config, [str(p) for p in outputs]).write(manifest_path(outputs[0]))


def _status_exit(n_ok: int, n_total: int) -> int:
    return EXIT_OK if n_total and n_ok / n_total >= SUCCESS_FRACTION else EXIT_NUMERICAL


def _float_text(v: float, args) -> str:
    if math.isnan(v):
        return "nan"
    return f"{v:.{_print_digits(args) - 1}e}"


# ---------------------------------------------------------------------------
# commands


def cmd_eval(args, argv):
    design = _load_design(args)
    params = _theta(args, design.D)
    res = imspe(design, params, _ctx(args))
    print(_fmt(res.imspe, args))
    if args.out:
        _write_json(args.out, {
            "imspe": _fmt(res.imspe, args),
            "digits_used": res.digits_used,
            "escalations": res.escalations,
            "min_pivot": to_text(res.min_pivot, 6),
            "digits_lost": round(res.digits_lost, 3),
            "theta": list(params.theta),
            "sigma_z2": params.sigma_z2,
            "design": format_design(design),
        })
        _finish(args, [args.out], argv)
    return EXIT_OK


def cmd_search(args, argv):
    if args.n < 1 or args.d < 1:
        raise CliError("--n and --d must be >= 1", EXIT_USAGE)
    params = _theta(args, args.d)
    cfg = _search_config(args)
    best = multistart(args.starts, params, cfg, _ctx(args), n_points=args.n, jobs=args.jobs)
    label = None
    if args.n == 4 and args.d == 2:
        label = classify(best.design, args.classify_tol, args.twin_threshold).value
    out_json = args.out + ".json"
    out_csv = args.out + ".csv"
    _write_json(out_json, {
        "imspe": _fmt(best.imspe, args),
        "converged": best.converged,
        "sweeps": best.sweeps,
        "start_index": best.start_index,
        "label": label,
        "trace": [[s, _fmt(v, args)] for s, v in best.trace],
    })
    write_design(out_csv, best.design)
    _finish(args, [out_json, out_csv], argv)
    print(_fmt(best.imspe, args), label or "")
    if not best.converged:
        print("search did not converge; partial results written", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_sweep(args, argv):
    grid = [(t1, t2) for t1 in args.theta1 for t2 in args.theta2]
    cfg = _search_config(args)
    base = CovarianceParams((1.0, 1.0), args.sigma_z2)
    records = phase_sweep(grid, base, cfg, _ctx(args), n_starts=args.starts, tol=args.classify_tol,
                          twin_threshold=args.twin_threshold, jobs=args.jobs)
    header = ["theta1", "theta2", "imspe", "label"] + [f"p{i + 1}_x{k + 1}" for i in range(4) for k in range(2)]
    header.append("status")
    rows = []
    for r in records:
        coords = (["nan"] * 8 if r.design is None
                  else [repr(float(v)) for v in r.design.points.ravel()])
        value = "nan" if r.imspe is None else _fmt(r.imspe, args)
        rows.append([repr(r.theta[0]), repr(r.theta[1]), value, r.label.value] + coords + [r.status])
    _write_csv(args.out, header, rows)
    _finish(args, [args.out], argv)
    n_ok = sum(1 for r in records if r.status == "ok")
    return _status_exit(n_ok, len(records))


def _reference(args, params):
    if args.reference is not None:
        return args.reference
    if args.reference_design:
        design = read_design(args.reference_design)
        return imspe(design, params, _ctx(args)).imspe
    raise CliError("give --reference or --reference-design", EXIT_USAGE)


def cmd_baseline(args, argv):
    params = _theta(args, args.d)
    ref = _reference(args, params)
    report = random_baseline(args.samples, params, ref, args.seed, _ctx(args),
                             n_points=args.n, jobs=args.jobs)
    rows = []
    for r in report.records:
        if r.status == "ok":
            rows.append([r.index, _fmt(r.imspe, args), _fmt(r.gap, args), "ok"])
        else:
            rows.append([r.index, "nan", "nan", r.status])
    _write_csv(args.out, ["sample_index", "imspe", "gap", "status"], rows)
    _finish(args, [args.out], argv)
    min_gap = "nan" if report.min_gap is None else to_text(report.min_gap, 6)
    print(f"evaluated {report.evaluated} of {report.n_samples}; below reference: "
          f"{report.count_below}; min gap {min_gap}")
    return _status_exit(report.evaluated, report.n_samples)


def cmd_profile(args, argv):
    base = _load_design(args)
    params = _theta(args, base.D)
    if base.twin is None:
        raise CliError("profile needs a design with a twin pair", EXIT_USAGE)
    deltas = sorted(args.deltas)
    ctx = _ctx(args)
    rows, points = [], []
    for d in deltas:
        try:
            (p,) = twin_profile(base, params, args.axis, [d], ctx)
            points.append(p)
            rows.append([args.axis, _float_text(d, args), _fmt(p.imspe, args), "ok"])
        except IllConditionedError as exc:
            rows.append([args.axis, _float_text(d, args), "nan", f"error:{type(exc).__name__}"])
    _write_csv(args.out, ["axis", "delta", "imspe", "status"], rows)
    _finish(args, [args.out], argv)
    if len(points) >= 3:
        ds = [p.delta for p in points]
        vals = [p.imspe for p in points]
        limit = richardson_limit(ds[:3], vals[:3])
        print(f"limit {_fmt(limit, args)} slope {loglog_slope(ds, vals, limit):.6f}")
    return _status_exit(len(points), len(deltas))


def cmd_hue(args, argv):
    base = _load_design(args)
    params = _theta(args, base.D)
    if base.twin is None:
        raise CliError("hue needs a design with a twin pair", EXIT_USAGE)
    if args.grid_n < 2:
        raise CliError("--grid-n must be >= 2", EXIT_USAGE)
    ref = args.reference if args.reference is not None else imspe(base, params, _ctx(args)).imspe
    nodes = hue_grid(base, params, args.grid_n, ref, _ctx(args), jobs=args.jobs)
    rows = [[_float_text(n.u, args), _float_text(n.v, args), _float_text(n.gap, args), n.status]
            for n in nodes]
    _write_csv(args.out, ["u", "v", "gap", "status"], rows)
    _finish(args, [args.out], argv)
    return _status_exit(sum(1 for n in nodes if n.status == "ok"), len(nodes))


@dataclass
class _StoredRecord:
    index: int
    design: object
    imspe: object
    status: str


@dataclass
class _StoredReport:
    records: list


def cmd_tornado(args, argv):
    man_path = manifest_path(args.baseline)
    try:
        manifest = RunManifest.read(man_path)
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"cannot read baseline manifest {man_path}: {exc}", EXIT_PARSE) from None
    if manifest.command != "baseline":
        raise CliError(f"{man_path} is not a baseline manifest", EXIT_PARSE)
    cfg = manifest.config
    records = []
    with open(args.baseline, newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                index = int(row["sample_index"])
                status = row["status"]
                value = mpfr(row["imspe"], 256) if status == "ok" else None
            except (KeyError, ValueError) as exc:
                raise CliError(f"{args.baseline}: line {lineno}: {exc}", EXIT_PARSE) from None
            design = random_design(cfg["n"], cfg["d"], cfg["seed"], index, STREAM_BASELINE)
            records.append(_StoredRecord(index, design, value, status))
    ref = args.reference if args.reference is not None else cfg.get("reference")
    if ref is None and cfg.get("reference_design"):
        params = CovarianceParams(tuple(cfg["theta"]), cfg["sigma_z2"])
        ref = imspe(read_design(cfg["reference_design"]), params).imspe
    if ref is None:
        raise CliError("give --reference", EXIT_USAGE)
    pairs = tornado_data(_StoredReport(records), mpfr(ref, 256))
    ok_iter = iter(pairs)
    rows = []
    for rec in records:
        if rec.status == "ok":
            d, gap = next(ok_iter)
            status = "ok" if math.isfinite(gap) else "nonpositive_gap"
            rows.append([_float_text(d, args), _float_text(gap, args), status])
        else:
            rows.append(["nan", "nan", rec.status])
    _write_csv(args.out, ["d", "gap", "status"], rows)
    _finish(args, [args.out], argv)
    return EXIT_OK


def cmd_replay(args, argv):
    try:
        manifest = RunManifest.read(args.manifest)
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"cannot read manifest: {exc}", EXIT_PARSE) from None
    if manifest.tool_version != __version__:
        print(f"warning: manifest written by version {manifest.tool_version}, running {__version__}",
              file=sys.stderr)
    return main(manifest.config["argv"])


# ---------------------------------------------------------------------------
# parser


def _common(p, *, design=False, search=False, reference=False, theta=True):
    if theta:
        p.add_argument("--theta", type=_floats, required=True,
                       metavar="T1,T2,...", help="covariance parameters")
    p.add_argument("--sigma-z2", type=float, default=1.0, help="process variance (default 1)")
    p.add_argument("--digits", type=int, default=None,
                   help=f"printed significant digits (default {DEFAULT_PRINT_DIGITS}); also raises "
                        "working precision to this plus guard digits")
    p.add_argument("--max-digits", type=int, default=960, help="precision escalation ceiling")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default: $IMSPE_LAB_JOBS or 1)")
    if design:
        p.add_argument("design", help="design CSV")
        p.add_argument("--twin-barycenter", type=_floats, default=None, metavar="B1,B2,...")
        p.add_argument("--twin-delta", type=_floats, default=None, metavar="D1,D2,...")
    if search:
        p.add_argument("--starts", type=int, default=8)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--coord-tol", type=float, default=1e-10)
        p.add_argument("--max-sweeps", type=int, default=200)
        p.add_argument("--merge-tol", type=float, default=1e-3)
        p.add_argument("--no-extrapolate", action="store_true")
        p.add_argument("--classify-tol", type=float, default=CLASSIFY_TOL)
        p.add_argument("--twin-threshold", type=float, default=TWIN_THRESHOLD)
    if reference:
        p.add_argument("--reference", default=None, help="reference IMSPE (decimal text)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imspe-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="IMSPE of a design file")
    _common(p, design=True)
    p.add_argument("--out", default=None, help="JSON result path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("search", help="multistart coordinate-descent search")
    _common(p, search=True)
    p.add_argument("--n", type=int, required=True, help="number of points")
    p.add_argument("--d", type=int, required=True, help="number of factors")
    p.add_argument("--out", default="search", help="output prefix for .json and .csv")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("sweep", help="phase sweep over a theta grid (N=4, D=2)")
    _common(p, search=True, theta=False)
    p.add_argument("--theta1", type=_floats, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--theta2", type=_floats)
    g.add_argument("--theta2-logspace", type=_logspace, dest="theta2", metavar="LO,HI,COUNT")
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline", help="uniform-random designs against a reference IMSPE")
    _common(p, reference=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--reference-design", default=None, help="design CSV whose IMSPE is the reference")
    p.add_argument("--out", default="baseline.csv")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("profile", help="IMSPE against twin half-separation")
    _common(p, design=True)
    p.add_argument("--axis", type=int, choices=(1, 2), required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--deltas", type=_floats)
    g.add_argument("--delta-logspace", type=_logspace, dest="deltas", metavar="LO,HI,COUNT")
    p.add_argument("--out", default="profile.csv")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("hue", help="log gap over the twin position grid")
    _common(p, design=True, reference=True)
    p.add_argument("--grid-n", type=int, required=True)
    p.add_argument("--out", default="hue.csv")
    p.set_defaults(func=cmd_hue)

    p = sub.add_parser("tornado", help="(d, gap) pairs from a baseline CSV and its manifest")
    p.add_argument("baseline", help="baseline CSV written by the baseline command")
    p.add_argument("--reference", default=None)
    p.add_argument("--digits", type=int, default=None)
    p.add_argument("--out", default="tornado.csv")
    p.set_defaults(func=cmd_tornado)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "digits", None) is not None and args.digits < 1:
        print("error: --digits must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DesignParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except IllConditionedError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except UnsupportedDesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ImspeLabError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
