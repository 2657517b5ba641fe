"""Command-line front end: ``mapentropy {verify,search,channel,haar}``.

Exit codes: 0 success, 1 failed checks, 2 usage or input error, 3 search found
a counterexample candidate that survived high-precision re-verification.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .channel import (
    Channel,
    ChannelFormatError,
    depolarizing,
    random_bistochastic,
    random_cptp,
)
from .entropy import map_entropy, min_output_entropy_2
from .haar import (
    sphere_average_closed_form,
    sphere_average_monte_carlo,
    twirl_form_report,
    twofold_twirl_closed_form,
)
from .search import SearchConfig, run_search
from .verify import SUITES, resolve_suites, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_COUNTEREXAMPLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _int_list(text: str) -> List[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 2:
        raise argparse.ArgumentTypeError("dimensions must be integers >= 2")
    return values


def _base(text: str) -> float:
    if text == "2":
        return 2.0
    if text == "e":
        return math.e
    raise argparse.ArgumentTypeError("base must be 2 or e")


def _unit(base: float) -> str:
    return "bits" if base == 2 else "nats"


def _manifest(argv: Sequence[str], config: dict, seed, counts: dict) -> dict:
    return {
        "command": ["mapentropy", *argv],
        "config": config,
        "seed": seed,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "counts": counts,
    }


def _write_json(path: Optional[str], obj) -> None:
    text = json.dumps(obj, indent=2)
    if path is None or path == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _manifest_path(out: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + ".manifest.json"))


# ---------------------------------------------------------------------------
# verify

def _parse_overrides(items: Sequence[str]) -> dict:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"tolerance override must look like NAME=VALUE, got {item!r}")
        if name not in SUITES:
            raise UsageError(f"unknown check name in tolerance override: {name}")
        try:
            out[name] = float(value)
        except ValueError:
            raise UsageError(f"invalid tolerance value {value!r}") from None
    return out


def _apply_override(report, tol: float) -> None:
    parts = report.details["parts"]
    for part in parts.values():
        part["tolerance"] = tol
    report.tolerance = tol
    report.margin = min(p["margin"] for p in parts.values())
    report.passed = report.margin >= -tol


def cmd_verify(args, argv) -> int:
    try:
        names = resolve_suites(args.suite)
        overrides = _parse_overrides(args.tolerance or [])
    except (KeyError, UsageError) as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    ns = list(args.n)
    if args.large and 4 not in ns:
        ns.append(4)
    reports = []
    for seed in args.seed:
        reports.extend(run_suite(names, ns, seed=seed, count=args.count, jobs=args.jobs,
                                 samples=args.samples, restarts=args.restarts, mc_count=args.mc_count))
    for r in reports:
        if r.check_name in overrides:
            _apply_override(r, overrides[r.check_name])
    failed = [r for r in reports if not r.passed]
    counts = {}
    for r in reports:
        c = counts.setdefault(r.check_name, {"total": 0, "failed": 0, "statistical": r.statistical})
        c["total"] += 1
        c["failed"] += int(not r.passed)
    for name in sorted(counts):
        c = counts[name]
        status = "PASS" if c["failed"] == 0 else "FAIL"
        print(f"{status} {name}: {c['total'] - c['failed']}/{c['total']}", file=sys.stderr)
    payload = [r.to_dict() for r in sorted(reports, key=lambda r: r.check_name)]
    _write_json(args.out, payload)
    if args.out and args.out != "-":
        config = {"suite": names, "n": ns, "count": args.count, "samples": args.samples,
                  "restarts": args.restarts, "tolerance_overrides": overrides, "jobs": args.jobs}
        _write_json(_manifest_path(args.out), _manifest(argv, config, args.seed, counts))
    return EXIT_OK if not failed else EXIT_FAIL


# ---------------------------------------------------------------------------
# search

def _search_config(args) -> SearchConfig:
    values = {}
    if args.config:
        try:
            values.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    for key, attr in (("n", "n"), ("k_phi", "k_phi"), ("k_psi", "k_psi"), ("trials", "trials"),
                      ("optimizer", "optimizer"), ("max_iters", "max_iters"),
                      ("slack_tolerance", "slack_tolerance"), ("master_seed", "seed")):
        v = getattr(args, attr)
        if v is not None:
            values[key] = v
    values["base"] = args.base
    try:
        return SearchConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid search config: {exc}") from None


def cmd_search(args, argv) -> int:
    try:
        cfg = _search_config(args)
        if args.minimize_from_worst < 0:
            raise UsageError("--minimize-from-worst must be non-negative")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    records, descents, summary = run_search(cfg, args.minimize_from_worst, args.jobs)
    summary["unit"] = _unit(cfg.base)
    lines = [json.dumps(r.to_dict()) for r in records + descents]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
        _write_json(_manifest_path(args.out),
                    _manifest(argv, summary["config"], cfg.master_seed,
                              {"trials": len(records), "descents": len(descents),
                               "counterexample_candidates": len(summary["counterexample_candidates"])}))
    if args.summary:
        _write_json(args.summary, summary)
    print(f"min slack: {summary['min_slack']:.12g} {summary['unit']} (seed {summary['min_slack_seed']}, "
          f"{summary['min_slack_kind']})", file=sys.stderr)
    print(f"counterexample candidates: {len(summary['counterexample_candidates'])}", file=sys.stderr)
    if not args.summary:
        _write_json(None, {k: v for k, v in summary.items() if k != "saturation"})
    return EXIT_COUNTEREXAMPLE if summary["counterexample_candidates"] else EXIT_OK


# ---------------------------------------------------------------------------
# channel

def _read_text(path: Optional[str]) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _load_channel(path: Optional[str]) -> Channel:
    try:
        return Channel.from_json(_read_text(path))
    except ChannelFormatError as exc:
        raise UsageError(f"malformed channel file: {exc}") from None


def _emit_channel(c: Channel, out: Optional[str], seed=None) -> None:
    text = c.to_json(seed)
    if out and out != "-":
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_channel(args, argv) -> int:
    try:
        if args.action == "make-depolarizing":
            _emit_channel(depolarizing(args.n, args.x), args.out)
        elif args.action == "random":
            make = random_bistochastic if args.bistochastic else random_cptp
            _emit_channel(make(args.n, args.k, args.seed), args.out, args.seed)
        elif args.action == "info":
            c = _load_channel(args.file)
            unit = _unit(args.base)
            info = {
                "dim_in": c.dim_in,
                "dim_out": c.dim_out,
                "kraus_operators": c.rank,
                "trace-preserving": c.tp,
                "unital": c.unital,
                "bi-stochastic": c.bistochastic,
                "unit": unit,
            }
            if c.tp:
                info["S^map"] = map_entropy(c, 1, args.base)
                info["S_2^map"] = map_entropy(c, 2, args.base)
            for key, value in info.items():
                if isinstance(value, bool):
                    value = str(value).lower()
                elif isinstance(value, float):
                    value = f"{value:.12g}"
                print(f"{key}: {value}")
        elif args.action == "entropy":
            c = _load_channel(args.file)
            if not c.tp:
                raise UsageError("map entropy needs a trace-preserving channel")
            s_min, witness = min_output_entropy_2(c, args.restarts, args.seed, args.base)
            _write_json(None, {
                "p": args.p,
                "S^map_p": map_entropy(c, args.p, args.base),
                "S_2^min_estimate": s_min,
                "S_2^min_note": "upper bound from multi-start purity ascent",
                "restarts": args.restarts,
                "seed": args.seed,
                "unit": _unit(args.base),
            })
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


# ---------------------------------------------------------------------------
# haar

def _load_matrix(path: str) -> np.ndarray:
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON matrix at line {exc.lineno}: {exc.msg}") from None
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        raise UsageError("matrix entries must be numbers or [re, im] pairs") from None
    if arr.ndim == 3 and arr.shape[2] == 2:
        arr = arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise UsageError(f"matrix must be square, got shape {arr.shape}")
    return arr.astype(np.complex128)


def _cplx(z):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def cmd_haar(args, argv) -> int:
    try:
        m = _load_matrix(args.matrix)
        if args.samples < 100:
            raise UsageError("--samples must be at least 100")
        if args.action == "sphere-avg":
            closed = sphere_average_closed_form(m)
            est = sphere_average_monte_carlo(m, args.samples, args.seed, args.jobs)
            agree = est.agrees_with(closed)
            _write_json(None, {"closed_form": closed, "monte_carlo": est.mean, "std_error": est.std_error,
                               "samples": est.samples, "seed": args.seed, "band_sigma": 4,
                               "verdict": "agree" if agree else "disagree"})
            return EXIT_OK if agree else EXIT_FAIL
        n = math.isqrt(m.shape[0])
        if n * n != m.shape[0] or n < 2:
            raise UsageError("twirl input must be n^2 x n^2 with n >= 2")
        rep = twirl_form_report(m, n, args.samples, args.seed, args.jobs)
        closed = twofold_twirl_closed_form(m, n)
        fixed = bool(np.abs(closed - m).max() <= 1e-12)
        supported = rep["supported"]
        if supported == ["corrected"]:
            verdict = "corrected form supported"
        elif supported == ["corrected", "printed"]:
            verdict = "both forms agree with Monte Carlo for this input"
        elif supported == ["printed"]:
            verdict = "printed form supported"
        else:
            verdict = "neither form supported"
        rep["fixed_point"] = fixed
        rep["verdict"] = verdict
        rep["closed_form"] = [[_cplx(z) for z in row] for row in closed]
        _write_json(None, rep)
        return EXIT_OK if "corrected" in supported else EXIT_FAIL
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapentropy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--base", type=_base, default=2.0, help="logarithm base: 2 (bits) or e (nats)")
    common.add_argument("--jobs", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("--suite", default="all", help=f"comma-separated subset of: {', '.join(sorted(SUITES))}")
    v.add_argument("--n", type=_int_list, default=[2, 3])
    v.add_argument("--seed", type=int, nargs="+", default=[0])
    v.add_argument("--count", type=int, default=20, help="random instances per check and dimension")
    v.add_argument("--samples", type=int, default=100_000, help="Monte Carlo samples")
    v.add_argument("--mc-count", type=int, default=5, help="channels per dimension for Monte Carlo checks")
    v.add_argument("--restarts", type=int, default=64)
    v.add_argument("--tolerance", action="append", metavar="NAME=VALUE")
    v.add_argument("--large", action="store_true", help="also run n=4")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("search", parents=[common], help="search for conjecture violations")
    s.add_argument("--config", help="JSON file with SearchConfig fields")
    s.add_argument("--n", type=int)
    s.add_argument("--k-phi", type=int)
    s.add_argument("--k-psi", type=int)
    s.add_argument("--trials", type=int)
    s.add_argument("--optimizer", choices=["random-only", "finite-difference-gradient", "simplex"])
    s.add_argument("--max-iters", type=int)
    s.add_argument("--slack-tolerance", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--minimize-from-worst", type=int, default=0)
    s.add_argument("--out", help="JSON-lines file for records")
    s.add_argument("--summary", help="JSON file for the summary report")
    s.set_defaults(func=cmd_search)

    c = sub.add_parser("channel", help="make and inspect channel files")
    csub = c.add_subparsers(dest="action", required=True)
    ci = csub.add_parser("info", parents=[common])
    ci.add_argument("file", nargs="?")
    cd = csub.add_parser("make-depolarizing", parents=[common])
    cd.add_argument("--n", type=int, required=True)
    cd.add_argument("--x", type=float, required=True)
    cd.add_argument("--out")
    cr = csub.add_parser("random", parents=[common])
    cr.add_argument("--n", type=int, required=True)
    cr.add_argument("--k", type=int, required=True)
    cr.add_argument("--bistochastic", action="store_true")
    cr.add_argument("--seed", type=int, default=0)
    cr.add_argument("--out")
    ce = csub.add_parser("entropy", parents=[common])
    ce.add_argument("file", nargs="?")
    ce.add_argument("--p", type=float, default=1.0)
    ce.add_argument("--restarts", type=int, default=64)
    ce.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_channel)

    h = sub.add_parser("haar", help="Haar-average closed forms vs Monte Carlo")
    hsub = h.add_subparsers(dest="action", required=True)
    for name in ("sphere-avg", "twirl"):
        hp = hsub.add_parser(name, parents=[common])
        hp.add_argument("matrix", help="JSON matrix file (entries numbers or [re, im]); '-' for stdin")
        hp.add_argument("--samples", type=int, default=100_000)
        hp.add_argument("--seed", type=int, default=0)
    h.set_defaults(func=cmd_haar)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args, argv)


if __name__ == "__main__":
    sys.exit(main())
