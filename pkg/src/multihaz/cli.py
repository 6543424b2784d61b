"""Command-line entry point.

Exit codes: 0 success, 2 usage or config error, 3 I/O error, 4 data-invariant
violation, 5 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import InvariantError, ValidationError
from .data import build_risk_table, load_cohort, write_cohort
from .dgp import PRESETS, ConfigError, DGPConfig, generate_lattice, observe, preset
from .estimators import KINDS, collapsibility_gap, conditional_hazard, hazard_curve, icp_hazard, summarize
from .multiverse import estimator_oracle_check, multiverse_summary, read_lattice, verify_bounds, write_lattice

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DATA, EXIT_VERIFY = 0, 2, 3, 4, 5
SEED_ENV = "MULTIHAZ_SEED"


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise CommandError(f"{SEED_ENV} must be an integer, got {raw!r}", EXIT_CONFIG) from None


def _resolve_config(args) -> DGPConfig:
    overrides = {}
    seed = _seed(args)
    if seed is not None:
        overrides["seed"] = seed
    if getattr(args, "m", None) is not None:
        overrides["m"] = args.m
    try:
        if args.config and args.preset:
            raise ConfigError("give either --config or --preset, not both")
        if args.config:
            cfg = DGPConfig.from_json(args.config)
            return cfg.replace(**overrides).validate() if overrides else cfg
        return preset(args.preset or "baseline", **overrides)
    except OSError as exc:
        raise CommandError(f"cannot read config: {exc}", EXIT_IO) from None
    except (ValidationError, TypeError, ValueError) as exc:
        raise CommandError(f"invalid config: {exc}", EXIT_CONFIG) from None


def _write_manifest(out: Path, command: str, started: float, config=None, seed=None, inputs=(), outputs=()) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "duration_seconds": time.perf_counter() - started,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    cfg = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lattice = generate_lattice(cfg)
    cohort = observe(lattice, cfg)
    paths = [out / "lattice.csv", out / "cohort.csv", out / "config.json"]
    write_lattice(lattice, paths[0])
    write_cohort(cohort, paths[1])
    cfg.to_json(paths[2])
    _write_manifest(out, "simulate", started, cfg.to_dict(), cfg.seed, [args.config] if args.config else [], paths)
    print(f"wrote {', '.join(str(p) for p in paths)}")
    return EXIT_OK


def _parse_kinds(raw: str) -> list[str]:
    kinds = [k.strip().lower() for k in raw.split(",") if k.strip()]
    if not kinds:
        raise CommandError("--kinds must name at least one hazard kind", EXIT_CONFIG)
    if "all" in kinds:
        return ["marginal", "cct", "icp"]
    unknown = [k for k in kinds if k not in KINDS]
    if unknown:
        raise CommandError(f"unknown kind(s) {', '.join(unknown)}; choose from {', '.join(KINDS)} or all", EXIT_CONFIG)
    return list(dict.fromkeys(kinds))


def cmd_estimate(args) -> int:
    started = time.perf_counter()
    kinds = _parse_kinds(args.kinds)
    schema = {k: v for k, v in (("id", args.col_id), ("arm", args.col_arm), ("stratum", args.col_stratum),
                                ("time", args.col_time), ("event", args.col_event)) if v}
    try:
        cohort = load_cohort(args.cohort, schema)
    except OSError as exc:
        raise CommandError(f"cannot read cohort: {exc}", EXIT_IO) from None
    except ValidationError as exc:
        raise CommandError(f"unparseable cohort: {exc}", EXIT_DATA) from None
    table = build_risk_table(cohort)
    tau = float(cohort.grid[-1]) if args.tau is None else args.tau
    arms = sorted(set(args.arm)) if args.arm else [0, 1]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"tau": tau, "m": cohort.m, "times": cohort.grid.tolist(), "curves": []}
    outputs = []
    for kind in kinds:
        for z in arms:
            if kind == "conditional":
                strata = [args.stratum] if args.stratum is not None else list(cohort.strata)
                try:
                    curves = [conditional_hazard(table, z, x) for x in strata]
                except ValidationError as exc:
                    raise CommandError(str(exc), EXIT_CONFIG) from None
            else:
                curves = [hazard_curve(table, kind, z)]
            for curve in curves:
                stem = f"{kind}_arm{z}" if curve.stratum is None else f"{kind}_{curve.stratum}_arm{z}"
                path = out / f"{stem}.csv"
                curve.to_csv(path)
                outputs.append(path)
                try:
                    s = summarize(curve, tau)
                except ValidationError as exc:
                    raise CommandError(str(exc), EXIT_CONFIG) from None
                entry = curve.to_dict() | {"cumulative": s.cumulative, "average": s.average, "n_times": s.n_times, "file": path.name}
                summary["curves"].append(entry)
    spath = out / "summary.json"
    spath.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    outputs.append(spath)
    _write_manifest(out, "estimate", started, {"kinds": kinds, "arms": arms, "tau": tau}, None, [args.cohort], outputs)
    for entry in summary["curves"]:
        label = entry["kind"] + (f"[{entry['stratum']}]" if "stratum" in entry else "")
        print(f"{label:>16} arm {entry['arm']}: cumulative={entry['cumulative']:.6g} average={entry['average']:.6g}")
    return EXIT_OK


def cmd_multiverse(args) -> int:
    started = time.perf_counter()
    try:
        lattice = read_lattice(args.lattice)
    except OSError as exc:
        raise CommandError(f"cannot read lattice: {exc}", EXIT_IO) from None
    except ValidationError as exc:
        raise CommandError(f"unparseable lattice: {exc}", EXIT_DATA) from None
    try:
        lattice.check()
    except InvariantError as exc:
        raise CommandError(str(exc), EXIT_DATA) from None
    tau = float(lattice.times[-1]) if args.tau is None else args.tau
    try:
        report = multiverse_summary(lattice, tau)
    except ValidationError as exc:
        raise CommandError(str(exc), EXIT_CONFIG) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "multiverse_report.json"
    report.to_json(path)
    _write_manifest(out, "multiverse", started, {"tau": tau}, None, [args.lattice], [path])
    for key, g in report.groups.items():
        print(f"{str(key):>7}: cumulative={g.cumulative:.6g} average={g.average:.6g} actual_risk={g.actual_risk:.6g} holds={g.holds}")
    return EXIT_OK if report.holds else EXIT_VERIFY


def _seed_list(args) -> list[int]:
    base = _seed(args) or 0
    raw = args.seeds
    if "-" in raw:
        lo, hi = raw.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    if "," in raw:
        return [int(s) for s in raw.split(",")]
    return list(range(base, base + int(raw)))


def verify_seed(cfg: DGPConfig, tolerance: float) -> dict:
    """Run simulate, estimate, multiverse and oracle checks for one configured seed."""
    lattice = generate_lattice(cfg)
    cohort = observe(lattice, cfg)
    table = build_risk_table(cohort)
    bounds = verify_bounds(lattice)

    collapsible = True
    if table.J and len(table.strata) >= 2:
        for z in (0, 1):
            collapsible &= bool(np.all(np.abs(collapsibility_gap(table, z).icp) <= 1e-12))
    elif table.J:
        for z in (0, 1):
            collapsible &= bool(np.array_equal(icp_hazard(table, z).increments, hazard_curve(table, "marginal", z).increments))

    oracle = estimator_oracle_check(lattice, tolerance)
    equality = None
    if lattice.J == 1:
        rep = multiverse_summary(lattice, lattice.times[0])
        equality = all(g.cumulative == g.average == g.actual_risk for g in rep.groups.values())
    return {
        "seed": cfg.seed,
        "bounds": bounds.passed,
        "bound_failures": list(bounds.failures[:5]),
        "collapsibility": collapsible,
        "oracle": oracle.passed,
        "oracle_max_discrepancy": oracle.max_discrepancy,
        "equality": equality,
        "passed": bounds.passed and collapsible and oracle.passed and equality is not False,
    }


def cmd_verify(args) -> int:
    started = time.perf_counter()
    base = _resolve_config(args)
    try:
        seeds = _seed_list(args)
    except ValueError:
        raise CommandError(f"--seeds must be a count, a range a-b, or a comma list; got {args.seeds!r}", EXIT_CONFIG) from None
    if args.tolerance < 0:
        raise CommandError("--tolerance must be non-negative", EXIT_CONFIG)
    results = [verify_seed(base.replace(seed=s), args.tolerance) for s in seeds]
    passed = all(r["passed"] for r in results)
    aggregate = {
        "passed": passed,
        "seeds": len(results),
        "bounds_failures": sum(not r["bounds"] for r in results),
        "collapsibility_failures": sum(not r["collapsibility"] for r in results),
        "oracle_failures": sum(not r["oracle"] for r in results),
        "equality_failures": sum(r["equality"] is False for r in results),
        "max_oracle_discrepancy": max((r["oracle_max_discrepancy"] for r in results), default=0.0),
        "tolerance": args.tolerance,
        "results": results,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "verify_report.json"
        path.write_text(json.dumps(aggregate, indent=2) + "\n", encoding="utf-8")
        _write_manifest(out, "verify", started, base.to_dict(), seeds, [args.config] if args.config else [], [path])
    for key in ("bounds", "collapsibility", "oracle", "equality"):
        fails = aggregate[f"{key}_failures"]
        print(f"{key:>15}: {'FAIL' if fails else 'pass'} ({fails} of {len(results)} seeds failing)")
    print(f"max oracle discrepancy {aggregate['max_oracle_discrepancy']:.4g} (tolerance {args.tolerance})")
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_presets(args) -> int:
    for name, factory in PRESETS.items():
        doc = (factory.__doc__ or "").strip().splitlines()[0]
        print(f"{name:>15}  {doc}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CommandError(f"{self.prog}: error: {message}", EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multihaz", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"multihaz {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_config(p):
        p.add_argument("--config", help="DGP config JSON")
        p.add_argument("--preset", choices=sorted(PRESETS), help="named DGP preset")
        p.add_argument("--seed", type=int, help=f"seed (falls back to ${SEED_ENV})")
        p.add_argument("--m", type=int, help="override sample size")

    p = sub.add_parser("simulate", help="generate a lattice and the observed cohort")
    add_config(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="hazard curves from a cohort CSV")
    p.add_argument("cohort")
    p.add_argument("--arm", type=int, choices=(0, 1), action="append")
    p.add_argument("--tau", type=float)
    p.add_argument("--kinds", default="all", help="comma list of marginal,cct,icp,conditional or 'all'")
    p.add_argument("--stratum", help="stratum for conditional curves (default: every stratum)")
    p.add_argument("--out", required=True)
    for col in ("id", "arm", "stratum", "time", "event"):
        p.add_argument(f"--col-{col}", metavar="NAME", help=f"CSV header holding {col}")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("multiverse", help="multiverse report for a lattice CSV")
    p.add_argument("lattice")
    p.add_argument("--tau", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_multiverse)

    p = sub.add_parser("verify", help="seed sweep of bound, collapsibility and oracle checks")
    add_config(p)
    p.add_argument("--seeds", default="50", help="count (from --seed), range a-b, or comma list")
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("presets", help="list DGP presets")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CommandError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
