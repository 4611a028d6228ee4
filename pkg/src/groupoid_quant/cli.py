"""Command line entry point: ``groupoid-quant run <suite>``, ``list-suites``, ``describe``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import DESCRIPTIONS, SUITES, ExperimentConfig, run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="groupoid-quant")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment suite")
    run.add_argument("suite", choices=SUITES)
    run.add_argument("--config", help="JSON file with ExperimentConfig fields")
    run.add_argument("--seed", type=int)
    run.add_argument("--out-dir")
    run.add_argument("--grid", type=int, help="grid points (suite default when omitted)")
    run.add_argument("--hbar-decades", type=float)
    run.add_argument("--corrupt-sign", action="store_true", default=None,
                     help="flip the sign of j_H (fault injection)")
    sub.add_parser("list-suites", help="print the suite names")
    d = sub.add_parser("describe", help="describe a suite and its default configuration")
    d.add_argument("suite", choices=SUITES)
    return p


def _config(args) -> ExperimentConfig:
    doc: dict = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        if not isinstance(doc, dict):
            raise ValueError("config must be a JSON object")
    if doc.get("suite", args.suite) != args.suite:
        raise ValueError("config suite does not match the command line")
    doc["suite"] = args.suite
    for key in ("seed", "out_dir", "grid", "hbar_decades", "corrupt_sign"):
        v = getattr(args, key)
        if v is not None:
            doc[key] = v
    return ExperimentConfig.from_dict(doc)


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    if args.command == "list-suites":
        print("\n".join(SUITES))
        return EXIT_OK
    if args.command == "describe":
        print(f"{args.suite}: {DESCRIPTIONS[args.suite]}")
        print(json.dumps(ExperimentConfig(args.suite).to_dict(), indent=2))
        return EXIT_OK
    try:
        cfg = _config(args)
    except (OSError, ValueError, TypeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    res, seconds = run_suite(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in res.files.items():
        (out / name).write_text(text)
    report = {"suite": cfg.suite, "config": cfg.to_dict(), "passed": res.passed,
              "checks": res.checks, "failed": res.failed, "metrics": res.metrics,
              "seconds": seconds, "files": sorted(res.files)}
    (out / "report.json").write_text(json.dumps(report, indent=2, default=float))
    print(f"{cfg.suite}: {'PASS' if res.passed else 'FAIL'} ({seconds:.1f}s) {res.summary}")
    for name in res.failed:
        print(f"  failed: {name}")
    return EXIT_OK if res.passed else EXIT_FAIL
