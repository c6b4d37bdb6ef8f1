"""Command-line entry point.

Subcommands:
    run      evaluate the strategies in a config file
    report   render collected results as a comparison table
    check    compare a result summary against a reference value
    cache    inspect or clear a response cache directory
    presets  list or export the bundled experiment configs
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

from .errors import SquarebenchError
from .reporting import LAYOUTS, render_report
from .runner import compare_to_reference, load_config, load_result_summary, run_config
from .backend import CacheStore

PRESETS_DIR = Path(__file__).parent / "presets"
DATA_DIR = Path(__file__).parent / "data"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squarebench")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiments in a config file")
    p_run.add_argument("--config", required=True, help="experiment config (JSON)")
    p_run.add_argument("--strategy", help="run only the strategy with this name or kind")
    p_run.add_argument(
        "--allow-partial",
        action="store_true",
        help="keep going when individual records fail at the backend",
    )

    p_report = sub.add_parser("report", help="render results as a comparison table")
    p_report.add_argument("--layout", required=True, choices=LAYOUTS)
    p_report.add_argument("--inputs", required=True, help="directory of result_*.json files")
    p_report.add_argument("--out", help="where to write report.txt/report.csv (default: --inputs)")

    p_check = sub.add_parser("check", help="compare a result against a reference value")
    p_check.add_argument("--input", required=True, help="a result_*.json file")
    p_check.add_argument("--reference", required=True, type=float)
    p_check.add_argument("--tol", required=True, type=float)

    p_cache = sub.add_parser("cache", help="inspect or clear a response cache")
    cache_sub = p_cache.add_subparsers(dest="cache_command", required=True)
    for name, help_text in (("stats", "entry count and size"), ("clear", "delete all entries")):
        p = cache_sub.add_parser(name, help=help_text)
        p.add_argument("--dir", required=True)

    p_presets = sub.add_parser("presets", help="bundled experiment configs")
    presets_sub = p_presets.add_subparsers(dest="presets_command", required=True)
    presets_sub.add_parser("list", help="show bundled config names")
    p_export = presets_sub.add_parser("export", help="copy bundled configs to a directory")
    p_export.add_argument("--out", required=True)
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    results = run_config(
        config, strategy_filter=args.strategy, allow_partial=args.allow_partial
    )
    report = Path(config.output_dir) / "report.txt"
    print(report.read_text(encoding="utf-8"), end="")
    print(f"results written to {config.output_dir}")
    return 0


def _cmd_report(args) -> int:
    inputs = Path(args.inputs)
    paths = sorted(inputs.glob("result_*.json"))
    if not paths:
        print(f"error: no result_*.json files in {inputs}", file=sys.stderr)
        return 2
    summaries = [load_result_summary(p) for p in paths]
    text, csv_text = render_report(summaries, args.layout)
    out = Path(args.out) if args.out else inputs
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(text, encoding="utf-8")
    (out / "report.csv").write_text(csv_text, encoding="utf-8")
    print(text, end="")
    print(f"report written to {out}")
    return 0


def _cmd_check(args) -> int:
    summary = load_result_summary(args.input)
    verdict = compare_to_reference(summary, args.reference, args.tol)
    status = "PASS" if verdict.passed else "FAIL"
    print(
        f"{status}: aggregate={verdict.aggregate_percent:.3f} "
        f"reference={verdict.reference:.3f} tol={verdict.tolerance:.3f} "
        f"diff={verdict.difference:.3f}"
    )
    return 0 if verdict.passed else 1


def _cmd_cache(args) -> int:
    store = CacheStore(args.dir)
    if args.cache_command == "stats":
        stats = store.stats()
        print(f"entries: {stats['entries']}")
        print(f"bytes: {stats['bytes']}")
    else:
        removed = store.clear()
        print(f"removed {removed} entries")
    return 0


def _preset_names():
    return sorted(
        str(p.relative_to(PRESETS_DIR)) for p in PRESETS_DIR.glob("*/*.json")
    )


def _cmd_presets(args) -> int:
    if args.presets_command == "list":
        for name in _preset_names():
            print(name)
        return 0
    out = Path(args.out)
    for name in _preset_names():
        target = out / name
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(PRESETS_DIR / name, target)
        print(f"wrote {target}")
    # The demo config runs out of the box against this bundled dataset; the
    # others need dataset_path pointed at real exports first.
    mini = out / "demo" / "datasets" / "mini10.jsonl"
    mini.parent.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(DATA_DIR / "mini10.jsonl", mini)
    print(f"wrote {mini}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {
        "run": _cmd_run,
        "report": _cmd_report,
        "check": _cmd_check,
        "cache": _cmd_cache,
        "presets": _cmd_presets,
    }
    try:
        return handlers[args.command](args)
    except SquarebenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
