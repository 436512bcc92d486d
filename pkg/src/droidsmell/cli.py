"""Command-line interface.

Exit codes: 0 clean or below threshold, 1 findings at/above ``--fail-on``,
2 usage or configuration error, 3 input error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .analytics import DIMENSIONS, aggregate, export_csv, load_metadata_csv, scan_corpus
from .catalog import RULES_BY_ID, RULESETS
from .errors import DroidSmellError, UnknownDimension
from .report import SCHEMA_VERSION, ScanReport, exit_code, render_json, render_text
from .rules import SEVERITIES
from .scanner import scan_path

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE, EXIT_INPUT = 0, 1, 2, 3
INDEX_NAME = "index.json"


@dataclass
class Config:
    ruleset: str = "all"
    exclude_prefixes: list = field(default_factory=list)
    fail_on: str = "warning"
    format: str = "text"
    jobs: int = 1

    def __post_init__(self):
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.ruleset not in RULESETS:
            raise ValueError(f"unknown ruleset {self.ruleset!r}")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _config(args) -> Config:
    return Config(
        ruleset=args.ruleset,
        exclude_prefixes=list(getattr(args, "exclude_prefix", None) or []),
        fail_on=getattr(args, "fail_on", "warning"),
        format=getattr(args, "format", "text"),
        jobs=getattr(args, "jobs", 1),
    )


def _err(msg: str) -> None:
    print(f"droidsmell: error: {msg}", file=sys.stderr)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def cmd_scan(args) -> int:
    cfg = _config(args)
    report = scan_path(args.bundle, cfg.ruleset, cfg.exclude_prefixes)
    out = render_json(report) if cfg.format == "json" else render_text(report)
    sys.stdout.write(out)
    return exit_code(report, cfg.fail_on)


def run_batch(corpus, out_dir, cfg: Config) -> dict:
    """Scan a corpus into ``out_dir`` (one ``<bundle_id>.json`` each plus
    ``index.json``) and return the index."""
    result = scan_corpus(corpus, cfg.ruleset, cfg.jobs, cfg.exclude_prefixes)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for report in result.reports:
        name = f"{report.bundle_id}.json"
        (out / name).write_text(render_json(report), encoding="utf-8")
        entries.append({"bundle_id": report.bundle_id, "report": name,
                        "distinct_smells": report.distinct_smells})
    index = {
        "schema": SCHEMA_VERSION,
        "ruleset": cfg.ruleset,
        "exclude_prefixes": sorted(cfg.exclude_prefixes),
        "bundles": entries,
        "errors": [e.to_dict() for e in result.errors],
    }
    (out / INDEX_NAME).write_text(_dump(index), encoding="utf-8")
    return index


def cmd_batch(args) -> int:
    index = run_batch(args.corpus, args.out_dir, _config(args))
    print(f"{len(index['bundles'])} reports, {len(index['errors'])} errors -> {args.out_dir}",
          file=sys.stderr)
    for e in index["errors"]:
        print(f"  {e['bundle_id']}: {e['error']}: {e['message']}", file=sys.stderr)
    return EXIT_OK


def load_reports(report_dir) -> list:
    root = Path(report_dir)
    if not root.is_dir():
        raise DroidSmellError(f"{root}: not a directory")
    reports = []
    for path in sorted(root.glob("*.json")):
        if path.name == INDEX_NAME:
            continue
        try:
            reports.append(ScanReport.from_dict(json.loads(path.read_text(encoding="utf-8"))))
        except (ValueError, KeyError, TypeError) as exc:
            raise DroidSmellError(f"{path}: not a scan report ({exc})") from None
    return reports


def write_stats(report_dir, out_dir, metadata_csv=None) -> list:
    stats = aggregate(load_reports(report_dir), load_metadata_csv(metadata_csv) if metadata_csv else None)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for dim in DIMENSIONS:
        path = out / f"{dim}.csv"
        path.write_text(export_csv(stats, dim), encoding="utf-8")
        written.append(path)
    summary = {
        "n_bundles": stats.n_bundles,
        "skipped_no_metadata": stats.skipped_no_metadata,
        "files": [p.name for p in written],
    }
    (out / "summary.json").write_text(_dump(summary), encoding="utf-8")
    return written


def cmd_stats(args) -> int:
    if args.out_dir:
        written = write_stats(args.report_dir, args.out_dir, args.metadata)
        print(f"wrote {len(written)} CSV files to {args.out_dir}", file=sys.stderr)
        return EXIT_OK
    metadata = load_metadata_csv(args.metadata) if args.metadata else None
    stats = aggregate(load_reports(args.report_dir), metadata)
    sys.stdout.write(export_csv(stats, args.dimension))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    out = Path(args.out_dir)
    index = run_batch(args.corpus, out / "reports", _config(args))
    written = write_stats(out / "reports", out / "stats", args.metadata)
    print(f"{len(index['bundles'])} reports, {len(index['errors'])} errors; "
          f"{len(written)} CSV files in {out / 'stats'}", file=sys.stderr)
    return EXIT_OK


def cmd_rules(args) -> int:
    if args.rule_id is None:
        rules = RULESETS[args.ruleset]
        width = max(len(r.id) for r in rules)
        cat_width = max(len(r.category) for r in rules)
        print(f"{'ID'.ljust(width)}  {'CATEGORY'.ljust(cat_width)}  SEVERITY")
        for r in rules:
            print(f"{r.id.ljust(width)}  {r.category.ljust(cat_width)}  {r.severity}")
        return EXIT_OK
    rule = RULES_BY_ID.get(args.rule_id)
    if rule is None:
        _err(f"unknown rule id {args.rule_id!r}")
        return EXIT_USAGE
    ruleset = "core" if any(r.id == rule.id for r in RULESETS["core"]) else "extended"
    print(f"{rule.id}: {rule.smell_name}")
    print(f"  category:   {rule.category}")
    print(f"  severity:   {rule.severity}")
    print(f"  ruleset:    {ruleset}")
    print(f"  citation:   {rule.citation}")
    print(f"  detects:    {rule.description}")
    print(f"  risk:       {rule.risk}")
    print(f"  mitigation: {rule.mitigation}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="droidsmell", description="Detect security code smells in decoded Android apps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, jobs=False):
        p.add_argument("--ruleset", choices=sorted(RULESETS), default="all")
        p.add_argument("--exclude-prefix", action="append", metavar="PKG",
                       help="suppress code under this package prefix (repeatable)")
        if jobs:
            p.add_argument("--jobs", type=_positive_int, default=1)

    p = sub.add_parser("scan", help="scan one decoded bundle")
    p.add_argument("bundle")
    common(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--fail-on", choices=SEVERITIES, default="warning")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("batch", help="scan every bundle under a corpus directory")
    p.add_argument("corpus")
    p.add_argument("out_dir")
    common(p, jobs=True)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("stats", help="aggregate batch reports into CSV")
    p.add_argument("report_dir")
    p.add_argument("--dimension", choices=DIMENSIONS, default="smell")
    p.add_argument("--metadata", metavar="CSV", help="metadata CSV joined on package name")
    p.add_argument("--out-dir", help="write every dimension as <dimension>.csv here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("pipeline", help="batch + stats for every dimension in one go")
    p.add_argument("corpus")
    p.add_argument("out_dir")
    common(p, jobs=True)
    p.add_argument("--metadata", metavar="CSV")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("rules", help="list rules or explain one")
    p.add_argument("rule_id", nargs="?")
    p.add_argument("--ruleset", choices=sorted(RULESETS), default="all")
    p.set_defaults(func=cmd_rules)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnknownDimension as exc:
        _err(str(exc))
        return EXIT_USAGE
    except DroidSmellError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except OSError as exc:
        _err(f"{exc.filename or ''}: {exc.strerror or exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
