"""Corpus scanning and prevalence statistics over many scan reports."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .bundle import AppMetadata, discover_corpus
from .errors import DroidSmellError, EmptyCorpus, MalformedMetadata, UnknownDimension
from .report import ScanReport
from .scanner import scan_path

DOWNLOAD_BUCKETS = (
    ("<1k", 0, 1_000),
    ("1k-50k", 1_000, 50_000),
    ("50k-1M", 50_000, 1_000_000),
    (">1M", 1_000_000, math.inf),
)
DIMENSIONS = ("smell", "count", "api-level", "category", "downloads", "stars", "release-year")
UNKNOWN = "unknown"


@dataclass(frozen=True)
class ErrorEntry:
    bundle_id: str
    error: str
    message: str

    def to_dict(self) -> dict:
        return {"bundle_id": self.bundle_id, "error": self.error, "message": self.message}


@dataclass
class CorpusScan:
    reports: list
    errors: list


def _scan_one(path: Path, ruleset: str, exclude_prefixes: tuple):
    try:
        return scan_path(path, ruleset, exclude_prefixes)
    except DroidSmellError as exc:
        return ErrorEntry(path.name, type(exc).__name__, str(exc))
    except Exception as exc:  # noqa: BLE001 - one broken bundle must not abort the corpus
        return ErrorEntry(path.name, type(exc).__name__, str(exc))


def scan_corpus(root, ruleset: str = "all", parallelism: int = 1,
                exclude_prefixes: Iterable[str] = ()) -> CorpusScan:
    """Scan every bundle under ``root``.

    Results come back sorted by bundle id whatever ``parallelism`` is;
    bundles that fail to load become :class:`ErrorEntry` items.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    paths = discover_corpus(root)
    work = partial(_scan_one, ruleset=ruleset, exclude_prefixes=tuple(exclude_prefixes))
    if parallelism == 1 or len(paths) <= 1:
        results = [work(p) for p in paths]
    else:
        with ProcessPoolExecutor(max_workers=min(parallelism, len(paths))) as pool:
            results = list(pool.map(work, paths))
    reports = [r for r in results if isinstance(r, ScanReport)]
    errors = [r for r in results if isinstance(r, ErrorEntry)]
    reports.sort(key=lambda r: r.bundle_id)
    errors.sort(key=lambda e: e.bundle_id)
    return CorpusScan(reports, errors)


@dataclass
class GroupStats:
    rule_ids: tuple
    n: int = 0
    presence_counts: dict = field(default_factory=dict)
    sum_distinct: int = 0

    def add(self, report: ScanReport) -> None:
        self.n += 1
        for rid in self.rule_ids:
            if report.presence.get(rid):
                self.presence_counts[rid] = self.presence_counts.get(rid, 0) + 1
        self.sum_distinct += report.distinct_smells

    def prevalence(self, rule_id: str) -> float:
        return self.presence_counts.get(rule_id, 0) / self.n

    @property
    def mean_distinct(self) -> float:
        return self.sum_distinct / self.n


@dataclass
class CorpusStats:
    n_bundles: int
    rule_ids: tuple
    presence_counts: dict
    smell_count_partition: dict
    by_api_level: dict
    by_category: dict
    by_download_bucket: dict
    by_star_bucket: dict
    by_release_year: dict
    skipped_no_metadata: int

    @property
    def prevalence(self) -> dict:
        return {rid: self.presence_counts[rid] / self.n_bundles for rid in self.rule_ids}


def download_bucket(downloads: int) -> str:
    for label, lo, hi in DOWNLOAD_BUCKETS:
        if lo <= downloads < hi:
            return label
    raise ValueError(f"negative download count {downloads}")


def star_bucket(stars: float) -> str:
    return f"{math.floor(stars * 2) / 2:.1f}"


def aggregate(reports, metadata: Optional[Mapping[str, AppMetadata]] = None) -> CorpusStats:
    """Fold scan reports into corpus statistics.

    Presence is counted per bundle first and divided once at the end, so
    fractions are exact functions of integer counts. Metadata embedded in
    a report wins over the ``metadata`` mapping (keyed by package name).
    """
    reports = list(reports)
    if not reports:
        raise EmptyCorpus("no scan reports to aggregate")
    metadata = metadata or {}
    rule_ids = tuple(sorted({rid for r in reports for rid in r.presence}))
    presence_counts = {rid: 0 for rid in rule_ids}
    partition = {k: 0 for k in range(len(rule_ids) + 1)}
    groups = {name: {} for name in ("api", "category", "downloads", "stars", "year")}
    skipped = 0

    def group(name, key, report):
        g = groups[name].get(key)
        if g is None:
            g = groups[name][key] = GroupStats(rule_ids)
        g.add(report)

    for report in reports:
        for rid in rule_ids:
            if report.presence.get(rid):
                presence_counts[rid] += 1
        partition[report.distinct_smells] += 1
        group("api", report.api_level if report.api_level is not None else UNKNOWN, report)
        meta = report.metadata or (metadata.get(report.package) if report.package else None)
        if meta is None:
            skipped += 1
            continue
        group("category", meta.category, report)
        group("downloads", download_bucket(meta.downloads), report)
        group("stars", star_bucket(meta.stars), report)
        group("year", meta.release_date.year, report)

    return CorpusStats(
        n_bundles=len(reports),
        rule_ids=rule_ids,
        presence_counts=presence_counts,
        smell_count_partition=partition,
        by_api_level=groups["api"],
        by_category=groups["category"],
        by_download_bucket=groups["downloads"],
        by_star_bucket=groups["stars"],
        by_release_year=groups["year"],
        skipped_no_metadata=skipped,
    )


def load_metadata_csv(path) -> dict:
    """Read ``package,category,downloads,stars,release_date,apk_size_bytes``."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                meta = AppMetadata.from_dict(row)
            except MalformedMetadata as exc:
                raise MalformedMetadata(f"{path}:{lineno}: {exc}") from None
            out[meta.package] = meta
    return out


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _api_key(k):
    return (1, 0) if k == UNKNOWN else (0, k)


def _download_key(k):
    return [label for label, _, _ in DOWNLOAD_BUCKETS].index(k)


def export_csv(stats: CorpusStats, dimension: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if dimension == "smell":
        w.writerow(["rule_id", "bundles", "prevalence"])
        for rid in stats.rule_ids:
            w.writerow([rid, stats.presence_counts[rid], _fmt(stats.presence_counts[rid] / stats.n_bundles)])
    elif dimension == "count":
        w.writerow(["distinct_smells", "bundles", "fraction"])
        for k in sorted(stats.smell_count_partition):
            c = stats.smell_count_partition[k]
            w.writerow([k, c, _fmt(c / stats.n_bundles)])
    elif dimension in ("api-level", "category", "downloads", "stars", "release-year"):
        table, key_name, sort_key = {
            "api-level": (stats.by_api_level, "api_level", _api_key),
            "category": (stats.by_category, "category", None),
            "downloads": (stats.by_download_bucket, "downloads", _download_key),
            "stars": (stats.by_star_bucket, "stars", float),
            "release-year": (stats.by_release_year, "release_year", None),
        }[dimension]
        w.writerow([key_name, "bundles", "sum_distinct", "mean_distinct", *stats.rule_ids])
        for key in sorted(table, key=sort_key):
            g = table[key]
            w.writerow([key, g.n, g.sum_distinct, _fmt(g.mean_distinct),
                        *(_fmt(g.prevalence(rid)) for rid in stats.rule_ids)])
    else:
        raise UnknownDimension(f"unknown dimension {dimension!r}; choose from {', '.join(DIMENSIONS)}")
    return buf.getvalue()
