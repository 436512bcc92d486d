"""Scan reports and their JSON / text renderings."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .bundle import AppMetadata, Diagnostic
from .rules import SEVERITIES, SEVERITY_RANK, Finding

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ScanReport:
    bundle_id: str
    ruleset: str
    findings: tuple[Finding, ...]
    presence: dict
    diagnostics: tuple[Diagnostic, ...] = ()
    api_level: Optional[int] = None
    package: Optional[str] = None
    metadata: Optional[AppMetadata] = None
    stats: dict = field(default=None)

    def __post_init__(self):
        ordered = tuple(sorted(self.findings, key=lambda f: f.sort_key() + (f.evidence, f.severity)))
        object.__setattr__(self, "findings", ordered)
        object.__setattr__(self, "stats", compute_stats(ordered, self.presence))

    @property
    def distinct_smells(self) -> int:
        return sum(1 for v in self.presence.values() if v)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "bundle_id": self.bundle_id,
            "ruleset": self.ruleset,
            "package": self.package,
            "api_level": self.api_level,
            "metadata": self.metadata.to_dict() if self.metadata else None,
            "findings": [f.to_dict() for f in self.findings],
            "presence": dict(self.presence),
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "stats": self.stats,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScanReport":
        if data.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        meta = data.get("metadata")
        return cls(
            bundle_id=data["bundle_id"],
            ruleset=data["ruleset"],
            findings=tuple(Finding.from_dict(f) for f in data["findings"]),
            presence=dict(data["presence"]),
            diagnostics=tuple(Diagnostic(d["path"], d["line"], d["message"]) for d in data["diagnostics"]),
            api_level=data.get("api_level"),
            package=data.get("package"),
            metadata=AppMetadata.from_dict(meta) if meta else None,
        )


def compute_stats(findings, presence) -> dict:
    by_rule = Counter(f.rule_id for f in findings)
    by_severity = Counter(f.severity for f in findings)
    return {
        "by_rule": {rid: by_rule.get(rid, 0) for rid in sorted(presence)},
        "by_severity": {s: by_severity.get(s, 0) for s in SEVERITIES},
        "total": len(findings),
    }


def render_json(report: ScanReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def parse_json(text: str) -> ScanReport:
    return ScanReport.from_dict(json.loads(text))


def render_text(report: ScanReport) -> str:
    lines = []
    for f in report.findings:
        lines.append(f"{f.severity} {f.rule_id} {f.path}:{f.line} {f.evidence}")
    if not report.findings:
        lines.append("no findings")
    lines.append("")
    lines.append(f"# {report.bundle_id} (ruleset {report.ruleset}, api level "
                 f"{report.api_level if report.api_level is not None else 'unknown'})")
    width = max((len(r) for r in report.presence), default=0)
    for rid in sorted(report.presence):
        lines.append(f"{rid.ljust(width)}  {report.stats['by_rule'][rid]}")
    sev = report.stats["by_severity"]
    lines.append(f"total {report.stats['total']}: "
                 + ", ".join(f"{s} {sev[s]}" for s in SEVERITIES))
    lines.append(f"distinct smells {report.distinct_smells}/{len(report.presence)}")
    for d in report.diagnostics:
        lines.append(f"diagnostic {d.path}:{d.line} {d.message}")
    return "\n".join(lines) + "\n"


def exit_code(report: ScanReport, fail_on: str) -> int:
    threshold = SEVERITY_RANK[fail_on]
    return 1 if any(SEVERITY_RANK[f.severity] >= threshold for f in report.findings) else 0
