"""Rule engine: composable matchers over (manifest, code index, bundle).

A rule's predicate is a matcher, i.e. a callable taking a
:class:`ScanContext` and returning :class:`Hit` objects. The matchers here
are deliberately small so the catalog in :mod:`droidsmell.catalog` reads
as data.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional
from urllib.parse import urlsplit

from .bundle import AppBundle
from .errors import DuplicateRuleId
from .manifest import MANIFEST_PATH, Manifest
from .smali import CodeIndex, Instruction, SmaliClass, SmaliMethod

SEVERITIES = ("info", "warning", "critical")
SEVERITY_RANK = {s: i for i, s in enumerate(SEVERITIES)}
CATEGORIES = (
    "Insufficient Attack Protection",
    "Security Invalidation",
    "Broken Access Control",
    "Sensitive Data Exposure",
    "Lax Input Validation",
)
EVIDENCE_LIMIT = 200
LOOPBACK_HOSTS = {"127.0.0.1", "localhost", "10.0.2.2"}
LOCAL_ASSET_ROOTS = ("/android_asset/", "/android_res/")


def truncate_evidence(text: str) -> str:
    text = text.strip()
    if len(text) <= EVIDENCE_LIMIT:
        return text
    return text[:EVIDENCE_LIMIT - 3] + "..."


@dataclass(frozen=True)
class Hit:
    path: str
    line: int
    evidence: str
    element: Optional[str] = None
    severity: Optional[str] = None


@dataclass(frozen=True)
class Finding:
    rule_id: str
    bundle_id: str
    path: str
    line: int
    evidence: str
    severity: str
    element: Optional[str] = None

    @property
    def location(self) -> tuple:
        return (self.path, self.line, self.element or "")

    def sort_key(self) -> tuple:
        return (self.rule_id,) + self.location

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "bundle_id": self.bundle_id,
            "path": self.path,
            "line": self.line,
            "element": self.element,
            "evidence": self.evidence,
            "severity": self.severity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Finding":
        return cls(d["rule_id"], d["bundle_id"], d["path"], d["line"], d["evidence"],
                   d["severity"], d.get("element"))


@dataclass(frozen=True)
class ScanContext:
    bundle: AppBundle
    manifest: Manifest
    index: CodeIndex


Matcher = Callable[[ScanContext], Iterable[Hit]]


@dataclass(frozen=True)
class Rule:
    id: str
    smell_name: str
    category: str
    severity: str
    predicate: Matcher
    citation: str
    description: str = ""
    risk: str = ""
    mitigation: str = ""
    scope: str = "code"  # "code", "manifest" or "mixed"

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"{self.id}: unknown category {self.category!r}")
        if self.severity not in SEVERITIES:
            raise ValueError(f"{self.id}: unknown severity {self.severity!r}")


# ---------------------------------------------------------------- matchers

def _instructions(ctx: ScanContext):
    for cls, method in ctx.index.methods():
        for idx, instr in enumerate(method.instructions):
            yield cls, method, idx, instr


def _code_hit(cls: SmaliClass, instr: Instruction, severity=None) -> Hit:
    return Hit(cls.source_path, instr.line, instr.raw_text, severity=severity)


CallTest = Callable[[SmaliMethod, int, Instruction], bool]


def calls(
    targets: dict,
    *,
    descriptor: Optional[str] = None,
    subclasses_of: Iterable[str] = (),
    test: Optional[CallTest] = None,
    severity: Optional[Callable[[SmaliMethod, int, Instruction], Optional[str]]] = None,
) -> Matcher:
    """Match invokes whose target is in ``targets``.

    ``targets`` maps a class name (or a ``"prefix*"`` pattern, or ``"*"``
    for any class) to a set of method names, or ``None`` for any method.
    Classes listed in ``subclasses_of`` also match through their direct
    subclasses found in the bundle.
    """
    subclass_roots = tuple(subclasses_of)

    def names_for(ctx: ScanContext, class_name: str):
        if class_name in targets:
            return targets[class_name]
        for key, names in targets.items():
            if key == "*" or (key.endswith("*") and class_name.startswith(key[:-1])):
                return names
        for root in subclass_roots:
            if class_name in ctx.index.subclasses.get(root, ()):
                return targets[root]
        return False

    def match(ctx: ScanContext):
        for cls, method, idx, instr in _instructions(ctx):
            ref = instr.method_ref
            if ref is None:
                continue
            names = names_for(ctx, ref.class_name)
            if names is False or (names is not None and ref.method_name not in names):
                continue
            if descriptor is not None and ref.descriptor != descriptor:
                continue
            if test is not None and not test(method, idx, instr):
                continue
            yield _code_hit(cls, instr, severity(method, idx, instr) if severity else None)

    return match


def new_instance(*class_names: str) -> Matcher:
    wanted = set(class_names)

    def match(ctx: ScanContext):
        for cls, _method, _idx, instr in _instructions(ctx):
            if instr.mnemonic == "new-instance" and instr.target in wanted:
                yield _code_hit(cls, instr)

    return match


def field_access(field_name: str) -> Matcher:
    """Any static/instance field read or write naming ``field_name``."""
    def match(ctx: ScanContext):
        for cls, _method, _idx, instr in _instructions(ctx):
            if instr.target and re.match(r"^[is](get|put)", instr.mnemonic):
                ref = instr.target.split("->", 1)[-1]
                if ref.split(":", 1)[0] == field_name:
                    yield _code_hit(cls, instr)

    return match


def literals(test: Callable[[str], bool]) -> Matcher:
    def match(ctx: ScanContext):
        for site in ctx.index.string_literals:
            if test(site.value):
                yield Hit(site.source_path, site.line, site.raw_text)

    return match


def method_bodies(test: Callable[[SmaliClass, SmaliMethod, CodeIndex], bool]) -> Matcher:
    """Report method declarations for which ``test`` holds."""
    def match(ctx: ScanContext):
        for cls, method in ctx.index.methods():
            if test(cls, method, ctx.index):
                yield Hit(cls.source_path, method.line_of_declaration,
                          f"{cls.name}->{method.signature}")

    return match


def native_libraries() -> Matcher:
    def match(ctx: ScanContext):
        for lib in ctx.bundle.native_libs:
            yield Hit(lib, 0, lib)

    return match


def any_of(*matchers: Matcher) -> Matcher:
    def match(ctx: ScanContext):
        for m in matchers:
            yield from m(ctx)

    return match


def all_of(first: Matcher, *rest: Matcher) -> Matcher:
    """Conjunction; reports the locations of ``first`` only."""
    def match(ctx: ScanContext):
        hits = list(first(ctx))
        if not hits:
            return []
        for m in rest:
            if next(iter(m(ctx)), None) is None:
                return []
        return hits

    return match


# ------------------------------------------------------------- evaluation

def severity_adjust(finding: Finding) -> Finding:
    """Downgrade cleartext-URL findings that only reach the device itself."""
    if finding.rule_id != "INSECURE_NETWORK_PROTOCOL":
        return finding
    url = _first_literal(finding.evidence)
    if url is None:
        return finding
    if is_local_url(url):
        return replace(finding, severity="info")
    return finding


def _first_literal(evidence: str) -> Optional[str]:
    m = re.search(r'"((?:[^"\\]|\\.)*)', evidence)
    return m.group(1) if m else None


def is_local_url(url: str) -> bool:
    try:
        parts = urlsplit(url.strip())
        host = (parts.hostname or "").lower()
    except ValueError:
        return False
    if host in LOOPBACK_HOSTS:
        return True
    # http:///android_asset/... or http://android_asset/...
    if not host and parts.path.startswith(LOCAL_ASSET_ROOTS):
        return True
    return host in ("android_asset", "android_res")


def _max_severity(a: str, b: str) -> str:
    return a if SEVERITY_RANK[a] >= SEVERITY_RANK[b] else b


def evaluate_rule(rule: Rule, manifest: Manifest, index: CodeIndex, bundle: AppBundle) -> list[Finding]:
    ctx = ScanContext(bundle, manifest, index)
    by_location: dict[tuple, Finding] = {}
    for hit in rule.predicate(ctx):
        finding = severity_adjust(Finding(
            rule_id=rule.id,
            bundle_id=bundle.bundle_id,
            path=hit.path,
            line=hit.line,
            evidence=truncate_evidence(hit.evidence),
            severity=hit.severity or rule.severity,
            element=hit.element,
        ))
        prior = by_location.get(finding.location)
        if prior is not None:
            finding = replace(prior, severity=_max_severity(prior.severity, finding.severity))
        by_location[finding.location] = finding
    return [by_location[k] for k in sorted(by_location)]


@dataclass(frozen=True)
class ScanResult:
    findings: tuple[Finding, ...]
    presence: dict


def check_unique_ids(ruleset) -> None:
    seen = set()
    for rule in ruleset:
        if rule.id in seen:
            raise DuplicateRuleId(rule.id)
        seen.add(rule.id)


def evaluate_ruleset(ruleset, manifest: Manifest, index: CodeIndex, bundle: AppBundle) -> ScanResult:
    check_unique_ids(ruleset)
    findings: list[Finding] = []
    presence = {}
    for rule in ruleset:
        found = evaluate_rule(rule, manifest, index, bundle)
        presence[rule.id] = bool(found)
        findings.extend(found)
    return ScanResult(tuple(findings), presence)


def manifest_hit(line: int, element: str, evidence: str) -> Hit:
    return Hit(MANIFEST_PATH, line, evidence, element=element)
