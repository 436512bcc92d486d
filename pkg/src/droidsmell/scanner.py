"""One-bundle pipeline: parse manifest and smali, index, evaluate rules."""
from __future__ import annotations

from typing import Iterable

from .bundle import AppBundle, Diagnostic, discover_bundle
from .catalog import get_ruleset
from .manifest import parse_manifest
from .report import ScanReport
from .rules import evaluate_ruleset
from .smali import build_index, parse_smali_file


def normalize_prefix(prefix: str) -> str:
    """``com.ads``, ``com/ads/`` and ``Lcom/ads;`` all become ``com/ads``."""
    p = prefix.strip()
    if p.startswith("L") and p.endswith(";"):
        p = p[1:-1]
    return p.replace(".", "/").strip("/")


def is_excluded(class_name: str, prefixes: Iterable[str]) -> bool:
    path = class_name[1:-1] if class_name.startswith("L") and class_name.endswith(";") else class_name
    return any(path == p or path.startswith(p + "/") for p in prefixes)


def scan_bundle(bundle: AppBundle, ruleset: str = "all", exclude_prefixes: Iterable[str] = ()) -> ScanReport:
    """Evaluate ``ruleset`` over one loaded bundle.

    Classes under an excluded package prefix are dropped before indexing,
    so library code neither produces findings nor satisfies a conjunct.
    """
    rules = get_ruleset(ruleset)
    prefixes = [normalize_prefix(p) for p in exclude_prefixes if p.strip()]
    manifest = parse_manifest(bundle.manifest_text)
    diagnostics: list[Diagnostic] = list(bundle.diagnostics) + list(manifest.diagnostics)
    classes = []
    for path, text in bundle.smali_files:
        cls, diags = parse_smali_file(text, path)
        diagnostics.extend(diags)
        if cls is not None and not is_excluded(cls.name, prefixes):
            classes.append(cls)
    index, index_diags = build_index(classes)
    diagnostics.extend(index_diags)
    result = evaluate_ruleset(rules, manifest, index, bundle)
    return ScanReport(
        bundle_id=bundle.bundle_id,
        ruleset=ruleset,
        findings=result.findings,
        presence=result.presence,
        diagnostics=tuple(sorted(diagnostics, key=lambda d: (d.path, d.line, d.message))),
        api_level=manifest.api_level,
        package=manifest.package,
        metadata=bundle.metadata,
    )


def scan_path(path, ruleset: str = "all", exclude_prefixes: Iterable[str] = ()) -> ScanReport:
    return scan_bundle(discover_bundle(path), ruleset, exclude_prefixes)
