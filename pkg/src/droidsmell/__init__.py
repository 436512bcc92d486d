"""Static detection of Android security code smells in decoded app bundles."""

__version__ = "0.1.0"

from .bundle import AppBundle, AppMetadata, discover_bundle, discover_corpus
from .manifest import Manifest, effective_exported, parse_manifest
from .smali import CodeIndex, build_index, parse_smali_file, trivial_body
from .rules import Finding, Rule, evaluate_rule, evaluate_ruleset, severity_adjust
from .catalog import RULESETS, get_ruleset
from .report import ScanReport, exit_code, render_json, render_text
from .scanner import scan_bundle, scan_path
from .analytics import CorpusStats, aggregate, export_csv, scan_corpus

__all__ = [
    "AppBundle", "AppMetadata", "discover_bundle", "discover_corpus",
    "Manifest", "effective_exported", "parse_manifest",
    "CodeIndex", "build_index", "parse_smali_file", "trivial_body",
    "Finding", "Rule", "evaluate_rule", "evaluate_ruleset", "severity_adjust",
    "RULESETS", "get_ruleset",
    "ScanReport", "exit_code", "render_json", "render_text",
    "scan_bundle", "scan_path",
    "CorpusStats", "aggregate", "export_csv", "scan_corpus",
]
