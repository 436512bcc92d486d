import json

import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS, GOLDEN
from droidsmell.report import ScanReport, exit_code, parse_json, render_json, render_text
from droidsmell.rules import SEVERITIES, Finding
from droidsmell.scanner import scan_path

RULE_IDS = ["A_RULE", "B_RULE", "C_RULE"]


def empty_report():
    return ScanReport("b", "all", (), {r: False for r in RULE_IDS})


def report_with(*severities):
    findings = tuple(Finding("A_RULE", "b", "smali/A.smali", i + 1, "x", s) for i, s in enumerate(severities))
    return ScanReport("b", "all", findings, {"A_RULE": bool(findings), "B_RULE": False})


def test_empty_report_json():
    data = json.loads(render_json(empty_report()))
    assert data["findings"] == []
    assert data["presence"] == {r: False for r in RULE_IDS}
    assert data["schema"] == 1


def test_render_twice_identical():
    r = scan_path(CORPUS / "multi_smell")
    assert render_json(r) == render_json(r)
    assert render_text(r) == render_text(r)


def test_golden_json():
    text = render_json(scan_path(CORPUS / "weak_cipher"))
    assert text == (GOLDEN / "weak_cipher.json").read_text()
    findings = json.loads(text)["findings"]
    assert len(findings) == 3
    keys = [(f["rule_id"], f["path"], f["line"]) for f in findings]
    assert keys == sorted(keys)


def test_golden_text():
    text = render_text(scan_path(CORPUS / "weak_cipher"))
    assert text == (GOLDEN / "weak_cipher.txt").read_text()
    lines = text.splitlines()
    assert lines[0] == ("warning WEAK_CRYPTO_ALGORITHM smali/com/fx/ecb/Crypto.smali:21 "
                        "invoke-static {v0}, Ljavax/crypto/Cipher;->getInstance(Ljava/lang/String;)Ljavax/crypto/Cipher;")
    assert "WEAK_CRYPTO_ALGORITHM        3" in lines


def test_empty_text_report():
    text = render_text(empty_report())
    assert text.startswith("no findings\n")
    assert "total 0: info 0, warning 0, critical 0" in text


def test_json_keys_sorted_everywhere():
    text = render_json(scan_path(CORPUS / "library_plant"))

    def check(obj):
        if isinstance(obj, dict):
            assert list(obj) == sorted(obj)
            for v in obj.values():
                check(v)
        elif isinstance(obj, list):
            for v in obj:
                check(v)

    check(json.loads(text))


def test_findings_sorted_by_rule_path_line():
    r = scan_path(CORPUS / "multi_smell")
    keys = [(f.rule_id, f.path, f.line) for f in r.findings]
    assert keys == sorted(keys)


@pytest.mark.parametrize("name", sorted(p.name for p in CORPUS.iterdir()))
def test_json_round_trip_on_fixtures(name):
    r = scan_path(CORPUS / name)
    back = parse_json(render_json(r))
    assert back == r
    assert render_json(back) == render_json(r)


def test_stats_and_presence_invariants():
    for d in sorted(CORPUS.iterdir()):
        r = scan_path(d)
        assert r.stats["total"] == len(r.findings)
        for rid, n in r.stats["by_rule"].items():
            assert n == sum(f.rule_id == rid for f in r.findings)
            assert r.presence[rid] == (n > 0)
        for sev, n in r.stats["by_severity"].items():
            assert n == sum(f.severity == sev for f in r.findings)


def test_unknown_schema_rejected():
    data = json.loads(render_json(empty_report()))
    data["schema"] = 2
    with pytest.raises(ValueError):
        ScanReport.from_dict(data)


def test_exit_code_examples():
    assert exit_code(empty_report(), "warning") == 0
    assert exit_code(report_with("critical"), "warning") == 1
    assert exit_code(report_with("info"), "warning") == 0


@given(st.lists(st.sampled_from(SEVERITIES), max_size=5), st.sampled_from(SEVERITIES))
def test_exit_code_threshold(severities, fail_on):
    expected = int(any(SEVERITIES.index(s) >= SEVERITIES.index(fail_on) for s in severities))
    assert exit_code(report_with(*severities), fail_on) == expected


finding_st = st.builds(
    Finding,
    rule_id=st.sampled_from(RULE_IDS),
    bundle_id=st.just("b"),
    path=st.sampled_from(["AndroidManifest.xml", "smali/A.smali", "smali/b/C.smali"]),
    line=st.integers(0, 500),
    evidence=st.text(max_size=40),
    severity=st.sampled_from(SEVERITIES),
    element=st.one_of(st.none(), st.text(min_size=1, max_size=10)),
)


@settings(max_examples=100)
@given(st.lists(finding_st, max_size=8))
def test_round_trip_property(findings):
    presence = {r: any(f.rule_id == r for f in findings) for r in RULE_IDS}
    r = ScanReport("b", "core", tuple(findings), presence, api_level=19, package="com.x")
    assert parse_json(render_json(r)) == r
    assert render_json(ScanReport("b", "core", tuple(reversed(findings)), presence, api_level=19,
                                  package="com.x")) == render_json(r)
