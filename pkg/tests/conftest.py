import json
import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).parent
FIXTURES = TESTS / "fixtures"
CORPUS = FIXTURES / "corpus"
ROBUST = FIXTURES / "robust"
GOLDEN = FIXTURES / "golden"

sys.path.insert(0, str(TESTS))


@pytest.fixture(scope="session")
def truth():
    return json.loads((FIXTURES / "corpus_truth.json").read_text())


@pytest.fixture(scope="session")
def robust_truth():
    return json.loads((FIXTURES / "robust_truth.json").read_text())


@pytest.fixture
def make_bundle(tmp_path):
    """Write ``{relative path: text}`` under a fresh bundle directory."""
    def make(files, name="app"):
        root = tmp_path / name
        for rel, text in files.items():
            p = root / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            if isinstance(text, bytes):
                p.write_bytes(text)
            else:
                p.write_text(text, encoding="utf-8")
        return root
    return make


MINIMAL_MANIFEST = (
    '<?xml version="1.0" encoding="utf-8"?>\n'
    '<manifest xmlns:android="http://schemas.android.com/apk/res/android" package="com.example">\n'
    "    <application/>\n"
    "</manifest>\n"
)


def smali(cls, body="", super_="Ljava/lang/Object;", extra=""):
    """A one-method smali class; ``body`` goes inside ``run()V``."""
    return (
        f".class public {cls}\n.super {super_}\n{extra}\n"
        ".method public run()V\n    .locals 4\n"
        f"{body}\n"
        "    return-void\n.end method\n"
    )
