"""Loading of decoded app bundles (apktool output layout) from disk."""
from __future__ import annotations

import datetime as dt
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import BinaryManifestError, IoError, MalformedMetadata, MissingManifest

MANIFEST_NAME = "AndroidManifest.xml"
METADATA_NAME = "metadata.json"

_SMALI_TREE = re.compile(r"^smali(?:_classes(\d+))?$")
_AXML_MAGIC = b"\x03\x00\x08\x00"


@dataclass(frozen=True)
class Diagnostic:
    path: str
    line: int
    message: str

    def to_dict(self) -> dict:
        return {"path": self.path, "line": self.line, "message": self.message}


@dataclass(frozen=True)
class AppMetadata:
    package: str
    category: str
    downloads: int
    stars: float
    release_date: dt.date
    apk_size_bytes: int

    @classmethod
    def from_dict(cls, data: dict) -> "AppMetadata":
        """Validate a raw mapping (JSON sidecar or CSV row) into metadata.

        Raises MalformedMetadata on missing keys or invariant violations.
        """
        try:
            package = str(data["package"]).strip()
            category = str(data["category"]).strip()
            downloads = int(data["downloads"])
            stars = float(data["stars"])
            release_date = data["release_date"]
            if not isinstance(release_date, dt.date):
                release_date = dt.date.fromisoformat(str(release_date).strip())
            apk_size = int(data["apk_size_bytes"])
        except KeyError as exc:
            raise MalformedMetadata(f"missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise MalformedMetadata(str(exc)) from None
        if not package:
            raise MalformedMetadata("empty package")
        if downloads < 0:
            raise MalformedMetadata(f"downloads must be >= 0, got {downloads}")
        if not 0.0 <= stars <= 5.0:
            raise MalformedMetadata(f"stars must lie in [0, 5], got {stars}")
        if apk_size < 0:
            raise MalformedMetadata(f"apk_size_bytes must be >= 0, got {apk_size}")
        return cls(package, category, downloads, stars, release_date, apk_size)

    def to_dict(self) -> dict:
        return {
            "package": self.package,
            "category": self.category,
            "downloads": self.downloads,
            "stars": self.stars,
            "release_date": self.release_date.isoformat(),
            "apk_size_bytes": self.apk_size_bytes,
        }


@dataclass(frozen=True)
class AppBundle:
    bundle_id: str
    manifest_text: str
    smali_files: tuple[tuple[str, str], ...]
    native_libs: tuple[str, ...] = ()
    metadata: Optional[AppMetadata] = None
    diagnostics: tuple[Diagnostic, ...] = ()

    def __post_init__(self):
        if not self.bundle_id:
            raise ValueError("bundle_id must be non-empty")
        if not self.manifest_text.strip():
            raise MissingManifest(f"{self.bundle_id}: manifest is empty")
        paths = [p for p, _ in self.smali_files]
        if len(set(paths)) != len(paths):
            raise ValueError("duplicate smali paths")
        if any(not p.endswith(".smali") for p in paths):
            raise ValueError("smali paths must end with .smali")


def _tree_order(name: str) -> int:
    m = _SMALI_TREE.match(name)
    return int(m.group(1)) if m and m.group(1) else 1


def _read_text(path: Path) -> str:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from None
    return data.decode("utf-8", errors="strict")


def _load_metadata(path: Path) -> AppMetadata:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from None
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedMetadata(f"{path.name}: {exc}") from None
    if not isinstance(raw, dict):
        raise MalformedMetadata(f"{path.name}: expected a JSON object")
    try:
        return AppMetadata.from_dict(raw)
    except MalformedMetadata as exc:
        raise MalformedMetadata(f"{path.name}: {exc}") from None


def discover_bundle(path) -> AppBundle:
    """Load the decoded bundle rooted at ``path``.

    All ``smali*/`` trees are merged. When two trees carry the same class
    file the tree that sorts first (``smali``, ``smali_classes2``, ...) wins
    and the shadowed copy is reported as a diagnostic. Unreadable smali
    files are reported, never dropped silently.
    """
    root = Path(path)
    if not root.is_dir():
        raise IoError(root, "not a directory")
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise MissingManifest(f"{root}: {MANIFEST_NAME} not found")
    try:
        raw_manifest = manifest_path.read_bytes()
    except OSError as exc:
        raise IoError(manifest_path, exc.strerror or str(exc)) from None
    if raw_manifest.startswith(_AXML_MAGIC):
        raise BinaryManifestError(
            f"{manifest_path}: binary AXML manifest; expected plain-text XML as decoded by apktool"
        )
    try:
        manifest_text = raw_manifest.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise IoError(manifest_path, f"not valid UTF-8 ({exc.reason})") from None
    if not manifest_text.strip():
        raise MissingManifest(f"{root}: {MANIFEST_NAME} is empty")

    diagnostics: list[Diagnostic] = []
    smali: list[tuple[str, str]] = []
    seen_in_tree: dict[str, str] = {}
    try:
        tree_dirs = sorted(
            (d for d in root.iterdir() if d.is_dir() and _SMALI_TREE.match(d.name)),
            key=lambda d: (_tree_order(d.name), d.name),
        )
    except OSError as exc:
        raise IoError(root, exc.strerror or str(exc)) from None
    for tree in tree_dirs:
        for dirpath, dirnames, filenames in os.walk(tree, onerror=_walk_error(diagnostics, root)):
            dirnames.sort()
            for fname in sorted(filenames):
                if not fname.endswith(".smali"):
                    continue
                fpath = Path(dirpath) / fname
                rel = fpath.relative_to(root).as_posix()
                inner = fpath.relative_to(tree).as_posix()
                if inner in seen_in_tree:
                    diagnostics.append(
                        Diagnostic(rel, 0, f"class file shadowed by {seen_in_tree[inner]}")
                    )
                    continue
                try:
                    text = _read_text(fpath)
                except IoError as exc:
                    diagnostics.append(Diagnostic(rel, 0, f"unreadable: {exc.reason}"))
                    continue
                except UnicodeDecodeError:
                    text = fpath.read_bytes().decode("utf-8", errors="replace")
                    diagnostics.append(Diagnostic(rel, 0, "invalid UTF-8; undecodable bytes replaced"))
                seen_in_tree[inner] = rel
                smali.append((rel, text))

    native: list[str] = []
    lib_dir = root / "lib"
    if lib_dir.is_dir():
        for dirpath, dirnames, filenames in os.walk(lib_dir, onerror=_walk_error(diagnostics, root)):
            dirnames.sort()
            native.extend(
                (Path(dirpath) / f).relative_to(root).as_posix()
                for f in filenames
                if f.endswith(".so")
            )
    native.sort()

    metadata = None
    meta_path = root / METADATA_NAME
    if meta_path.is_file():
        metadata = _load_metadata(meta_path)

    return AppBundle(
        bundle_id=root.resolve().name,
        manifest_text=manifest_text,
        smali_files=tuple(smali),
        native_libs=tuple(native),
        metadata=metadata,
        diagnostics=tuple(diagnostics),
    )


def _walk_error(diagnostics: list, root: Path):
    def onerror(exc: OSError):
        where = Path(exc.filename).relative_to(root).as_posix() if exc.filename else "."
        diagnostics.append(Diagnostic(where, 0, f"unreadable directory: {exc.strerror}"))

    return onerror


def discover_corpus(root) -> list[Path]:
    """Immediate subdirectories of ``root`` holding a manifest, sorted by name."""
    root = Path(root)
    try:
        entries = list(root.iterdir())
    except OSError as exc:
        raise IoError(root, exc.strerror or str(exc)) from None
    return sorted(
        (e for e in entries if e.is_dir() and (e / MANIFEST_NAME).is_file()),
        key=lambda e: e.name,
    )
