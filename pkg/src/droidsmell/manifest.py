"""Typed model of a decoded (plain-text) AndroidManifest.xml.

Parsing goes through expat directly so every element keeps its source
line; findings on manifest elements point at real lines.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional
from xml.parsers import expat

from .bundle import Diagnostic
from .errors import (
    BinaryManifestError,
    ManifestError,
    MissingPackageAttribute,
    XmlSyntaxError,
)

MANIFEST_PATH = "AndroidManifest.xml"
COMPONENT_KINDS = ("activity", "service", "receiver", "provider")
# activity-alias is an activity entry point for export purposes
_COMPONENT_TAGS = {
    "activity": "activity",
    "activity-alias": "activity",
    "service": "service",
    "receiver": "receiver",
    "provider": "provider",
}
_STANDARD_PREFIX = "android"


@dataclass(frozen=True)
class IntentFilter:
    actions: frozenset = frozenset()
    categories: frozenset = frozenset()
    data_schemes: frozenset = frozenset()
    line: int = 0
    # scheme -> line of the <data> element that declared it
    scheme_lines: tuple[tuple[str, int], ...] = ()


@dataclass(frozen=True)
class Component:
    kind: str
    name: str
    exported_attr: Optional[bool] = None
    permission_attr: Optional[str] = None
    intent_filters: tuple[IntentFilter, ...] = ()
    line: int = 0
    read_permission: Optional[str] = None
    write_permission: Optional[str] = None

    @property
    def element_path(self) -> str:
        return f"/manifest/application/{self.kind}[@name='{self.name}']"


@dataclass(frozen=True)
class Manifest:
    package: str
    min_sdk: Optional[int] = None
    target_sdk: Optional[int] = None
    uses_permissions: frozenset = frozenset()
    debuggable: Optional[bool] = None
    components: tuple[Component, ...] = ()
    application_line: int = 0
    permission_lines: tuple[tuple[str, int], ...] = ()
    diagnostics: tuple[Diagnostic, ...] = field(default=(), compare=False)

    @property
    def api_level(self) -> Optional[int]:
        return self.target_sdk if self.target_sdk is not None else self.min_sdk

    def permission_line(self, name: str) -> int:
        return dict(self.permission_lines).get(name, 0)

    def to_dict(self) -> dict:
        """Canonical summary; :meth:`from_dict` inverts it exactly."""
        return {
            "package": self.package,
            "min_sdk": self.min_sdk,
            "target_sdk": self.target_sdk,
            "uses_permissions": sorted(self.uses_permissions),
            "debuggable": self.debuggable,
            "application_line": self.application_line,
            "permission_lines": [list(p) for p in self.permission_lines],
            "components": [
                {
                    "kind": c.kind,
                    "name": c.name,
                    "exported": c.exported_attr,
                    "permission": c.permission_attr,
                    "read_permission": c.read_permission,
                    "write_permission": c.write_permission,
                    "line": c.line,
                    "intent_filters": [
                        {
                            "actions": sorted(f.actions),
                            "categories": sorted(f.categories),
                            "data_schemes": sorted(f.data_schemes),
                            "line": f.line,
                            "scheme_lines": [list(s) for s in f.scheme_lines],
                        }
                        for f in c.intent_filters
                    ],
                }
                for c in self.components
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Manifest":
        comps = tuple(
            Component(
                kind=c["kind"],
                name=c["name"],
                exported_attr=c["exported"],
                permission_attr=c["permission"],
                read_permission=c["read_permission"],
                write_permission=c["write_permission"],
                line=c["line"],
                intent_filters=tuple(
                    IntentFilter(
                        actions=frozenset(f["actions"]),
                        categories=frozenset(f["categories"]),
                        data_schemes=frozenset(f["data_schemes"]),
                        line=f["line"],
                        scheme_lines=tuple((s, n) for s, n in f["scheme_lines"]),
                    )
                    for f in c["intent_filters"]
                ),
            )
            for c in data["components"]
        )
        return cls(
            package=data["package"],
            min_sdk=data["min_sdk"],
            target_sdk=data["target_sdk"],
            uses_permissions=frozenset(data["uses_permissions"]),
            debuggable=data["debuggable"],
            components=comps,
            application_line=data["application_line"],
            permission_lines=tuple((p, n) for p, n in data["permission_lines"]),
        )


class _Node:
    __slots__ = ("tag", "prefix", "attrs", "line", "children")

    def __init__(self, tag, prefix, attrs, line):
        self.tag = tag
        self.prefix = prefix
        self.attrs = attrs
        self.line = line
        self.children = []


def _split(qname: str) -> tuple[Optional[str], str]:
    if ":" in qname:
        prefix, local = qname.split(":", 1)
        return prefix, local
    return None, qname


def _build_tree(xml_text: str) -> _Node:
    if xml_text.startswith("\x03\x00\x08\x00"):
        raise BinaryManifestError(
            "binary AXML manifest; expected plain-text XML as decoded by apktool"
        )
    parser = expat.ParserCreate()
    stack: list[_Node] = []
    roots: list[_Node] = []

    def start(name, attrs):
        prefix, local = _split(name)
        node = _Node(local, prefix, attrs, parser.CurrentLineNumber)
        if stack:
            stack[-1].children.append(node)
        else:
            roots.append(node)
        stack.append(node)

    def end(name):
        stack.pop()

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    try:
        parser.Parse(xml_text, True)
    except expat.ExpatError as exc:
        raise XmlSyntaxError(expat.ErrorString(exc.code), exc.lineno, exc.offset + 1) from None
    return roots[0]


class _AttrReader:
    """Attribute lookup by local name, noting nonstandard prefixes once."""

    def __init__(self, diagnostics: list):
        self.diagnostics = diagnostics
        self._noted: set = set()

    def get(self, node: _Node, local: str) -> Optional[str]:
        found = None
        for qname, value in node.attrs.items():
            prefix, name = _split(qname)
            if name != local:
                continue
            if prefix != _STANDARD_PREFIX and (prefix, local) not in self._noted:
                self._noted.add((prefix, local))
                shown = f"{prefix}:{local}" if prefix else local
                self.diagnostics.append(
                    Diagnostic(MANIFEST_PATH, node.line, f"nonstandard attribute prefix: {shown}")
                )
            if found is None or prefix == _STANDARD_PREFIX:
                found = value
        return found


def _parse_bool(value: Optional[str], what: str, line: int, diags: list) -> Optional[bool]:
    if value is None:
        return None
    v = value.strip().lower()
    if v == "true":
        return True
    if v == "false":
        return False
    diags.append(Diagnostic(MANIFEST_PATH, line, f"{what}={value!r} is not a literal boolean; treated as absent"))
    return None


def _parse_sdk(value: Optional[str], what: str, line: int, diags: list) -> Optional[int]:
    if value is None:
        return None
    try:
        level = int(value.strip())
    except ValueError:
        diags.append(Diagnostic(MANIFEST_PATH, line, f"{what}={value!r} is not an integer API level"))
        return None
    if level < 1:
        diags.append(Diagnostic(MANIFEST_PATH, line, f"{what}={level} is below 1; ignored"))
        return None
    return level


def _parse_filter(node: _Node, attrs: _AttrReader) -> IntentFilter:
    actions, categories, schemes, scheme_lines = set(), set(), set(), []
    for child in node.children:
        if child.tag == "action":
            name = attrs.get(child, "name")
            if name:
                actions.add(name)
        elif child.tag == "category":
            name = attrs.get(child, "name")
            if name:
                categories.add(name)
        elif child.tag == "data":
            scheme = attrs.get(child, "scheme")
            if scheme:
                scheme = scheme.strip().lower()
                schemes.add(scheme)
                scheme_lines.append((scheme, child.line))
    return IntentFilter(
        actions=frozenset(actions),
        categories=frozenset(categories),
        data_schemes=frozenset(schemes),
        line=node.line,
        scheme_lines=tuple(scheme_lines),
    )


def parse_manifest(xml_text: str) -> Manifest:
    root = _build_tree(xml_text)
    if root.tag != "manifest":
        raise ManifestError(f"root element is <{root.tag}>, expected <manifest>")
    diags: list[Diagnostic] = []
    attrs = _AttrReader(diags)
    package = root.attrs.get("package", "").strip()
    if not package:
        raise MissingPackageAttribute("<manifest> has no package attribute")

    min_sdk = target_sdk = None
    debuggable = None
    app_line = 0
    permissions: dict[str, int] = {}
    components: list[Component] = []
    for child in root.children:
        if child.tag == "uses-sdk":
            min_sdk = _parse_sdk(attrs.get(child, "minSdkVersion"), "minSdkVersion", child.line, diags)
            target_sdk = _parse_sdk(attrs.get(child, "targetSdkVersion"), "targetSdkVersion", child.line, diags)
        elif child.tag in ("uses-permission", "uses-permission-sdk-23", "uses-permission-sdk-m"):
            name = attrs.get(child, "name")
            if name:
                permissions.setdefault(name, child.line)
        elif child.tag == "application":
            app_line = child.line
            debuggable = _parse_bool(attrs.get(child, "debuggable"), "debuggable", child.line, diags)
            for comp in child.children:
                kind = _COMPONENT_TAGS.get(comp.tag)
                if kind is None:
                    continue
                components.append(
                    Component(
                        kind=kind,
                        name=attrs.get(comp, "name") or "",
                        exported_attr=_parse_bool(attrs.get(comp, "exported"), "exported", comp.line, diags),
                        permission_attr=attrs.get(comp, "permission") or None,
                        read_permission=attrs.get(comp, "readPermission") or None,
                        write_permission=attrs.get(comp, "writePermission") or None,
                        intent_filters=tuple(
                            _parse_filter(f, attrs) for f in comp.children if f.tag == "intent-filter"
                        ),
                        line=comp.line,
                    )
                )
    if min_sdk is not None and target_sdk is not None and min_sdk > target_sdk:
        diags.append(Diagnostic(MANIFEST_PATH, 0, f"minSdkVersion {min_sdk} exceeds targetSdkVersion {target_sdk}"))
    return Manifest(
        package=package,
        min_sdk=min_sdk,
        target_sdk=target_sdk,
        uses_permissions=frozenset(permissions),
        debuggable=debuggable,
        components=tuple(components),
        application_line=app_line,
        permission_lines=tuple(sorted(permissions.items())),
        diagnostics=tuple(diags),
    )


def effective_exported(component: Component, target_sdk: Optional[int]) -> bool:
    """Whether other apps can reach ``component``.

    An explicit ``exported`` attribute wins. Otherwise any intent filter
    exports the component, and providers are exported by default only
    for target SDK 16 and below.
    """
    if component.exported_attr is not None:
        return component.exported_attr
    if component.intent_filters:
        return True
    if component.kind == "provider":
        return target_sdk is not None and target_sdk <= 16
    return False
