"""Exception types raised by droidsmell.

Everything derives from :class:`DroidSmellError` so the CLI can map any
input problem to exit code 3 with a single ``except``.
"""
from __future__ import annotations


class DroidSmellError(Exception):
    """Base class for all analyzer errors."""


class BundleError(DroidSmellError):
    pass


class MissingManifest(BundleError):
    pass


class IoError(BundleError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)
        self.reason = reason


class MalformedMetadata(BundleError):
    pass


class ManifestError(DroidSmellError):
    pass


class XmlSyntaxError(ManifestError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class MissingPackageAttribute(ManifestError):
    pass


class BinaryManifestError(ManifestError):
    pass


class DuplicateRuleId(DroidSmellError):
    pass


class UnknownRuleset(DroidSmellError):
    pass


class UnknownDimension(DroidSmellError):
    pass


class EmptyCorpus(DroidSmellError):
    pass
