"""Line-oriented smali parser and the corpus-wide code index.

Only the directives and instruction families the rules consume are parsed
structurally. Every other body line is kept as an opaque instruction, so
parsing never fails: bad input produces diagnostics and the parser
resumes at the next ``.method`` or ``.class``.
"""
from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .bundle import Diagnostic

CLASS_NAME = re.compile(r"^L[^;\s]+;$")
_TYPE = r"\[*(?:[VZBSCIJFD]|L[^;\s]+;)"
_TYPE_RE = re.compile(_TYPE)
DESCRIPTOR = re.compile(rf"^\((?:{_TYPE})*\){_TYPE}$")
_REGISTER = re.compile(r"^[vp]\d+$")
_METHOD_REF = re.compile(
    rf"^(?P<cls>\[*L[^;\s]+;|\[+[VZBSCIJFD])->(?P<name>[^(\s]+)(?P<desc>\((?:{_TYPE})*\){_TYPE})"
)
_INVOKE_OPERANDS = re.compile(r"^\{(?P<regs>[^}]*)\}\s*,\s*(?P<ref>.+)$")
_CONST_STRING = re.compile(r'^(?P<reg>[vp]\d+)\s*,\s*"(?P<body>.*)"\s*$')
_CONST = re.compile(r"^(?P<reg>[vp]\d+)\s*,\s*(?P<value>-?0x[0-9a-fA-F]+|-?\d+)[LlSsTt]?\s*$")
_SMALI_ESCAPE = re.compile(r"\\(u[0-9a-fA-F]{4}|.)", re.DOTALL)
_SURROGATE_PAIR = re.compile("[\ud800-\udbff][\udc00-\udfff]")

_CONST_INT = {
    "const/4", "const/16", "const", "const/high16",
    "const-wide/16", "const-wide/32", "const-wide", "const-wide/high16",
}
# mnemonics whose first register operand is read, not written
_NON_WRITING_PREFIXES = (
    "invoke-", "if-", "return", "throw", "monitor-", "fill-array-data",
    "packed-switch", "sparse-switch", "filled-new-array", "goto", "nop",
)
_NON_WRITING_PUT = re.compile(r"^[ais]put")
_SKIP_BLOCKS = {
    ".annotation": ".end annotation",
    ".packed-switch": ".end packed-switch",
    ".sparse-switch": ".end sparse-switch",
    ".array-data": ".end array-data",
    ".subannotation": ".end subannotation",
}


@dataclass(frozen=True)
class MethodRef:
    class_name: str
    method_name: str
    descriptor: str

    def __str__(self) -> str:
        return f"{self.class_name}->{self.method_name}{self.descriptor}"

    def param_types(self) -> list[str]:
        inner = self.descriptor[1:self.descriptor.index(")")]
        return _TYPE_RE.findall(inner)


@dataclass(frozen=True)
class Instruction:
    line: int
    mnemonic: str
    raw_text: str
    string_literal: Optional[str] = None
    method_ref: Optional[MethodRef] = None
    const_value: Optional[int] = None
    registers: tuple[str, ...] = ()
    # trailing type or field reference of new-instance / field access ops
    target: Optional[str] = None


@dataclass(frozen=True)
class SmaliMethod:
    name: str
    descriptor: str
    access_flags: frozenset
    instructions: tuple[Instruction, ...]
    line_of_declaration: int

    @property
    def signature(self) -> str:
        return self.name + self.descriptor

    @property
    def is_static(self) -> bool:
        return "static" in self.access_flags


@dataclass(frozen=True)
class SmaliClass:
    name: str
    super_name: str
    interfaces: frozenset
    methods: tuple[SmaliMethod, ...]
    source_path: str

    def find_methods(self, name: str) -> list[SmaliMethod]:
        return [m for m in self.methods if m.name == name]


@dataclass(frozen=True)
class InvokeSite:
    source_path: str
    line: int
    class_name: str
    method: str
    ref: MethodRef
    raw_text: str


@dataclass(frozen=True)
class LiteralSite:
    value: str
    source_path: str
    line: int
    class_name: str
    method: str
    raw_text: str


def unescape_smali(body: str) -> str:
    """Resolve smali/Java string escapes inside a quoted literal body.

    Unknown escapes are kept verbatim. ``\\uXXXX`` surrogate pairs are
    combined into a single code point.
    """
    def sub(m: re.Match) -> str:
        esc = m.group(1)
        if esc[0] == "u" and len(esc) == 5:
            return chr(int(esc[1:], 16))
        simple = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f",
                  '"': '"', "'": "'", "\\": "\\"}
        return simple.get(esc, "\\" + esc)

    out = _SMALI_ESCAPE.sub(sub, body)
    return _SURROGATE_PAIR.sub(_combine_pair, out)


def _combine_pair(m: re.Match) -> str:
    hi, lo = ord(m.group(0)[0]), ord(m.group(0)[1])
    return chr(0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00))


def _parse_int(text: str) -> int:
    return int(text, 0) if "x" in text.lower() else int(text)


def _expand_registers(text: str) -> tuple[str, ...]:
    text = text.strip()
    if not text:
        return ()
    if ".." in text:
        lo, hi = (t.strip() for t in text.split("..", 1))
        if lo[0] == hi[0] and _REGISTER.match(lo) and _REGISTER.match(hi):
            return tuple(f"{lo[0]}{i}" for i in range(int(lo[1:]), int(hi[1:]) + 1))
        return ()
    regs = tuple(r.strip() for r in text.split(","))
    return regs if all(_REGISTER.match(r) for r in regs) else ()


def _leading_registers(operands: str) -> tuple[str, ...]:
    regs = []
    for tok in operands.split(","):
        tok = tok.strip()
        if not _REGISTER.match(tok):
            break
        regs.append(tok)
    return tuple(regs)


def parse_instruction(text: str, line: int) -> tuple[Instruction, Optional[str]]:
    """Parse one stripped body line. Returns the instruction and an
    optional diagnostic message."""
    mnemonic, _, operands = text.partition(" ")
    operands = operands.strip()
    if mnemonic.startswith("invoke-"):
        m = _INVOKE_OPERANDS.match(operands)
        ref = _METHOD_REF.match(m.group("ref")) if m else None
        if ref is None:
            return Instruction(line, mnemonic, text), f"unparseable invoke operands: {operands[:80]}"
        return Instruction(
            line, mnemonic, text,
            method_ref=MethodRef(ref.group("cls"), ref.group("name"), ref.group("desc")),
            registers=_expand_registers(m.group("regs")),
        ), None
    if mnemonic in ("const-string", "const-string/jumbo"):
        m = _CONST_STRING.match(operands)
        if m is None:
            return Instruction(line, mnemonic, text), "malformed string literal"
        return Instruction(
            line, mnemonic, text,
            string_literal=unescape_smali(m.group("body")),
            registers=(m.group("reg"),),
        ), None
    if mnemonic in _CONST_INT:
        m = _CONST.match(operands)
        if m is None:
            return Instruction(line, mnemonic, text, registers=_leading_registers(operands)), \
                f"malformed constant: {operands[:80]}"
        return Instruction(
            line, mnemonic, text,
            const_value=_parse_int(m.group("value")),
            registers=(m.group("reg"),),
        ), None
    target = None
    if mnemonic == "new-instance" or re.match(r"^[ais](get|put)", mnemonic):
        last = operands.rsplit(",", 1)[-1].strip()
        target = last or None
    return Instruction(line, mnemonic, text, registers=_leading_registers(operands), target=target), None


class _FileParser:
    def __init__(self, text: str, source_path: str):
        self.lines = text.splitlines()
        self.path = source_path
        self.diagnostics: list[Diagnostic] = []
        self.name: Optional[str] = None
        self.super_name: Optional[str] = None
        self.interfaces: set[str] = set()
        self.methods: list[SmaliMethod] = []

    def diag(self, line: int, msg: str):
        self.diagnostics.append(Diagnostic(self.path, line, msg))

    def run(self) -> Optional[SmaliClass]:
        i = 0
        n = len(self.lines)
        skipping = False  # resynchronising after a malformed directive
        while i < n:
            lineno = i + 1
            stripped = self.lines[i].strip()
            i += 1
            if not stripped or stripped.startswith("#"):
                continue
            head = stripped.split(None, 1)[0]
            if head == ".class":
                skipping = not self._class_header(stripped, lineno)
            elif skipping:
                continue
            elif head == ".method":
                i = self._method(stripped, lineno, i)
            elif head == ".super":
                value = stripped.split(None, 1)[1].strip() if " " in stripped else ""
                if CLASS_NAME.match(value):
                    self.super_name = value
                else:
                    self.diag(lineno, f"malformed .super: {stripped[:80]}")
            elif head == ".implements":
                value = stripped.split(None, 1)[1].strip() if " " in stripped else ""
                if CLASS_NAME.match(value):
                    self.interfaces.add(value)
                else:
                    self.diag(lineno, f"malformed .implements: {stripped[:80]}")
            elif head == ".end" and stripped.startswith(".end method"):
                self.diag(lineno, ".end method without matching .method")
            elif head in _SKIP_BLOCKS:
                i = self._skip_block(head, i)
        if self.name is None:
            self.diag(0, "no valid .class directive; file skipped")
            return None
        if self.super_name is None and self.name != "Ljava/lang/Object;":
            self.diag(0, "missing .super; assuming Ljava/lang/Object;")
        return SmaliClass(
            name=self.name,
            super_name=self.super_name or "Ljava/lang/Object;",
            interfaces=frozenset(self.interfaces),
            methods=tuple(self.methods),
            source_path=self.path,
        )

    def _class_header(self, stripped: str, lineno: int) -> bool:
        tokens = stripped.split()
        name = tokens[-1] if len(tokens) > 1 else ""
        if not CLASS_NAME.match(name):
            self.diag(lineno, f"malformed .class directive: {stripped[:80]}")
            return False
        if self.name is not None:
            self.diag(lineno, f"second .class directive ignored ({name})")
            return False
        self.name = name
        return True

    def _skip_block(self, head: str, i: int) -> int:
        end = _SKIP_BLOCKS[head]
        while i < len(self.lines):
            if self.lines[i].strip().startswith(end):
                return i + 1
            i += 1
        self.diag(len(self.lines), f"unterminated {head} block")
        return i

    def _method(self, stripped: str, lineno: int, i: int) -> int:
        tokens = stripped.split()
        sig = tokens[-1] if len(tokens) > 1 else ""
        paren = sig.find("(")
        name, desc = (sig[:paren], sig[paren:]) if paren > 0 else ("", "")
        if not name or not DESCRIPTOR.match(desc) or self.name is None:
            reason = "outside a class" if self.name is None else "malformed .method directive"
            self.diag(lineno, f"{reason}: {stripped[:80]}")
            # resynchronise at the next .method or .class
            while i < len(self.lines):
                head = self.lines[i].strip().split(None, 1)[0] if self.lines[i].strip() else ""
                if head in (".method", ".class"):
                    return i
                i += 1
            return i
        flags = frozenset(tokens[1:-1])
        instructions: list[Instruction] = []
        n = len(self.lines)
        while i < n:
            body_line = i + 1
            text = self.lines[i].strip()
            if not text or text.startswith("#"):
                i += 1
                continue
            head = text.split(None, 1)[0]
            if head == ".end" and text.startswith(".end method"):
                i += 1
                break
            if head in (".method", ".class"):
                self.diag(body_line, f"method {name} not terminated before {head}")
                break
            i += 1
            if head in _SKIP_BLOCKS:
                i = self._skip_block(head, i)
                continue
            if head.startswith(".") or head.startswith(":"):
                continue
            if "#" in text and '"' not in text:
                text = text.split("#", 1)[0].rstrip()
            instr, problem = parse_instruction(text, body_line)
            if problem:
                self.diag(body_line, problem)
            instructions.append(instr)
        else:
            self.diag(n, f"method {name} not terminated at end of file")
        self.methods.append(SmaliMethod(name, desc, flags, tuple(instructions), lineno))
        return i


def parse_smali_file(text: str, source_path: str) -> tuple[Optional[SmaliClass], list[Diagnostic]]:
    parser = _FileParser(text, source_path)
    cls = parser.run()
    return cls, parser.diagnostics


def _writes(instr: Instruction, register: str) -> bool:
    if not instr.registers:
        return False
    m = instr.mnemonic
    if m.startswith(_NON_WRITING_PREFIXES) or _NON_WRITING_PUT.match(m):
        return False
    first = instr.registers[0]
    if first == register:
        return True
    if "wide" in m and first[0] == register[0]:
        return int(first[1:]) + 1 == int(register[1:])
    return False


def resolve_constant(method: SmaliMethod, index: int, register: str) -> Union[int, str, None]:
    """Value of ``register`` just before instruction ``index``.

    Walks backwards to the nearest instruction writing the register. The
    result is known only when that write is a ``const*`` load; any other
    write, or none at all, gives None.
    """
    for instr in reversed(method.instructions[:index]):
        if _writes(instr, register):
            if instr.const_value is not None:
                return instr.const_value
            if instr.string_literal is not None:
                return instr.string_literal
            return None
    return None


def argument_registers(instr: Instruction) -> list[tuple[str, str]]:
    """Pair each declared parameter type with the register carrying it.

    The receiver of non-static calls is skipped; wide types consume two
    registers. Empty if the register list does not fit the descriptor.
    """
    ref = instr.method_ref
    if ref is None:
        return []
    regs = list(instr.registers)
    if not instr.mnemonic.startswith("invoke-static"):
        regs = regs[1:]
    pairs = []
    pos = 0
    for ptype in ref.param_types():
        if pos >= len(regs):
            return []
        pairs.append((ptype, regs[pos]))
        pos += 2 if ptype in ("J", "D") else 1
    return pairs if pos == len(regs) else []


def trivial_body(method: SmaliMethod) -> bool:
    """True when the method can neither check nor delegate a check.

    No calls, no throws, and every return yields void, a constant loaded
    in the body, or a parameter register.
    """
    has_return = False
    for idx, instr in enumerate(method.instructions):
        m = instr.mnemonic
        if m.startswith("invoke-") or m == "throw":
            return False
        if m.startswith("return"):
            has_return = True
            if m == "return-void":
                continue
            if not instr.registers:
                return False
            reg = instr.registers[0]
            if reg.startswith("p"):
                continue
            if resolve_constant(method, idx, reg) is None:
                return False
    return has_return


@dataclass
class CodeIndex:
    classes_by_name: dict = field(default_factory=dict)
    invokes: dict = field(default_factory=dict)
    string_literals: list = field(default_factory=list)
    implementors: dict = field(default_factory=dict)
    subclasses: dict = field(default_factory=dict)

    def classes(self) -> list[SmaliClass]:
        return sorted(self.classes_by_name.values(), key=lambda c: c.source_path)

    def methods(self) -> Iterator[tuple[SmaliClass, SmaliMethod]]:
        for cls in self.classes():
            for method in cls.methods:
                yield cls, method

    def invoke_sites(self, class_name: Optional[str] = None, method_name: Optional[str] = None) -> list[InvokeSite]:
        """Invoke sites filtered by target class and/or method name,
        ordered by (source_path, line)."""
        if class_name is not None and method_name is not None:
            return list(self.invokes.get((class_name, method_name), ()))
        sites = [
            s for (c, n), group in self.invokes.items()
            if (class_name is None or c == class_name) and (method_name is None or n == method_name)
            for s in group
        ]
        return sorted(sites, key=lambda s: (s.source_path, s.line))

    def all_invokes(self) -> list[InvokeSite]:
        return self.invoke_sites()


def build_index(classes) -> tuple[CodeIndex, list[Diagnostic]]:
    diagnostics: list[Diagnostic] = []
    by_name: dict[str, SmaliClass] = {}
    for cls in classes:
        if cls.name in by_name:
            diagnostics.append(Diagnostic(
                cls.source_path, 0,
                f"DuplicateClass: {cls.name} already declared in {by_name[cls.name].source_path}",
            ))
            continue
        by_name[cls.name] = cls

    invokes: dict = defaultdict(list)
    literals: list[LiteralSite] = []
    implementors: dict = defaultdict(set)
    subclasses: dict = defaultdict(set)
    for cls in sorted(by_name.values(), key=lambda c: c.source_path):
        for iface in cls.interfaces:
            implementors[iface].add(cls.name)
        subclasses[cls.super_name].add(cls.name)
        for method in cls.methods:
            for instr in method.instructions:
                if instr.method_ref is not None:
                    ref = instr.method_ref
                    invokes[(ref.class_name, ref.method_name)].append(
                        InvokeSite(cls.source_path, instr.line, cls.name, method.signature, ref, instr.raw_text)
                    )
                elif instr.string_literal is not None:
                    literals.append(
                        LiteralSite(instr.string_literal, cls.source_path, instr.line, cls.name,
                                    method.signature, instr.raw_text)
                    )
    for group in invokes.values():
        group.sort(key=lambda s: (s.source_path, s.line))
    literals.sort(key=lambda s: (s.source_path, s.line))
    index = CodeIndex(
        classes_by_name=by_name,
        invokes=dict(invokes),
        string_literals=literals,
        implementors={k: frozenset(v) for k, v in implementors.items()},
        subclasses={k: frozenset(v) for k, v in subclasses.items()},
    )
    return index, diagnostics
