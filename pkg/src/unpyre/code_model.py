"""Version-tagged in-memory model of CPython code objects.

Everything here is immutable after construction and validated before any
later stage touches it.  Constants compare structurally, with float equality
defined on the 64-bit pattern so that 0.0 != -0.0 and nan == nan.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

SUPPORTED_VERSIONS = ((3, 8), (3, 9), (3, 10), (3, 11))

# CO_* flag bits shared by all supported versions.
CO_OPTIMIZED = 0x0001
CO_NEWLOCALS = 0x0002
CO_VARARGS = 0x0004
CO_VARKEYWORDS = 0x0008
CO_NESTED = 0x0010
CO_GENERATOR = 0x0020
CO_COROUTINE = 0x0080
CO_ITERABLE_COROUTINE = 0x0100
CO_ASYNC_GENERATOR = 0x0200


@dataclass(frozen=True, order=True)
class VersionTag:
    major: int
    minor: int

    def __post_init__(self):
        if (self.major, self.minor) not in SUPPORTED_VERSIONS:
            from .errors import UnsupportedVersion

            raise UnsupportedVersion(self.major, self.minor)

    def __str__(self):
        return f"{self.major}.{self.minor}"

    @property
    def pair(self):
        return (self.major, self.minor)


class Const:
    """One node of a constants tree.

    kind is one of: none, bool, int, float, complex, str, bytes, tuple,
    frozenset, code, ellipsis.  For tuple/frozenset, value is a tuple of
    Const; for code, value is a CodeObject; otherwise the plain value.
    """

    __slots__ = ("kind", "value")

    SCALAR_KINDS = frozenset(
        {"none", "bool", "int", "float", "complex", "str", "bytes", "ellipsis"}
    )
    KINDS = SCALAR_KINDS | {"tuple", "frozenset", "code"}

    def __init__(self, kind, value=None):
        if kind not in self.KINDS:
            raise ValueError(f"bad const kind {kind!r}")
        self.kind = kind
        self.value = value

    def _key(self):
        # Structural key with bit-pattern float semantics.
        if self.kind == "float":
            return ("float", struct.pack("<d", self.value))
        if self.kind == "complex":
            return ("complex", struct.pack("<dd", self.value.real, self.value.imag))
        if self.kind == "tuple":
            return ("tuple", tuple(c._key() for c in self.value))
        if self.kind == "frozenset":
            # Iteration order is not part of the identity of a frozenset.
            return ("frozenset", frozenset(c._key() for c in self.value))
        if self.kind == "code":
            return ("code", id(self.value) if False else self.value._key())
        if self.kind == "bool":
            # bool is not int here: True != 1 structurally.
            return ("bool", self.value)
        return (self.kind, self.value)

    def __eq__(self, other):
        return isinstance(other, Const) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        if self.kind in ("none", "ellipsis"):
            return f"Const({self.kind})"
        return f"Const({self.kind}, {self.value!r})"

    @classmethod
    def none(cls):
        return cls("none")


@dataclass(frozen=True)
class CodeObject:
    """Self-contained record of one compiled function or module body."""

    version: VersionTag
    argcount: int
    posonlyargcount: int
    kwonlyargcount: int
    nlocals: int
    stacksize: int
    flags: int
    code: bytes
    consts: tuple  # tuple[Const, ...]
    names: tuple
    varnames: tuple
    freevars: tuple
    cellvars: tuple
    name: str
    filename: str
    firstlineno: int
    linetable: bytes = b""
    exceptiontable: bytes = b""
    qualname: str = ""  # 3.11 carries this separately; empty elsewhere

    def __post_init__(self):
        if not self.qualname:
            object.__setattr__(self, "qualname", self.name)

    @property
    def localsplus(self):
        """Fast-local slot names in 3.11 layout.

        Locals come first (arguments that are also cells keep their arg
        slot), then cells not bound to arguments, then frees.  On <=3.10
        only varnames are fast slots, but the derived layout still gives
        the right cell/free ordering for deref resolution.
        """
        extra_cells = tuple(c for c in self.cellvars if c not in self.varnames)
        return self.varnames + extra_cells + self.freevars

    def deref_names(self):
        """Names indexed by *_DEREF / LOAD_CLOSURE for this version."""
        if self.version.minor >= 11:
            return self.localsplus
        return self.cellvars + self.freevars

    @property
    def is_generator(self):
        return bool(self.flags & (CO_GENERATOR | CO_ASYNC_GENERATOR))

    def code_consts(self):
        return [c.value for c in self.consts if c.kind == "code"]

    def _key(self):
        return (
            self.version.pair,
            self.argcount,
            self.posonlyargcount,
            self.kwonlyargcount,
            self.nlocals,
            self.stacksize,
            self.flags,
            self.code,
            tuple(c._key() for c in self.consts),
            self.names,
            self.varnames,
            self.freevars,
            self.cellvars,
            self.name,
            self.firstlineno,
        )

    def structurally_equal(self, other):
        """Equality used by the loader-equivalence checks.

        filename/linetable are deliberately excluded: the JSON dump and the
        pyc of the same compile share them anyway, and callers that do not
        care (version overrides) should not be tripped by them.
        """
        return self._key() == other._key()


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def add(self, message):
        self.violations.append(message)

    def __iter__(self):
        return iter(self.violations)


def validate_code_object(c: CodeObject) -> ValidationReport:
    """Structural well-formedness checks run before any decode stage."""
    report = ValidationReport()
    _validate_one(c, "", report, seen=set())
    return report


def _validate_one(c, path, report, seen):
    where = f"{path or c.name}: " if path else ""
    if id(c) in seen:
        report.add(f"{where}code constant cycle detected")
        return
    seen = seen | {id(c)}

    if len(c.code) % 2 != 0:
        report.add(f"{where}code length not word-aligned")
    if not c.code:
        report.add(f"{where}empty code")
    if c.stacksize < 0:
        report.add(f"{where}negative stacksize")
    if c.flags < 0:
        report.add(f"{where}negative flags")
    if c.exceptiontable and c.version.minor < 11:
        report.add(f"{where}exception table requires >=3.11")
    if c.version.minor <= 10:
        if not (c.argcount + c.kwonlyargcount <= c.nlocals <= len(c.varnames)):
            report.add(
                f"{where}argcount {c.argcount}+kwonly {c.kwonlyargcount} "
                f"vs nlocals {c.nlocals} vs varnames {len(c.varnames)} inconsistent"
            )
    else:
        if c.nlocals != len(c.varnames):
            report.add(f"{where}nlocals {c.nlocals} != len(varnames) {len(c.varnames)}")
        if c.argcount + c.kwonlyargcount > c.nlocals:
            report.add(f"{where}more arguments than local slots")
    if c.posonlyargcount > c.argcount:
        report.add(f"{where}posonlyargcount exceeds argcount")

    _validate_consts(c, c.consts, where, report, seen, depth=0)


def _validate_consts(owner, consts, where, report, seen, depth):
    if depth > 128:
        report.add(f"{where}constant tree too deep")
        return
    for const in consts:
        if const.kind == "code":
            child = const.value
            if child.version != owner.version:
                report.add(
                    f"{where}nested code {child.name!r} has version {child.version}, "
                    f"parent has {owner.version}"
                )
            _validate_one(child, f"{where}{child.name}", report, seen)
        elif const.kind in ("tuple", "frozenset"):
            _validate_consts(owner, const.value, where, report, seen, depth + 1)


def flatten_nested_codes(c: CodeObject):
    """Depth-first enumeration of a code object and its nested code constants.

    Paths are dotted qualified names, e.g. ``f.<listcomp>``.  Ordering is
    the consts-tuple order, so it is stable across runs.
    """
    out = []
    _flatten(c, c.name, out)
    return out


def _flatten(c, path, out):
    out.append((path, c))
    for child in _iter_code_consts(c.consts):
        _flatten(child, f"{path}.{child.name}", out)


def _iter_code_consts(consts):
    for const in consts:
        if const.kind == "code":
            yield const.value
        elif const.kind in ("tuple", "frozenset"):
            yield from _iter_code_consts(const.value)
