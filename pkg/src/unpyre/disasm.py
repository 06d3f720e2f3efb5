"""Wordcode decoder: bytes to per-version-normalized instruction lists.

Offsets: an Instruction's ``offset`` is the extent start, i.e. the first
EXTENDED_ARG prefix when one exists; ``op_offset`` is the unit holding the
actual opcode (what dis prints).  Jump targets in compiled code always land
on extent starts, so resolved targets are extent starts too.

Inline cache units (3.11) are consumed into ``cache_units`` of the owning
instruction and never surface as instructions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .code_model import CodeObject
from .errors import (
    BadJumpTarget,
    MalformedExceptionTable,
    TruncatedCode,
    UnknownOpcode,
)
from .optables import load_table

EXTENDED_ARG = 144  # same opcode number on every supported version


@dataclass
class Instruction:
    offset: int  # extent start, includes EXTENDED_ARG prefixes
    op_offset: int  # offset of the opcode unit itself
    opname: str
    opcode: int
    arg: int | None
    argval: object = None
    is_jump_target: bool = False
    n_prefixes: int = 0
    cache_units: int = 0
    kind: str = "none"

    @property
    def size(self):
        return 2 * (1 + self.n_prefixes + self.cache_units)

    @property
    def end_offset(self):
        return self.offset + self.size

    @property
    def is_jump(self):
        return self.kind in ("jump_rel", "jump_abs", "jump_back")

    def __repr__(self):
        bits = f"{self.offset} {self.opname}"
        if self.arg is not None:
            bits += f" {self.arg}"
            if self.argval is not None and self.argval != self.arg:
                bits += f" ({self.argval})"
        return f"<{bits}>"


@dataclass(frozen=True)
class ExceptionEntry:
    start: int
    end: int
    target: int
    depth: int
    lasti: bool


def decode_instructions(c: CodeObject) -> list[Instruction]:
    """Full decode with EXTENDED_ARG folding, cache consumption and argval
    resolution.  Every byte of c.code is accounted for."""
    table = load_table(c.version.pair)
    code = c.code
    if not code:
        raise TruncatedCode("empty code object")
    if len(code) % 2:
        raise TruncatedCode("odd code length")

    instrs = []
    i = 0
    ext = 0
    n_prefixes = 0
    extent_start = 0
    while i < len(code):
        op = code[i]
        info = table.get(op)
        if info is None:
            raise UnknownOpcode(op, i)
        if op == EXTENDED_ARG:
            ext = (ext | code[i + 1]) << 8
            n_prefixes += 1
            i += 2
            if i >= len(code):
                raise TruncatedCode(f"code ends inside EXTENDED_ARG run at {i}")
            continue
        arg = (code[i + 1] | ext) if info.has_arg else None
        instr = Instruction(
            offset=extent_start,
            op_offset=i,
            opname=info.opname,
            opcode=op,
            arg=arg,
            n_prefixes=n_prefixes,
            cache_units=info.cache_units,
            kind=info.kind,
        )
        i += 2
        if info.cache_units:
            end = i + 2 * info.cache_units
            if end > len(code):
                raise TruncatedCode(f"code ends inside inline cache of {info.opname} at {i}")
            i = end
        instrs.append(instr)
        ext = 0
        n_prefixes = 0
        extent_start = i
    if not instrs:
        raise TruncatedCode("code holds no instruction")
    _resolve_argvals(instrs, c, table)
    return resolve_jump_targets(instrs, c.version)


def _resolve_argvals(instrs, c, table):
    cmp_op = table.cmp_op
    for ins in instrs:
        if ins.arg is None:
            continue
        kind = ins.kind
        if kind == "const":
            ins.argval = c.consts[ins.arg] if ins.arg < len(c.consts) else None
        elif kind == "name":
            idx = ins.arg
            if c.version.minor >= 11 and ins.opname == "LOAD_GLOBAL":
                idx = ins.arg >> 1
            ins.argval = c.names[idx] if idx < len(c.names) else None
        elif kind == "local":
            names = c.varnames if c.version.minor <= 10 else c.localsplus
            ins.argval = names[ins.arg] if ins.arg < len(names) else None
        elif kind == "free":
            names = c.deref_names()
            ins.argval = names[ins.arg] if ins.arg < len(names) else None
        elif kind == "compare":
            ins.argval = cmp_op[ins.arg] if ins.arg < len(cmp_op) else None


def resolve_jump_targets(instrs, version) -> list[Instruction]:
    """Set argval of every jump to an absolute byte offset (extent start)."""
    minor = version.minor
    starts = {ins.offset for ins in instrs}
    # dis reports targets against opcode units; a jump to a prefixed
    # instruction lands on its first EXTENDED_ARG, which is the extent start.
    by_target = set()
    for ins in instrs:
        if not ins.is_jump:
            continue
        if ins.kind == "jump_abs":
            target = ins.arg * 2 if minor == 10 else ins.arg
        elif ins.kind == "jump_back":
            target = ins.op_offset + 2 - 2 * ins.arg
        else:  # jump_rel
            delta = ins.arg * 2 if minor >= 10 else ins.arg
            target = ins.op_offset + 2 + delta
        if target not in starts:
            raise BadJumpTarget(ins.offset, target)
        ins.argval = target
        by_target.add(target)
    for ins in instrs:
        if ins.offset in by_target:
            ins.is_jump_target = True
    return instrs


def decode_exception_table(c: CodeObject) -> list[ExceptionEntry]:
    """Decode the 3.11 varint-packed exception table.

    Entry fields are (start, length, target, depth<<1|lasti); byte values
    carry 6 payload bits, bit 6 marks continuation, bit 7 marks the first
    byte of an entry.
    """
    data = c.exceptiontable
    entries = []
    pos = 0

    def varint(first_of_entry):
        nonlocal pos
        if pos >= len(data):
            raise MalformedExceptionTable(f"truncated varint at byte {pos}")
        b = data[pos]
        if first_of_entry and not (b & 0x80):
            raise MalformedExceptionTable(f"missing entry marker at byte {pos}")
        pos += 1
        val = b & 0x3F
        while b & 0x40:
            if pos >= len(data):
                raise MalformedExceptionTable(f"truncated varint at byte {pos}")
            b = data[pos]
            if b & 0x80:
                raise MalformedExceptionTable(f"entry marker inside varint at byte {pos}")
            pos += 1
            val = (val << 6) | (b & 0x3F)
        return val

    while pos < len(data):
        start = varint(True) * 2
        length = varint(False) * 2
        target = varint(False) * 2
        dl = varint(False)
        entry = ExceptionEntry(start, start + length, target, dl >> 1, bool(dl & 1))
        if entry.start >= entry.end:
            raise MalformedExceptionTable(f"empty range in entry at byte {pos}")
        entries.append(entry)
    return entries


def instruction_at(instrs, offset):
    for ins in instrs:
        if ins.offset == offset:
            return ins
    raise KeyError(f"no instruction at offset {offset}")


def format_listing(instrs) -> str:
    """Stable textual listing: offset opname arg argval."""
    lines = []
    for ins in instrs:
        mark = ">>" if ins.is_jump_target else "  "
        argpart = "" if ins.arg is None else f" {ins.arg}"
        valpart = ""
        if ins.is_jump:
            valpart = f" (to {ins.argval})"
        elif ins.arg is not None and ins.argval is not None:
            valpart = f" ({ins.argval})"
        lines.append(f"{mark} {ins.op_offset:>5} {ins.opname}{argpart}{valpart}")
    return "\n".join(lines) + "\n"
