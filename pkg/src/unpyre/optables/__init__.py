"""Frozen per-version opcode tables.

One data file per supported interpreter, generated once from the real
opcode module of that interpreter and committed.  Format per line:

    opcode opname has_arg kind cache_units

kind: jump_rel | jump_abs | jump_back | const | name | local | free |
compare | none.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class OpInfo:
    opcode: int
    opname: str
    has_arg: bool
    kind: str
    cache_units: int

    @property
    def is_jump(self):
        return self.kind in ("jump_rel", "jump_abs", "jump_back")


class OpcodeTable:
    def __init__(self, version_pair, ops, cmp_op):
        self.version = version_pair
        self.by_code = {o.opcode: o for o in ops}
        self.by_name = {o.opname: o for o in ops}
        self.cmp_op = cmp_op

    def get(self, opcode):
        return self.by_code.get(opcode)

    def opcode_of(self, opname):
        return self.by_name[opname].opcode

    def __contains__(self, opname):
        return opname in self.by_name


@lru_cache(maxsize=None)
def load_table(version_pair) -> OpcodeTable:
    major, minor = version_pair
    fname = f"py{major}{minor}.tbl"
    text = importlib.resources.files(__package__).joinpath(fname).read_text()
    ops = []
    cmp_op = ()
    for line in text.splitlines():
        if line.startswith("# cmp_op:"):
            cmp_op = tuple(line.split(":", 1)[1].strip().split(","))
            continue
        if not line or line.startswith("#"):
            continue
        code_s, name, has_arg, kind, caches = line.split()
        ops.append(OpInfo(int(code_s), name, has_arg == "1", kind, int(caches)))
    return OpcodeTable(version_pair, ops, cmp_op)
