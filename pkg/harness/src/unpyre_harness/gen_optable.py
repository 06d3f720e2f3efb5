"""Generate a frozen opcode table from one interpreter's opcode module.

Run under the *target* interpreter:

    python3.9 gen_optable.py > py39.tbl

Record format (one line per defined opcode):

    opcode opname has_arg kind cache_units

kind is one of jump_rel | jump_abs | jump_back | const | name | local |
free | compare | none.  Backward jumps only exist on 3.11; the table keeps
dis's convention that any opname containing JUMP_BACKWARD jumps backward.
"""
import opcode
import sys


def classify(op, name):
    if op in opcode.hasjrel:
        return "jump_back" if "JUMP_BACKWARD" in name else "jump_rel"
    if op in opcode.hasjabs:
        return "jump_abs"
    if op in opcode.hasconst:
        return "const"
    if op in opcode.hasname:
        return "name"
    if op in opcode.haslocal:
        return "local"
    if op in opcode.hasfree:
        return "free"
    if op in opcode.hascompare:
        return "compare"
    return "none"


def main():
    ver = sys.version_info
    cache_entries = getattr(opcode, "_inline_cache_entries", None)
    print("# generated from CPython %d.%d.%d opcode module" % ver[:3])
    print("# cmp_op: %s" % ",".join(opcode.cmp_op))
    for op in range(256):
        name = opcode.opname[op]
        if name.startswith("<"):
            continue
        has_arg = 1 if op >= opcode.HAVE_ARGUMENT else 0
        caches = cache_entries[op] if cache_entries else 0
        print("%d %s %d %s %d" % (op, name, has_arg, classify(op, name), caches))


if __name__ == "__main__":
    main()
