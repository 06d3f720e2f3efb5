"""End-to-end decompilation of one code object tree."""

from __future__ import annotations

from . import ir
from .cfg import analyze_loops, build_basic_blocks, compute_dominators, \
    prune_unreachable, reachable_from
from .code_model import CodeObject, validate_code_object
from .disasm import Instruction, decode_exception_table, decode_instructions
from .emitter import EmitStyle, emit_module
from .errors import StructuringFailed, UnpyreError
from .recover import DefRecovery, add_scope_decls
from .structurer import Structurer, TryRegion, canonicalize_tree, match_try_regions
from .symexec import StackState


def analyze(code: CodeObject):
    """Decode plus control-flow facts for one code object."""
    instrs = decode_instructions(code)
    if code.version.minor >= 11:
        instrs = rewrite_yield_from(instrs)
        entries = decode_exception_table(code)
        entries = [e for e in entries if any(i.offset == e.target for i in instrs)]
    else:
        from .disasm import ExceptionEntry

        entries = [
            ExceptionEntry(r.start, r.end, r.handler, 0, False)
            for r in match_try_regions(code, instrs, ())
        ]
    cfg = build_basic_blocks(instrs, entries)
    cfg = prune_unreachable(cfg)
    doms = compute_dominators(cfg)
    loops = analyze_loops(cfg, doms)
    if not loops.reducible:
        raise StructuringFailed(cfg.entry, "irreducible control flow")
    # handler subtrees get their own loop analysis rooted at the handler
    covered = set(doms)
    for entry in entries:
        root = cfg.block_at.get(entry.target)
        if root is None or root in covered:
            continue
        universe = reachable_from(cfg, root) - covered
        if not universe:
            continue
        sub_doms = compute_dominators(cfg, root=root, universe=universe | {root})
        sub_loops = analyze_loops(cfg, sub_doms, universe=set(sub_doms))
        if not sub_loops.reducible:
            raise StructuringFailed(root, "irreducible control flow in handler")
        loops.loops.extend(
            l for l in sub_loops.loops if l.header not in {x.header for x in loops.loops}
        )
        covered |= set(sub_doms)
    return instrs, entries, cfg, doms, loops


def rewrite_yield_from(instrs):
    """Collapse the 3.11 SEND/YIELD_VALUE/JUMP_BACKWARD_NO_INTERRUPT loop
    into one synthetic yield-from instruction."""
    out = []
    i = 0
    while i < len(instrs):
        ins = instrs[i]
        if ins.opname == "SEND":
            window = [x.opname for x in instrs[i + 1 : i + 4]]
            skip = 0
            if window[:2] == ["YIELD_VALUE", "JUMP_BACKWARD_NO_INTERRUPT"]:
                skip = 3
            elif window == ["YIELD_VALUE", "RESUME", "JUMP_BACKWARD_NO_INTERRUPT"]:
                skip = 4
            if skip and instrs[i + skip - 1].argval == ins.offset:
                total_units = (instrs[i + skip - 1].end_offset - ins.offset) // 2 - 1
                out.append(
                    Instruction(
                        offset=ins.offset,
                        op_offset=ins.offset,
                        opname="YIELD_FROM_311",
                        opcode=-1,
                        arg=None,
                        cache_units=total_units,
                    )
                )
                i += skip
                continue
        out.append(ins)
        i += 1
    return out


def decompile_body(code: CodeObject) -> list:
    """Structured, finalized statement list for one code object."""
    instrs, entries, cfg, doms, loops = analyze(code)
    structurer = Structurer(code, instrs, cfg, loops, entries)
    stmts = structurer.structure()
    stmts = canonicalize_tree(stmts)
    recovery = DefRecovery(decompile_body, code)
    stmts = recovery.rewrite_block(stmts)
    stmts = add_scope_decls(stmts, code)
    stmts = _strip_implicit_return(stmts, code)
    return stmts


def _strip_implicit_return(stmts, code):
    if code.is_generator:
        while stmts and _is_return_none(stmts[-1]):
            stmts.pop()
        return stmts
    if stmts and _is_return_none(stmts[-1]):
        stmts.pop()
    return stmts


def _is_return_none(s):
    return (
        isinstance(s, ir.Return)
        and isinstance(s.value, ir.ConstE)
        and s.value.const.kind == "none"
    )


def function_tree(code: CodeObject) -> ir.FuncDef:
    """Wrap a bare function code object in a def with reconstructed params."""
    body = decompile_body(code)
    if code.consts and code.consts[0].kind == "str":
        body = [ir.ExprStmt(ir.ConstE(code.consts[0]))] + body
    return ir.FuncDef(code.name, ir.params_from_code(code), body or [ir.Pass()])


def module_tree(code: CodeObject) -> list:
    stmts = decompile_body(code)
    if stmts and isinstance(stmts[0], ir.Assign):
        first = stmts[0]
        if (
            len(first.targets) == 1
            and isinstance(first.targets[0], ir.Name)
            and first.targets[0].id == "__doc__"
            and isinstance(first.value, ir.ConstE)
        ):
            stmts[0] = ir.ExprStmt(first.value)
    return stmts or [ir.Pass()]


def decompile_source(code: CodeObject, style: EmitStyle | None = None) -> str:
    """Decompile one code object to source text.

    Module codes render as module statements; anything else is wrapped in a
    def statement.  Function docstrings ride in the constant pool, so they
    are re-emitted from there.
    """
    report = validate_code_object(code)
    if not report.ok:
        raise UnpyreError("validation failed: " + "; ".join(report))
    if code.name == "<module>":
        tree = module_tree(code)
    else:
        fn = function_tree(code)
        if code.consts and code.consts[0].kind == "str" and fn.body:
            pass  # docstring already prepended by function_tree
        tree = [fn]
    return emit_module(tree, style, code)
