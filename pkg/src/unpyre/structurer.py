"""Region structuring: CFG plus lifted blocks to a statement tree.

The walker follows byte-offset regions (CPython lays regions out in source
order) guided by the loop forest for headers and extents.  It simulates
blocks on demand, carrying the symbolic stack through regions, so that
expression-level joins (ternaries, short circuits) can be recovered before
falling back to spill temporaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import ir
from .code_model import Const
from .cfg import SETUP_OPS
from .errors import StructuringFailed
from .symexec import (
    BlockResult,
    CompAccum,
    ForItem,
    Simulator,
    StackState,
    WithEnter,
    WithExit,
    is_effectful,
    merge_stack_states,
    negate,
)

CLEANUP_STORES = {"STORE_FAST", "STORE_NAME", "STORE_DEREF", "STORE_GLOBAL"}


@dataclass
class TryRegion:
    start: int
    end: int  # protected range [start, end)
    handler: int
    kind: str  # 'except' | 'finally' | 'with'
    setup_offset: int = -1


@dataclass
class WalkExit:
    kind: str  # 'fall' | 'jump' | 'ended'
    target: int = -1
    stack: StackState | None = None


@dataclass
class Ctx:
    continue_targets: frozenset = frozenset()
    break_target: int = -1
    loop_exits: frozenset = frozenset()
    joins: tuple = ()
    range_end: int = 1 << 60

    def with_join(self, off):
        return replace(self, joins=self.joins + (off,))


def match_try_regions(code, instrs, exc_entries):
    """Version-split recovery of try/with region descriptors."""
    if code.version.minor >= 11:
        return _regions_311(code, instrs, exc_entries)
    return _regions_legacy(code, instrs)


def _regions_legacy(code, instrs):
    """One region per SETUP_FINALLY/SETUP_WITH.  The normal-path body code,
    including any duplicated finally copies and with-exit boilerplate, runs
    up to the handler target, so the handler doubles as the walk bound;
    POP_BLOCK and the exit sequences are stack-neutral under simulation."""
    regions = []
    for setup in instrs:
        if setup.opname not in ("SETUP_FINALLY", "SETUP_WITH"):
            continue
        kind = "with" if setup.opname == "SETUP_WITH" else None
        regions.append(
            TryRegion(
                start=setup.end_offset,
                end=setup.argval,
                handler=setup.argval,
                kind=kind or _classify_handler(code, instrs, setup.argval),
                setup_offset=setup.offset,
            )
        )
    return regions


def _classify_handler(code, instrs, handler_offset):
    idx = _index_of(instrs, handler_offset)
    first = instrs[idx]
    if first.opname == "DUP_TOP":
        return "except"
    if (
        first.opname == "POP_TOP"
        and idx + 2 < len(instrs)
        and instrs[idx + 1].opname == "POP_TOP"
        and instrs[idx + 2].opname == "POP_TOP"
    ):
        return "except"
    return "finally"


def _regions_311(code, instrs, exc_entries):
    regions = []
    by_offset = {ins.offset: ins for ins in instrs}
    for entry in exc_entries:
        # user regions target PUSH_EXC_INFO; anything else is compiler
        # cleanup (COPY/POP_EXCEPT/RERAISE or the `as` name reset)
        target = by_offset.get(entry.target)
        if target is None or target.opname != "PUSH_EXC_INFO":
            continue
        idx = _index_of(instrs, entry.target)
        kind = "finally"
        j = idx + 1
        if j < len(instrs) and instrs[j].opname == "WITH_EXCEPT_START":
            kind = "with"
        else:
            # typed handler: loads then CHECK_EXC_MATCH; bare: POP_TOP first
            k = j
            while k < len(instrs) and k < j + 24:
                op = instrs[k].opname
                if op == "CHECK_EXC_MATCH":
                    kind = "except"
                    break
                if op == "POP_TOP" and k == j:
                    kind = "except"
                    break
                if op in ("LOAD_GLOBAL", "LOAD_NAME", "LOAD_FAST", "LOAD_CONST",
                          "LOAD_ATTR", "BUILD_TUPLE", "EXTENDED_ARG"):
                    k += 1
                    continue
                break
            if kind != "except" and _is_as_cleanup(instrs, idx + 1):
                kind = "as_cleanup"
        regions.append(
            TryRegion(start=entry.start, end=entry.end, handler=entry.target, kind=kind)
        )
    # Merge adjacent fragments protecting the same handler (the table splits
    # ranges around stores/jumps the handler does not cover).
    merged = {}
    for r in regions:
        key = r.handler
        if key in merged:
            merged[key].start = min(merged[key].start, r.start)
            merged[key].end = max(merged[key].end, r.end)
        else:
            merged[key] = r
    return list(merged.values())


def _is_as_cleanup(instrs, idx):
    names = [i.opname for i in instrs[idx : idx + 4]]
    return names[:3] == ["LOAD_CONST", "STORE_FAST", "DELETE_FAST"] or names[:3] == [
        "LOAD_CONST",
        "STORE_NAME",
        "DELETE_NAME",
    ]


def _index_of(instrs, offset):
    lo, hi = 0, len(instrs)
    while lo < hi:
        mid = (lo + hi) // 2
        if instrs[mid].offset < offset:
            lo = mid + 1
        else:
            hi = mid
    if lo == len(instrs) or instrs[lo].offset != offset:
        raise StructuringFailed(offset, "offset is not an instruction boundary")
    return lo


class Structurer:
    """One instance per code object; drives simulation region by region."""

    def __init__(self, code, instrs, cfg, loops, exc_entries):
        self.code = code
        self.minor = code.version.minor
        self.instrs = instrs
        self.cfg = cfg
        self.loops = {loop.header: loop for loop in loops.loops}
        self.loop_headers_by_offset = {
            cfg.blocks[h].start: cfg.blocks[h] for h in self.loops
        }
        self.exc_entries = exc_entries
        self.regions = match_try_regions(code, instrs, exc_entries)
        self.regions_by_start = {}
        for r in self.regions:
            if r.kind in ("except", "finally", "with"):
                self.regions_by_start.setdefault(r.start, []).append(r)
        for rs in self.regions_by_start.values():
            rs.sort(key=lambda r: -r.end)  # outermost first
        self.sim = Simulator(code)
        self.temp_counter = 0
        self.active_regions = []
        self.active_loops = set()
        self.end_offset = instrs[-1].end_offset
        self.block_results = {}

    # ------------------------------------------------------------- helpers

    def new_temp(self):
        k = self.temp_counter
        self.temp_counter += 1
        return k

    def block_at(self, offset):
        bid = self.cfg.block_at.get(offset)
        if bid is None:
            raise StructuringFailed(offset, "no block starts here")
        return self.cfg.blocks[bid]

    def simulate(self, block, stack) -> BlockResult:
        return self.sim.simulate_block(block, stack)

    def structure(self):
        stmts, exit = self.walk([(self.instrs[0].offset, self.end_offset)],
                                StackState(), Ctx())
        return stmts

    # ---------------------------------------------------------------- walk

    def walk(self, segments, stack, ctx):
        """Walk the given [(start, end)) segments in order.

        Returns (stmts, WalkExit).  Jumps to ctx joins/loop targets end the
        walk with the matching exit kind.
        """
        out = []
        seg_idx = 0
        pos = segments[0][0]
        while True:
            if pos >= segments[seg_idx][1]:
                seg_idx += 1
                if seg_idx >= len(segments):
                    return out, WalkExit("fall", pos, stack)
                pos = segments[seg_idx][0]
                continue
            if pos not in self.cfg.block_at:
                # pruned dead code (unreachable epilogue after reraise)
                return out, WalkExit("ended")

            regions = [
                r
                for r in self.regions_by_start.get(pos, [])
                if r not in self.active_regions
            ]
            if regions:
                region = regions[0]
                pos, stack = self._structure_region(region, out, stack, ctx,
                                                    segments, seg_idx)
                if pos is None:
                    return out, WalkExit("ended")
                continue

            block = self.block_at(pos)
            loop = self.loops.get(block.id)
            if loop is not None and block.id not in self.active_loops:
                pos, stack = self._structure_loop(loop, block, out, stack, ctx)
                if pos is None:
                    return out, WalkExit("ended")
                continue

            ictx = replace(ctx, range_end=segments[seg_idx][1])
            res = self.simulate(block, stack)
            exit = self._consume_block(block, res, out, stack, ictx)
            if exit is None:
                pos = block.end
                stack = res.exit_fall
                continue
            if exit.kind == "next":
                pos = exit.target
                stack = exit.stack
                continue
            return out, exit

    def _consume_block(self, block, res, out, stack, ctx):
        """Handle a simulated block's terminator.  None = plain fallthrough."""
        term = res.terminator
        if term is None:
            out.extend(res.stmts)
            return None
        name = term.opname

        if name in ("RETURN_VALUE", "RAISE_VARARGS"):
            out.extend(res.stmts)
            return WalkExit("ended")
        if name == "RERAISE":
            out.extend(res.stmts)
            return WalkExit("ended")
        if name == "END_FINALLY":
            out.extend(res.stmts)
            return WalkExit("end_finally", block.end, res.exit_fall)

        if name in ("JUMP_FORWARD", "JUMP_ABSOLUTE", "JUMP_BACKWARD",
                    "JUMP_BACKWARD_NO_INTERRUPT"):
            out.extend(res.stmts[:-1])  # drop the JumpMarker
            target = term.argval
            return self._resolve_jump(target, res.exit_jump, out, ctx)

        if name == "FOR_ITER":
            raise StructuringFailed(block.id, "FOR_ITER outside a loop header")

        # conditional jump
        out.extend(res.stmts[:-1])
        marker = res.stmts[-1]
        return self._structure_conditional(block, marker, res, out, stack, ctx)

    def _resolve_jump(self, target, stack, out, ctx):
        if target in ctx.continue_targets:
            out.append(ir.Continue())
            return WalkExit("ended")
        if target == ctx.break_target:
            out.append(ir.Break())
            return WalkExit("ended")
        if target in ctx.joins:
            return WalkExit("jump", target, stack)
        if target in ctx.loop_exits:
            return WalkExit("jump", target, stack)
        return WalkExit("jump", target, stack)

    # ------------------------------------------------------------- loops

    def _loop_extent(self, loop):
        blocks = [self.cfg.blocks[b] for b in loop.body]
        return min(b.start for b in blocks), max(b.end for b in blocks)

    def _lexical_exits(self, lo, hi):
        """Forward jump targets leaving [lo, hi); breaks live here even when
        their blocks are not part of the natural loop body."""
        exits = set()
        for ins in self.instrs:
            if lo <= ins.offset < hi and ins.is_jump and ins.opname not in SETUP_OPS:
                if ins.argval >= hi:
                    exits.add(ins.argval)
        return exits

    def _structure_loop(self, loop, header, out, stack, ctx):
        """Returns (continue_offset, stack) for the code after the loop."""
        lo, hi = self._loop_extent(loop)
        self.active_loops.add(header.id)
        try:
            hres = self.simulate(header, stack)
            term = hres.terminator

            if term is not None and term.opname == "FOR_ITER":
                return self._structure_for(loop, header, hres, out, stack, ctx, lo, hi)

            # while with leading test (3.8/3.9 layout)
            if (
                term is not None
                and not hres.stmts[:-1]
                and isinstance(hres.stmts[-1], ir.CondJumpMarker)
                and hres.stmts[-1].pops_on_jump
                and not (lo <= term.argval < hi)
            ):
                marker = hres.stmts[-1]
                cond = marker.cond if not marker.jump_when else negate(marker.cond)
                after = term.argval
                exits = self._lexical_exits(header.end, after) | {after}
                break_target = max(exits)
                body_ctx = Ctx(
                    continue_targets=frozenset({header.start}),
                    break_target=break_target,
                    loop_exits=frozenset(exits),
                )
                body, _ = self.walk([(header.end, after)], res_state(hres, True),
                                    body_ctx)
                body = _strip_trailing_continue(body) or [ir.Pass()]
                orelse, after = self._loop_orelse(after, break_target, stack, ctx)
                out.append(ir.While(cond, body, orelse))
                return after, stack

            # rotated / while True: header is the body start
            return self._structure_while_true(loop, header, out, stack, ctx, lo, hi)
        finally:
            self.active_loops.discard(header.id)

    def _structure_for(self, loop, header, hres, out, stack, ctx, lo, hi):
        term = hres.terminator
        after = term.argval  # exhausted target
        iter_expr = stack.entries[-1] if stack.entries else None
        if iter_expr is None:
            raise StructuringFailed(header.id, "FOR_ITER with empty stack")
        try:
            iter_expr._loop_iter = True
        except AttributeError:
            pass
        out.extend(hres.stmts)

        exits = self._lexical_exits(header.end, after) | {after}
        break_target = max(exits)
        body_ctx = Ctx(
            continue_targets=frozenset({header.start}),
            break_target=break_target,
            loop_exits=frozenset(exits),
        )
        body_stack = hres.exit_fall  # iterator + ForItem on top
        body, _ = self.walk([(header.end, after)], body_stack, body_ctx)
        target, body = _extract_for_target(body, header.id)
        body = _strip_trailing_continue(body) or [ir.Pass()]
        orelse, cont = self._loop_orelse(after, break_target, stack, ctx)
        out.append(ir.For(target, iter_expr, body, orelse))
        # the exhausted edge popped the iterator
        new_stack = StackState(stack.entries[:-1])
        return cont, new_stack

    def _structure_while_true(self, loop, header, out, stack, ctx, lo, hi):
        exits = self._lexical_exits(lo, hi)
        after = hi  # tail re-tests fall out here; breaks jump past
        break_target = max(exits | {hi})
        tail_block = None
        tail_cond = None
        # A backward conditional jump to the header from the loop tail is
        # the re-test of a rotated while (3.10/3.11 layout).
        for u, _ in loop.back_edges:
            ub = self.cfg.blocks[u]
            last = ub.last
            if last.opname.startswith("POP_JUMP") or last.opname in (
                "JUMP_IF_TRUE_OR_POP",
                "JUMP_IF_FALSE_OR_POP",
            ):
                tail_block = ub
                break

        continue_targets = {header.start}
        if tail_block is not None:
            continue_targets.add(tail_block.start)

        body_ctx = Ctx(
            continue_targets=frozenset(continue_targets),
            break_target=break_target,
            loop_exits=frozenset(exits),
        )
        segments = [(header.start, hi)]
        if lo < header.start:
            segments.append((lo, header.start))
        body_end = tail_block.start if (
            tail_block is not None and tail_block.start >= header.start
        ) else None
        if body_end is not None:
            segments[0] = (header.start, body_end)
            if lo < header.start:
                raise StructuringFailed(header.id, "rotated loop with tail re-test")

        body, exit = self.walk(segments, stack.copy(), body_ctx)

        cond = ir.ConstE(Const("bool", True))
        if tail_block is not None:
            tres = self.simulate(tail_block, stack.copy())
            marker = tres.stmts[-1] if tres.stmts else None
            if (
                isinstance(marker, ir.CondJumpMarker)
                and not tres.stmts[:-1]
                and marker.target == header.start
            ):
                tail_cond = marker.cond if marker.jump_when else negate(marker.cond)
            else:
                # the back-edge test carries statements: keep it in the
                # body; falling past it leaves the loop
                body_ctx2 = replace(body_ctx)
                extra, extra_exit = self.walk([(tail_block.start, hi)],
                                              stack.copy(), body_ctx2)
                body.extend(extra)
                if extra_exit.kind == "fall":
                    body.append(ir.Break())
        body = _strip_trailing_continue(body) or [ir.Pass()]
        orelse, cont = self._loop_orelse(after, break_target, stack, ctx)
        out.append(_WhileShape(cond, body, orelse, tail_cond))
        return cont, stack

    def _loop_orelse(self, after, break_target, stack, ctx):
        if break_target > after:
            ectx = ctx.with_join(break_target)
            orelse, _ = self.walk([(after, break_target)], stack.copy(), ectx)
            return orelse, break_target
        return [], after

    # -------------------------------------------------------- conditionals

    def _structure_conditional(self, block, marker, res, out, stack, ctx):
        cond, jump_when, target = marker.cond, marker.jump_when, marker.target
        fall_state = res.exit_fall
        jump_state = res.exit_jump

        # backward conditional jump: continue/loop-retest inside a body
        if target <= block.start:
            if target in ctx.continue_targets:
                c = cond if jump_when else negate(cond)
                out.append(ir.If(c, [ir.Continue()], []))
                return WalkExit("next", block.end, fall_state)
            raise StructuringFailed(block.id, "unexpected backward conditional jump")

        if not marker.pops_on_jump:
            return self._structure_orpop(block, marker, res, out, stack, ctx)

        # fold multi-block short-circuit chains into one condition
        cond_true_on_fall, target, fall_pos, fall_state = self._collect_chain(
            negate(cond) if jump_when else cond, target, block.end, fall_state
        )

        # break/continue shortcuts
        if target in ctx.continue_targets:
            out.append(ir.If(negate(cond_true_on_fall), [ir.Continue()], []))
            return WalkExit("next", fall_pos, fall_state)
        if target == ctx.break_target and target not in _active_joins(ctx):
            out.append(ir.If(negate(cond_true_on_fall), [ir.Break()], []))
            return WalkExit("next", fall_pos, fall_state)

        then_ctx = ctx.with_join(target)
        then_stmts, then_exit = self.walk([(fall_pos, target)], fall_state.copy(),
                                          then_ctx)

        # a loop inside the branch may consume its own else region and land
        # past the conditional's target (guarded rotated while)
        if then_exit.kind == "fall" and then_exit.target > target:
            out.append(ir.If(cond_true_on_fall, then_stmts, []))
            return WalkExit("next", then_exit.target, then_exit.stack or jump_state)

        # assert: the fall path raises AssertionError, the jump skips it
        if (
            len(then_stmts) == 1
            and isinstance(then_stmts[0], ir.Raise)
            and _is_assertion_raise(then_stmts[0])
            and then_exit.kind == "ended"
        ):
            out.append(ir.Assert(negate(cond_true_on_fall),
                                 _assertion_msg(then_stmts[0])))
            return WalkExit("next", target, jump_state)

        if then_exit.kind == "ended":
            # branch leaves (return/raise/break/continue): no join to merge
            out.append(ir.If(cond_true_on_fall, then_stmts, []))
            return WalkExit("next", target, jump_state)

        if then_exit.kind == "jump" and then_exit.target != target:
            join = then_exit.target
            if join <= target or join > ctx.range_end:
                # The jump escapes the range being walked: the compiler
                # threaded this branch's tail into shared code (often a
                # shared return).  Inline that consumer into the branch.
                more, _ = self.walk([(join, self.end_offset)],
                                    then_exit.stack, ctx)
                then_stmts.extend(more)
                out.append(ir.If(cond_true_on_fall, then_stmts, []))
                return WalkExit("next", target, jump_state)
            else_ctx = ctx.with_join(join)
            else_stmts, else_exit = self.walk([(target, join)], jump_state.copy(),
                                              else_ctx)
            then_state = then_exit.stack
            else_state = (
                else_exit.stack if else_exit.kind in ("jump", "fall") else None
            )

            # expression-level join: both branches pushed exactly one value
            if (
                not then_stmts
                and not else_stmts
                and then_state is not None
                and else_state is not None
                and then_state.depth == fall_state.depth + 1
                and else_state.depth == fall_state.depth + 1
                and then_state.entries[:-1] == else_state.entries[:-1]
            ):
                merged = StackState(
                    then_state.entries[:-1]
                    + [
                        _make_ternary(
                            cond_true_on_fall,
                            then_state.entries[-1],
                            else_state.entries[-1],
                        )
                    ]
                )
                return WalkExit("next", join, merged)

            if then_state is not None and else_state is not None:
                if then_state.depth != else_state.depth:
                    from .errors import StackDepthMismatch

                    raise StackDepthMismatch(block.id, [then_state.depth,
                                                        else_state.depth])
                if then_state.entries == else_state.entries:
                    out.append(ir.If(cond_true_on_fall, then_stmts, else_stmts))
                    return WalkExit("next", join, then_state)
                merged, spills = merge_stack_states(
                    [then_state, else_state], block.id, self.new_temp
                )
                then_stmts.extend(spills[0])
                else_stmts.extend(spills[1])
                out.append(ir.If(cond_true_on_fall, then_stmts, else_stmts))
                return WalkExit("next", join, merged)

            # one branch ended inside the else walk
            out.append(ir.If(cond_true_on_fall, then_stmts, else_stmts))
            state = then_state or else_state
            return WalkExit("next", join, state)

        # then-range fell to the target (or jumped to it): plain if
        then_state = then_exit.stack
        if then_state is not None and then_state.depth != jump_state.depth:
            raise StructuringFailed(block.id, "branch leaves a value on one path")
        if then_state is not None and then_state.entries != jump_state.entries:
            merged, spills = merge_stack_states(
                [then_state, jump_state], block.id, self.new_temp
            )
            then_stmts.extend(spills[0])
            # the no-branch path needs its spills before the if statement
            for assign in spills[1]:
                out.append(assign)
            out.append(ir.If(cond_true_on_fall, then_stmts, []))
            return WalkExit("next", target, merged)
        out.append(ir.If(cond_true_on_fall, then_stmts, []))
        return WalkExit("next", target, then_state or jump_state)

    def _collect_chain(self, fall_cond, target, fall_pos, fall_state):
        """Fold stmt-free conditional blocks into and/or chains.

        Everything is normalized to "fall through iff P, else go to F".
        Two folds apply while the fall block is another bare test:
          same F             ->  P and P2
          F == skip-of-test  ->  P or P2, F becomes the second test's exit
        """
        while True:
            try:
                nxt = self.block_at(fall_pos)
            except StructuringFailed:
                break
            if nxt.id in self.loops or nxt.start in self.regions_by_start:
                break
            res = self.simulate(nxt, fall_state)
            if (
                res.terminator is None
                or not res.stmts
                or not isinstance(res.stmts[-1], ir.CondJumpMarker)
                or res.stmts[:-1]
                or not res.stmts[-1].pops_on_jump
                or res.stmts[-1].target <= nxt.start
            ):
                break
            m2 = res.stmts[-1]
            p2 = negate(m2.cond) if m2.jump_when else m2.cond
            if m2.target == target:
                fall_cond = _bool_join("and", fall_cond, p2)
            elif target == nxt.end:
                fall_cond = _bool_join("or", negate(fall_cond), p2)
                target = m2.target
            else:
                break
            fall_pos = nxt.end
            fall_state = res.exit_fall
        return fall_cond, target, fall_pos, fall_state

    def _structure_orpop(self, block, marker, res, out, stack, ctx):
        """JUMP_IF_*_OR_POP value chains become boolop expressions; the
        DUP/ROT flavor of the same jump is a chained comparison."""
        op = "or" if marker.jump_when else "and"
        join = marker.target
        kept = res.exit_jump.entries[-1]

        chained = (
            op == "and"
            and isinstance(kept, ir.Compare)
            and res.exit_jump.depth >= 2
            and res.exit_jump.entries[-2] is kept.comparators[-1]
        )
        rhs_ctx = ctx.with_join(join)
        rhs_stmts, rhs_exit = self.walk([(block.end, join)], res.exit_fall.copy(),
                                        rhs_ctx)
        if chained and not rhs_stmts and rhs_exit.kind in ("jump", "fall"):
            st2 = rhs_exit.stack
            if (
                st2 is not None
                and st2.depth == res.exit_fall.depth
                and isinstance(st2.entries[-1], ir.Compare)
                and st2.entries[-1].left is kept.comparators[-1]
            ):
                rhs_cmp = st2.entries[-1]
                fused = ir.Compare(
                    kept.left,
                    kept.ops + rhs_cmp.ops,
                    kept.comparators + rhs_cmp.comparators,
                )
                if self._is_chain_fixup(join):
                    merged = StackState(st2.entries[:-1] + [fused])
                    return WalkExit("next", rhs_exit.target, merged)
        if (
            chained
            and rhs_exit.kind == "ended"
            and len(rhs_stmts) == 1
            and isinstance(rhs_stmts[0], ir.Return)
            and isinstance(rhs_stmts[0].value, ir.Compare)
            and rhs_stmts[0].value.left is kept.comparators[-1]
            and self._is_chain_fixup(join, returning=True)
        ):
            rhs_cmp = rhs_stmts[0].value
            fused = ir.Compare(
                kept.left,
                kept.ops + rhs_cmp.ops,
                kept.comparators + rhs_cmp.comparators,
            )
            out.append(ir.Return(fused))
            return WalkExit("ended")

        if (
            rhs_stmts
            or rhs_exit.kind == "ended"
            or rhs_exit.stack is None
            or rhs_exit.stack.depth != res.exit_jump.depth
        ):
            raise StructuringFailed(block.id, "unstructured short-circuit value")
        rhs = rhs_exit.stack.entries[-1]
        merged = StackState(
            res.exit_jump.entries[:-1] + [_bool_join(op, kept, rhs)]
        )
        return WalkExit("next", join, merged)

    def _is_chain_fixup(self, offset, returning=False):
        """The false-exit of a chained comparison drops the duplicated
        middle operand: ROT_TWO/SWAP + POP_TOP (+ RETURN when the chain
        value is returned directly)."""
        try:
            b = self.block_at(offset)
        except StructuringFailed:
            return False
        names = [i.opname for i in b.instrs]
        if returning:
            return names in (
                ["ROT_TWO", "POP_TOP", "RETURN_VALUE"],
                ["SWAP", "POP_TOP", "RETURN_VALUE"],
            )
        return names in (["ROT_TWO", "POP_TOP"], ["SWAP", "POP_TOP"])

    # ------------------------------------------------------------ regions

    def _structure_region(self, region, out, stack, ctx, segments, seg_idx):
        self.active_regions.append(region)
        try:
            if region.kind == "with":
                return self._structure_with(region, out, stack, ctx)
            if region.kind == "finally":
                return self._structure_finally(region, out, stack, ctx)
            return self._structure_except(region, out, stack, ctx)
        finally:
            self.active_regions.remove(region)

    def _exc_entry_stack(self, stack):
        if self.minor >= 11:
            return StackState(list(stack.entries) + [ir.ExcValue(0)])
        return StackState(list(stack.entries) + [ir.ExcValue(i) for i in range(6)])

    # ----------------------------------------------------------------- with

    def _structure_with(self, region, out, stack, ctx):
        ctx_expr = None
        for e in reversed(stack.entries):
            if isinstance(e, WithExit):
                ctx_expr = e.context
                break
        if ctx_expr is None:
            raise StructuringFailed(self.cfg.block_at.get(region.start, -1),
                                    "with region without context on stack")

        target = None
        # 3.11 stores the target before the protected range starts
        if (
            out
            and isinstance(out[-1], ir.Assign)
            and isinstance(out[-1].value, WithEnter)
            and out[-1].value.context is ctx_expr
        ):
            target = out.pop().targets[0]

        bctx = replace(ctx, joins=ctx.joins)
        body, body_exit = self.walk([(region.start, region.handler)], stack.copy(),
                                    bctx)
        if target is None and body:
            first = body[0]
            if (
                isinstance(first, ir.Assign)
                and isinstance(first.value, WithEnter)
                and first.value.context is ctx_expr
            ):
                target = first.targets[0]
                body = body[1:]
        new_entries = [
            e
            for e in stack.entries
            if not (isinstance(e, (WithExit, WithEnter)) and e.context is ctx_expr)
        ]
        new_stack = StackState(new_entries)

        if self.minor == 8 and body_exit.kind == "fall":
            # the shared cleanup at the handler runs on the normal path too
            extra, exit2 = self.walk([(region.handler, self.end_offset)],
                                     body_exit.stack, replace(ctx, joins=()))
            body.extend(extra)
            body_exit = (
                WalkExit("jump", exit2.target, new_stack)
                if exit2.kind in ("end_finally", "jump", "fall")
                else WalkExit("ended")
            )
        out.append(ir.With([ir.WithItem(ctx_expr, target)], body or [ir.Pass()]))
        if body_exit.kind == "jump":
            return body_exit.target, new_stack
        if body_exit.kind == "fall" and body_exit.target < region.handler:
            return body_exit.target, new_stack
        return None, new_stack

    def _after_handler_code(self, region):
        """First offset after the handler's own cleanup blocks."""
        idx = _index_of(self.instrs, region.handler)
        depth = 0
        while idx < len(self.instrs):
            ins = self.instrs[idx]
            if ins.opname in ("RERAISE", "END_FINALLY") and depth == 0:
                return ins.end_offset
            if ins.opname in ("SETUP_FINALLY", "SETUP_WITH"):
                depth += 1
            if ins.opname == "POP_BLOCK" and depth:
                depth -= 1
            idx += 1
        return self.end_offset

    # -------------------------------------------------------------- finally

    def _structure_finally(self, region, out, stack, ctx):
        if self.minor == 8:
            return self._structure_finally_38(region, out, stack, ctx)

        fctx = replace(ctx, joins=())
        final, _ = self.walk([(region.handler, self.end_offset)],
                             self._exc_entry_stack(StackState()), fctx)
        final = _strip_handler_reraise(final)

        bctx = ctx.with_join(region.handler)
        body, body_exit = self.walk([(region.start, region.end)], stack.copy(), bctx)
        if body_exit.kind == "ended":
            tail, tail_exit = [], body_exit
        else:
            tail_from = max(region.end, body_exit.target)
            tail, tail_exit = self.walk([(tail_from, region.handler)],
                                        body_exit.stack, bctx)
        body.extend(tail)
        body = strip_finally_copies(body, final)
        out.append(ir.Try(body or [ir.Pass()], [], [], final or [ir.Pass()]))
        if tail_exit.kind == "jump":
            return tail_exit.target, stack
        if tail_exit.kind == "fall" and tail_exit.target > region.handler:
            return tail_exit.target, stack
        if tail_exit.kind == "ended":
            return None, stack
        return self._after_handler_code(region), stack

    def _structure_finally_38(self, region, out, stack, ctx):
        sent = StackState(list(stack.entries) + [ir.FinallySentinel()])
        fctx = replace(ctx, joins=())
        final, final_exit = self.walk([(region.handler, self.end_offset)], sent, fctx)

        bctx = ctx.with_join(region.handler)
        body, body_exit = self.walk([(region.start, region.end)], stack.copy(), bctx)
        if body_exit.kind != "ended":
            tail_from = max(region.end, body_exit.target)
            tail, tail_exit = self.walk([(tail_from, region.handler)],
                                        body_exit.stack, bctx)
            body.extend(tail)
        out.append(ir.Try(body or [ir.Pass()], [], [], final or [ir.Pass()]))
        if final_exit.kind == "end_finally":
            return final_exit.target, stack
        idx = _index_of(self.instrs, region.handler)
        while idx < len(self.instrs) and self.instrs[idx].opname != "END_FINALLY":
            idx += 1
        return (
            self.instrs[idx].end_offset if idx < len(self.instrs) else self.end_offset
        ), stack

    # --------------------------------------------------------------- except

    def _structure_except(self, region, out, stack, ctx):
        bctx = ctx.with_join(region.handler)
        body, body_exit = self.walk([(region.start, region.end)], stack.copy(), bctx)
        body_join = -1
        if body_exit.kind == "jump" and body_exit.target >= region.handler:
            body_join = body_exit.target
        elif body_exit.kind != "ended":
            tail_from = max(region.end, body_exit.target)
            tail, tail_exit = self.walk([(tail_from, region.handler)],
                                        body_exit.stack, bctx)
            body.extend(tail)
            if tail_exit.kind == "jump":
                body_join = tail_exit.target
            elif tail_exit.kind == "fall" and tail_exit.target > region.handler:
                body_join = tail_exit.target

        handlers, handler_join = self._parse_handlers(region, ctx)

        orelse = []
        join = max(body_join, handler_join)
        if body_join != -1 and handler_join != -1 and body_join < handler_join:
            octx = ctx.with_join(handler_join)
            orelse, _ = self.walk([(body_join, handler_join)], stack.copy(), octx)
            join = handler_join
        out.append(ir.Try(body or [ir.Pass()], handlers, orelse, []))
        if join == -1:
            return None, stack
        return join, stack

    def _parse_handlers(self, region, ctx):
        handlers = []
        joins = []
        h = region.handler
        guard = 0
        while h is not None and guard < 64:
            guard += 1
            block = self.block_at(h)
            entry = self._exc_entry_stack(StackState())
            res = self.simulate(block, entry)
            marker = (
                res.stmts[-1]
                if res.stmts and isinstance(res.stmts[-1], ir.CondJumpMarker)
                else None
            )
            if (
                marker is not None
                and isinstance(marker.cond, ir.Compare)
                and marker.cond.ops == ["exception match"]
            ):
                type_expr = marker.cond.comparators[0]
                next_h = marker.target
                arm_start = block.end
                arm_stack = res.exit_fall
            elif res.terminator is not None and res.terminator.opname in (
                "RERAISE",
                "END_FINALLY",
            ) and not res.stmts:
                break  # unmatched-exception tail
            else:
                type_expr = None
                next_h = None
                arm_start = h
                arm_stack = entry
            name, arm_body, arm_join = self._walk_arm(arm_start, arm_stack, ctx,
                                                      next_h)
            handlers.append(ir.ExceptHandler(type_expr, name, arm_body or [ir.Pass()]))
            if arm_join != -1:
                joins.append(arm_join)
            h = next_h
            if type_expr is None:
                break
        return handlers, (max(joins) if joins else -1)

    def _walk_arm(self, arm_start, arm_stack, ctx, limit):
        actx = replace(ctx, joins=())
        end = limit if limit is not None else self.end_offset
        body, exit = self.walk([(arm_start, end)], arm_stack.copy(), actx)
        name = None
        if body and isinstance(body[0], ir.Assign) and isinstance(body[0].value, ir.ExcValue):
            tgt = body[0].targets[0]
            if isinstance(tgt, ir.Name):
                name = tgt.id
                body = body[1:]
        body = _strip_as_cleanup(body, name)
        join = -1
        if exit.kind == "jump":
            join = exit.target
        elif exit.kind == "fall" and exit.target > end:
            join = exit.target  # inner region continued past the arm range
        return name, body, join


@dataclass
class _WhileShape(ir.Stmt):
    """Intermediate while-true node; canonicalized by guard merging."""

    cond: object
    body: list
    orelse: list
    tail_cond: object = None


def res_state(res, jump):
    return res.exit_jump if jump else res.exit_fall


def _active_joins(ctx):
    return set(ctx.joins)


def _strip_trailing_continue(body):
    while body and isinstance(body[-1], ir.Continue):
        body.pop()
    if body and isinstance(body[-1], ir.Try):
        tail = body[-1]
        _strip_trailing_continue(tail.body)
        for h in tail.handlers:
            _strip_trailing_continue(h.body)
        if tail.orelse:
            _strip_trailing_continue(tail.orelse)
    return body


def _extract_for_target(body, block_id):
    if not body:
        raise StructuringFailed(block_id, "empty for body")
    first = body[0]
    if isinstance(first, ir.Assign) and len(first.targets) == 1 and isinstance(
        first.value, ForItem
    ):
        return first.targets[0], body[1:]
    raise StructuringFailed(block_id, "for loop does not store its item")


def _make_ternary(cond, then, orelse):
    # `a if c else b`; collapse boolean constants from chained tests
    return ir.Ternary(cond, then, orelse)


def _bool_join(op, a, b):
    parts = []
    for e in (a, b):
        if isinstance(e, ir.BoolOp) and e.op == op:
            parts.extend(e.values)
        else:
            parts.append(e)
    return ir.BoolOp(op, parts)


def _is_assertion_raise(stmt):
    e = stmt.exc
    if isinstance(e, ir.Name) and e.id == "AssertionError":
        return True
    if isinstance(e, ir.Call) and isinstance(e.func, ir.Name) and e.func.id == "AssertionError":
        return True
    return False


def _assertion_msg(stmt):
    if isinstance(stmt.exc, ir.Call) and stmt.exc.args:
        return stmt.exc.args[0]
    return None


def _strip_handler_reraise(stmts):
    return stmts


def _is_with_exit_call(stmt):
    return (
        isinstance(stmt, ir.ExprStmt)
        and isinstance(stmt.value, ir.Call)
        and isinstance(stmt.value.func, WithExit)
    )


def _is_cleanup_pair(stmts, name):
    return (
        len(stmts) == 2
        and isinstance(stmts[0], ir.Assign)
        and len(stmts[0].targets) == 1
        and isinstance(stmts[0].targets[0], ir.Name)
        and stmts[0].targets[0].id == name
        and isinstance(stmts[0].value, ir.ConstE)
        and stmts[0].value.const.kind == "none"
        and isinstance(stmts[1], ir.Delete)
        and isinstance(stmts[1].targets[0], ir.Name)
        and stmts[1].targets[0].id == name
    )


def _strip_as_cleanup(body, name):
    if name is None:
        return body
    if (
        len(body) == 1
        and isinstance(body[0], ir.Try)
        and not body[0].handlers
        and not body[0].orelse
        and _is_cleanup_pair(body[0].final, name)
    ):
        return body[0].body
    if len(body) >= 2 and _is_cleanup_pair(body[-2:], name):
        return body[:-2]
    return body


def strip_finally_copies(stmts, final):
    """Remove duplicated finally bodies preceding each early exit."""
    if not final:
        return stmts
    n = len(final)
    out = []
    i = 0
    while i < len(stmts):
        if stmts[i : i + n] == final:
            nxt = stmts[i + n] if i + n < len(stmts) else None
            if nxt is None or isinstance(nxt, (ir.Return, ir.Break, ir.Continue)):
                i += n
                continue
        s = stmts[i]
        for blockname in ("then", "orelse", "body", "final"):
            sub = getattr(s, blockname, None)
            if isinstance(sub, list):
                setattr(s, blockname, strip_finally_copies(sub, final))
        if isinstance(s, ir.Try):
            for h in s.handlers:
                h.body = strip_finally_copies(h.body, final)
        out.append(s)
        i += 1
    return out


# ------------------------------------------------------------ tree passes


def canonicalize_tree(stmts):
    """while-shape canonicalization, nested-with/if merging."""
    out = []
    for s in stmts:
        s = _canon_one(s)
        out.append(s)
    return out


def _canon_children(s):
    for name in ("then", "orelse", "body", "final"):
        sub = getattr(s, name, None)
        if isinstance(sub, list):
            setattr(s, name, canonicalize_tree(sub))
    if isinstance(s, ir.Try):
        for h in s.handlers:
            h.body = canonicalize_tree(h.body)
    return s


def _while_guard_merge(cond, shape):
    """Match a guard test against the loop's tail re-test.

    The tail of a rotated while may be spread over several `if not c: break`
    statements plus the back-edge test; peel them from the body end while
    and-joining until the guard condition is reproduced.
    """
    body = list(shape.body)
    tail = shape.tail_cond
    while True:
        if tail is not None and tail == cond:
            return ir.While(cond, body or [ir.Pass()], shape.orelse)
        if not body:
            return None
        last = body[-1]
        if (
            isinstance(last, ir.If)
            and not last.orelse
            and len(last.then) == 1
            and isinstance(last.then[0], ir.Break)
        ):
            piece = negate(last.cond)
            tail = piece if tail is None else _bool_join("and", piece, tail)
            body.pop()
            continue
        return None


def _canon_one(s):
    if (
        isinstance(s, ir.If)
        and len(s.then) == 1
        and isinstance(s.then[0], _WhileShape)
        and not s.orelse
    ):
        merged = _while_guard_merge(s.cond, s.then[0])
        if merged is not None:
            return _canon_children(merged)
    if isinstance(s, _WhileShape):
        body = s.body
        if s.tail_cond is not None:
            body = body + [ir.If(negate(s.tail_cond), [ir.Break()], [])]
        return _canon_children(ir.While(s.cond, body, s.orelse))
    s = _canon_children(s)
    if isinstance(s, ir.If):
        if (
            len(s.then) == 1
            and isinstance(s.then[0], ir.If)
            and not s.orelse
            and not s.then[0].orelse
        ):
            inner = s.then[0]
            return ir.If(_bool_join("and", s.cond, inner.cond), inner.then, [])
        return s
    if isinstance(s, ir.With):
        if len(s.body) == 1 and isinstance(s.body[0], ir.With):
            inner = s.body[0]
            return ir.With(s.items + inner.items, inner.body)
        return s
    return s

