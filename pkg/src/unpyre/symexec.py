"""Symbolic execution of basic blocks over a stack of expression trees.

Each opcode's transfer either rearranges the symbolic stack or emits
statements.  Nothing is evaluated or folded: the output mirrors the
computation shape the bytecode encodes.  Side-effect order is preserved;
a pop that discards anything effectful becomes an expression statement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ir
from .code_model import Const
from .errors import StackDepthMismatch, StackUnderflow, UnsupportedOpcode

# 3.11 BINARY_OP argument table; entries 13+ are the in-place forms.
_NB_OPS = ["+", "&", "//", "<<", "@", "*", "%", "|", "**", ">>", "-", "/", "^"]

_BIN_OPNAMES = {
    "BINARY_ADD": "+", "BINARY_SUBTRACT": "-", "BINARY_MULTIPLY": "*",
    "BINARY_TRUE_DIVIDE": "/", "BINARY_FLOOR_DIVIDE": "//",
    "BINARY_MODULO": "%", "BINARY_POWER": "**", "BINARY_LSHIFT": "<<",
    "BINARY_RSHIFT": ">>", "BINARY_AND": "&", "BINARY_OR": "|",
    "BINARY_XOR": "^", "BINARY_MATRIX_MULTIPLY": "@",
}
_INPLACE_OPNAMES = {
    "INPLACE_" + name.split("_", 1)[1]: op for name, op in _BIN_OPNAMES.items()
}
_UNARY_OPNAMES = {
    "UNARY_NEGATIVE": "-", "UNARY_POSITIVE": "+",
    "UNARY_INVERT": "~", "UNARY_NOT": "not",
}

_ASYNC_OPS = {
    "GET_AITER", "GET_ANEXT", "BEFORE_ASYNC_WITH", "SETUP_ASYNC_WITH",
    "END_ASYNC_FOR", "GET_AWAITABLE", "ASYNC_GEN_WRAP", "SEND",
}

# Opcodes with no symbolic effect.
_NOPS = {
    "NOP", "RESUME", "PRECALL", "MAKE_CELL", "COPY_FREE_VARS", "GEN_START",
    "SETUP_ANNOTATIONS", "POP_BLOCK", "GET_ITER", "GET_YIELD_FROM_ITER",
    "CALL_FINALLY",
}


class StackState:
    """The symbolic evaluation stack at one program point (bottom -> top)."""

    __slots__ = ("entries",)

    def __init__(self, entries=()):
        self.entries = list(entries)

    def copy(self):
        return StackState(self.entries)

    @property
    def depth(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __repr__(self):
        return f"StackState({self.entries!r})"


@dataclass
class UnpackGroup:
    source: object
    total: int
    star_index: int = -1
    targets: list = None
    parent: object = None  # (group, index)

    def __post_init__(self):
        if self.targets is None:
            self.targets = [None] * self.total

    @property
    def complete(self):
        return all(t is not None for t in self.targets)

    def build_target(self):
        elts = list(self.targets)
        if self.star_index >= 0:
            elts[self.star_index] = ir.Starred(elts[self.star_index])
        return ir.TupleE(elts)


@dataclass
class CompAccum(ir.Stmt):
    """LIST_APPEND/SET_ADD/MAP_ADD inside a comprehension body."""

    kind: str  # 'list' | 'set' | 'map'
    value: object
    key: object = None
    depth: int = 0


@dataclass
class BlockResult:
    stmts: list
    exit_fall: StackState | None
    exit_jump: StackState | None
    terminator: object  # last Instruction when control-flow relevant, else None

    @property
    def exit_state(self):
        return self.exit_fall if self.exit_fall is not None else self.exit_jump


_EFFECTFUL = (ir.Call, ir.Subscript, ir.Attr, ir.Yield, ir.YieldFrom,
              ir.NamedExpr, ir.ImportExpr, ir.ImportFromExpr, ir.BinOp,
              ir.UnaryOp, ir.Compare, ir.BoolOp, ir.Ternary, ir.Name)


def is_effectful(e):
    if isinstance(e, ir.ConstE):
        return False
    if isinstance(e, (ir.FuncExpr, ir.Lambda, ir.NullSlot, ir.MethodSelf)):
        return False
    return True


class Simulator:
    """Per-code-object lifting engine; pure apart from the temp counter."""

    def __init__(self, code):
        self.code = code
        self.minor = code.version.minor
        self.kwnames = None  # pending KW_NAMES const (3.11)

    # ------------------------------------------------------------ plumbing

    def simulate_block(self, block, entry_state) -> BlockResult:
        st = list(entry_state.entries if isinstance(entry_state, StackState) else entry_state)
        out = []
        instrs = block.instrs
        i = 0
        while i < len(instrs):
            ins = instrs[i]
            name = ins.opname
            if name in _ASYNC_OPS:
                raise UnsupportedOpcode(name, ins.offset)
            if name in _NOPS:
                i += 1
                continue

            # Control-flow enders produce markers / dual exit states.
            if name == "RETURN_VALUE":
                out.append(ir.Return(self._pop(st, ins)))
                return BlockResult(out, None, None, ins)
            if name == "RAISE_VARARGS":
                exc = cause = None
                if ins.arg >= 2:
                    cause = self._pop(st, ins)
                if ins.arg >= 1:
                    exc = self._pop(st, ins)
                out.append(ir.Raise(exc, cause))
                return BlockResult(out, None, None, ins)
            if name == "RERAISE":
                return BlockResult(out, None, None, ins)
            if name in ("JUMP_FORWARD", "JUMP_ABSOLUTE", "JUMP_BACKWARD",
                        "JUMP_BACKWARD_NO_INTERRUPT"):
                out.append(ir.JumpMarker(ins.argval))
                return BlockResult(out, None, StackState(st), ins)
            if name in _COND_JUMPS:
                jump_when, is_none_test, pops = _COND_JUMPS[name]
                if pops:
                    cond = self._pop(st, ins)
                    if is_none_test is not None:
                        cond = ir.Compare(cond, ["is" if is_none_test else "is not"],
                                          [ir.ConstE(Const("none"))])
                    out.append(ir.CondJumpMarker(cond, jump_when, ins.argval))
                    return BlockResult(out, StackState(st), StackState(st), ins)
                cond = st[-1] if st else self._pop(st, ins)
                out.append(ir.CondJumpMarker(cond, jump_when, ins.argval,
                                             pops_on_jump=False))
                fall = list(st)
                fall.pop()
                return BlockResult(out, StackState(fall), StackState(st), ins)
            if name == "JUMP_IF_NOT_EXC_MATCH":
                ty = self._pop(st, ins)
                exc = self._pop(st, ins)
                cond = ir.Compare(exc, ["exception match"], [ty])
                out.append(ir.CondJumpMarker(cond, False, ins.argval))
                return BlockResult(out, StackState(st), StackState(st), ins)
            if name == "FOR_ITER":
                fall = list(st)
                fall.append(ForItem(st[-1] if st else None))
                jump = list(st)
                if jump:
                    jump.pop()
                return BlockResult(out, StackState(fall), StackState(jump), ins)
            if name == "END_FINALLY":
                if st and isinstance(st[-1], ir.FinallySentinel):
                    st.pop()
                return BlockResult(out, StackState(st), None, ins)

            handler = getattr(self, "_op_" + name, None)
            if handler is None:
                raise UnsupportedOpcode(name, ins.offset)
            consumed = handler(ins, st, out, instrs[i + 1:])
            i += 1 + (consumed or 0)
            if len(st) > self.code.stacksize + 6:
                raise StackDepthMismatch(block.id, len(st))
        return BlockResult(out, StackState(st), None, None)

    def _pop(self, st, ins):
        if not st:
            raise StackUnderflow(ins.offset, ins.opname)
        return st.pop()

    def pop_value(self, st, ins):
        """Pop for expression use; folds pending walrus targets in."""
        v = self._pop(st, ins)
        pend = getattr(v, "_pending_targets", None)
        if pend:
            target = pend.pop()
            inner = v
            del v._pending_targets
            v = ir.NamedExpr(target, inner)
            for t in reversed(pend):
                v = ir.NamedExpr(t, v)
        return v

    def pops(self, st, ins, n):
        if len(st) < n:
            raise StackUnderflow(ins.offset, ins.opname)
        vals = st[len(st) - n:]
        del st[len(st) - n:]
        return vals

    # -------------------------------------------------------------- loads

    def _op_LOAD_CONST(self, ins, st, out, rest):
        st.append(ir.ConstE(ins.argval))

    def _op_LOAD_FAST(self, ins, st, out, rest):
        st.append(ir.Name(ins.argval, "fast"))

    def _op_LOAD_GLOBAL(self, ins, st, out, rest):
        if self.minor >= 11 and ins.arg & 1:
            st.append(ir.NullSlot())
        st.append(ir.Name(ins.argval, "global"))

    def _op_LOAD_NAME(self, ins, st, out, rest):
        st.append(ir.Name(ins.argval, "name"))

    def _op_LOAD_DEREF(self, ins, st, out, rest):
        st.append(ir.Name(ins.argval, "deref"))

    _op_LOAD_CLASSDEREF = _op_LOAD_DEREF

    def _op_LOAD_CLOSURE(self, ins, st, out, rest):
        st.append(ir.Name(ins.argval, "cell"))

    def _op_LOAD_ASSERTION_ERROR(self, ins, st, out, rest):
        st.append(ir.Name("AssertionError", "global"))

    def _op_LOAD_BUILD_CLASS(self, ins, st, out, rest):
        st.append(ir.BuildClass())

    def _op_PUSH_NULL(self, ins, st, out, rest):
        st.append(ir.NullSlot())

    # -------------------------------------------------------------- stores

    def _op_STORE_FAST(self, ins, st, out, rest):
        return self._store(ins, st, out, rest, ir.Name(ins.argval, "fast"))

    def _op_STORE_NAME(self, ins, st, out, rest):
        return self._store(ins, st, out, rest, ir.Name(ins.argval, "name"))

    def _op_STORE_GLOBAL(self, ins, st, out, rest):
        return self._store(ins, st, out, rest, ir.Name(ins.argval, "global"))

    def _op_STORE_DEREF(self, ins, st, out, rest):
        return self._store(ins, st, out, rest, ir.Name(ins.argval, "deref"))

    def _op_STORE_ATTR(self, ins, st, out, rest):
        obj = self._pop(st, ins)
        return self._store(ins, st, out, rest, ir.Attr(obj, ins.argval))

    def _op_STORE_SUBSCR(self, ins, st, out, rest):
        idx = self._pop(st, ins)
        obj = self._pop(st, ins)
        return self._store(ins, st, out, rest, ir.Subscript(obj, idx))

    _SCALAR_STORES = {"STORE_FAST", "STORE_NAME", "STORE_GLOBAL", "STORE_DEREF"}

    def _store(self, ins, st, out, rest, target):
        v = self._pop(st, ins)

        if isinstance(v, ir.UnpackSlot):
            group = v.group
            group.targets[v.index] = target
            self._complete_group(group, out)
            return

        # import statement recovery
        if isinstance(v, ir.ImportExpr) and v.fromlist is None:
            root = v.module.split(".")[0]
            if target.__class__ is ir.Name and target.id == root and "." not in v.module:
                out.append(ir.Import(v.module))
            elif target.__class__ is ir.Name and target.id == root:
                out.append(ir.Import(v.module))
            else:
                asname = target.id if isinstance(target, ir.Name) else None
                out.append(ir.Import(v.module, asname))
            return
        if isinstance(v, ir.ImportFromExpr) and isinstance(v.source, ir.ImportExpr):
            imp = v.source
            if imp.fromlist is None:
                # `import a.b as c`: the attribute walk rides IMPORT_FROM
                out.append(ir.Import(imp.module,
                                     target.id if isinstance(target, ir.Name) else None))
                return
            asname = target.id if isinstance(target, ir.Name) and target.id != v.name else None
            if out and isinstance(out[-1], ir.ImportFrom) and imp is getattr(out[-1], "_source", None):
                out[-1].names.append((v.name, asname))
            else:
                stmt = ir.ImportFrom(imp.module, [(v.name, asname)], imp.level)
                stmt._source = imp
                out.append(stmt)
            return
        # `import a.b as c` materializes as attribute walk over the import
        if isinstance(v, ir.Attr) and isinstance(_attr_root(v), ir.ImportExpr):
            imp = _attr_root(v)
            out.append(ir.Import(imp.module, target.id if isinstance(target, ir.Name) else None))
            return

        # dup-twin still on the stack: walrus or chained assignment
        if any(e is v for e in st):
            pend = getattr(v, "_pending_targets", None)
            if pend is None:
                try:
                    v._pending_targets = []
                    pend = v._pending_targets
                except AttributeError:
                    pend = None
            if pend is not None:
                pend.append(target)
                return

        targets = [target]
        pend = getattr(v, "_pending_targets", None)
        if pend:
            targets = pend + [target]
            del v._pending_targets

        # augmented assignment: in-place binop folding back onto its target
        if (
            len(targets) == 1
            and isinstance(v, ir.BinOp)
            and v.inplace
            and v.left == target
        ):
            out.append(ir.AugAssign(target, v.op, v.right))
            return

        # consecutive scalar stores = tuple swap assignment
        if (
            len(targets) == 1
            and ins.opname in self._SCALAR_STORES
            and rest
            and rest[0].opname in self._SCALAR_STORES
            and st
            and not isinstance(st[-1], (ir.UnpackSlot, ir.NullSlot, ir.MethodSelf))
            and not hasattr(st[-1], "_pending_targets")
            and not any(e is st[-1] for e in st[:-1])
        ):
            batch = [(target, v)]
            k = 0
            while (
                k < len(rest)
                and rest[k].opname in self._SCALAR_STORES
                and st
                and not isinstance(st[-1], (ir.UnpackSlot, ir.NullSlot, ir.MethodSelf))
            ):
                nxt = rest[k]
                t2 = ir.Name(nxt.argval, {"STORE_FAST": "fast", "STORE_NAME": "name",
                                          "STORE_GLOBAL": "global", "STORE_DEREF": "deref"}[nxt.opname])
                batch.append((t2, self._pop(st, nxt)))
                k += 1
            if self.minor >= 11:
                pairs = list(reversed(batch))
            else:
                pairs = batch
            out.append(ir.Assign(
                [ir.TupleE([t for t, _ in pairs])],
                ir.TupleE([u for _, u in pairs]),
            ))
            return k

        out.append(ir.Assign(targets, v))

    def _complete_group(self, group, out):
        if not group.complete:
            return
        tup = group.build_target()
        if group.parent is None:
            out.append(ir.Assign([tup], group.source))
        else:
            pgroup, idx = group.parent
            pgroup.targets[idx] = tup
            self._complete_group(pgroup, out)

    def _op_UNPACK_SEQUENCE(self, ins, st, out, rest):
        src = self._pop(st, ins)
        self._push_unpack(st, out, src, ins.arg, -1)

    def _op_UNPACK_EX(self, ins, st, out, rest):
        src = self._pop(st, ins)
        before = ins.arg & 0xFF
        after = ins.arg >> 8
        self._push_unpack(st, out, src, before + 1 + after, before)

    def _push_unpack(self, st, out, src, total, star_index):
        parent = None
        if isinstance(src, ir.UnpackSlot):
            parent = (src.group, src.index)
        group = UnpackGroup(source=src, total=total, star_index=star_index)
        group.parent = parent
        for index in reversed(range(total)):
            slot = ir.UnpackSlot(src, total, index)
            slot.group = group
            st.append(slot)

    def _op_DELETE_FAST(self, ins, st, out, rest):
        out.append(ir.Delete([ir.Name(ins.argval, "fast")]))

    def _op_DELETE_NAME(self, ins, st, out, rest):
        out.append(ir.Delete([ir.Name(ins.argval, "name")]))

    def _op_DELETE_GLOBAL(self, ins, st, out, rest):
        out.append(ir.Delete([ir.Name(ins.argval, "global")]))

    def _op_DELETE_DEREF(self, ins, st, out, rest):
        out.append(ir.Delete([ir.Name(ins.argval, "deref")]))

    def _op_DELETE_ATTR(self, ins, st, out, rest):
        out.append(ir.Delete([ir.Attr(self._pop(st, ins), ins.argval)]))

    def _op_DELETE_SUBSCR(self, ins, st, out, rest):
        idx = self._pop(st, ins)
        obj = self._pop(st, ins)
        out.append(ir.Delete([ir.Subscript(obj, idx)]))

    # ---------------------------------------------------------- arithmetic

    def _binop(self, st, ins, op, inplace):
        r = self.pop_value(st, ins)
        l = self.pop_value(st, ins)
        st.append(ir.BinOp(op, l, r, inplace=inplace))

    def _op_BINARY_OP(self, ins, st, out, rest):
        arg = ins.arg
        inplace = arg >= 13
        op = _NB_OPS[arg - 13 if inplace else arg]
        self._binop(st, ins, op, inplace)

    def _op_BINARY_SUBSCR(self, ins, st, out, rest):
        idx = self.pop_value(st, ins)
        obj = self.pop_value(st, ins)
        st.append(ir.Subscript(obj, idx))

    def _op_COMPARE_OP(self, ins, st, out, rest):
        r = self.pop_value(st, ins)
        l = self.pop_value(st, ins)
        st.append(ir.Compare(l, [ins.argval], [r]))

    def _op_IS_OP(self, ins, st, out, rest):
        r = self.pop_value(st, ins)
        l = self.pop_value(st, ins)
        st.append(ir.Compare(l, ["is not" if ins.arg else "is"], [r]))

    def _op_CONTAINS_OP(self, ins, st, out, rest):
        r = self.pop_value(st, ins)
        l = self.pop_value(st, ins)
        st.append(ir.Compare(l, ["not in" if ins.arg else "in"], [r]))

    # ------------------------------------------------------------ shuffles

    def _op_POP_TOP(self, ins, st, out, rest):
        v = self._pop(st, ins)
        if isinstance(v, (ir.ImportExpr, ir.NullSlot, ir.MethodSelf,
                          ir.ExcValue, ir.FinallySentinel, WithEnter)):
            return
        if getattr(v, "_loop_iter", False):
            return  # break path discarding the active iterator
        if isinstance(v, ir.Call) and isinstance(v.func, WithExit):
            return
        pend = getattr(v, "_pending_targets", None)
        if pend:
            del v._pending_targets
            out.append(ir.Assign(pend, v))
            return
        if is_effectful(v):
            out.append(ir.ExprStmt(v))

    def _op_ROT_TWO(self, ins, st, out, rest):
        st[-1], st[-2] = st[-2], st[-1]

    def _op_ROT_THREE(self, ins, st, out, rest):
        st[-1], st[-2], st[-3] = st[-2], st[-3], st[-1]

    def _op_ROT_FOUR(self, ins, st, out, rest):
        st[-1], st[-2], st[-3], st[-4] = st[-2], st[-3], st[-4], st[-1]

    def _op_ROT_N(self, ins, st, out, rest):
        n = ins.arg
        top = st[-1]
        del st[-1]
        st.insert(len(st) - (n - 1), top)

    def _op_SWAP(self, ins, st, out, rest):
        i = ins.arg
        st[-1], st[-i] = st[-i], st[-1]

    def _op_COPY(self, ins, st, out, rest):
        st.append(st[-ins.arg])

    def _op_DUP_TOP(self, ins, st, out, rest):
        st.append(st[-1])

    def _op_DUP_TOP_TWO(self, ins, st, out, rest):
        st.extend(st[-2:])

    def _op_UNARY_NOT(self, ins, st, out, rest):
        st.append(negate(self.pop_value(st, ins)))

    def _unary(self, ins, st, op):
        st.append(ir.UnaryOp(op, self.pop_value(st, ins)))

    def _op_UNARY_NEGATIVE(self, ins, st, out, rest):
        self._unary(ins, st, "-")

    def _op_UNARY_POSITIVE(self, ins, st, out, rest):
        self._unary(ins, st, "+")

    def _op_UNARY_INVERT(self, ins, st, out, rest):
        self._unary(ins, st, "~")

    # ------------------------------------------------------------ building

    def _op_BUILD_TUPLE(self, ins, st, out, rest):
        st.append(ir.TupleE([self._use(v) for v in self.pops(st, ins, ins.arg)]))

    def _op_BUILD_LIST(self, ins, st, out, rest):
        st.append(ir.ListE([self._use(v) for v in self.pops(st, ins, ins.arg)]))

    def _op_BUILD_SET(self, ins, st, out, rest):
        st.append(ir.SetE([self._use(v) for v in self.pops(st, ins, ins.arg)]))

    def _op_BUILD_MAP(self, ins, st, out, rest):
        kv = self.pops(st, ins, 2 * ins.arg)
        keys = [self._use(v) for v in kv[0::2]]
        values = [self._use(v) for v in kv[1::2]]
        st.append(ir.DictE(keys, values))

    def _op_BUILD_CONST_KEY_MAP(self, ins, st, out, rest):
        keys_const = self._pop(st, ins)
        values = [self._use(v) for v in self.pops(st, ins, ins.arg)]
        keys = [ir.ConstE(k) for k in keys_const.const.value]
        st.append(ir.DictE(keys, values))

    def _use(self, v):
        pend = getattr(v, "_pending_targets", None)
        if pend:
            del v._pending_targets
            for t in reversed(pend):
                v = ir.NamedExpr(t, v)
        return v

    def _op_BUILD_SLICE(self, ins, st, out, rest):
        parts = self.pops(st, ins, ins.arg)
        lo, hi = parts[0], parts[1]
        step = parts[2] if ins.arg == 3 else None
        st.append(ir.SliceE(_none_to_null(lo), _none_to_null(hi),
                            _none_to_null(step) if step is not None else None))

    def _op_BUILD_STRING(self, ins, st, out, rest):
        parts = []
        for v in self.pops(st, ins, ins.arg):
            if isinstance(v, ir.ConstE) and v.const.kind == "str":
                parts.append(v.const.value)
            elif isinstance(v, ir.FString):
                parts.extend(v.parts)
            else:
                parts.append(v)
        st.append(ir.FString(parts))

    def _op_FORMAT_VALUE(self, ins, st, out, rest):
        spec = None
        if ins.arg & 0x4:
            spec = self._pop(st, ins)
        value = self.pop_value(st, ins)
        conv = ("", "s", "r", "a")[ins.arg & 0x3]
        fv = ir.FormattedValue(value, conv, spec)
        st.append(ir.FString([fv]))

    @property
    def _in_comprehension(self):
        return self.code.name in ("<listcomp>", "<setcomp>", "<dictcomp>")

    def _op_LIST_APPEND(self, ins, st, out, rest):
        v = self.pop_value(st, ins)
        if self._in_comprehension:
            out.append(CompAccum("list", v, depth=ins.arg))
            return
        target = st[-ins.arg]
        if not isinstance(target, ir.ListE):
            raise UnsupportedOpcode("LIST_APPEND outside display", ins.offset)
        target.elts.append(v)

    def _op_SET_ADD(self, ins, st, out, rest):
        v = self.pop_value(st, ins)
        if self._in_comprehension:
            out.append(CompAccum("set", v, depth=ins.arg))
            return
        target = st[-ins.arg]
        if not isinstance(target, ir.SetE):
            raise UnsupportedOpcode("SET_ADD outside display", ins.offset)
        target.elts.append(v)

    def _op_MAP_ADD(self, ins, st, out, rest):
        v = self.pop_value(st, ins)
        k = self.pop_value(st, ins)
        if self._in_comprehension:
            out.append(CompAccum("map", v, key=k, depth=ins.arg))
            return
        target = st[-ins.arg]
        if not isinstance(target, ir.DictE):
            raise UnsupportedOpcode("MAP_ADD outside display", ins.offset)
        target.keys.append(k)
        target.values.append(v)

    def _op_LIST_EXTEND(self, ins, st, out, rest):
        it = self.pop_value(st, ins)
        target = st[-ins.arg]
        if isinstance(target, ir.ListE):
            target.elts.extend(_spread(it))
        else:
            raise UnsupportedOpcode("LIST_EXTEND outside display", ins.offset)

    def _op_SET_UPDATE(self, ins, st, out, rest):
        it = self.pop_value(st, ins)
        target = st[-ins.arg]
        if isinstance(target, ir.SetE):
            target.elts.extend(_spread(it, as_set=True))
        else:
            raise UnsupportedOpcode("SET_UPDATE outside display", ins.offset)

    def _op_DICT_UPDATE(self, ins, st, out, rest):
        other = self.pop_value(st, ins)
        target = st[-ins.arg]
        if isinstance(target, ir.DictE):
            if isinstance(other, ir.DictE) and len(other.keys) <= 8 and all(
                k is not None for k in other.keys
            ):
                target.keys.extend(other.keys)
                target.values.extend(other.values)
            else:
                target.keys.append(None)
                target.values.append(other)
        else:
            raise UnsupportedOpcode("DICT_UPDATE outside display", ins.offset)

    _op_DICT_MERGE = _op_DICT_UPDATE

    def _op_LIST_TO_TUPLE(self, ins, st, out, rest):
        v = self._pop(st, ins)
        st.append(ir.TupleE(v.elts) if isinstance(v, ir.ListE) else v)

    # 3.8 display-unpack family
    def _unpack_display(self, ins, st, ctor):
        parts = []
        for v in self.pops(st, ins, ins.arg):
            parts.extend(_spread(v, as_set=ctor is ir.SetE))
        st.append(ctor(parts))

    def _op_BUILD_TUPLE_UNPACK(self, ins, st, out, rest):
        self._unpack_display(ins, st, ir.TupleE)

    _op_BUILD_TUPLE_UNPACK_WITH_CALL = _op_BUILD_TUPLE_UNPACK

    def _op_BUILD_LIST_UNPACK(self, ins, st, out, rest):
        self._unpack_display(ins, st, ir.ListE)

    def _op_BUILD_SET_UNPACK(self, ins, st, out, rest):
        self._unpack_display(ins, st, ir.SetE)

    def _op_BUILD_MAP_UNPACK(self, ins, st, out, rest):
        keys, values = [], []
        for v in self.pops(st, ins, ins.arg):
            if isinstance(v, ir.DictE) and all(k is not None for k in v.keys):
                keys.extend(v.keys)
                values.extend(v.values)
            else:
                keys.append(None)
                values.append(v)
        st.append(ir.DictE(keys, values))

    _op_BUILD_MAP_UNPACK_WITH_CALL = _op_BUILD_MAP_UNPACK

    # -------------------------------------------------------------- access

    def _op_LOAD_ATTR(self, ins, st, out, rest):
        st.append(ir.Attr(self.pop_value(st, ins), ins.argval))

    def _op_LOAD_METHOD(self, ins, st, out, rest):
        obj = self.pop_value(st, ins)
        st.append(ir.Attr(obj, ins.argval))
        st.append(ir.MethodSelf())

    # --------------------------------------------------------------- calls

    def _op_KW_NAMES(self, ins, st, out, rest):
        self.kwnames = tuple(c.value for c in ins.argval.value)

    def _finish_call(self, st, ins, args, kwnames=()):
        kwargs = []
        if kwnames:
            n = len(kwnames)
            kwargs = [(name, v) for name, v in zip(kwnames, args[-n:])]
            args = args[:-n]
        x = self._pop(st, ins)
        if self.minor >= 11:
            y = self._pop(st, ins)
            if isinstance(y, ir.NullSlot):
                func = x
            elif isinstance(x, ir.MethodSelf):
                func = y
            else:
                func = y
                args = [x] + args
        else:
            func = x
        st.append(ir.Call(func, args, kwargs))

    def _op_CALL_FUNCTION(self, ins, st, out, rest):
        args = [self._use(v) for v in self.pops(st, ins, ins.arg)]
        self._finish_call(st, ins, args)

    def _op_CALL_FUNCTION_KW(self, ins, st, out, rest):
        kwnames = tuple(c.value for c in self._pop(st, ins).const.value)
        args = [self._use(v) for v in self.pops(st, ins, ins.arg)]
        self._finish_call(st, ins, args, kwnames)

    def _op_CALL_METHOD(self, ins, st, out, rest):
        args = [self._use(v) for v in self.pops(st, ins, ins.arg)]
        self._pop(st, ins)  # method-self padding
        meth = self._pop(st, ins)
        st.append(ir.Call(meth, args, []))

    def _op_CALL(self, ins, st, out, rest):
        args = [self._use(v) for v in self.pops(st, ins, ins.arg)]
        kwnames = self.kwnames or ()
        self.kwnames = None
        self._finish_call(st, ins, args, kwnames)

    def _op_CALL_FUNCTION_EX(self, ins, st, out, rest):
        kwargs = self.pop_value(st, ins) if ins.arg & 1 else None
        posargs = self.pop_value(st, ins)
        func = self._pop(st, ins)
        if self.minor >= 11 and st and isinstance(st[-1], ir.NullSlot):
            st.pop()
        args = list(_spread(posargs))
        keywords = []
        if kwargs is not None:
            if isinstance(kwargs, ir.DictE):
                for k, v in zip(kwargs.keys, kwargs.values):
                    if k is None:
                        keywords.append((None, v))
                    elif isinstance(k, ir.ConstE) and k.const.kind == "str":
                        keywords.append((k.const.value, v))
                    else:
                        keywords.append((None, ir.DictE([k], [v])))
            else:
                keywords.append((None, kwargs))
        st.append(ir.Call(func, args, keywords))

    # ---------------------------------------------------------- functions

    def _op_MAKE_FUNCTION(self, ins, st, out, rest):
        flags = ins.arg
        if self.minor <= 10:
            self._pop(st, ins)  # qualname const
        code_const = self._pop(st, ins)
        closure = ()
        annotations = []
        kwdefaults = []
        defaults = []
        if flags & 0x08:
            cells = self._pop(st, ins)
            closure = tuple(c.id for c in cells.elts)
        if flags & 0x04:
            ann = self._pop(st, ins)
            if isinstance(ann, ir.DictE):
                annotations = [
                    (k.const.value, v) for k, v in zip(ann.keys, ann.values)
                ]
            elif isinstance(ann, ir.ConstE):
                names = [c.value for c in ann.const.value]
                annotations = list(zip(names, [None] * len(names)))
        if flags & 0x02:
            kwd = self._pop(st, ins)
            kwdefaults = [
                (k.const.value, v) for k, v in zip(kwd.keys, kwd.values)
            ]
        if flags & 0x01:
            dflt = self._pop(st, ins)
            if isinstance(dflt, ir.TupleE):
                defaults = list(dflt.elts)
            else:  # constant tuple
                defaults = [ir.ConstE(c) for c in dflt.const.value]
        st.append(ir.FuncExpr(code_const.const.value, defaults, kwdefaults,
                              annotations, closure))

    # ------------------------------------------------------------- imports

    def _op_IMPORT_NAME(self, ins, st, out, rest):
        fromlist = self._pop(st, ins)
        level = self._pop(st, ins)
        fl = None
        if fromlist.const.kind == "tuple":
            fl = tuple(c.value for c in fromlist.const.value)
        st.append(ir.ImportExpr(ins.argval, fl, level.const.value))

    def _op_IMPORT_FROM(self, ins, st, out, rest):
        st.append(ir.ImportFromExpr(st[-1], ins.argval))

    def _op_IMPORT_STAR(self, ins, st, out, rest):
        imp = self._pop(st, ins)
        out.append(ir.ImportStar(imp.module, imp.level))

    # ------------------------------------------------------------- yields

    def _op_YIELD_VALUE(self, ins, st, out, rest):
        st.append(ir.Yield(self.pop_value(st, ins)))

    def _op_YIELD_FROM(self, ins, st, out, rest):
        self._pop(st, ins)  # the None initially sent
        st.append(ir.YieldFrom(self._pop(st, ins)))

    def _op_YIELD_FROM_311(self, ins, st, out, rest):
        self._pop(st, ins)
        st.append(ir.YieldFrom(self._pop(st, ins)))

    def _op_RETURN_GENERATOR(self, ins, st, out, rest):
        st.append(ir.NullSlot())

    # ------------------------------------------------- exception plumbing

    def _op_SETUP_FINALLY(self, ins, st, out, rest):
        pass  # region recovery happens in the structurer

    def _op_BEGIN_FINALLY(self, ins, st, out, rest):
        st.append(ir.FinallySentinel())

    def _op_POP_FINALLY(self, ins, st, out, rest):
        preserve = None
        if ins.arg:
            preserve = self._pop(st, ins)
        if st and isinstance(st[-1], ir.FinallySentinel):
            st.pop()
        if preserve is not None:
            st.append(preserve)

    def _op_POP_EXCEPT(self, ins, st, out, rest):
        n = 1 if self.minor >= 11 else 3
        for _ in range(n):
            if st:
                st.pop()

    def _op_PUSH_EXC_INFO(self, ins, st, out, rest):
        exc = self._pop(st, ins)
        st.append(ir.ExcValue(1))
        st.append(exc)

    def _op_CHECK_EXC_MATCH(self, ins, st, out, rest):
        ty = self.pop_value(st, ins)
        st.append(ir.Compare(st[-1], ["exception match"], [ty]))

    def _op_SETUP_WITH(self, ins, st, out, rest):
        ctx = self.pop_value(st, ins)
        st.append(WithExit(ctx))
        st.append(WithEnter(ctx))

    _op_BEFORE_WITH = _op_SETUP_WITH

    def _op_WITH_CLEANUP_START(self, ins, st, out, rest):
        # normal-path shape: [exit_fn, sentinel] -> [sentinel, result]
        if (
            len(st) >= 2
            and isinstance(st[-1], ir.FinallySentinel)
            and isinstance(st[-2], WithExit)
        ):
            sent = st.pop()
            st.pop()
            st.append(sent)
            st.append(ir.NullSlot())
            return
        raise UnsupportedOpcode(ins.opname, ins.offset)

    def _op_WITH_CLEANUP_FINISH(self, ins, st, out, rest):
        if st and isinstance(st[-1], ir.NullSlot):
            st.pop()
            return
        raise UnsupportedOpcode(ins.opname, ins.offset)

    def _op_WITH_EXCEPT_START(self, ins, st, out, rest):
        raise UnsupportedOpcode(ins.opname, ins.offset)

    # ------------------------------------------------------------ pattern
    # (3.10 match-statement helpers lift as plain calls; the statement
    # itself re-emits as the if/else chain the bytecode encodes)

    def _op_GET_LEN(self, ins, st, out, rest):
        st.append(ir.Call(ir.Name("len", "global"), [st[-1]], []))


def _register_binops():
    def plain(op):
        def handler(self, ins, st, out, rest):
            self._binop(st, ins, op, False)
        return handler

    def inplace(op):
        def handler(self, ins, st, out, rest):
            self._binop(st, ins, op, True)
        return handler

    for opname, op in _BIN_OPNAMES.items():
        setattr(Simulator, "_op_" + opname, plain(op))
    for opname, op in _INPLACE_OPNAMES.items():
        setattr(Simulator, "_op_" + opname, inplace(op))


_register_binops()


@dataclass
class ForItem(ir.Expr):
    iter: object


@dataclass
class WithExit(ir.Expr):
    context: object


@dataclass
class WithEnter(ir.Expr):
    context: object


_COND_JUMPS = {
    # name: (jump_when, none_test, pops_both_ways)
    "POP_JUMP_IF_FALSE": (False, None, True),
    "POP_JUMP_IF_TRUE": (True, None, True),
    "POP_JUMP_FORWARD_IF_FALSE": (False, None, True),
    "POP_JUMP_FORWARD_IF_TRUE": (True, None, True),
    "POP_JUMP_BACKWARD_IF_FALSE": (False, None, True),
    "POP_JUMP_BACKWARD_IF_TRUE": (True, None, True),
    "POP_JUMP_FORWARD_IF_NONE": (True, True, True),
    "POP_JUMP_FORWARD_IF_NOT_NONE": (True, False, True),
    "POP_JUMP_BACKWARD_IF_NONE": (True, True, True),
    "POP_JUMP_BACKWARD_IF_NOT_NONE": (True, False, True),
    "JUMP_IF_FALSE_OR_POP": (False, None, False),
    "JUMP_IF_TRUE_OR_POP": (True, None, False),
}


def _attr_root(e):
    while isinstance(e, ir.Attr):
        e = e.value
    return e


def _none_to_null(e):
    if isinstance(e, ir.ConstE) and e.const.kind == "none":
        return None
    return e


def _spread(v, as_set=False):
    """Elements of an iterable expression for splicing into a display."""
    if isinstance(v, (ir.TupleE, ir.ListE)):
        return list(v.elts)
    if as_set and isinstance(v, ir.SetE):
        return list(v.elts)
    if isinstance(v, ir.ConstE) and v.const.kind in ("tuple", "frozenset"):
        return [ir.ConstE(c) for c in v.const.value]
    return [ir.Starred(v)]


def negate(e):
    """not e, folded through comparisons and boolean structure."""
    flip = {
        "==": "!=", "!=": "==", "<": ">=", ">=": "<", ">": "<=", "<=": ">",
        "in": "not in", "not in": "in", "is": "is not", "is not": "is",
    }
    if isinstance(e, ir.Compare) and len(e.ops) == 1 and e.ops[0] in flip:
        return ir.Compare(e.left, [flip[e.ops[0]]], e.comparators)
    if isinstance(e, ir.UnaryOp) and e.op == "not":
        return e.operand
    return ir.UnaryOp("not", e)


def lift_opcode(instr, state: StackState, code):
    """Single-instruction transfer; exposed for tests and tooling."""
    sim = Simulator(code)

    class _OneBlock:
        instrs = [instr]
        id = -1

    res = sim.simulate_block(_OneBlock, state)
    return res.exit_state, res.stmts


def merge_stack_states(states, block_id, temp_alloc):
    """Merge predecessor exit states at a join.

    Positionally equal expressions pass through; a conflicting slot spills:
    every predecessor gets an assignment to a fresh numbered temp and the
    join sees the temp.  Returns (entry_state, spills) where spills maps
    predecessor index -> list of Assign to append.
    """
    depths = {s.depth for s in states}
    if len(depths) != 1:
        raise StackDepthMismatch(block_id, sorted(depths))
    depth = depths.pop()
    merged = []
    spills = {i: [] for i in range(len(states))}
    for slot in range(depth):
        exprs = [s.entries[slot] for s in states]
        first = exprs[0]
        if all(e == first for e in exprs[1:]):
            merged.append(first)
            continue
        temp = ir.StackTemp(temp_alloc())
        for i, e in enumerate(exprs):
            spills[i].append(ir.Assign([ir.Name(temp.name, "fast")], e))
        merged.append(ir.Name(temp.name, "fast"))
    return StackState(merged), spills
