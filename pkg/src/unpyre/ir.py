"""Lifted expression and statement trees.

Expressions mirror what the evaluation stack holds; statements are what
block simulation emits.  Control-flow markers (Jump/CondJump/loop guards)
only live between simulation and structuring; the emitter rejects any
survivor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .code_model import CodeObject, Const


class Expr:
    __slots__ = ()


@dataclass
class ConstE(Expr):
    const: Const


@dataclass
class Name(Expr):
    id: str
    scope: str = "fast"  # fast | global | deref | name


@dataclass
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    inplace: bool = False


@dataclass
class UnaryOp(Expr):
    op: str  # 'not' | '-' | '+' | '~'
    operand: Expr


@dataclass
class Compare(Expr):
    left: Expr
    ops: list  # of str
    comparators: list  # of Expr


@dataclass
class BoolOp(Expr):
    op: str  # 'and' | 'or'
    values: list


@dataclass
class Call(Expr):
    func: Expr
    args: list = field(default_factory=list)  # Expr or Starred
    keywords: list = field(default_factory=list)  # (name | None, Expr); None = **


@dataclass
class Attr(Expr):
    value: Expr
    name: str


@dataclass
class Subscript(Expr):
    value: Expr
    index: Expr


@dataclass
class SliceE(Expr):
    lower: Expr | None
    upper: Expr | None
    step: Expr | None = None


@dataclass
class TupleE(Expr):
    elts: list


@dataclass
class ListE(Expr):
    elts: list


@dataclass
class SetE(Expr):
    elts: list


@dataclass
class DictE(Expr):
    keys: list  # None key = ** merge
    values: list


@dataclass
class Starred(Expr):
    value: Expr


@dataclass
class FormattedValue(Expr):
    value: Expr
    conversion: str = ""  # '', 's', 'r', 'a'
    format_spec: Expr | None = None  # str const or FString


@dataclass
class FString(Expr):
    parts: list  # str | FormattedValue


@dataclass
class Ternary(Expr):
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass
class Yield(Expr):
    value: Expr | None


@dataclass
class YieldFrom(Expr):
    value: Expr


@dataclass
class NamedExpr(Expr):
    target: Name
    value: Expr


@dataclass
class Lambda(Expr):
    params: Params
    body: Expr


@dataclass
class CompExpr(Expr):
    kind: str  # 'list' | 'set' | 'dict' | 'gen'
    elt: Expr | None  # list/set/gen element
    key: Expr | None  # dict
    value: Expr | None  # dict
    generators: list  # of CompFor


@dataclass
class CompFor:
    target: Expr
    iter: Expr
    ifs: list


@dataclass
class FuncExpr(Expr):
    """MAKE_FUNCTION result; structuring turns it into def/lambda/comprehension."""

    code: CodeObject
    defaults: list = field(default_factory=list)
    kwdefaults: list = field(default_factory=list)  # (name, Expr)
    annotations: list = field(default_factory=list)  # (name, Expr)
    closure: tuple = ()


@dataclass
class StackTemp(Expr):
    index: int

    @property
    def name(self):
        return f"__stack_{self.index}"


# Internal stack-only entries; never part of emitted trees.


@dataclass
class NullSlot(Expr):
    """PUSH_NULL / LOAD_METHOD padding slot."""


@dataclass
class MethodSelf(Expr):
    """The self/padding slot pushed under a method by LOAD_METHOD."""


@dataclass
class ExcValue(Expr):
    """Current exception pushed on entry to a handler."""
    slot: int = 0


@dataclass
class FinallySentinel(Expr):
    """Opaque floor under a 3.8 finally body; END_FINALLY consumes it."""


@dataclass
class UnpackSlot(Expr):
    source: Expr
    count: int
    index: int
    star_index: int = -1  # >= 0 when UNPACK_EX produced this run
    after_count: int = 0
    group: object = None  # shared list collecting targets


@dataclass
class ImportExpr(Expr):
    module: str
    fromlist: tuple | None
    level: int


@dataclass
class ImportFromExpr(Expr):
    source: Expr
    name: str


@dataclass
class BuildClass(Expr):
    """The callable pushed by LOAD_BUILD_CLASS."""


# ------------------------------------------------------------- statements


class Stmt:
    __slots__ = ()


@dataclass
class Assign(Stmt):
    targets: list  # Name/Attr/Subscript/TupleE/ListE/Starred
    value: Expr


@dataclass
class AugAssign(Stmt):
    target: Expr
    op: str
    value: Expr


@dataclass
class ExprStmt(Stmt):
    value: Expr


@dataclass
class Return(Stmt):
    value: Expr


@dataclass
class Raise(Stmt):
    exc: Expr | None = None
    cause: Expr | None = None


@dataclass
class Delete(Stmt):
    targets: list


@dataclass
class Import(Stmt):
    module: str
    asname: str | None = None


@dataclass
class ImportFrom(Stmt):
    module: str
    names: list = field(default_factory=list)  # (name, asname|None)
    level: int = 0


@dataclass
class ImportStar(Stmt):
    module: str
    level: int = 0


@dataclass
class Pass(Stmt):
    pass


@dataclass
class Global(Stmt):
    names: list


@dataclass
class Nonlocal(Stmt):
    names: list


@dataclass
class Assert(Stmt):
    test: Expr
    msg: Expr | None = None


# ------------------------------------------------------ structured nodes


@dataclass
class If(Stmt):
    cond: Expr
    then: list
    orelse: list = field(default_factory=list)


@dataclass
class While(Stmt):
    cond: Expr
    body: list
    orelse: list = field(default_factory=list)


@dataclass
class For(Stmt):
    target: Expr
    iter: Expr
    body: list
    orelse: list = field(default_factory=list)


@dataclass
class ExceptHandler:
    type: Expr | None  # None = bare except
    name: str | None
    body: list = field(default_factory=list)


@dataclass
class Try(Stmt):
    body: list
    handlers: list = field(default_factory=list)
    orelse: list = field(default_factory=list)
    final: list = field(default_factory=list)


@dataclass
class WithItem:
    context: Expr
    target: Expr | None


@dataclass
class With(Stmt):
    items: list
    body: list


@dataclass
class FuncDef(Stmt):
    name: str
    params: Params
    body: list
    decorators: list = field(default_factory=list)
    is_async: bool = False


@dataclass
class ClassDef(Stmt):
    name: str
    bases: list
    keywords: list
    body: list
    decorators: list = field(default_factory=list)


@dataclass
class Break(Stmt):
    pass


@dataclass
class Continue(Stmt):
    pass


# ------------------------------------------------------------- markers


@dataclass
class JumpMarker(Stmt):
    target: int


@dataclass
class CondJumpMarker(Stmt):
    cond: Expr
    jump_when: bool  # jump taken when cond is this truth value
    target: int
    pops_on_jump: bool = True  # False for the *_OR_POP family


@dataclass
class Params:
    """Reconstructed parameter list of one code object."""

    args: list = field(default_factory=list)  # plain positional names
    posonly: int = 0
    vararg: str | None = None
    kwonly: list = field(default_factory=list)
    kwarg: str | None = None
    defaults: list = field(default_factory=list)  # Exprs, right-aligned to args
    kwdefaults: dict = field(default_factory=dict)  # name -> Expr


MARKER_TYPES = (JumpMarker, CondJumpMarker)


def params_from_code(code: CodeObject, defaults=(), kwdefaults=()):
    names = code.varnames
    n = code.argcount
    params = Params(
        args=list(names[:n]),
        posonly=code.posonlyargcount,
        kwonly=list(names[n : n + code.kwonlyargcount]),
        defaults=list(defaults),
        kwdefaults=dict(kwdefaults),
    )
    i = n + code.kwonlyargcount
    from .code_model import CO_VARARGS, CO_VARKEYWORDS

    if code.flags & CO_VARARGS:
        params.vararg = names[i]
        i += 1
    if code.flags & CO_VARKEYWORDS:
        params.kwarg = names[i]
    return params


def walk_stmts(stmts):
    """Yield every statement of a structured tree, depth first."""
    for s in stmts:
        yield s
        for sub in _child_blocks(s):
            yield from walk_stmts(sub)


def _child_blocks(s):
    if isinstance(s, If):
        return [s.then, s.orelse]
    if isinstance(s, (While, For)):
        return [s.body, s.orelse]
    if isinstance(s, Try):
        return [s.body, *[h.body for h in s.handlers], s.orelse, s.final]
    if isinstance(s, With):
        return [s.body]
    if isinstance(s, (FuncDef, ClassDef)):
        return [s.body]
    return []
