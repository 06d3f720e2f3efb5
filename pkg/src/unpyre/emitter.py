"""Source text rendering with exact precedence and literal fidelity.

Output is deterministic: 4-space indents, one statement per line, LF line
endings, trailing newline.  Floats render via shortest round-trip repr;
-0.0 and NaN keep their bit patterns through dedicated spellings.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from . import ir
from .code_model import Const
from .errors import InternalMarkerLeak

# Lower binds looser.  Derived from the language reference ordering.
PREC_LAMBDA = 1
PREC_TERNARY = 2
PREC_OR = 3
PREC_AND = 4
PREC_NOT = 5
PREC_COMPARE = 6
PREC_BITOR = 7
PREC_BITXOR = 8
PREC_BITAND = 9
PREC_SHIFT = 10
PREC_ARITH = 11
PREC_TERM = 12
PREC_UNARY = 13
PREC_POWER = 14
PREC_AWAIT = 15
PREC_ATOM = 16

_BINOP_PREC = {
    "|": PREC_BITOR, "^": PREC_BITXOR, "&": PREC_BITAND,
    "<<": PREC_SHIFT, ">>": PREC_SHIFT,
    "+": PREC_ARITH, "-": PREC_ARITH,
    "*": PREC_TERM, "/": PREC_TERM, "//": PREC_TERM, "%": PREC_TERM,
    "@": PREC_TERM, "**": PREC_POWER,
}
_RIGHT_ASSOC = {"**"}


@dataclass
class EmitStyle:
    indent: str = "    "
    header: bool = False
    tool: str = "unpyre"


def render_constant(c: Const) -> str:
    kind = c.kind
    if kind == "none":
        return "None"
    if kind == "bool":
        return "True" if c.value else "False"
    if kind == "ellipsis":
        return "..."
    if kind == "int":
        return repr(c.value)
    if kind == "float":
        return _render_float(c.value)
    if kind == "complex":
        return _render_complex(c.value)
    if kind == "str":
        return repr(c.value)
    if kind == "bytes":
        return repr(c.value)
    if kind == "tuple":
        if not c.value:
            return "()"
        inner = ", ".join(render_constant(x) for x in c.value)
        return f"({inner},)" if len(c.value) == 1 else f"({inner})"
    if kind == "frozenset":
        if not c.value:
            return "frozenset()"
        return "frozenset({%s})" % ", ".join(render_constant(x) for x in c.value)
    raise InternalMarkerLeak(f"constant kind {kind} cannot be rendered inline")


def _render_float(v: float) -> str:
    if math.isnan(v):
        return "float('nan')"
    if math.isinf(v):
        return "float('inf')" if v > 0 else "float('-inf')"
    if v == 0.0 and math.copysign(1.0, v) < 0:
        return "-0.0"
    return repr(v)


def _render_complex(z: complex) -> str:
    # literal arithmetic folds back to the same constant at compile time
    re, im = z.real, z.imag
    if re == 0.0 and math.copysign(1.0, re) > 0 and not math.isnan(im):
        return _imag_literal(im)
    if math.isnan(re) or math.isinf(re) or math.isnan(im) or math.isinf(im):
        return f"complex({_render_float(re)}, {_render_float(im)})"
    if math.copysign(1.0, im) >= 0:
        return f"({_render_float(re)} + {_imag_literal(im)})"
    return f"({_render_float(re)} - {_imag_literal(-im)})"


def _imag_literal(im: float) -> str:
    if math.isinf(im):
        return "complex(0.0, %s)" % _render_float(im)
    body = repr(im)
    return body + "j"


class Emitter:
    def __init__(self, style: EmitStyle | None = None):
        self.style = style or EmitStyle()
        self.lines = []
        self.depth = 0

    # ------------------------------------------------------------- output

    def line(self, text):
        self.lines.append(f"{self.style.indent * self.depth}{text}")

    def block(self, stmts):
        self.depth += 1
        if not stmts:
            self.line("pass")
        for s in stmts:
            self.stmt(s)
        self.depth -= 1

    def result(self):
        return "\n".join(self.lines) + "\n"

    # ---------------------------------------------------------- statements

    def stmt(self, s):
        if isinstance(s, ir.MARKER_TYPES) or type(s).__name__ in (
            "CompAccum",
            "_WhileShape",
        ):
            raise InternalMarkerLeak(f"marker survived structuring: {s!r}")
        name = "_stmt_" + type(s).__name__
        handler = getattr(self, name, None)
        if handler is None:
            raise InternalMarkerLeak(f"no emitter for {type(s).__name__}")
        handler(s)

    def _stmt_Assign(self, s):
        targets = " = ".join(self._target(t) for t in s.targets)
        self.line(f"{targets} = {self.expr(s.value)}")

    def _stmt_AugAssign(self, s):
        self.line(f"{self._target(s.target)} {s.op}= {self.expr(s.value)}")

    def _stmt_ExprStmt(self, s):
        self.line(self.expr(s.value))

    def _stmt_Return(self, s):
        if isinstance(s.value, ir.ConstE) and s.value.const.kind == "none":
            self.line("return None")
        else:
            self.line(f"return {self.expr(s.value)}")

    def _stmt_Raise(self, s):
        if s.exc is None:
            self.line("raise")
        elif s.cause is not None:
            self.line(f"raise {self.expr(s.exc)} from {self.expr(s.cause)}")
        else:
            self.line(f"raise {self.expr(s.exc)}")

    def _stmt_Delete(self, s):
        self.line("del " + ", ".join(self._target(t) for t in s.targets))

    def _stmt_Pass(self, s):
        self.line("pass")

    def _stmt_Break(self, s):
        self.line("break")

    def _stmt_Continue(self, s):
        self.line("continue")

    def _stmt_Global(self, s):
        self.line("global " + ", ".join(s.names))

    def _stmt_Nonlocal(self, s):
        self.line("nonlocal " + ", ".join(s.names))

    def _stmt_Assert(self, s):
        if s.msg is not None:
            self.line(f"assert {self.expr(s.test)}, {self.expr(s.msg)}")
        else:
            self.line(f"assert {self.expr(s.test)}")

    def _stmt_Import(self, s):
        if s.asname:
            self.line(f"import {s.module} as {s.asname}")
        else:
            self.line(f"import {s.module}")

    def _stmt_ImportFrom(self, s):
        mod = "." * s.level + s.module
        parts = [
            f"{n} as {a}" if a else n for n, a in s.names
        ]
        self.line(f"from {mod} import " + ", ".join(parts))

    def _stmt_ImportStar(self, s):
        self.line(f"from {'.' * s.level + s.module} import *")

    def _stmt_If(self, s):
        self._emit_if(s, "if")

    def _emit_if(self, s, kw):
        self.line(f"{kw} {self.expr(s.cond)}:")
        self.block(s.then)
        if not s.orelse:
            return
        if len(s.orelse) == 1 and isinstance(s.orelse[0], ir.If):
            self._emit_if(s.orelse[0], "elif")
            return
        self.line("else:")
        self.block(s.orelse)

    def _stmt_While(self, s):
        self.line(f"while {self.expr(s.cond)}:")
        self.block(s.body)
        if s.orelse:
            self.line("else:")
            self.block(s.orelse)

    def _stmt_For(self, s):
        self.line(f"for {self._target(s.target)} in {self.expr(s.iter)}:")
        self.block(s.body)
        if s.orelse:
            self.line("else:")
            self.block(s.orelse)

    def _stmt_Try(self, s):
        self.line("try:")
        self.block(s.body)
        for h in s.handlers:
            if h.type is None:
                self.line("except:")
            elif h.name:
                self.line(f"except {self.expr(h.type)} as {h.name}:")
            else:
                self.line(f"except {self.expr(h.type)}:")
            self.block(h.body)
        if s.orelse:
            self.line("else:")
            self.block(s.orelse)
        if s.final:
            self.line("finally:")
            self.block(s.final)

    def _stmt_With(self, s):
        items = []
        for item in s.items:
            part = self.expr(item.context)
            if item.target is not None:
                part += f" as {self._target(item.target, nested=True)}"
            items.append(part)
        self.line("with " + ", ".join(items) + ":")
        self.block(s.body)

    def _stmt_FuncDef(self, s):
        for d in s.decorators:
            self.line("@" + self.expr(d))
        self.line(f"def {s.name}({self._params(s.params)}):")
        self.block(s.body)

    def _stmt_ClassDef(self, s):
        for d in s.decorators:
            self.line("@" + self.expr(d))
        head = f"class {s.name}"
        args = [self.expr(b) for b in s.bases]
        args += [f"{k}={self.expr(v)}" for k, v in s.keywords]
        if args:
            head += "(" + ", ".join(args) + ")"
        self.line(head + ":")
        self.block(s.body)

    def _params(self, p: ir.Params) -> str:
        parts = []
        ndefaults = len(p.defaults)
        plain = p.args
        for i, a in enumerate(plain):
            di = i - (len(plain) - ndefaults)
            if di >= 0:
                parts.append(f"{a}={self.expr(p.defaults[di])}")
            else:
                parts.append(a)
            if p.posonly and i + 1 == p.posonly:
                parts.append("/")
        if p.vararg:
            parts.append("*" + p.vararg)
        elif p.kwonly:
            parts.append("*")
        for k in p.kwonly:
            if k in p.kwdefaults:
                parts.append(f"{k}={self.expr(p.kwdefaults[k])}")
            else:
                parts.append(k)
        if p.kwarg:
            parts.append("**" + p.kwarg)
        return ", ".join(parts)

    # -------------------------------------------------------- expressions

    def _target(self, t, nested=False):
        if isinstance(t, (ir.TupleE, ir.ListE)) and t.elts:
            inner = ", ".join(self._target(e, nested=True) for e in t.elts)
            if isinstance(t, ir.ListE):
                return f"[{inner}]"
            if len(t.elts) == 1:
                inner += ","
            return f"({inner})" if nested else inner
        if isinstance(t, ir.Starred):
            return "*" + self._target(t.value, nested)
        return self.expr(t)

    def expr(self, e, parent=0, right_side=False):
        name = "_expr_" + type(e).__name__
        handler = getattr(self, name, None)
        if handler is None:
            raise InternalMarkerLeak(f"no emitter for expression {type(e).__name__}: {e!r}")
        text, prec = handler(e)
        if prec < parent or (prec == parent and right_side and prec != PREC_ATOM):
            return f"({text})"
        return text

    def _expr_ConstE(self, e):
        text = render_constant(e.const)
        prec = PREC_ATOM
        if text.startswith("-") or e.const.kind == "complex":
            prec = PREC_UNARY
        return text, prec

    def _expr_Name(self, e):
        return e.id, PREC_ATOM

    def _expr_StackTemp(self, e):
        return e.name, PREC_ATOM

    def _expr_BinOp(self, e):
        prec = _BINOP_PREC[e.op]
        if e.op in _RIGHT_ASSOC:
            left = self.expr(e.left, prec, right_side=True)
            right = self.expr(e.right, prec)
        else:
            left = self.expr(e.left, prec)
            right = self.expr(e.right, prec, right_side=True)
        return f"{left} {e.op} {right}", prec

    def _expr_UnaryOp(self, e):
        if e.op == "not":
            return f"not {self.expr(e.operand, PREC_NOT)}", PREC_NOT
        # unary minus binds tighter than ** on its right: -x ** y is -(x**y)
        return f"{e.op}{self.expr(e.operand, PREC_UNARY)}", PREC_UNARY

    def _expr_Compare(self, e):
        parts = [self.expr(e.left, PREC_COMPARE, right_side=True)]
        for op, operand in zip(e.ops, e.comparators):
            parts.append(op)
            parts.append(self.expr(operand, PREC_COMPARE, right_side=True))
        return " ".join(parts), PREC_COMPARE

    def _expr_BoolOp(self, e):
        prec = PREC_OR if e.op == "or" else PREC_AND
        joined = f" {e.op} ".join(
            self.expr(v, prec, right_side=(i > 0)) for i, v in enumerate(e.values)
        )
        return joined, prec

    def _expr_Ternary(self, e):
        body = (
            f"{self.expr(e.then, PREC_TERNARY, right_side=True)} if "
            f"{self.expr(e.cond, PREC_TERNARY, right_side=True)} else "
            f"{self.expr(e.orelse, PREC_TERNARY)}"
        )
        return body, PREC_TERNARY

    def _expr_Lambda(self, e):
        params = self._params(e.params)
        head = f"lambda {params}: " if params else "lambda: "
        return head + self.expr(e.body, PREC_LAMBDA), PREC_LAMBDA

    def _expr_NamedExpr(self, e):
        return f"{e.target.id} := {self.expr(e.value, PREC_LAMBDA)}", PREC_LAMBDA

    def _expr_Call(self, e):
        func = self.expr(e.func, PREC_ATOM)
        args = [self._callarg(a) for a in e.args]
        for k, v in e.keywords:
            if k is None:
                args.append("**" + self.expr(v, PREC_LAMBDA))
            else:
                args.append(f"{k}={self.expr(v, PREC_LAMBDA)}")
        return f"{func}({', '.join(args)})", PREC_ATOM

    def _callarg(self, a):
        if isinstance(a, ir.Starred):
            return "*" + self.expr(a.value, PREC_LAMBDA)
        return self.expr(a, PREC_LAMBDA)

    def _expr_Attr(self, e):
        base = self.expr(e.value, PREC_ATOM)
        if isinstance(e.value, ir.ConstE) and e.value.const.kind == "int":
            base = f"({base})"
        return f"{base}.{e.name}", PREC_ATOM

    def _expr_Subscript(self, e):
        return (
            f"{self.expr(e.value, PREC_ATOM)}[{self._index(e.index)}]",
            PREC_ATOM,
        )

    def _index(self, idx):
        if isinstance(idx, ir.SliceE):
            return self._slice(idx)
        if isinstance(idx, ir.TupleE) and idx.elts and any(
            isinstance(el, ir.SliceE) for el in idx.elts
        ):
            return ", ".join(
                self._slice(el) if isinstance(el, ir.SliceE) else self.expr(el)
                for el in idx.elts
            )
        return self.expr(idx)

    def _slice(self, s):
        lo = self.expr(s.lower, PREC_TERNARY) if s.lower is not None else ""
        hi = self.expr(s.upper, PREC_TERNARY) if s.upper is not None else ""
        text = f"{lo}:{hi}"
        if s.step is not None:
            text += f":{self.expr(s.step, PREC_TERNARY)}"
        return text

    def _expr_TupleE(self, e):
        if not e.elts:
            return "()", PREC_ATOM
        inner = ", ".join(self._callarg(x) for x in e.elts)
        if len(e.elts) == 1:
            return f"({inner},)", PREC_ATOM
        return f"({inner})", PREC_ATOM

    def _expr_ListE(self, e):
        return "[" + ", ".join(self._callarg(x) for x in e.elts) + "]", PREC_ATOM

    def _expr_SetE(self, e):
        if not e.elts:
            return "set()", PREC_ATOM
        return "{" + ", ".join(self._callarg(x) for x in e.elts) + "}", PREC_ATOM

    def _expr_DictE(self, e):
        parts = []
        for k, v in zip(e.keys, e.values):
            if k is None:
                parts.append("**" + self.expr(v, PREC_LAMBDA))
            else:
                parts.append(f"{self.expr(k, PREC_LAMBDA)}: {self.expr(v, PREC_LAMBDA)}")
        return "{" + ", ".join(parts) + "}", PREC_ATOM

    def _expr_Starred(self, e):
        return "*" + self.expr(e.value, PREC_LAMBDA), PREC_LAMBDA

    def _expr_Yield(self, e):
        if e.value is None or (
            isinstance(e.value, ir.ConstE) and e.value.const.kind == "none"
        ):
            return "(yield)", PREC_ATOM
        return f"(yield {self.expr(e.value, PREC_LAMBDA)})", PREC_ATOM

    def _expr_YieldFrom(self, e):
        return f"(yield from {self.expr(e.value, PREC_LAMBDA)})", PREC_ATOM

    def _expr_CompExpr(self, e):
        gens = []
        for g in e.generators:
            part = f"for {self._target(g.target)} in {self.expr(g.iter, PREC_TERNARY)}"
            for cond in g.ifs:
                part += f" if {self.expr(cond, PREC_TERNARY)}"
            gens.append(part)
        spine = " ".join(gens)
        if e.kind == "dict":
            body = f"{self.expr(e.key, PREC_TERNARY)}: {self.expr(e.value, PREC_TERNARY)}"
            return "{" + f"{body} {spine}" + "}", PREC_ATOM
        elt = self.expr(e.elt, PREC_TERNARY)
        if e.kind == "list":
            return f"[{elt} {spine}]", PREC_ATOM
        if e.kind == "set":
            return "{" + f"{elt} {spine}" + "}", PREC_ATOM
        return f"({elt} {spine})", PREC_ATOM

    def _expr_FString(self, e):
        bits = []
        for part in e.parts:
            if isinstance(part, str):
                bits.append(part.replace("{", "{{").replace("}", "}}"))
            else:
                bits.append(self._format_part(part))
        body = "".join(bits)
        quote = "'" if "'" not in body else '"'
        if "'" in body and '"' in body:
            body = body.replace("'", "\\'")
            quote = "'"
        return f"f{quote}{body}{quote}", PREC_ATOM

    def _format_part(self, fv: ir.FormattedValue):
        inner = self.expr(fv.value, PREC_TERNARY)
        if inner.startswith("{"):
            inner = " " + inner
        text = "{" + inner
        if fv.conversion:
            text += "!" + fv.conversion
        if fv.format_spec is not None:
            text += ":" + self._format_spec(fv.format_spec)
        return text + "}"

    def _format_spec(self, spec):
        if isinstance(spec, ir.ConstE):
            return str(spec.const.value)
        if isinstance(spec, ir.FString):
            bits = []
            for part in spec.parts:
                if isinstance(part, str):
                    bits.append(part)
                else:
                    bits.append(self._format_part(part))
            return "".join(bits)
        return "{" + self.expr(spec, PREC_TERNARY) + "}"


def emit_module(stmts, style: EmitStyle | None = None, code=None) -> str:
    """Render a structured statement list as module text."""
    em = Emitter(style)
    if em.style.header and code is not None:
        em.line(
            f"# decompiled by {em.style.tool} from {code.qualname or code.name} "
            f"(python {code.version})"
        )
    if not stmts:
        em.line("pass")
    for s in stmts:
        em.stmt(s)
    return em.result()


def emit_expression(e, parent_precedence=0, style: EmitStyle | None = None) -> str:
    return Emitter(style).expr(e, parent_precedence)
