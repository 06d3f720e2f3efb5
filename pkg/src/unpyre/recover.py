"""Re-expression of nested code constants as source-level constructs.

Calls to comprehension code objects become comprehension expressions,
lambda constants become lambdas, named function objects become defs, and
build-class calls become class statements.  When a shape does not match,
the code object is emitted as an explicit def under a generated name, so
output stays correct even off the expected patterns.
"""

from __future__ import annotations

from dataclasses import fields as dc_fields

from . import ir
from .symexec import CompAccum, negate

COMP_NAMES = {
    "<listcomp>": "list",
    "<setcomp>": "set",
    "<dictcomp>": "dict",
    "<genexpr>": "gen",
}


def map_expr(e, fn, pre=None):
    """Expression rewrite: `pre` may replace a whole subtree before descent
    (and is responsible for its own recursion); `fn` sees each node after
    its children."""
    if not isinstance(e, ir.Expr):
        return e
    if pre is not None:
        replaced = pre(e)
        if replaced is not None:
            return replaced
    for f in dc_fields(e):
        v = getattr(e, f.name)
        if isinstance(v, ir.Expr):
            setattr(e, f.name, map_expr(v, fn, pre))
        elif isinstance(v, list):
            setattr(
                e,
                f.name,
                [
                    map_expr(x, fn, pre)
                    if isinstance(x, ir.Expr)
                    else _map_pair(x, fn, pre)
                    for x in v
                ],
            )
    return fn(e)


def _map_pair(x, fn, pre=None):
    if isinstance(x, tuple) and len(x) == 2 and isinstance(x[1], ir.Expr):
        return (x[0], map_expr(x[1], fn, pre))
    if isinstance(x, ir.CompFor):
        x.target = map_expr(x.target, fn, pre)
        x.iter = map_expr(x.iter, fn, pre)
        x.ifs = [map_expr(i, fn, pre) for i in x.ifs]
    return x


def _stmt_exprs(s, fn, pre=None):
    for f in dc_fields(s):
        v = getattr(s, f.name)
        if isinstance(v, ir.Expr):
            setattr(s, f.name, map_expr(v, fn, pre))
        elif isinstance(v, list) and v and all(isinstance(x, ir.Expr) for x in v):
            setattr(s, f.name, [map_expr(x, fn, pre) for x in v])
        elif isinstance(v, list):
            for x in v:
                if isinstance(x, ir.WithItem):
                    x.context = map_expr(x.context, fn, pre)
                    if x.target is not None:
                        x.target = map_expr(x.target, fn, pre)
                elif isinstance(x, tuple) and len(x) == 2 and isinstance(x[1], ir.Expr):
                    idx = v.index(x)
                    v[idx] = (x[0], map_expr(x[1], fn, pre))


class DefRecovery:
    """Single pass over a statement tree, inlining nested code objects."""

    def __init__(self, decompile_child, code):
        self.decompile_child = decompile_child
        self.code = code
        self.hoisted = []
        self.lambda_counter = 0

    def rewrite_block(self, stmts):
        out = []
        for s in stmts:
            replacement = self._rewrite_stmt(s)
            out.extend(self.hoisted)
            self.hoisted = []
            out.extend(replacement)
        return out

    def _rewrite_stmt(self, s):
        # def / class statements appear as stores of function expressions
        if isinstance(s, ir.Assign) and len(s.targets) == 1 and isinstance(
            s.targets[0], ir.Name
        ):
            made = self._match_def(s.targets[0], s.value)
            if made is not None:
                return [made]

        for name in ("then", "orelse", "body", "final"):
            sub = getattr(s, name, None)
            if isinstance(sub, list) and sub and isinstance(sub[0], ir.Stmt):
                setattr(s, name, self.rewrite_block(sub))
            elif isinstance(sub, list) and not sub:
                pass
        if isinstance(s, ir.Try):
            for h in s.handlers:
                h.body = self.rewrite_block(h.body)
        if isinstance(s, ir.With):
            s.body = self.rewrite_block(s.body)

        _stmt_exprs(s, self._post_expr, self._pre_expr)
        return [s]

    def _match_def(self, target, value):
        decorators = []
        inner = value
        while (
            isinstance(inner, ir.Call)
            and len(inner.args) == 1
            and not inner.keywords
            and not isinstance(inner.func, ir.BuildClass)
        ):
            decorators.append(inner.func)
            inner = inner.args[0]

        if isinstance(inner, ir.Call) and isinstance(inner.func, ir.BuildClass):
            made = self._make_classdef(target.id, inner)
            if made is not None:
                made.decorators = [
                    map_expr(d, self._post_expr, self._pre_expr) for d in decorators
                ]
                return made
            return None

        if isinstance(inner, ir.FuncExpr) and inner.code.name == target.id:
            made = self._make_funcdef(target.id, inner)
            made.decorators = [map_expr(d, self._post_expr, self._pre_expr) for d in decorators]
            return made
        return None

    def _make_funcdef(self, name, fe):
        params = ir.params_from_code(
            fe.code,
            [map_expr(d, self._post_expr, self._pre_expr) for d in fe.defaults],
            [(n, map_expr(d, self._post_expr, self._pre_expr)) for n, d in fe.kwdefaults],
        )
        body = self.decompile_child(fe.code)
        if fe.code.consts and fe.code.consts[0].kind == "str":
            body = [ir.ExprStmt(ir.ConstE(fe.code.consts[0]))] + body
        return ir.FuncDef(name, params, body or [ir.Pass()])

    def _make_classdef(self, name, call):
        args = call.args
        if len(args) < 2 or not isinstance(args[0], ir.FuncExpr):
            return None
        cls_code = args[0].code
        bases = [map_expr(b, self._post_expr, self._pre_expr) for b in args[2:]]
        keywords = [
            (k, map_expr(v, self._post_expr, self._pre_expr)) for k, v in call.keywords
        ]
        body = self.decompile_child(cls_code)
        body = _clean_class_body(body)
        return ir.ClassDef(name, bases, keywords, body or [ir.Pass()])

    # ------------------------------------------------------------- exprs

    def _pre_expr(self, e):
        """Whole-subtree replacements that must fire before children."""
        if isinstance(e, ir.Call) and isinstance(e.func, ir.FuncExpr):
            kind = COMP_NAMES.get(e.func.code.name)
            if kind and len(e.args) == 1 and not e.keywords:
                arg = map_expr(e.args[0], self._post_expr, self._pre_expr)
                comp = self._make_comp(kind, e.func.code, arg)
                if comp is not None:
                    return comp
        if isinstance(e, ir.FuncExpr) and e.code.name == "<lambda>":
            lam = self._make_lambda(e)
            if lam is not None:
                return lam
        return None

    def _post_expr(self, e):
        if isinstance(e, ir.FuncExpr):
            return self._hoist(e)
        return e

    def _rewrite_expr(self, e):
        return map_expr(e, self._post_expr, self._pre_expr)

    def _make_lambda(self, fe):
        body = self.decompile_child(fe.code)
        if len(body) == 1 and isinstance(body[0], ir.Return):
            params = ir.params_from_code(fe.code, fe.defaults, fe.kwdefaults)
            return ir.Lambda(params, body[0].value)
        return None

    def _make_comp(self, kind, code, iter_arg):
        body = self.decompile_child(code)
        matched = _match_comp_body(body)
        if matched is None:
            return None
        accum, gens = matched
        gens[0].iter = iter_arg
        if kind == "dict":
            if not isinstance(accum, CompAccum) or accum.kind != "map":
                return None
            return ir.CompExpr("dict", None, accum.key, accum.value, gens)
        if isinstance(accum, CompAccum):
            return ir.CompExpr(kind, accum.value, None, None, gens)
        return ir.CompExpr(kind, accum, None, None, gens)

    def _hoist(self, fe):
        name = fe.code.name
        if name == "<lambda>":
            name = f"__lambda_{self.lambda_counter}"
            self.lambda_counter += 1
        self.hoisted.append(self._make_funcdef(name, fe))
        return ir.Name(name, "fast")


def _match_comp_body(body):
    seq = list(body)
    if seq and isinstance(seq[-1], ir.Return):
        seq = seq[:-1]
    if len(seq) != 1 or not isinstance(seq[0], ir.For):
        return None
    node = seq[0]
    gens = []
    while True:
        if node.orelse:
            return None
        gen = ir.CompFor(node.target, node.iter, [])
        gens.append(gen)
        inner = node.body
        while True:
            if (
                len(inner) >= 2
                and isinstance(inner[0], ir.If)
                and len(inner[0].then) == 1
                and isinstance(inner[0].then[0], ir.Continue)
                and not inner[0].orelse
            ):
                gen.ifs.append(negate(inner[0].cond))
                inner = inner[1:]
                continue
            if (
                len(inner) == 1
                and isinstance(inner[0], ir.If)
                and not inner[0].orelse
                and not (
                    len(inner[0].then) == 1
                    and isinstance(inner[0].then[0], ir.Continue)
                )
            ):
                gen.ifs.append(inner[0].cond)
                inner = inner[0].then
                continue
            break
        if len(inner) == 1 and isinstance(inner[0], ir.For):
            node = inner[0]
            continue
        if len(inner) == 1 and isinstance(inner[0], CompAccum):
            return inner[0], gens
        if (
            len(inner) == 1
            and isinstance(inner[0], ir.ExprStmt)
            and isinstance(inner[0].value, ir.Yield)
        ):
            return inner[0].value.value, gens
        return None


def _clean_class_body(body):
    out = []
    for s in body:
        if isinstance(s, ir.Assign) and len(s.targets) == 1 and isinstance(
            s.targets[0], ir.Name
        ):
            tid = s.targets[0].id
            if tid == "__module__" and isinstance(s.value, ir.Name):
                continue
            if tid == "__qualname__" and isinstance(s.value, ir.ConstE):
                continue
            if tid == "__classcell__":
                continue
            if tid == "__doc__" and isinstance(s.value, ir.ConstE):
                out.append(ir.ExprStmt(s.value))
                continue
        if isinstance(s, ir.Return):
            continue
        out.append(s)
    return out


def add_scope_decls(body, code):
    """Insert global/nonlocal declarations implied by store/delete scopes."""
    globals_seen = []
    nonlocals_seen = []
    free = set(code.freevars)

    def note(name_expr):
        if not isinstance(name_expr, ir.Name):
            return
        if name_expr.scope == "global" and name_expr.id not in globals_seen:
            globals_seen.append(name_expr.id)
        if name_expr.scope == "deref" and name_expr.id in free and name_expr.id not in nonlocals_seen:
            nonlocals_seen.append(name_expr.id)

    def collect_target(t):
        if isinstance(t, ir.Name):
            note(t)
        elif isinstance(t, (ir.TupleE, ir.ListE)):
            for el in t.elts:
                collect_target(el)
        elif isinstance(t, ir.Starred):
            collect_target(t.value)

    def _iter_same_scope(stmts):
        for s in stmts:
            if isinstance(s, (ir.FuncDef, ir.ClassDef)):
                continue
            yield s
            for sub in ir._child_blocks(s):
                yield from _iter_same_scope(sub)

    for s in _iter_same_scope(body):
        if isinstance(s, ir.Assign):
            for t in s.targets:
                collect_target(t)
        elif isinstance(s, ir.AugAssign):
            collect_target(s.target)
        elif isinstance(s, ir.Delete):
            for t in s.targets:
                collect_target(t)
        elif isinstance(s, ir.For):
            collect_target(s.target)

    decls = []
    if globals_seen:
        decls.append(ir.Global(globals_seen))
    if nonlocals_seen:
        decls.append(ir.Nonlocal(nonlocals_seen))
    if not decls:
        return body
    insert = 0
    if body and isinstance(body[0], ir.ExprStmt) and isinstance(body[0].value, ir.ConstE):
        insert = 1
    return body[:insert] + decls + body[insert:]
