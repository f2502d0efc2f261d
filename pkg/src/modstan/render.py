"""Canonical text rendering of program ASTs.

This is the single formatter used everywhere: golden tests, concretizer
output and the HTTP service all compare rendered text produced here. The
format is fixed: two-space indentation, one statement per line, blocks in
grammar order, `*` and `/` and `^` tight, all other binary operators spaced,
and parentheses re-derived from tree structure (so rendering is injective up
to the parse).
"""

from __future__ import annotations

from typing import Union

from .syntax import (
    ArrayLit,
    AssignStmt,
    Binary,
    Block,
    BLOCK_ORDER,
    Call,
    CallStmt,
    DeclStmt,
    Expr,
    FieldDecl,
    ForStmt,
    FuncDecl,
    HoleCall,
    IfStmt,
    ImplDecl,
    Index,
    IntLit,
    Param,
    Program,
    RealLit,
    ReturnStmt,
    Slice,
    Stmt,
    TildeStmt,
    TupleLit,
    TypeNode,
    Unary,
    Var,
)

_PREC = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 3,
    "<=": 3,
    ">": 3,
    ">=": 3,
    "+": 4,
    "-": 4,
    "*": 5,
    "/": 5,
    ".*": 5,
    "./": 5,
    "^": 7,
}

_TIGHT = {"*", "/", "^"}
_UNARY_PREC = 6


def render_expr(e: Expr, parent_prec: int = 0) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, RealLit):
        return e.text
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.name}(" + ", ".join(render_expr(a) for a in e.args) + ")"
    if isinstance(e, HoleCall):
        return f"{e.ref.render()}(" + ", ".join(render_expr(a) for a in e.args) + ")"
    if isinstance(e, ArrayLit):
        return "{" + ", ".join(render_expr(a) for a in e.elems) + "}"
    if isinstance(e, TupleLit):
        return "(" + ", ".join(render_expr(a) for a in e.elems) + ")"
    if isinstance(e, Index):
        idxs = []
        for i in e.idxs:
            if isinstance(i, Slice):
                lo = render_expr(i.lo) if i.lo is not None else ""
                hi = render_expr(i.hi) if i.hi is not None else ""
                idxs.append(f"{lo}:{hi}")
            else:
                idxs.append(render_expr(i))
        return render_expr(e.base, 8) + "[" + ",".join(idxs) + "]"
    if isinstance(e, Unary):
        inner = render_expr(e.operand, _UNARY_PREC)
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        prec = _PREC[e.op]
        left = render_expr(e.left, prec)
        # same-precedence right operands keep explicit parens so the render
        # preserves tree shape exactly
        right = render_expr(e.right, prec + (0 if e.op == "^" else 1))
        op = e.op if e.op in _TIGHT else f" {e.op} "
        out = f"{left}{op}{right}"
        if prec < parent_prec:
            return f"({out})"
        return out
    raise TypeError(f"cannot render {type(e).__name__}")


def render_type(ty: TypeNode) -> str:
    out = ty.base
    if ty.constraint:
        out += f"<{ty.constraint}>"
    if ty.size_args:
        out += "[" + ", ".join(render_expr(a) for a in ty.size_args) + "]"
    return out


def render_param(p: Param) -> str:
    return f"{render_type(p.ty)} {p.name}" if p.ty is not None else p.name


def render_param_list(params: tuple[Param, ...], obs: tuple[Param, ...]) -> str:
    inner = ", ".join(render_param(p) for p in params)
    if obs:
        left = ", ".join(render_param(p) for p in obs)
        inner = f"{left} | {inner}" if inner else left
    return f"({inner})"


def render_stmt(s: Stmt, indent: int) -> list[str]:
    pad = "  " * indent
    if isinstance(s, DeclStmt):
        decl = f"{render_type(s.ty)} {s.name}"
        if s.ty.array_dims:
            decl += "[" + ", ".join(render_expr(d) for d in s.ty.array_dims) + "]"
        if s.init is not None:
            decl += f" = {render_expr(s.init)}"
        return [f"{pad}{decl};"]
    if isinstance(s, AssignStmt):
        return [f"{pad}{render_expr(s.target)} {s.op} {render_expr(s.value)};"]
    if isinstance(s, TildeStmt):
        return [f"{pad}{render_expr(s.lhs)} ~ {render_expr(s.call)};"]
    if isinstance(s, CallStmt):
        return [f"{pad}{render_expr(s.call)};"]
    if isinstance(s, ReturnStmt):
        return [f"{pad}return {render_expr(s.value)};" if s.value is not None else f"{pad}return;"]
    if isinstance(s, ForStmt):
        binder = s.vars[0] if len(s.vars) == 1 else "(" + ", ".join(s.vars) + ")"
        seq = f"{render_expr(s.lo)}:{render_expr(s.hi)}" if s.seq is None else render_expr(s.seq)
        lines = [f"{pad}for ({binder} in {seq}) {{"]
        for st in s.body:
            lines.extend(render_stmt(st, indent + 1))
        lines.append(f"{pad}}}")
        return lines
    if isinstance(s, IfStmt):
        lines = [f"{pad}if ({render_expr(s.cond)}) {{"]
        for st in s.then:
            lines.extend(render_stmt(st, indent + 1))
        if s.els is not None:
            lines.append(f"{pad}}} else {{")
            for st in s.els:
                lines.extend(render_stmt(st, indent + 1))
        lines.append(f"{pad}}}")
        return lines
    raise TypeError(f"cannot render {type(s).__name__}")


def render_func(f: FuncDecl, indent: int) -> list[str]:
    pad = "  " * indent
    ret = f.ret if isinstance(f.ret, str) else render_type(f.ret)
    lines = [f"{pad}{ret} {f.name}" + render_param_list(f.params, ()) + " {"]
    for st in f.body:
        lines.extend(render_stmt(st, indent + 1))
    lines.append(f"{pad}}}")
    return lines


def render_block(b: Block, indent: int = 0) -> list[str]:
    pad = "  " * indent
    lines = [f"{pad}{b.kind} {{"]
    for item in b.stmts:
        if isinstance(item, FuncDecl):
            lines.extend(render_func(item, indent + 1))
        else:
            lines.extend(render_stmt(item, indent + 1))
    lines.append(f"{pad}}}")
    return lines


def render_field(f: FieldDecl, indent: int) -> list[str]:
    pad = "  " * indent
    header = f"{pad}field"
    if f.name:
        header += f" {f.name}"
    header += render_param_list(f.params, f.obs_params) + " {"
    lines = [header]
    for st in f.body:
        lines.extend(render_stmt(st, indent + 1))
    if f.ret is not None:
        lines.append("  " * (indent + 1) + f"return {render_expr(f.ret)};")
    lines.append(f"{pad}}}")
    return lines


def render_impl(impl: ImplDecl) -> list[str]:
    header = f'module "{impl.impl_name}" {impl.hole_name}'
    if impl.range_index_params:
        header += "[" + ", ".join(impl.range_index_params) + "]"
    if impl.inst_index_params:
        header += "<" + ", ".join(impl.inst_index_params) + ">"
    if impl.is_simple:
        f = impl.fields[0]
        header += render_param_list(f.params, f.obs_params)
    header += " {"
    lines = [header]
    for ab in sorted(impl.append_blocks, key=lambda b: BLOCK_ORDER.index(b.kind)):
        lines.extend(render_block(ab, 1))
    if impl.is_simple:
        f = impl.fields[0]
        for st in f.body:
            lines.extend(render_stmt(st, 1))
        if f.ret is not None:
            lines.append(f"  return {render_expr(f.ret)};")
    else:
        for f in impl.fields:
            lines.extend(render_field(f, 1))
    lines.append("}")
    return lines


def render(program: Program) -> str:
    """Render a program to canonical text (trailing newline included)."""
    lines: list[str] = []
    ordered = sorted(program.blocks, key=lambda b: BLOCK_ORDER.index(b.kind))
    for b in ordered:
        lines.extend(render_block(b))
    for impl in program.impls:
        lines.extend(render_impl(impl))
    return "\n".join(lines) + "\n"
