"""Tree walkers shared by indexing, checking and inlining passes."""

from __future__ import annotations

from typing import Callable, Iterator, Optional, Union

from .syntax import (
    ArrayLit,
    AssignStmt,
    Binary,
    Block,
    Call,
    CallStmt,
    DeclStmt,
    Expr,
    ForStmt,
    HoleCall,
    IfStmt,
    ImplDecl,
    Index,
    ReturnStmt,
    Slice,
    Stmt,
    TildeStmt,
    TupleLit,
    Unary,
    Var,
)


def iter_subexprs(e: Expr) -> Iterator[Expr]:
    """Preorder traversal of an expression, including the root."""
    yield e
    if isinstance(e, Unary):
        yield from iter_subexprs(e.operand)
    elif isinstance(e, Binary):
        yield from iter_subexprs(e.left)
        yield from iter_subexprs(e.right)
    elif isinstance(e, (Call, HoleCall)):
        for a in e.args:
            yield from iter_subexprs(a)
    elif isinstance(e, (ArrayLit, TupleLit)):
        for a in e.elems:
            yield from iter_subexprs(a)
    elif isinstance(e, Index):
        yield from iter_subexprs(e.base)
        for i in e.idxs:
            if isinstance(i, Slice):
                if i.lo is not None:
                    yield from iter_subexprs(i.lo)
                if i.hi is not None:
                    yield from iter_subexprs(i.hi)
            else:
                yield from iter_subexprs(i)


def stmt_exprs(s: Stmt) -> Iterator[Expr]:
    """The statement's own expressions, not recursing into nested statements."""
    if isinstance(s, DeclStmt):
        for d in s.ty.size_args + s.ty.array_dims:
            yield d
        if s.init is not None:
            yield s.init
    elif isinstance(s, AssignStmt):
        yield s.target
        yield s.value
    elif isinstance(s, TildeStmt):
        yield s.lhs
        yield s.call
    elif isinstance(s, CallStmt):
        yield s.call
    elif isinstance(s, ReturnStmt):
        if s.value is not None:
            yield s.value
    elif isinstance(s, ForStmt):
        for e in (s.lo, s.hi, s.seq):
            if e is not None:
                yield e
    elif isinstance(s, IfStmt):
        yield s.cond


def child_stmts(s: Stmt) -> Iterator[tuple[Stmt, ...]]:
    if isinstance(s, ForStmt):
        yield s.body
    elif isinstance(s, IfStmt):
        yield s.then
        if s.els is not None:
            yield s.els


def iter_stmts(stmts: tuple[Stmt, ...]) -> Iterator[Stmt]:
    for s in stmts:
        yield s
        for body in child_stmts(s):
            yield from iter_stmts(body)


def iter_hole_calls_expr(e: Expr) -> Iterator[HoleCall]:
    for sub in iter_subexprs(e):
        if isinstance(sub, HoleCall):
            yield sub


def iter_hole_calls(stmts: tuple[Stmt, ...]) -> Iterator[HoleCall]:
    for s in iter_stmts(stmts):
        for e in stmt_exprs(s):
            yield from iter_hole_calls_expr(e)


def block_stmt_lists(b: Block) -> Iterator[tuple[Stmt, ...]]:
    if b.kind == "functions":
        for f in b.stmts:
            yield f.body
    else:
        yield tuple(b.stmts)


def impl_stmt_lists(impl: ImplDecl) -> Iterator[tuple[Stmt, ...]]:
    """Every statement list of an implementation: field bodies and appends."""
    for f in impl.fields:
        yield f.body
        if f.ret is not None:
            yield (ReturnStmt(f.ret),)
    for ab in impl.append_blocks:
        yield from block_stmt_lists(ab)


def holes_in_stmts(stmts: tuple[Stmt, ...]) -> set[str]:
    return {hc.ref.base_name for hc in iter_hole_calls(stmts)}


def free_vars(e: Expr) -> set[str]:
    return {sub.name for sub in iter_subexprs(e) if isinstance(sub, Var)}


def map_expr(e: Expr, fn: Callable[[Expr], Optional[Expr]]) -> Expr:
    """Bottom-up expression rewrite; `fn` returns a replacement or None."""
    if isinstance(e, Unary):
        out: Expr = Unary(e.op, map_expr(e.operand, fn))
    elif isinstance(e, Binary):
        out = Binary(e.op, map_expr(e.left, fn), map_expr(e.right, fn))
    elif isinstance(e, Call):
        out = Call(e.name, tuple(map_expr(a, fn) for a in e.args), e.span)
    elif isinstance(e, HoleCall):
        out = HoleCall(e.ref, tuple(map_expr(a, fn) for a in e.args), e.span)
    elif isinstance(e, ArrayLit):
        out = ArrayLit(tuple(map_expr(a, fn) for a in e.elems))
    elif isinstance(e, TupleLit):
        out = TupleLit(tuple(map_expr(a, fn) for a in e.elems))
    elif isinstance(e, Index):
        idxs: list[Union[Expr, Slice]] = []
        for i in e.idxs:
            if isinstance(i, Slice):
                idxs.append(
                    Slice(
                        map_expr(i.lo, fn) if i.lo is not None else None,
                        map_expr(i.hi, fn) if i.hi is not None else None,
                    )
                )
            else:
                idxs.append(map_expr(i, fn))
        out = Index(map_expr(e.base, fn), tuple(idxs))
    else:
        out = e
    replaced = fn(out)
    return out if replaced is None else replaced


def map_stmt_exprs(s: Stmt, fn: Callable[[Expr], Optional[Expr]]) -> Stmt:
    """Rewrite a statement's expressions (recursing into nested statements)."""
    if isinstance(s, DeclStmt):
        ty = s.ty
        new_ty = type(ty)(
            ty.base,
            tuple(map_expr(a, fn) for a in ty.size_args),
            ty.constraint,
            tuple(map_expr(a, fn) for a in ty.array_dims),
        )
        return DeclStmt(new_ty, s.name, map_expr(s.init, fn) if s.init is not None else None, s.span)
    if isinstance(s, AssignStmt):
        return AssignStmt(map_expr(s.target, fn), s.op, map_expr(s.value, fn), s.span)
    if isinstance(s, TildeStmt):
        return TildeStmt(map_expr(s.lhs, fn), map_expr(s.call, fn), s.span)
    if isinstance(s, CallStmt):
        return CallStmt(map_expr(s.call, fn), s.span)
    if isinstance(s, ReturnStmt):
        return ReturnStmt(map_expr(s.value, fn) if s.value is not None else None, s.span)
    if isinstance(s, ForStmt):
        return ForStmt(
            s.vars,
            map_expr(s.lo, fn) if s.lo is not None else None,
            map_expr(s.hi, fn) if s.hi is not None else None,
            map_expr(s.seq, fn) if s.seq is not None else None,
            tuple(map_stmt_exprs(x, fn) for x in s.body),
            s.span,
        )
    if isinstance(s, IfStmt):
        return IfStmt(
            map_expr(s.cond, fn),
            tuple(map_stmt_exprs(x, fn) for x in s.then),
            tuple(map_stmt_exprs(x, fn) for x in s.els) if s.els is not None else None,
            s.span,
        )
    return s


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    if not mapping:
        return e

    def sub(x: Expr) -> Optional[Expr]:
        if isinstance(x, Var) and x.name in mapping:
            return mapping[x.name]
        return None

    return map_expr(e, sub)


def substitute_stmt(s: Stmt, mapping: dict[str, Expr]) -> Stmt:
    if not mapping:
        return s

    def sub(x: Expr) -> Optional[Expr]:
        if isinstance(x, Var) and x.name in mapping:
            return mapping[x.name]
        return None

    return map_stmt_exprs(s, sub)
