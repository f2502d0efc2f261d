"""Static inlining: turn a validated program plus a selection into concrete code.

`apply_impl` fills every call site of one hole with one implementation:
parameter references are replaced by the site's argument expressions, body
statements are inserted in order immediately before the enclosing statement
in the same scope, the site itself is replaced by the return expression (or
removed for statement sites), and the implementation's append blocks are
appended to the corresponding top-level blocks exactly once.

Freshening: a body-local variable keeps its name unless it would collide with
a name already visible at the insertion point; a colliding local `x` inlined
for hole `H` becomes `x_H`, then `x_H_2`, `x_H_3`, ... for further sites of
the same hole. Append-block declarations (module parameters and friends) are
never renamed; all sites of one hole share them. Appended segments are merged
into each block sorted by (hole, implementation) so the result is independent
of application order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .program import ModularProgram, ValidityReport
from .syntax import (
    ArrayLit,
    AssignStmt,
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
    Program,
    ReturnStmt,
    Slice,
    Stmt,
    TildeStmt,
    TupleLit,
    Unary,
    Binary,
    Var,
)
from .walk import iter_stmts, substitute, substitute_stmt


class ConcretizeError(Exception):
    def __init__(self, message: str, report: Optional[ValidityReport] = None, code: str = "INVALID_SELECTION"):
        super().__init__(message)
        self.code = code
        self.report = report


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]+", "_", name).strip("_")


@dataclass
class _Fill:
    """One hole/field being inlined, with the shared freshening counter."""

    hole: str
    field: FieldDecl
    suffix: str
    uses: int = 0


class _InlineEngine:
    def __init__(self, program: Program, planned_append_names: frozenset[str] = frozenset()):
        self.blocks: dict[str, list[Stmt]] = {}
        self.funcs: list[FuncDecl] = []
        for b in program.blocks:
            if b.kind == "functions":
                self.funcs.extend(b.stmts)
            else:
                self.blocks[b.kind] = list(b.stmts)
        self.segments: dict[str, list[tuple[tuple[str, str], list]]] = {}
        self.impls: dict[tuple[str, str], ImplDecl] = {
            (i.hole_name, i.impl_name): i for i in program.impls
        }
        self.global_names: set[str] = set(planned_append_names)
        self.global_names.update(f.name for f in self.funcs)
        for stmts in self.blocks.values():
            for s in stmts:
                if isinstance(s, DeclStmt):
                    self.global_names.add(s.name)

    # -- assembling the result ------------------------------------------------

    def to_program(self) -> Program:
        blocks: list[Block] = []
        if self.funcs:
            blocks.append(Block("functions", tuple(self.funcs)))
        kinds = set(self.blocks) | set(self.segments)
        for kind in BLOCK_ORDER:
            if kind == "functions" or kind not in kinds:
                continue
            stmts = list(self.blocks.get(kind, []))
            for _key, seg in sorted(self.segments.get(kind, []), key=lambda kv: kv[0]):
                stmts.extend(seg)
            blocks.append(Block(kind, tuple(stmts)))
        return Program(tuple(blocks), tuple(self.impls.values()))

    # -- one implementation ---------------------------------------------------

    def apply_key(self, hole: str, impl_name: str) -> None:
        """Apply by key, using the engine's current (already rewritten) decl."""
        self.apply(self.impls[(hole, impl_name)])

    def apply(self, impl: ImplDecl) -> None:
        hole = impl.hole_name
        fills = {
            f.name: _Fill(hole, f, _sanitize(hole) or "h")
            for f in impl.fields
        }
        for kind in sorted(self.blocks, key=BLOCK_ORDER.index):
            taken = self._taken_for(self.blocks[kind])
            self.blocks[kind] = self._rewrite_stmts(self.blocks[kind], fills, taken)
        self.funcs = [
            FuncDecl(f.ret, f.name, f.params, tuple(self._rewrite_stmts(list(f.body), fills, self._taken_for(f.body))))
            for f in self.funcs
        ]
        for kind, segs in self.segments.items():
            for key, seg in segs:
                taken = self._taken_for(seg)
                seg[:] = self._rewrite_stmts(seg, fills, taken)
        for key in sorted(self.impls):
            other = self.impls[key]
            if key == (impl.hole_name, impl.impl_name):
                continue
            self.impls[key] = self._rewrite_impl(other, fills)

        # appends land once, keyed so merge order is application-order free
        key = (impl.hole_name, impl.impl_name)
        for ab in impl.append_blocks:
            if ab.kind == "functions":
                self.funcs.extend(ab.stmts)
                continue
            self.segments.setdefault(ab.kind, []).append((key, list(ab.stmts)))
            for s in ab.stmts:
                if isinstance(s, DeclStmt):
                    self.global_names.add(s.name)
        self.impls.pop(key, None)

    def _rewrite_impl(self, impl: ImplDecl, fills: dict[str, _Fill]) -> ImplDecl:
        new_fields = []
        for f in impl.fields:
            taken = self._taken_for(f.body) | {p.name for p in f.obs_params + f.params}
            body = self._rewrite_stmts(list(f.body), fills, taken)
            ret = f.ret
            if ret is not None:
                prelude, ret = self._rewrite_expr(ret, fills, taken)
                body.extend(prelude)
            new_fields.append(FieldDecl(f.name, f.params, f.obs_params, tuple(body), ret))
        new_appends = []
        for ab in impl.append_blocks:
            if ab.kind == "functions":
                new_appends.append(ab)
                continue
            taken = self._taken_for(ab.stmts)
            new_appends.append(Block(ab.kind, tuple(self._rewrite_stmts(list(ab.stmts), fills, taken))))
        return ImplDecl(
            impl.impl_name,
            impl.hole_name,
            tuple(new_fields),
            tuple(new_appends),
            impl.range_index_params,
            impl.inst_index_params,
            impl.span,
        )

    # -- statement/expression rewriting ----------------------------------------

    def _taken_for(self, stmts: Sequence[Stmt]) -> set[str]:
        taken = set(self.global_names)
        for s in iter_stmts(tuple(stmts)):
            if isinstance(s, DeclStmt):
                taken.add(s.name)
            if isinstance(s, ForStmt):
                taken.update(s.vars)
        return taken

    def _rewrite_stmts(self, stmts: Sequence[Stmt], fills: dict[str, _Fill], taken: set[str]) -> list[Stmt]:
        out: list[Stmt] = []
        for s in stmts:
            out.extend(self._rewrite_stmt(s, fills, taken))
        return out

    def _match(self, e: Expr, fills: dict[str, _Fill]) -> Optional[_Fill]:
        if isinstance(e, HoleCall) and e.ref.is_plain:
            name = e.ref.terms[0].name
            fill = fills.get(e.ref.field_name)
            if fill is not None and fill.hole == name:
                return fill
        return None

    def _rewrite_stmt(self, s: Stmt, fills: dict[str, _Fill], taken: set[str]) -> list[Stmt]:
        # statement-position sites: the whole statement is replaced
        if isinstance(s, CallStmt):
            fill = self._match(s.call, fills)
            if fill is not None:
                prelude, args = self._rewrite_args(s.call.args, fills, taken)
                body, _ret = self._instantiate(fill, args, taken)
                return prelude + body
        if isinstance(s, TildeStmt):
            fill = self._match(s.call, fills)
            if fill is not None:
                p0, lhs = self._rewrite_expr(s.lhs, fills, taken)
                p1, args = self._rewrite_args(s.call.args, fills, taken)
                body, _ret = self._instantiate(fill, (lhs,) + args, taken)
                return p0 + p1 + body
        if isinstance(s, ForStmt):
            prelude: list[Stmt] = []
            lo = hi = seq = None
            if s.lo is not None:
                p, lo = self._rewrite_expr(s.lo, fills, taken)
                prelude += p
            if s.hi is not None:
                p, hi = self._rewrite_expr(s.hi, fills, taken)
                prelude += p
            if s.seq is not None:
                p, seq = self._rewrite_expr(s.seq, fills, taken)
                prelude += p
            body = self._rewrite_stmts(s.body, fills, taken | set(s.vars))
            return prelude + [ForStmt(s.vars, lo, hi, seq, tuple(body), s.span)]
        if isinstance(s, IfStmt):
            prelude, cond = self._rewrite_expr(s.cond, fills, taken)
            then = tuple(self._rewrite_stmts(s.then, fills, taken))
            els = tuple(self._rewrite_stmts(s.els, fills, taken)) if s.els is not None else None
            return prelude + [IfStmt(cond, then, els, s.span)]

        prelude = []

        def rw(e: Expr) -> tuple[list[Stmt], Expr]:
            return self._rewrite_expr(e, fills, taken)

        if isinstance(s, DeclStmt):
            init = None
            if s.init is not None:
                p, init = rw(s.init)
                prelude += p
            taken.add(s.name)
            return prelude + [DeclStmt(s.ty, s.name, init, s.span)]
        if isinstance(s, AssignStmt):
            p0, tgt = rw(s.target)
            p1, val = rw(s.value)
            return p0 + p1 + [AssignStmt(tgt, s.op, val, s.span)]
        if isinstance(s, TildeStmt):
            p0, lhs = rw(s.lhs)
            p1, call = rw(s.call)
            return p0 + p1 + [TildeStmt(lhs, call, s.span)]
        if isinstance(s, CallStmt):
            p0, call = rw(s.call)
            return p0 + [CallStmt(call, s.span)]
        if isinstance(s, ReturnStmt):
            if s.value is None:
                return [s]
            p0, v = rw(s.value)
            return p0 + [ReturnStmt(v, s.span)]
        return [s]

    def _rewrite_args(
        self, args: tuple[Expr, ...], fills: dict[str, _Fill], taken: set[str]
    ) -> tuple[list[Stmt], tuple[Expr, ...]]:
        prelude: list[Stmt] = []
        out = []
        for a in args:
            p, e = self._rewrite_expr(a, fills, taken)
            prelude += p
            out.append(e)
        return prelude, tuple(out)

    def _rewrite_expr(self, e: Expr, fills: dict[str, _Fill], taken: set[str]) -> tuple[list[Stmt], Expr]:
        """Bottom-up rewrite; returns hoisted statements plus the new expression."""
        prelude: list[Stmt] = []

        def rec(x: Expr) -> Expr:
            if isinstance(x, Unary):
                return Unary(x.op, rec(x.operand))
            if isinstance(x, Binary):
                return Binary(x.op, rec(x.left), rec(x.right))
            if isinstance(x, Call):
                return Call(x.name, tuple(rec(a) for a in x.args), x.span)
            if isinstance(x, ArrayLit):
                return ArrayLit(tuple(rec(a) for a in x.elems))
            if isinstance(x, TupleLit):
                return TupleLit(tuple(rec(a) for a in x.elems))
            if isinstance(x, Index):
                idxs: list = []
                for i in x.idxs:
                    if isinstance(i, Slice):
                        idxs.append(
                            Slice(
                                rec(i.lo) if i.lo is not None else None,
                                rec(i.hi) if i.hi is not None else None,
                            )
                        )
                    else:
                        idxs.append(rec(i))
                return Index(rec(x.base), tuple(idxs))
            if isinstance(x, HoleCall):
                args = tuple(rec(a) for a in x.args)
                fill = self._match(HoleCall(x.ref, args, x.span), fills)
                if fill is None:
                    return HoleCall(x.ref, args, x.span)
                body, ret = self._instantiate(fill, args, taken)
                prelude.extend(body)
                if ret is None:
                    raise ConcretizeError(
                        f"void implementation of hole {fill.hole} used in expression position",
                        code="INTERNAL",
                    )
                return ret
            return x

        return prelude, rec(e)

    def _instantiate(
        self, fill: _Fill, args: tuple[Expr, ...], taken: set[str]
    ) -> tuple[list[Stmt], Optional[Expr]]:
        f = fill.field
        params = tuple(p.name for p in f.obs_params + f.params)
        if len(params) != len(args):
            raise ConcretizeError(
                f"hole {fill.hole} called with {len(args)} arguments but implementation "
                f"takes {len(params)}",
                code="INTERNAL",
            )
        fill.uses += 1

        # freshen colliding body locals before substituting arguments, so
        # caller variables inside argument expressions cannot be captured
        renames: dict[str, Expr] = {}
        for s in f.body:
            if isinstance(s, DeclStmt) and s.name in taken:
                base = f"{s.name}_{fill.suffix}"
                fresh = base
                k = 2
                while fresh in taken:
                    fresh = f"{base}_{k}"
                    k += 1
                renames[s.name] = Var(fresh)

        def freshen_stmt(s: Stmt) -> Stmt:
            s2 = substitute_stmt(s, renames)
            if isinstance(s2, DeclStmt) and s2.name in renames:
                s2 = DeclStmt(s2.ty, renames[s2.name].name, s2.init, s2.span)
            return s2

        body = [freshen_stmt(s) for s in f.body]
        ret = substitute(f.ret, renames) if f.ret is not None else None

        mapping = dict(zip(params, args))
        body = [substitute_stmt(s, mapping) for s in body]
        ret = substitute(ret, mapping) if ret is not None else None

        for s in body:
            if isinstance(s, DeclStmt):
                taken.add(s.name)
        return body, ret


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def inline_function(
    program: Program,
    hole: str,
    stmts: tuple[Stmt, ...],
    params: tuple[str, ...],
    ret: Optional[Expr] = None,
) -> Program:
    """Inline an anonymous function at every site of `hole` in the base blocks."""
    from .syntax import Param

    field = FieldDecl("", tuple(Param(None, p) for p in params), (), stmts, ret)
    impl = ImplDecl("<inline>", hole, (field,))
    engine = _InlineEngine(program)
    engine.apply(impl)
    return engine.to_program()


def _append_names(impls: Sequence[ImplDecl]) -> frozenset[str]:
    names = set()
    for impl in impls:
        for ab in impl.append_blocks:
            for s in ab.stmts:
                if isinstance(s, DeclStmt):
                    names.add(s.name)
    return frozenset(names)


def apply_impl(p: ModularProgram, hole: str, impl_name: str) -> ModularProgram:
    decl = p.impl_decl(hole, impl_name)
    engine = _InlineEngine(p.program, _append_names([decl]))
    engine.apply(decl)
    return ModularProgram(engine.to_program())


def apply_impls(p: ModularProgram, impls: Sequence[tuple[str, str]]) -> ModularProgram:
    """Apply a set of implementations; the fold runs in sorted (hole, impl)
    order so the canonical result is independent of the order given."""
    decls = [p.impl_decl(h, i) for h, i in impls]
    engine = _InlineEngine(p.program, _append_names(decls))
    for h, i in sorted(impls):
        engine.apply_key(h, i)
    return ModularProgram(engine.to_program())


def fold_concat_arrays(program: Program) -> Program:
    """Collapse concat_arrays over array literals (collection-hole merges)."""

    def fold(e: Expr):
        if isinstance(e, Call) and e.name == "concat_arrays":
            if all(isinstance(a, ArrayLit) for a in e.args):
                elems: list[Expr] = []
                for a in e.args:
                    elems.extend(a.elems)
                return ArrayLit(tuple(elems))
        return None

    from .walk import map_stmt_exprs

    def fold_block(b: Block) -> Block:
        if b.kind == "functions":
            return b
        return Block(b.kind, tuple(map_stmt_exprs(s, fold) for s in b.stmts))

    return Program(tuple(fold_block(b) for b in program.blocks), program.impls)


def concretize(p: ModularProgram, sel: Mapping[str, str]) -> Program:
    """Produce the hole-free base program selected by `sel`.

    Raises ConcretizeError with the violation report when the selection is
    not valid for the program.
    """
    report = p.valid_selection(sel)
    if not report.ok:
        raise ConcretizeError(f"invalid selection: {report.message()}", report)
    ordered = sorted(sel.items())
    result = apply_impls(p, ordered)
    base = Program(result.program.blocks, ())
    base = fold_concat_arrays(base)
    out = ModularProgram(base)
    if out.base_holes():
        raise ConcretizeError(
            f"internal error: concretized program still contains holes {sorted(out.base_holes())}",
            code="INTERNAL",
        )
    return base
