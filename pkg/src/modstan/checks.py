"""Program validation: structural constraints, hole signatures, semantics.

Validation happens in three stages. Structural checks reject cyclic module
dependency graphs, unfilled holes and duplicate identifiers. Signature
inference then derives, per hole, the argument types, return type, effect set
and referenced-block scope; argument types come from declared parameter types
when present and otherwise from the first call site, return types from the
lexicographically first implementation, and effects/scope are unions over all
implementations and their child holes. Finally the semantic stage checks that
every implementation agrees with its hole's signature, that every base call
site's effects and scope fit its enclosing block, and that the base and all
implementation bodies typecheck with holes treated as functions.

Signatures are computed by memoized recursion, which visits holes in a valid
topological order of the hole dependency graph; acyclicity is established
before inference runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .program import HoleSite, ModularProgram
from .stantypes import (
    EFFECTS_ALLOWED,
    INT,
    REAL,
    SCOPE_ALLOWED,
    Ty,
    UNKNOWN,
    VOID,
    binary_type,
    builtin_call_type,
    compatible,
    from_type_node,
    index_type,
    is_scalar,
    join,
    unary_type,
)
from .syntax import (
    ArrayLit,
    AssignStmt,
    Binary,
    BLOCK_ORDER,
    Call,
    CallStmt,
    DeclStmt,
    Expr,
    FieldDecl,
    ForStmt,
    HoleCall,
    IfStmt,
    ImplDecl,
    Index,
    IntLit,
    NO_SPAN,
    RealLit,
    ReturnStmt,
    Slice,
    Span,
    Stmt,
    TildeStmt,
    TupleLit,
    Unary,
    Var,
)
from .walk import iter_stmts, iter_subexprs, stmt_exprs

LPDF = "LPDF"
RNG = "RNG"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: Span = NO_SPAN

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "span": {"line": self.span.line, "col": self.span.col, "len": max(0, self.span.end - self.span.start)},
            "message": self.message,
        }

    def __str__(self) -> str:
        loc = f"{self.span.line}:{self.span.col}: " if self.span.line else ""
        return f"{loc}{self.code}: {self.message}"


def diagnostics_json(diags: list[Diagnostic]) -> str:
    return json.dumps([d.to_dict() for d in diags], indent=2)


@dataclass(frozen=True)
class FieldSignature:
    arg_types: tuple[Ty, ...]
    ret_type: Ty


@dataclass(frozen=True)
class HoleSignature:
    arg_types: tuple[Ty, ...]
    ret_type: Ty
    effects: frozenset[str]
    scope: frozenset[str]
    fields: tuple[tuple[str, FieldSignature], ...] = ()

    def field_sig(self, name: str) -> Optional[FieldSignature]:
        for n, fs in self.fields:
            if n == name:
                return fs
        return None


@dataclass
class CheckResult:
    diagnostics: list[Diagnostic]
    signatures: dict[str, HoleSignature]

    @property
    def ok(self) -> bool:
        return not self.diagnostics


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarInfo:
    ty: Ty
    origin: str  # block kind, or one of "local", "param", "index"


class Env:
    def __init__(self, parent: Optional["Env"] = None):
        self.parent = parent
        self.vars: dict[str, VarInfo] = {}

    def child(self) -> "Env":
        return Env(self)

    def declare(self, name: str, info: VarInfo) -> bool:
        """Returns False when the name is already bound in this scope."""
        if name in self.vars:
            return False
        self.vars[name] = info
        return True

    def lookup(self, name: str) -> Optional[VarInfo]:
        env: Optional[Env] = self
        while env is not None:
            if name in env.vars:
                return env.vars[name]
            env = env.parent
        return None


def _effects_of_stmt(s: Stmt) -> frozenset[str]:
    eff = set()
    if isinstance(s, TildeStmt):
        eff.add(LPDF)
    if isinstance(s, AssignStmt) and s.op == "+=" and isinstance(s.target, Var) and s.target.name == "target":
        eff.add(LPDF)
    for e in stmt_exprs(s):
        for sub in iter_subexprs(e):
            if isinstance(sub, Call) and sub.name.endswith("_rng"):
                eff.add(RNG)
    return frozenset(eff)


def body_effects(stmts: tuple[Stmt, ...], ret: Optional[Expr] = None) -> frozenset[str]:
    eff: set[str] = set()
    for s in iter_stmts(stmts):
        eff |= _effects_of_stmt(s)
    if ret is not None:
        for sub in iter_subexprs(ret):
            if isinstance(sub, Call) and sub.name.endswith("_rng"):
                eff.add(RNG)
    return frozenset(eff)


# ---------------------------------------------------------------------------
# The checker
# ---------------------------------------------------------------------------


class Checker:
    def __init__(self, p: ModularProgram):
        self.p = p
        self.diags: list[Diagnostic] = []
        self.globals: dict[str, VarInfo] = {}
        self.funcs: dict[str, tuple[tuple[Optional[Ty], ...], Ty]] = {}
        self._collect_globals()
        self._sites = self._ordered_sites()
        self._sites_by_key: dict[tuple[str, str], list[HoleSite]] = {}
        for s in self._sites:
            self._sites_by_key.setdefault((s.hole, s.ref.field_name), []).append(s)
        # per-component memo tables for signature inference
        self._args_memo: dict[tuple[str, str], tuple[Ty, ...]] = {}
        self._ret_memo: dict[tuple[str, str], Ty] = {}
        self._eff_memo: dict[str, frozenset[str]] = {}
        self._scope_memo: dict[str, frozenset[str]] = {}
        self._in_flight: set = set()

    # -- shared indexes -----------------------------------------------------

    def _collect_globals(self) -> None:
        for b in self.p.program.blocks:
            if b.kind == "functions":
                for f in b.stmts:
                    ret = VOID if f.ret == "void" else from_type_node(f.ret)
                    params = tuple(from_type_node(pp.ty) if pp.ty else None for pp in f.params)
                    self.funcs[f.name] = (params, ret)
                continue
            for s in b.stmts:
                if isinstance(s, DeclStmt):
                    self.globals.setdefault(s.name, VarInfo(from_type_node(s.ty), b.kind))

    def _ordered_sites(self) -> list[HoleSite]:
        sites = list(self.p.sites())
        block_rank = {k: i for i, k in enumerate(BLOCK_ORDER)}

        def rank(s: HoleSite):
            if s.container == "base":
                return (0, block_rank.get(s.block, 99), "", s.span.start)
            return (1, 0, s.container, s.span.start)

        sites.sort(key=rank)
        return sites

    def _impl_field(self, impl: ImplDecl, field_name: str) -> Optional[FieldDecl]:
        return impl.field(field_name)

    def _field_names(self, hole: str) -> tuple[str, ...]:
        first = self.p.impl_decl(hole, self.p.hole_impls(hole)[0])
        return tuple(f.name for f in first.fields)

    def _own_append_env(self, impl: ImplDecl, env: Env) -> None:
        for ab in impl.append_blocks:
            if ab.kind == "functions":
                continue
            for s in ab.stmts:
                if isinstance(s, DeclStmt):
                    env.declare(s.name, VarInfo(from_type_node(s.ty), ab.kind))

    def _global_env(self) -> Env:
        env = Env()
        for name, info in self.globals.items():
            env.declare(name, info)
        return env

    # -- structural validation (acyclicity, fill-ability, uniqueness) --------

    def validate_structure(self) -> list[Diagnostic]:
        out: list[Diagnostic] = []
        for dup in self.p.duplicate_impls():
            out.append(
                Diagnostic(
                    "DUP_IMPL",
                    f'duplicate implementation "{dup.impl_name}" for hole {dup.hole_name}',
                    dup.span,
                )
            )
        for hole in self.p.all_holes():
            if not self.p.hole_impls(hole):
                span = NO_SPAN
                for s in self._sites:
                    if s.hole == hole:
                        span = s.span
                        break
                out.append(Diagnostic("UNFILLED_HOLE", f"hole {hole} has no implementation", span))
        for impl in self.p.program.impls:
            if impl.hole_name in self.funcs:
                out.append(
                    Diagnostic(
                        "DUP_IMPL",
                        f"hole {impl.hole_name} collides with a user-defined function name",
                        impl.span,
                    )
                )
        out.extend(self._check_acyclic())
        return out

    def _check_acyclic(self) -> list[Diagnostic]:
        # module dependency graph: impl -> impls of holes it contains
        nodes = [("base", None)] + [(f"{i.hole_name}/{i.impl_name}", i) for i in self.p.program.impls]
        succs: dict[str, list[str]] = {}
        for key, impl in nodes:
            if impl is None:
                holes = self.p.base_holes()
            else:
                holes = self.p.impl_holes(impl.hole_name, impl.impl_name)
            nxt = []
            for h in sorted(holes):
                for name in self.p.hole_impls(h):
                    nxt.append(f"{h}/{name}")
            succs[key] = nxt
        # iterative DFS: module chains can be deeper than the interpreter stack
        state: dict[str, int] = {}
        stack_path: list[str] = []

        def visit(root: str) -> Optional[list[str]]:
            work: list[tuple[str, int]] = [(root, 0)]
            while work:
                n, idx = work.pop()
                if idx == 0:
                    state[n] = 1
                    stack_path.append(n)
                children = succs.get(n, ())
                advanced = False
                while idx < len(children):
                    m = children[idx]
                    idx += 1
                    if state.get(m, 0) == 1:
                        return stack_path[stack_path.index(m) :] + [m]
                    if state.get(m, 0) == 0:
                        work.append((n, idx))
                        work.append((m, 0))
                        advanced = True
                        break
                if not advanced:
                    stack_path.pop()
                    state[n] = 2
            return None

        for key, impl in nodes:
            if state.get(key, 0) == 0:
                cyc = visit(key)
                if cyc:
                    span = NO_SPAN
                    for k, i in nodes:
                        if i is not None and k == cyc[0]:
                            span = i.span
                    return [
                        Diagnostic(
                            "CYCLE",
                            "module dependency graph has a cycle: " + " -> ".join(cyc),
                            span,
                        )
                    ]
        return []

    # -- signature inference ---------------------------------------------------

    def hole_arg_types(self, hole: str, field_name: str = "") -> tuple[Ty, ...]:
        key = (hole, field_name)
        if key in self._args_memo:
            return self._args_memo[key]
        flight = ("args",) + key
        if flight in self._in_flight:
            self.diags.append(
                Diagnostic("CYCLE", f"argument types of hole {hole} depend on themselves")
            )
            return ()
        self._in_flight.add(flight)
        try:
            out = self._compute_arg_types(hole, field_name)
        finally:
            self._in_flight.discard(flight)
        self._args_memo[key] = out
        return out

    def _compute_arg_types(self, hole: str, field_name: str) -> tuple[Ty, ...]:
        impls = self.p.hole_impls(hole)
        if not impls:
            return ()
        first = self.p.impl_decl(hole, impls[0])
        f = self._impl_field(first, field_name)
        if f is None:
            return ()
        params = f.obs_params + f.params
        if all(pp.ty is not None for pp in params):
            return tuple(from_type_node(pp.ty) for pp in params)
        # fall back to the first call site, typing its arguments in context
        for site in self._sites_by_key.get((hole, field_name), ()):
            types = self._type_site_args(site)
            if types is not None:
                return types
        return tuple(from_type_node(pp.ty) if pp.ty is not None else UNKNOWN for pp in params)

    def _type_site_args(self, site: HoleSite) -> Optional[tuple[Ty, ...]]:
        """Type just the argument expressions of one call site in its context.

        Only the argument expressions themselves are typed (never the whole
        container), so sibling holes in the same statement cannot re-enter the
        inference of the hole under consideration. Local variables have
        declared types, so the environment is built from declarations alone.
        """
        env = self._env_for_container(site.container, site.block)
        if env is None:
            return None
        ctx = TypeCtx(self, report=False)
        typer = StmtTyper(self, ctx, allowed_effects=None, allowed_blocks=None, current_block=None)
        return tuple(typer.type_expr(a, env) for a in site.effective_args())

    def _env_for_container(self, container: str, block: Optional[str]) -> Optional[Env]:
        env = self._global_env()
        if container == "base":
            b = self.p.program.block(block) if block else None
            scope = env.child()
            if b is not None and b.kind != "functions":
                self._declare_locals(tuple(b.stmts), scope)
            return scope
        hole, impl_name = container.split("/", 1)
        impl = self.p.impl_decl(hole, impl_name)
        self._own_append_env(impl, env)
        scope = env.child()
        if block is None:
            for f in impl.fields:
                params = f.obs_params + f.params
                declared = [pp.ty for pp in params]
                sig_args: tuple[Ty, ...] = ()
                if any(t is None for t in declared):
                    sig_args = self.hole_arg_types(hole, f.name)
                for k, pp in enumerate(params):
                    ty = from_type_node(pp.ty) if pp.ty is not None else (
                        sig_args[k] if k < len(sig_args) else UNKNOWN
                    )
                    scope.declare(pp.name, VarInfo(ty, "param"))
                self._declare_locals(f.body, scope)
            for name in impl.range_index_params + impl.inst_index_params:
                scope.declare(name, VarInfo(INT, "index"))
        else:
            for ab in impl.append_blocks:
                if ab.kind == block and ab.kind != "functions":
                    self._declare_locals(tuple(ab.stmts), scope)
        return scope

    def _declare_locals(self, stmts: tuple[Stmt, ...], scope: Env) -> None:
        for s in iter_stmts(stmts):
            if isinstance(s, DeclStmt):
                scope.declare(s.name, VarInfo(from_type_node(s.ty), "local"))

    def hole_ret_type(self, hole: str, field_name: str = "") -> Ty:
        key = (hole, field_name)
        if key in self._ret_memo:
            return self._ret_memo[key]
        flight = ("ret",) + key
        if flight in self._in_flight:
            self.diags.append(Diagnostic("CYCLE", f"return type of hole {hole} depends on itself"))
            return UNKNOWN
        self._in_flight.add(flight)
        try:
            impls = self.p.hole_impls(hole)
            if not impls:
                out = UNKNOWN
            else:
                first = self.p.impl_decl(hole, impls[0])
                f = self._impl_field(first, field_name)
                out = self.return_type_of(first, f) if f is not None else UNKNOWN
        finally:
            self._in_flight.discard(flight)
        self._ret_memo[key] = out
        return out

    def return_type_of(self, impl: ImplDecl, f: FieldDecl, report: bool = False) -> Ty:
        """ReturnType: type the field body, then its return expression (void if none)."""
        env = self._global_env()
        self._own_append_env(impl, env)
        scope = env.child()
        params = f.obs_params + f.params
        sig_args = self.hole_arg_types(impl.hole_name, f.name)
        for k, pp in enumerate(params):
            ty = from_type_node(pp.ty) if pp.ty is not None else (
                sig_args[k] if k < len(sig_args) else UNKNOWN
            )
            scope.declare(pp.name, VarInfo(ty, "param"))
        for name in impl.range_index_params + impl.inst_index_params:
            scope.declare(name, VarInfo(INT, "index"))
        ctx = TypeCtx(self, report=report)
        typer = StmtTyper(self, ctx, allowed_effects=None, allowed_blocks=None, current_block=None)
        inner = typer.run(f.body, scope)
        if f.ret is None:
            return VOID
        return typer.type_expr(f.ret, inner)

    def hole_effects(self, hole: str) -> frozenset[str]:
        if hole in self._eff_memo:
            return self._eff_memo[hole]
        flight = ("eff", hole)
        if flight in self._in_flight:
            self.diags.append(Diagnostic("CYCLE", f"effects of hole {hole} depend on themselves"))
            return frozenset()
        self._in_flight.add(flight)
        try:
            eff: set[str] = set()
            for name in self.p.hole_impls(hole):
                impl = self.p.impl_decl(hole, name)
                for f in impl.fields:
                    eff |= body_effects(f.body, f.ret)
                for child in sorted(self.p.impl_holes(hole, name)):
                    if self.p.hole_impls(child):
                        eff |= self.hole_effects(child)
        finally:
            self._in_flight.discard(flight)
        out = frozenset(eff)
        self._eff_memo[hole] = out
        return out

    def hole_scope(self, hole: str) -> frozenset[str]:
        if hole in self._scope_memo:
            return self._scope_memo[hole]
        flight = ("scope", hole)
        if flight in self._in_flight:
            self.diags.append(Diagnostic("CYCLE", f"scope of hole {hole} depends on itself"))
            return frozenset()
        self._in_flight.add(flight)
        try:
            sc: set[str] = set()
            for name in self.p.hole_impls(hole):
                impl = self.p.impl_decl(hole, name)
                sc |= self._body_scope(impl)
                for child in sorted(self.p.impl_holes(hole, name)):
                    if self.p.hole_impls(child):
                        sc |= self.hole_scope(child)
        finally:
            self._in_flight.discard(flight)
        out = frozenset(sc)
        self._scope_memo[hole] = out
        return out

    def _body_scope(self, impl: ImplDecl) -> set[str]:
        """Block kinds whose top-level declarations the field bodies reference.

        References to the implementation's own append-block declarations count
        under the corresponding block kind (a module-defined parameter reads as
        parameters-block scope).
        """
        own: dict[str, str] = {}
        for ab in impl.append_blocks:
            if ab.kind == "functions":
                continue
            for s in ab.stmts:
                if isinstance(s, DeclStmt):
                    own[s.name] = ab.kind
        bound = set()
        for f in impl.fields:
            bound |= {pp.name for pp in f.obs_params + f.params}
        bound |= set(impl.range_index_params) | set(impl.inst_index_params)

        refs: set[str] = set()

        def scan(stmts: tuple[Stmt, ...], local: set[str]):
            local = set(local)
            for s in stmts:
                for e in stmt_exprs(s):
                    for sub in iter_subexprs(e):
                        if isinstance(sub, Var) and sub.name not in local and sub.name not in bound:
                            refs.add(sub.name)
                if isinstance(s, DeclStmt):
                    local.add(s.name)
                if isinstance(s, ForStmt):
                    scan(s.body, local | set(s.vars))
                if isinstance(s, IfStmt):
                    scan(s.then, local)
                    if s.els:
                        scan(s.els, local)

        for f in impl.fields:
            body = list(f.body)
            if f.ret is not None:
                body.append(ReturnStmt(f.ret))
            scan(tuple(body), set())

        out = set()
        for name in refs:
            if name in own:
                out.add(own[name])
            elif name in self.globals:
                out.add(self.globals[name].origin)
        return out

    def infer_signatures(self) -> dict[str, HoleSignature]:
        # seed the memo tables in dependency order so recursion stays shallow
        # even on deep hole chains: argument types depend on enclosing holes
        # (forward order), return types/effects/scope on contained holes
        # (reverse order)
        import sys

        limit = 4000 + 8 * len(self.p.program.impls)
        if sys.getrecursionlimit() < limit:
            sys.setrecursionlimit(limit)
        try:
            from .graphs import dependency_order

            order = [h for h in dependency_order(self.p) if self.p.hole_impls(h)]
        except ValueError:
            order = [h for h in self.p.all_holes() if self.p.hole_impls(h)]
        for hole in order:
            for fn in self._field_names(hole):
                self.hole_arg_types(hole, fn)
        for hole in reversed(order):
            for fn in self._field_names(hole):
                self.hole_ret_type(hole, fn)
            self.hole_effects(hole)
            self.hole_scope(hole)

        sigs: dict[str, HoleSignature] = {}
        for hole in self.p.all_holes():
            if not self.p.hole_impls(hole):
                continue
            field_names = self._field_names(hole)
            fields = tuple(
                (fn, FieldSignature(self.hole_arg_types(hole, fn), self.hole_ret_type(hole, fn)))
                for fn in field_names
            )
            primary = fields[0][1]
            sigs[hole] = HoleSignature(
                arg_types=primary.arg_types,
                ret_type=primary.ret_type,
                effects=self.hole_effects(hole),
                scope=self.hole_scope(hole),
                fields=fields,
            )
        return sigs

    # -- semantic constraints -------------------------------------------------

    def validate_semantics(self, sigs: dict[str, HoleSignature]) -> list[Diagnostic]:
        before = len(self.diags)
        self._check_impl_agreement(sigs)
        self._check_base(sigs)
        self._check_impl_bodies(sigs)
        self._check_append_blocks(sigs)
        out = self.diags[before:]
        del self.diags[before:]
        return out

    def _check_impl_agreement(self, sigs: dict[str, HoleSignature]) -> None:
        for hole in self.p.all_holes():
            names = self.p.hole_impls(hole)
            if not names:
                continue
            sig = sigs[hole]
            expected_fields = tuple(n for n, _ in sig.fields)
            for name in names:
                impl = self.p.impl_decl(hole, name)
                if tuple(f.name for f in impl.fields) != expected_fields:
                    self.diags.append(
                        Diagnostic(
                            "ARGTYPE_MISMATCH",
                            f'implementation "{name}" of {hole} declares fields '
                            f"{[f.name or '<anonymous>' for f in impl.fields]}, expected "
                            f"{[n or '<anonymous>' for n in expected_fields]}",
                            impl.span,
                        )
                    )
                    continue
                for f in impl.fields:
                    fs = sig.field_sig(f.name)
                    params = f.obs_params + f.params
                    if len(params) != len(fs.arg_types):
                        self.diags.append(
                            Diagnostic(
                                "ARGTYPE_MISMATCH",
                                f'implementation "{name}" of {hole} takes {len(params)} '
                                f"arguments, signature has {len(fs.arg_types)}",
                                impl.span,
                            )
                        )
                        continue
                    for k, pp in enumerate(params):
                        if pp.ty is None:
                            continue
                        declared = from_type_node(pp.ty)
                        if not compatible(declared, fs.arg_types[k]) or not compatible(fs.arg_types[k], declared):
                            self.diags.append(
                                Diagnostic(
                                    "ARGTYPE_MISMATCH",
                                    f'implementation "{name}" of {hole}: parameter {pp.name} '
                                    f"has type {declared}, signature says {fs.arg_types[k]}",
                                    impl.span,
                                )
                            )
                    ret = self.return_type_of(impl, f)
                    if not compatible(fs.ret_type, ret):
                        self.diags.append(
                            Diagnostic(
                                "RETTYPE_MISMATCH",
                                f'implementation "{name}" of {hole} returns {ret}, '
                                f"signature says {fs.ret_type}",
                                impl.span,
                            )
                        )

    def _check_base(self, sigs: dict[str, HoleSignature]) -> None:
        for b in self.p.program.blocks:
            if b.kind == "functions":
                continue
            env = Env()
            for name, info in self.globals.items():
                if info.origin != b.kind:
                    env.declare(name, info)
            ctx = TypeCtx(self, report=True, sigs=sigs)
            typer = StmtTyper(
                self,
                ctx,
                allowed_effects=EFFECTS_ALLOWED[b.kind],
                allowed_blocks=SCOPE_ALLOWED[b.kind],
                current_block=b.kind,
            )
            typer.run(tuple(b.stmts), env, declare_origin=b.kind)

    def _check_impl_bodies(self, sigs: dict[str, HoleSignature]) -> None:
        for impl_view in self.p.implementations():
            impl = impl_view.decl
            sig = sigs.get(impl.hole_name)
            if sig is None:
                continue
            for f in impl.fields:
                fs = sig.field_sig(f.name)
                if fs is None:
                    continue
                env = self._global_env()
                self._own_append_env(impl, env)
                scope = env.child()
                params = f.obs_params + f.params
                for k, pp in enumerate(params):
                    ty = from_type_node(pp.ty) if pp.ty is not None else (
                        fs.arg_types[k] if k < len(fs.arg_types) else UNKNOWN
                    )
                    scope.declare(pp.name, VarInfo(ty, "param"))
                for name in impl.range_index_params + impl.inst_index_params:
                    scope.declare(name, VarInfo(INT, "index"))
                ctx = TypeCtx(self, report=True, sigs=sigs)
                typer = StmtTyper(self, ctx, allowed_effects=None, allowed_blocks=None, current_block=None)
                inner = typer.run(f.body, scope)
                if f.ret is not None:
                    typer.type_expr(f.ret, inner)

    def _check_append_blocks(self, sigs: dict[str, HoleSignature]) -> None:
        for impl_view in self.p.implementations():
            impl = impl_view.decl
            for ab in impl.append_blocks:
                if ab.kind == "functions":
                    continue
                env = Env()
                for name, info in self.globals.items():
                    env.declare(name, info)
                self._own_append_env(impl, env)
                ctx = TypeCtx(self, report=True, sigs=sigs)
                typer = StmtTyper(
                    self,
                    ctx,
                    allowed_effects=EFFECTS_ALLOWED[ab.kind],
                    allowed_blocks=SCOPE_ALLOWED[ab.kind],
                    current_block=ab.kind,
                )
                typer.run(tuple(ab.stmts), env, skip_redeclared=True)


# ---------------------------------------------------------------------------
# Expression and statement typing
# ---------------------------------------------------------------------------


class TypeCtx:
    def __init__(self, checker: Checker, report: bool, sigs: Optional[dict[str, HoleSignature]] = None):
        self.checker = checker
        self.report = report
        self.sigs = sigs
        self.span = NO_SPAN

    def diag(self, code: str, message: str, span: Optional[Span] = None) -> None:
        if self.report:
            self.checker.diags.append(Diagnostic(code, message, span or self.span))

    def field_sig(self, hole: str, field_name: str) -> Optional[FieldSignature]:
        if self.sigs is not None:
            sig = self.sigs.get(hole)
            return sig.field_sig(field_name) if sig else None
        if not self.checker.p.hole_impls(hole):
            return None
        return FieldSignature(
            self.checker.hole_arg_types(hole, field_name),
            self.checker.hole_ret_type(hole, field_name),
        )

    def hole_effects(self, hole: str) -> frozenset[str]:
        if self.sigs is not None and hole in self.sigs:
            return self.sigs[hole].effects
        return frozenset()

    def hole_scope(self, hole: str) -> frozenset[str]:
        if self.sigs is not None and hole in self.sigs:
            return self.sigs[hole].scope
        return frozenset()


class StmtTyper:
    def __init__(
        self,
        checker: Checker,
        ctx: TypeCtx,
        allowed_effects: Optional[frozenset[str]],
        allowed_blocks: Optional[frozenset[str]],
        current_block: Optional[str],
    ):
        self.checker = checker
        self.ctx = ctx
        self.allowed_effects = allowed_effects
        self.allowed_blocks = allowed_blocks
        self.current_block = current_block

    # -- expressions -------------------------------------------------------

    def type_expr(self, e: Expr, env: Env) -> Ty:
        ctx = self.ctx
        if isinstance(e, IntLit):
            return INT
        if isinstance(e, RealLit):
            return REAL
        if isinstance(e, Var):
            if e.name == "target":
                return REAL
            info = env.lookup(e.name)
            if info is None:
                ctx.diag("TYPE_ERROR", f"unknown variable '{e.name}'")
                return UNKNOWN
            if self.allowed_blocks is not None and info.origin in BLOCK_ORDER:
                if info.origin != self.current_block and info.origin not in self.allowed_blocks:
                    ctx.diag(
                        "SCOPE_NOT_ALLOWED",
                        f"variable '{e.name}' from the {info.origin} block is not in scope "
                        f"of the {self.current_block} block",
                    )
            return info.ty
        if isinstance(e, Unary):
            t = self.type_expr(e.operand, env)
            out = unary_type(e.op, t)
            if out is None:
                ctx.diag("TYPE_ERROR", f"operator '{e.op}' not defined for {t}")
                return UNKNOWN
            return out
        if isinstance(e, Binary):
            a = self.type_expr(e.left, env)
            b = self.type_expr(e.right, env)
            out = binary_type(e.op, a, b)
            if out is None:
                ctx.diag("TYPE_ERROR", f"operator '{e.op}' not defined for {a} and {b}")
                return UNKNOWN
            return out
        if isinstance(e, Call):
            args = [self.type_expr(a, env) for a in e.args]
            if e.name in self.checker.funcs:
                params, ret = self.checker.funcs[e.name]
                if len(params) != len(args):
                    ctx.diag("TYPE_ERROR", f"function {e.name} expects {len(params)} arguments, got {len(args)}")
                else:
                    for k, (want, got) in enumerate(zip(params, args)):
                        if want is not None and not compatible(want, got):
                            ctx.diag(
                                "TYPE_ERROR",
                                f"argument {k + 1} of {e.name}: expected {want}, got {got}",
                            )
                return ret
            out = builtin_call_type(e.name, args)
            if out is None:
                ctx.diag("TYPE_ERROR", f"bad arguments to {e.name}({', '.join(str(a) for a in args)})")
                return UNKNOWN
            return out
        if isinstance(e, HoleCall):
            return self.type_hole_call(e, env, statement=False, lhs_ty=None)
        if isinstance(e, ArrayLit):
            if not e.elems:
                return UNKNOWN.array()
            tys = [self.type_expr(x, env) for x in e.elems]
            cur = tys[0]
            for t in tys[1:]:
                j = join(cur, t)
                if j is None:
                    ctx.diag("TYPE_ERROR", f"array literal mixes {cur} and {t}")
                    return UNKNOWN.array()
                cur = j
            return cur.array()
        if isinstance(e, TupleLit):
            return Ty("tuple", 0, tuple(self.type_expr(x, env) for x in e.elems))
        if isinstance(e, Index):
            base = self.type_expr(e.base, env)
            kinds: list[str] = []
            for i in e.idxs:
                if isinstance(i, Slice):
                    for bound in (i.lo, i.hi):
                        if bound is not None:
                            bt = self.type_expr(bound, env)
                            if not compatible(INT, bt):
                                ctx.diag("TYPE_ERROR", f"slice bound must be int, got {bt}")
                    kinds.append("slice")
                else:
                    it = self.type_expr(i, env)
                    if it.kind == "int" and it.dims == 1:
                        kinds.append("int_array")
                    elif compatible(INT, it):
                        kinds.append("int")
                    else:
                        ctx.diag("TYPE_ERROR", f"index must be int or int array, got {it}")
                        kinds.append("int")
            out = index_type(base, kinds)
            if out is None:
                ctx.diag("TYPE_ERROR", f"cannot index {base} with {len(kinds)} indices")
                return UNKNOWN
            return out
        raise TypeError(f"cannot type {type(e).__name__}")

    def type_hole_call(self, e: HoleCall, env: Env, statement: bool, lhs_ty: Optional[Ty]) -> Ty:
        ctx = self.ctx
        hole = e.ref.base_name
        arg_tys = tuple(self.type_expr(a, env) for a in e.args)
        if ctx.sigs is None:
            # inference pass: only the return type is needed, and argument
            # checking would re-enter the inference of sibling holes
            if not self.checker.p.hole_impls(hole):
                return UNKNOWN
            return self.checker.hole_ret_type(hole, e.ref.field_name)
        fs = ctx.field_sig(hole, e.ref.field_name)
        if fs is None:
            return UNKNOWN
        effective = ((lhs_ty,) + arg_tys) if lhs_ty is not None else arg_tys
        if len(effective) != len(fs.arg_types):
            ctx.diag(
                "TYPE_ERROR",
                f"hole {hole} called with {len(effective)} arguments, signature has {len(fs.arg_types)}",
                e.span,
            )
        else:
            for k, (want, got) in enumerate(zip(fs.arg_types, effective)):
                if not compatible(want, got):
                    ctx.diag(
                        "TYPE_ERROR",
                        f"argument {k + 1} of hole {hole}: expected {want}, got {got}",
                        e.span,
                    )
        if self.allowed_effects is not None:
            eff = ctx.hole_effects(hole)
            if not eff <= self.allowed_effects:
                bad = ",".join(sorted(eff - self.allowed_effects))
                ctx.diag(
                    "EFFECT_NOT_ALLOWED",
                    f"hole {hole} has effects {{{bad}}} not allowed in the {self.current_block} block",
                    e.span,
                )
        if self.allowed_blocks is not None:
            sc = ctx.hole_scope(hole)
            extra = sc - self.allowed_blocks - {self.current_block}
            if extra:
                ctx.diag(
                    "SCOPE_NOT_ALLOWED",
                    f"hole {hole} references {sorted(extra)} declarations, "
                    f"not visible from the {self.current_block} block",
                    e.span,
                )
        if not statement and fs.ret_type == VOID:
            ctx.diag("TYPE_ERROR", f"void hole {hole} used as an expression", e.span)
            return UNKNOWN
        return fs.ret_type

    # -- statements -----------------------------------------------------------

    def run(
        self,
        stmts: tuple[Stmt, ...],
        env: Env,
        declare_origin: str = "local",
        skip_redeclared: bool = False,
    ) -> Env:
        scope = env.child()
        for s in stmts:
            self.type_stmt(s, scope, declare_origin, skip_redeclared)
        return scope

    def type_stmt(self, s: Stmt, env: Env, declare_origin: str = "local", skip_redeclared: bool = False) -> None:
        ctx = self.ctx
        ctx.span = getattr(s, "span", NO_SPAN)
        if self.allowed_effects is not None:
            eff = _effects_of_stmt(s)
            if not eff <= self.allowed_effects:
                bad = ",".join(sorted(eff - self.allowed_effects))
                ctx.diag(
                    "EFFECT_NOT_ALLOWED",
                    f"statement has effects {{{bad}}} not allowed in the {self.current_block} block",
                )
        if isinstance(s, DeclStmt):
            # declaration sizes are evaluated in data scope in the host
            # language (a parameters declaration may be sized by data)
            saved_blocks = self.allowed_blocks
            if saved_blocks is not None:
                self.allowed_blocks = saved_blocks | {"data", "transformed data"}
            for d in s.ty.size_args + s.ty.array_dims:
                dt = self.type_expr(d, env)
                if not compatible(INT, dt):
                    ctx.diag("TYPE_ERROR", f"size expression must be int, got {dt}")
            self.allowed_blocks = saved_blocks
            ty = from_type_node(s.ty)
            if s.init is not None:
                it = self.type_expr(s.init, env)
                if not compatible(ty, it):
                    ctx.diag("TYPE_ERROR", f"cannot initialize {ty} {s.name} with {it}")
            if not env.declare(s.name, VarInfo(ty, declare_origin)) and not skip_redeclared:
                ctx.diag("TYPE_ERROR", f"duplicate declaration of '{s.name}'")
            return
        if isinstance(s, AssignStmt):
            tt = self.type_expr(s.target, env)
            vt = self.type_expr(s.value, env)
            if s.op == "+=":
                out = binary_type("+", tt, vt)
                if out is None or not compatible(tt, out):
                    ctx.diag("TYPE_ERROR", f"cannot increment {tt} by {vt}")
            elif not compatible(tt, vt):
                ctx.diag("TYPE_ERROR", f"cannot assign {vt} to {tt}")
            return
        if isinstance(s, TildeStmt):
            self.type_expr(s.lhs, env)
            call = s.call
            if isinstance(call, HoleCall):
                lhs_ty = self.type_expr(s.lhs, env)
                ret = self.type_hole_call(call, env, statement=True, lhs_ty=lhs_ty)
                if ret != VOID and ret.kind != "unknown":
                    ctx.diag("TYPE_ERROR", f"hole {call.ref.base_name} used as a distribution must not return a value")
            else:
                for a in call.args:
                    self.type_expr(a, env)
            return
        if isinstance(s, CallStmt):
            if isinstance(s.call, HoleCall):
                self.type_hole_call(s.call, env, statement=True, lhs_ty=None)
            else:
                self.type_expr(s.call, env)
            return
        if isinstance(s, ReturnStmt):
            if s.value is not None:
                self.type_expr(s.value, env)
            return
        if isinstance(s, ForStmt):
            scope = env.child()
            if s.seq is None:
                for bound in (s.lo, s.hi):
                    bt = self.type_expr(bound, env)
                    if not compatible(INT, bt):
                        ctx.diag("TYPE_ERROR", f"loop bound must be int, got {bt}")
                scope.declare(s.vars[0], VarInfo(INT, "local"))
                if len(s.vars) != 1:
                    ctx.diag("TYPE_ERROR", "range loops bind exactly one variable")
            else:
                st = self.type_expr(s.seq, env)
                elem: Ty
                if st.is_array:
                    elem = st.elem()
                elif st.kind in ("vector", "row_vector"):
                    elem = REAL
                elif st.kind == "unknown":
                    elem = UNKNOWN
                else:
                    ctx.diag("TYPE_ERROR", f"cannot iterate over {st}")
                    elem = UNKNOWN
                if len(s.vars) == 1:
                    scope.declare(s.vars[0], VarInfo(elem, "local"))
                else:
                    if elem.kind == "tuple" and len(elem.parts) == len(s.vars):
                        for v, part in zip(s.vars, elem.parts):
                            scope.declare(v, VarInfo(part, "local"))
                    else:
                        if elem.kind != "unknown":
                            ctx.diag(
                                "TYPE_ERROR",
                                f"destructuring loop needs a tuple of {len(s.vars)} parts, got {elem}",
                            )
                        for v in s.vars:
                            scope.declare(v, VarInfo(UNKNOWN, "local"))
            for st2 in s.body:
                self.type_stmt(st2, scope)
            return
        if isinstance(s, IfStmt):
            ct = self.type_expr(s.cond, env)
            if not is_scalar(ct) and ct.kind != "unknown":
                ctx.diag("TYPE_ERROR", f"condition must be scalar, got {ct}")
            scope = env.child()
            for st2 in s.then:
                self.type_stmt(st2, scope)
            if s.els is not None:
                scope2 = env.child()
                for st2 in s.els:
                    self.type_stmt(st2, scope2)
            return
        raise TypeError(f"cannot check {type(s).__name__}")


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------


def validate_structure(p: ModularProgram) -> list[Diagnostic]:
    return Checker(p).validate_structure()


def infer_signatures(p: ModularProgram) -> tuple[dict[str, HoleSignature], list[Diagnostic]]:
    c = Checker(p)
    structural = c.validate_structure()
    if structural:
        return {}, structural
    sigs = c.infer_signatures()
    return sigs, list(c.diags)


def validate_semantics(p: ModularProgram, sigs: dict[str, HoleSignature]) -> list[Diagnostic]:
    c = Checker(p)
    c.infer_signatures()
    c.diags.clear()
    return c.validate_semantics(sigs)


def check_program(p: ModularProgram) -> CheckResult:
    """Full pipeline: structure, then signatures, then semantic constraints."""
    c = Checker(p)
    structural = c.validate_structure()
    if structural:
        return CheckResult(structural, {})
    sigs = c.infer_signatures()
    inference_diags = list(c.diags)
    c.diags.clear()
    semantic = c.validate_semantics(sigs)
    return CheckResult(inference_diags + semantic, sigs)


def return_type(p: ModularProgram, hole: str, impl: str, field_name: str = "") -> Ty:
    """Type of the expression returned by one implementation field (void if none)."""
    c = Checker(p)
    decl = p.impl_decl(hole, impl)
    f = decl.field(field_name)
    if f is None:
        return UNKNOWN
    return c.return_type_of(decl, f)
