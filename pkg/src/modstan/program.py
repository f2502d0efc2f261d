"""Core program representation: holes, implementations, sites and selections.

A `ModularProgram` wraps a parsed AST whose hole references are all plain
(macro decorations are expanded away before this layer) and derives the
relational indexes everything else is built on: which implementations fill
which hole, which holes each implementation's code contains, and where the
hole call sites sit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional

from .render import render
from .selections import Binding, SelectionError, SelectionSpec
from .syntax import Expr, HoleCall, HoleRef, ImplDecl, Program, Span
from .walk import (
    block_stmt_lists,
    holes_in_stmts,
    impl_stmt_lists,
    iter_hole_calls_expr,
)


class Selection(Mapping[str, str]):
    """An immutable hole -> implementation-name binding map.

    Iteration and the canonical string are in lexicographic hole order, so a
    Selection doubles as a stable node identity in graphs and caches.
    """

    __slots__ = ("_items", "_map", "_hash")

    def __init__(self, bindings: Mapping[str, str] | Iterator[tuple[str, str]] | tuple = ()):
        d = dict(bindings)
        self._items = tuple(sorted(d.items()))
        self._map = d
        self._hash = hash(self._items)

    def __getitem__(self, hole: str) -> str:
        return self._map[hole]

    def __iter__(self):
        return iter(h for h, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if isinstance(other, Selection):
            return self._items == other._items
        return dict(self) == dict(other) if isinstance(other, Mapping) else NotImplemented

    def __repr__(self) -> str:
        return f"Selection({self.canonical()!r})"

    def items(self):
        return self._items

    def canonical(self) -> str:
        return ",".join(f"{h}:{i}" for h, i in self._items)

    def bind(self, hole: str, impl: str) -> "Selection":
        d = dict(self._map)
        d[hole] = impl
        return Selection(d)

    def without(self, hole: str) -> "Selection":
        d = dict(self._map)
        d.pop(hole, None)
        return Selection(d)


SiblingPair = tuple[str, str, str]  # (hole, impl in first, impl in second)


def siblings(first: Mapping[str, str], second: Mapping[str, str]) -> frozenset[SiblingPair]:
    """Pairs of distinct implementations sharing a parent hole across two selections."""
    if len(first) > len(second):
        return frozenset((h, a, b) for (h, b, a) in siblings(second, first))
    out = []
    for h, a in first.items():
        b = second.get(h)
        if b is not None and b != a:
            out.append((h, a, b))
    return frozenset(out)


def sibling_count(first: Mapping[str, str], second: Mapping[str, str], limit: int = 3) -> int:
    """Count sibling pairs, stopping early once `limit` is reached."""
    if len(first) > len(second):
        first, second = second, first
    n = 0
    for h, a in first.items():
        b = second.get(h)
        if b is not None and b != a:
            n += 1
            if n >= limit:
                return n
    return n


@dataclass(frozen=True)
class Implementation:
    hole_name: str
    impl_name: str
    decl: ImplDecl
    holes: frozenset[str]


@dataclass(frozen=True)
class HoleSite:
    hole: str
    ref: HoleRef
    args: tuple[Expr, ...]
    container: str  # "base" or "<hole>/<impl>"
    block: Optional[str]  # block kind for base and append-block sites
    span: Span
    statement: bool
    tilde_lhs: Optional[Expr] = None  # observed expression of `lhs ~ Hole(...)`

    def effective_args(self) -> tuple[Expr, ...]:
        return ((self.tilde_lhs,) + self.args) if self.tilde_lhs is not None else self.args


@dataclass(frozen=True)
class ValidityReport:
    ok: bool
    missing: tuple[str, ...] = ()
    extra: tuple[str, ...] = ()
    unknown: tuple[str, ...] = ()

    def violations(self) -> list[str]:
        out = []
        for h in self.missing:
            out.append(f"hole '{h}' has no implementation selected")
        for h in self.extra:
            out.append(f"binding for '{h}' is extra: the hole is not required by this selection")
        for h in self.unknown:
            out.append(f"binding '{h}' does not name an implementation in the program")
        return out

    def message(self) -> str:
        return "; ".join(self.violations())


class ModularProgram:
    """Indexed view over a macro-free program."""

    def __init__(self, program: Program):
        for impl in program.impls:
            if impl.range_index_params or impl.inst_index_params:
                raise ValueError(
                    f'implementation "{impl.impl_name}" of {impl.hole_name} is a macro '
                    "template; expand macros before building the core view"
                )
        self.program = program
        self._impls: dict[str, dict[str, ImplDecl]] = {}
        self._dup_pairs: list[ImplDecl] = []
        for decl in program.impls:
            bucket = self._impls.setdefault(decl.hole_name, {})
            if decl.impl_name in bucket:
                self._dup_pairs.append(decl)
            else:
                bucket[decl.impl_name] = decl

        base = set()
        for b in program.blocks:
            for stmts in block_stmt_lists(b):
                base |= holes_in_stmts(stmts)
        self._base_holes = frozenset(base)

        self._impl_holes: dict[tuple[str, str], frozenset[str]] = {}
        for hole, bucket in self._impls.items():
            for name, decl in bucket.items():
                hs: set[str] = set()
                for stmts in impl_stmt_lists(decl):
                    hs |= holes_in_stmts(stmts)
                self._impl_holes[(hole, name)] = frozenset(hs)

        names = set(self._base_holes) | set(self._impls)
        for hs in self._impl_holes.values():
            names |= hs
        self._all_holes = tuple(sorted(names))

    # -- relational operations (the impls/holes/par/pars family) -----------

    def base_holes(self) -> frozenset[str]:
        return self._base_holes

    def all_holes(self) -> tuple[str, ...]:
        return self._all_holes

    def hole_impls(self, hole: str) -> tuple[str, ...]:
        return tuple(sorted(self._impls.get(hole, ())))

    def has_impl(self, hole: str, impl: str) -> bool:
        return impl in self._impls.get(hole, ())

    def impl_decl(self, hole: str, impl: str) -> ImplDecl:
        return self._impls[hole][impl]

    def impl_holes(self, hole: str, impl: str) -> frozenset[str]:
        return self._impl_holes[(hole, impl)]

    def implementation(self, hole: str, impl: str) -> Implementation:
        return Implementation(hole, impl, self.impl_decl(hole, impl), self.impl_holes(hole, impl))

    def implementations(self) -> Iterator[Implementation]:
        for hole in sorted(self._impls):
            for name in self.hole_impls(hole):
                yield self.implementation(hole, name)

    def duplicate_impls(self) -> tuple[ImplDecl, ...]:
        return tuple(self._dup_pairs)

    def render(self) -> str:
        return render(self.program)

    # -- sites ---------------------------------------------------------------

    def sites(self) -> tuple[HoleSite, ...]:
        out: list[HoleSite] = []

        def collect(stmts, container: str, block: Optional[str]):
            from .syntax import CallStmt, TildeStmt
            from .walk import iter_stmts, stmt_exprs

            for s in iter_stmts(tuple(stmts)):
                stmt_site = None
                lhs = None
                if isinstance(s, CallStmt) and isinstance(s.call, HoleCall):
                    stmt_site = s.call
                if isinstance(s, TildeStmt) and isinstance(s.call, HoleCall):
                    stmt_site = s.call
                    lhs = s.lhs
                for e in stmt_exprs(s):
                    for hc in iter_hole_calls_expr(e):
                        out.append(
                            HoleSite(
                                hole=hc.ref.base_name,
                                ref=hc.ref,
                                args=hc.args,
                                container=container,
                                block=block,
                                span=hc.span,
                                statement=hc is stmt_site,
                                tilde_lhs=lhs if hc is stmt_site else None,
                            )
                        )

        for b in self.program.blocks:
            if b.kind == "functions":
                for f in b.stmts:
                    collect(f.body, "base", b.kind)
            else:
                collect(b.stmts, "base", b.kind)
        for impl in self.program.impls:
            key = f"{impl.hole_name}/{impl.impl_name}"
            for f in impl.fields:
                body = list(f.body)
                if f.ret is not None:
                    from .syntax import ReturnStmt

                    body.append(ReturnStmt(f.ret))
                collect(tuple(body), key, None)
            for ab in impl.append_blocks:
                for stmts in block_stmt_lists(ab):
                    collect(stmts, key, ab.kind)
        return tuple(out)

    # -- selections ------------------------------------------------------------

    def required_holes(self, sel: Mapping[str, str]) -> frozenset[str]:
        """holes(P_base) united with the holes of every selected implementation."""
        req = set(self._base_holes)
        for h, i in sel.items():
            if self.has_impl(h, i):
                req |= self._impl_holes[(h, i)]
        return frozenset(req)

    def valid_selection(self, sel: Mapping[str, str]) -> ValidityReport:
        unknown = tuple(sorted(h for h, i in sel.items() if not self.has_impl(h, i)))
        required = self.required_holes(sel)
        bound = frozenset(h for h in sel if h not in unknown)
        missing = tuple(sorted(required - bound))
        extra = tuple(sorted(bound - required))
        ok = not unknown and not missing and not extra
        return ValidityReport(ok, missing, extra, unknown)

    def close(self, sel: Mapping[str, str]) -> Selection:
        """Restrict a selection to the part reachable from the base through it."""
        reached: dict[str, str] = {}
        frontier = list(self._base_holes)
        seen = set(frontier)
        while frontier:
            h = frontier.pop()
            i = sel.get(h)
            if i is None or not self.has_impl(h, i):
                continue
            reached[h] = i
            for h2 in self._impl_holes[(h, i)]:
                if h2 not in seen:
                    seen.add(h2)
                    frontier.append(h2)
        return Selection(reached)

    def resolve_selection(self, spec: SelectionSpec) -> Selection:
        """Turn parsed plain bindings into a Selection; macro payloads are rejected."""
        out: dict[str, str] = {}
        for b in spec:
            if b.subset is not None:
                raise SelectionError(
                    f"hole '{b.hole}' is not a collection hole; subset binding not allowed"
                )
            out[b.hole] = b.payload()
        return Selection(out)

    def selection_bindings(self, sel: Mapping[str, str]) -> SelectionSpec:
        return tuple(Binding(h, impl=i) for h, i in sorted(sel.items()))


# ---------------------------------------------------------------------------
# Module graph (base + holes + implementations)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModuleGraph:
    nodes: tuple[tuple[str, str], ...]  # (id, kind) with kind in base|hole|impl
    edges: tuple[tuple[str, str], ...]

    def to_json(self) -> str:
        payload = {
            "nodes": [{"id": i, "kind": k} for i, k in self.nodes],
            "edges": [{"from": a, "to": b} for a, b in self.edges],
        }
        return json.dumps(payload, indent=2)

    def to_dot(self) -> str:
        shape = {"base": "box3d", "hole": "box", "impl": "ellipse"}
        lines = ["digraph modules {"]
        for i, k in self.nodes:
            lines.append(f'  "{i}" [shape={shape[k]}];')
        for a, b in self.edges:
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def module_graph(p: ModularProgram) -> ModuleGraph:
    """Rooted DAG: base and impl nodes point to contained holes, holes to impls."""
    nodes: list[tuple[str, str]] = [("base", "base")]
    edges: list[tuple[str, str]] = []
    for h in p.all_holes():
        nodes.append((h, "hole"))
    for h in sorted(p.base_holes()):
        edges.append(("base", h))
    for impl in p.implementations():
        node_id = f"{impl.hole_name}:{impl.impl_name}"
        nodes.append((node_id, "impl"))
        edges.append((impl.hole_name, node_id))
        for h in sorted(impl.holes):
            edges.append((node_id, h))
    return ModuleGraph(tuple(nodes), tuple(edges))
