"""AST node definitions for the modular Stan subset.

All nodes are frozen dataclasses so program transformations build new trees
instead of mutating. Source spans are carried on hole calls and declarations
but excluded from equality, which makes the round-trip law
``parse(render(parse(s))) == parse(s)`` a plain ``==`` on trees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

BLOCK_ORDER = (
    "functions",
    "data",
    "transformed data",
    "parameters",
    "transformed parameters",
    "model",
    "generated quantities",
)

# Blocks a module implementation may append to. `data` is fixed for the
# whole network of models and cannot be extended.
APPEND_BLOCKS = tuple(b for b in BLOCK_ORDER if b != "data")


@dataclass(frozen=True)
class Span:
    line: int = field(compare=False, default=0)
    col: int = field(compare=False, default=0)
    start: int = field(compare=False, default=0)
    end: int = field(compare=False, default=0)


NO_SPAN = Span()


# ---------------------------------------------------------------------------
# Macro decorations on hole references
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RangeAtom:
    """One bracket-payload atom: `lo..hi`, optionally `(lo..hi)^n|^Pn|^Cn`."""

    lo: int
    hi: int
    exp: int = 1
    mode: str = ""  # "" plain product, "P" permutations, "C" combinations

    def render(self) -> str:
        body = str(self.lo) if self.lo == self.hi else f"{self.lo}..{self.hi}"
        if self.exp == 1 and not self.mode:
            return body
        return f"({body})^{self.mode}{self.exp}"


@dataclass(frozen=True)
class SymAtom:
    """A symbolic index inside a module template, e.g. the `j` of `g<j>()`."""

    name: str

    def render(self) -> str:
        return self.name


IndexAtom = Union[RangeAtom, SymAtom]


@dataclass(frozen=True)
class InstanceTag:
    kind: str  # "instance" for <j>, "copy" for <<j>>
    atoms: tuple[IndexAtom, ...]

    def render(self) -> str:
        body = ",".join(a.render() for a in self.atoms)
        return f"<{body}>" if self.kind == "instance" else f"<<{body}>>"


@dataclass(frozen=True)
class HoleTerm:
    """One operand of a (possibly product) hole reference."""

    name: str
    ranges: tuple[IndexAtom, ...] = ()
    exp: int = 1
    exp_mode: str = ""

    def render(self) -> str:
        out = self.name
        if self.ranges:
            out += "[" + ",".join(r.render() for r in self.ranges) + "]"
        if self.exp != 1 or self.exp_mode:
            out += f"^{self.exp_mode}{self.exp}"
        return out


@dataclass(frozen=True)
class HoleRef:
    terms: tuple[HoleTerm, ...]
    field_name: str = ""
    inst: Optional[InstanceTag] = None
    collect: bool = False

    @property
    def is_plain(self) -> bool:
        t = self.terms
        return (
            len(t) == 1
            and not t[0].ranges
            and t[0].exp == 1
            and not t[0].exp_mode
            and self.inst is None
            and not self.collect
        )

    @property
    def base_name(self) -> str:
        """Hole identity without ranges: the selection-string key."""
        parts = []
        for t in self.terms:
            p = t.name
            if t.exp != 1 or t.exp_mode:
                p += f"^{t.exp_mode}{t.exp}"
            parts.append(p)
        name = "*".join(parts)
        if self.inst is not None:
            name += self.inst.render()
        return name

    def render(self) -> str:
        out = "*".join(t.render() for t in self.terms)
        if self.inst is not None:
            out += self.inst.render()
        if self.collect:
            out += "+"
        if self.field_name:
            out += "." + self.field_name
        return out


def plain_ref(name: str, field_name: str = "") -> HoleRef:
    return HoleRef(terms=(HoleTerm(name),), field_name=field_name)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class RealLit:
    text: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    span: Span = NO_SPAN


@dataclass(frozen=True)
class HoleCall:
    ref: HoleRef
    args: tuple["Expr", ...]
    span: Span = NO_SPAN


@dataclass(frozen=True)
class ArrayLit:
    elems: tuple["Expr", ...]


@dataclass(frozen=True)
class TupleLit:
    elems: tuple["Expr", ...]


@dataclass(frozen=True)
class Slice:
    lo: Optional["Expr"] = None
    hi: Optional["Expr"] = None


@dataclass(frozen=True)
class Index:
    base: "Expr"
    idxs: tuple[Union["Expr", Slice], ...]


Expr = Union[IntLit, RealLit, Var, Unary, Binary, Call, HoleCall, ArrayLit, TupleLit, Index]


# ---------------------------------------------------------------------------
# Types and statements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeNode:
    base: str  # int | real | vector | row_vector | matrix
    size_args: tuple[Expr, ...] = ()
    constraint: str = ""  # opaque `<...>` text, no semantics attached
    array_dims: tuple[Expr, ...] = ()  # postfix dims: `int n[J];`


@dataclass(frozen=True)
class DeclStmt:
    ty: TypeNode
    name: str
    init: Optional[Expr] = None
    span: Span = NO_SPAN


@dataclass(frozen=True)
class AssignStmt:
    target: Expr
    op: str  # "=" or "+="
    value: Expr
    span: Span = NO_SPAN


@dataclass(frozen=True)
class TildeStmt:
    lhs: Expr
    call: Union[Call, HoleCall]
    span: Span = NO_SPAN


@dataclass(frozen=True)
class CallStmt:
    call: Union[Call, HoleCall]
    span: Span = NO_SPAN


@dataclass(frozen=True)
class ReturnStmt:
    value: Optional[Expr] = None
    span: Span = NO_SPAN


@dataclass(frozen=True)
class ForStmt:
    vars: tuple[str, ...]
    lo: Optional[Expr]
    hi: Optional[Expr]
    seq: Optional[Expr]
    body: tuple["Stmt", ...]
    span: Span = NO_SPAN


@dataclass(frozen=True)
class IfStmt:
    cond: Expr
    then: tuple["Stmt", ...]
    els: Optional[tuple["Stmt", ...]] = None
    span: Span = NO_SPAN


Stmt = Union[DeclStmt, AssignStmt, TildeStmt, CallStmt, ReturnStmt, ForStmt, IfStmt]


@dataclass(frozen=True)
class Param:
    ty: Optional[TypeNode]
    name: str


@dataclass(frozen=True)
class FuncDecl:
    ret: Union[TypeNode, str]  # TypeNode or "void"
    name: str
    params: tuple[Param, ...]
    body: tuple[Stmt, ...]


@dataclass(frozen=True)
class Block:
    kind: str
    stmts: tuple = ()  # Stmt for most blocks, FuncDecl for `functions`


@dataclass(frozen=True)
class FieldDecl:
    name: str  # "" for the anonymous field
    params: tuple[Param, ...] = ()
    obs_params: tuple[Param, ...] = ()  # observed params, left of `|`
    body: tuple[Stmt, ...] = ()
    ret: Optional[Expr] = None


@dataclass(frozen=True)
class ImplDecl:
    impl_name: str
    hole_name: str
    fields: tuple[FieldDecl, ...]
    append_blocks: tuple[Block, ...] = ()
    range_index_params: tuple[str, ...] = ()  # `module "f" Feature[n](..)`
    inst_index_params: tuple[str, ...] = ()  # `module "i" h<j>(..)`
    span: Span = NO_SPAN

    @property
    def is_simple(self) -> bool:
        return len(self.fields) == 1 and self.fields[0].name == ""

    def field(self, name: str) -> Optional[FieldDecl]:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True)
class Program:
    blocks: tuple[Block, ...]
    impls: tuple[ImplDecl, ...]

    def block(self, kind: str) -> Optional[Block]:
        for b in self.blocks:
            if b.kind == kind:
                return b
        return None


TYPE_KEYWORDS = frozenset({"int", "real", "vector", "row_vector", "matrix", "simplex", "ordered", "unit_vector"})
