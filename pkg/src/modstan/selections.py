"""Selection strings: the user-facing way to index into the program space.

A selection string is a comma-separated list of `hole:impl` bindings. The
impl side may carry macro payloads:

    Mean:normal,Stddev:lognormal      plain bindings
    Feature:[1,2,3]                   collection subset (indexed members)
    Coefs:[a,c]                       collection subset (named members)
    Pairs:[(1,2),(1,4)]               collection subset of tuple members
    H:i[5]                            one indexed implementation
    h<<1>>:a,h<<2>>:b                 independent copy bindings
    Theta*Col:[(t,1),(t,2)]           product-hole members

Whitespace around `,` and `:` is ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .tokens import LexError, TokKind, Token, tokenize

Atom = Union[int, str]
Member = tuple[Atom, ...]


class SelectionError(Exception):
    def __init__(self, message: str, code: str = "INVALID_SELECTION"):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class Binding:
    hole: str
    impl: Optional[str] = None
    indices: Optional[tuple[int, ...]] = None
    subset: Optional[tuple[Member, ...]] = None

    def payload(self) -> str:
        if self.subset is not None:
            return "[" + ",".join(render_member(m) for m in self.subset) + "]"
        assert self.impl is not None
        if self.indices is not None:
            return f"{self.impl}[" + ",".join(str(i) for i in self.indices) + "]"
        return self.impl

    def render(self) -> str:
        return f"{self.hole}:{self.payload()}"


SelectionSpec = tuple[Binding, ...]


def render_member(m: Member) -> str:
    if len(m) == 1:
        return str(m[0])
    return "(" + ",".join(str(a) for a in m) + ")"


def render_selection(bindings: SelectionSpec) -> str:
    return ",".join(b.render() for b in bindings)


class _Cursor:
    def __init__(self, tokens: list[Token], source: str):
        self.toks = tokens
        self.pos = 0
        self.source = source

    def peek(self) -> Token:
        return self.toks[min(self.pos, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.peek()
        if t.kind != TokKind.EOF:
            self.pos += 1
        return t

    def at(self, kind: TokKind) -> bool:
        return self.peek().kind == kind

    def expect(self, kind: TokKind) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise SelectionError(
                f"bad selection string {self.source!r}: expected {kind.value}, found {t.kind.value} at col {t.col}"
            )
        return self.advance()


def _parse_hole_key(c: _Cursor) -> str:
    parts = []
    while True:
        name = c.expect(TokKind.IDENT).text
        if c.at(TokKind.CARET):
            c.advance()
            t = c.peek()
            if t.kind == TokKind.INT:
                c.advance()
                name += f"^{t.text}"
            elif t.kind == TokKind.IDENT and t.text[:1] in "PC" and t.text[1:].isdigit():
                c.advance()
                name += f"^{t.text}"
            else:
                raise SelectionError(f"bad exponent in hole key near col {t.col}")
        parts.append(name)
        if c.at(TokKind.STAR):
            c.advance()
            continue
        break
    key = "*".join(parts)
    if c.at(TokKind.LTLT):
        c.advance()
        idx = c.expect(TokKind.INT).text
        c.expect(TokKind.GTGT)
        key += f"<<{idx}>>"
    elif c.at(TokKind.LT):
        c.advance()
        idx = c.expect(TokKind.INT).text
        c.expect(TokKind.GT)
        key += f"<{idx}>"
    return key


def _parse_atom(c: _Cursor) -> Atom:
    t = c.peek()
    if t.kind == TokKind.INT:
        c.advance()
        return int(t.text)
    if t.kind == TokKind.IDENT:
        c.advance()
        return t.text
    raise SelectionError(f"bad selection member near col {t.col}")


def _parse_member(c: _Cursor) -> Member:
    if c.at(TokKind.LPAREN):
        c.advance()
        atoms = [_parse_atom(c)]
        while c.at(TokKind.COMMA):
            c.advance()
            atoms.append(_parse_atom(c))
        c.expect(TokKind.RPAREN)
        return tuple(atoms)
    return (_parse_atom(c),)


def _parse_payload(c: _Cursor) -> Binding:
    if c.at(TokKind.LBRACK):
        c.advance()
        members: list[Member] = []
        if not c.at(TokKind.RBRACK):
            members.append(_parse_member(c))
            while c.at(TokKind.COMMA):
                c.advance()
                members.append(_parse_member(c))
        c.expect(TokKind.RBRACK)
        if len(set(members)) != len(members):
            raise SelectionError("duplicate member in collection subset")
        return Binding("", subset=tuple(members))
    name = c.expect(TokKind.IDENT).text
    if c.at(TokKind.LBRACK):
        c.advance()
        idxs = [int(c.expect(TokKind.INT).text)]
        while c.at(TokKind.COMMA):
            c.advance()
            idxs.append(int(c.expect(TokKind.INT).text))
        c.expect(TokKind.RBRACK)
        return Binding("", impl=name, indices=tuple(idxs))
    return Binding("", impl=name)


def parse_selection(text: str) -> SelectionSpec:
    """Parse a selection string into bindings; rejects duplicate holes."""
    stripped = text.strip()
    if not stripped:
        return ()
    try:
        tokens, _ = tokenize(stripped)
    except LexError as e:
        raise SelectionError(f"bad selection string: {e}") from e
    c = _Cursor(tokens, stripped)
    bindings: list[Binding] = []
    seen: set[str] = set()
    while True:
        key = _parse_hole_key(c)
        c.expect(TokKind.COLON)
        payload = _parse_payload(c)
        if key in seen:
            raise SelectionError(f"duplicate binding for hole '{key}'")
        seen.add(key)
        bindings.append(Binding(key, payload.impl, payload.indices, payload.subset))
        if c.at(TokKind.COMMA):
            c.advance()
            continue
        break
    if not c.at(TokKind.EOF):
        t = c.peek()
        raise SelectionError(f"trailing input in selection string at col {t.col}")
    return tuple(bindings)
