"""Recursive-descent parser for the modular Stan subset.

The grammar is the usual block-structured Stan skeleton plus two top-level
extensions: hole calls inside statements/expressions, and `module` blocks
that implement holes (with optional append blocks, fields and index
templates). Hole references may carry macro decorations; those are parsed
speculatively with backtracking because `Feature[1..100]+(x)` and plain
indexing/arithmetic share a prefix.

Undecorated calls are resolved after the parse: a call becomes a hole call
when its callee has a `module` declaration, or when the callee starts with
an uppercase letter and is not a user-defined function. Lowercase unknown
callees stay ordinary function applications.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .syntax import (
    APPEND_BLOCKS,
    BLOCK_ORDER,
    ArrayLit,
    AssignStmt,
    Binary,
    Block,
    Call,
    CallStmt,
    DeclStmt,
    Expr,
    FieldDecl,
    ForStmt,
    FuncDecl,
    HoleCall,
    HoleRef,
    HoleTerm,
    IfStmt,
    ImplDecl,
    Index,
    IndexAtom,
    InstanceTag,
    IntLit,
    Param,
    Program,
    RangeAtom,
    RealLit,
    ReturnStmt,
    Slice,
    Span,
    Stmt,
    SymAtom,
    TildeStmt,
    TupleLit,
    TypeNode,
    TYPE_KEYWORDS,
    Unary,
    Var,
)
from .tokens import Comment, LexError, TokKind, Token, tokenize


@dataclass
class SourceProgram:
    text: str
    path: Optional[str] = None


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at line {line}, col {col}"
        if expected:
            detail += " (expected " + " or ".join(sorted(expected)) + ")"
        super().__init__(detail)
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected


_CMP_OPS = {TokKind.LT: "<", TokKind.GT: ">", TokKind.LE: "<=", TokKind.GE: ">=", TokKind.EQ: "==", TokKind.NE: "!="}
_ADD_OPS = {TokKind.PLUS: "+", TokKind.MINUS: "-"}
_MUL_OPS = {TokKind.STAR: "*", TokKind.SLASH: "/", TokKind.ELTTIMES: ".*", TokKind.ELTDIV: "./"}


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        i = min(self.pos + offset, len(self.toks) - 1)
        return self.toks[i]

    def at(self, kind: TokKind, text: Optional[str] = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def advance(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != TokKind.EOF:
            self.pos += 1
        return t

    def expect(self, kind: TokKind, what: Optional[str] = None) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(
                f"unexpected {t.kind.value}" + (f" {t.text!r}" if t.text else ""),
                t.line,
                t.col,
                expected=(what or kind.value,),
            )
        return self.advance()

    def expect_ident(self, text: str) -> Token:
        t = self.peek()
        if t.kind != TokKind.IDENT or t.text != text:
            raise ParseError(
                f"unexpected {t.kind.value}" + (f" {t.text!r}" if t.text else ""),
                t.line,
                t.col,
                expected=(repr(text),),
            )
        return self.advance()

    def fail(self, expected: tuple[str, ...]) -> ParseError:
        t = self.peek()
        return ParseError(
            f"unexpected {t.kind.value}" + (f" {t.text!r}" if t.text else ""),
            t.line,
            t.col,
            expected=expected,
        )

    # -- program -----------------------------------------------------------

    def parse_program(self) -> Program:
        blocks: list[Block] = []
        impls: list[ImplDecl] = []
        seen_kinds: list[str] = []
        while not self.at(TokKind.EOF):
            if self.at(TokKind.IDENT, "module"):
                impls.append(self.parse_module())
                continue
            kind = self.try_block_kind()
            if kind is None:
                raise self.fail(("block name", "'module'"))
            if impls:
                t = self.peek()
                raise ParseError("blocks must precede module implementations", t.line, t.col)
            if kind in seen_kinds:
                t = self.peek()
                raise ParseError(f"duplicate block '{kind}'", t.line, t.col)
            order = [b for b in seen_kinds] + [kind]
            if [b for b in BLOCK_ORDER if b in order] != order:
                t = self.peek()
                raise ParseError(f"block '{kind}' out of order", t.line, t.col)
            seen_kinds.append(kind)
            self.consume_block_kind(kind)
            blocks.append(self.parse_block(kind))
        return Program(blocks=tuple(blocks), impls=tuple(impls))

    def try_block_kind(self) -> Optional[str]:
        t = self.peek()
        if t.kind != TokKind.IDENT:
            return None
        if t.text in ("functions", "data", "parameters", "model"):
            if self.peek(1).kind == TokKind.LBRACE:
                return t.text
            return None
        if t.text == "transformed" and self.peek(1).kind == TokKind.IDENT:
            nxt = self.peek(1).text
            if nxt in ("data", "parameters") and self.peek(2).kind == TokKind.LBRACE:
                return f"transformed {nxt}"
        if t.text == "generated" and self.peek(1).kind == TokKind.IDENT:
            if self.peek(1).text == "quantities" and self.peek(2).kind == TokKind.LBRACE:
                return "generated quantities"
        return None

    def consume_block_kind(self, kind: str) -> None:
        for _ in kind.split(" "):
            self.advance()

    def parse_block(self, kind: str) -> Block:
        self.expect(TokKind.LBRACE)
        if kind == "functions":
            funcs = []
            while not self.at(TokKind.RBRACE):
                funcs.append(self.parse_func_decl())
            self.expect(TokKind.RBRACE)
            return Block(kind, tuple(funcs))
        stmts: list[Stmt] = []
        while not self.at(TokKind.RBRACE):
            stmt = self.parse_stmt()
            if kind in ("data", "parameters") and not isinstance(stmt, DeclStmt):
                t = self.peek()
                raise ParseError(f"only declarations are allowed in the {kind} block", t.line, t.col)
            stmts.append(stmt)
        self.expect(TokKind.RBRACE)
        return Block(kind, tuple(stmts))

    def parse_func_decl(self) -> FuncDecl:
        if self.at(TokKind.IDENT, "void"):
            self.advance()
            ret: Union[TypeNode, str] = "void"
        else:
            ret = self.parse_type()
        name = self.expect(TokKind.IDENT).text
        params = self.parse_param_list()[0]
        self.expect(TokKind.LBRACE)
        body = []
        while not self.at(TokKind.RBRACE):
            body.append(self.parse_stmt())
        self.expect(TokKind.RBRACE)
        return FuncDecl(ret, name, tuple(params), tuple(body))

    # -- module implementations ---------------------------------------------

    def parse_module(self) -> ImplDecl:
        start = self.expect_ident("module")
        impl_name = self.expect(TokKind.STRING, "implementation name string").text
        hole_tok = self.expect(TokKind.IDENT, "hole name")
        range_idx: tuple[str, ...] = ()
        inst_idx: tuple[str, ...] = ()
        if self.at(TokKind.LBRACK):
            self.advance()
            range_idx = self.parse_ident_list()
            self.expect(TokKind.RBRACK)
        if self.at(TokKind.LT):
            self.advance()
            inst_idx = self.parse_ident_list()
            self.expect(TokKind.GT)
        params: tuple[Param, ...] = ()
        obs: tuple[Param, ...] = ()
        has_header_params = self.at(TokKind.LPAREN)
        if has_header_params:
            params, obs = self.parse_param_list()
        self.expect(TokKind.LBRACE)

        appends: list[Block] = []
        while True:
            kind = self.try_block_kind()
            if kind is None:
                break
            if kind not in APPEND_BLOCKS:
                t = self.peek()
                raise ParseError(f"'{kind}' cannot be a module append block", t.line, t.col)
            self.consume_block_kind(kind)
            appends.append(self.parse_block(kind))

        fields: list[FieldDecl] = []
        if self.at(TokKind.IDENT, "field"):
            if has_header_params:
                t = self.peek()
                raise ParseError("module with fields must not declare header parameters", t.line, t.col)
            while self.at(TokKind.IDENT, "field"):
                fields.append(self.parse_field_decl())
            names = [f.name for f in fields]
            if len(set(names)) != len(names):
                raise ParseError("duplicate field name", start.line, start.col)
            if "" in names and len(names) > 1:
                raise ParseError("anonymous field cannot be mixed with named fields", start.line, start.col)
        else:
            body, ret = self.parse_impl_body()
            fields.append(FieldDecl("", params, obs, body, ret))
        self.expect(TokKind.RBRACE)
        return ImplDecl(
            impl_name=impl_name,
            hole_name=hole_tok.text,
            fields=tuple(fields),
            append_blocks=tuple(appends),
            range_index_params=range_idx,
            inst_index_params=inst_idx,
            span=Span(start.line, start.col, start.start, hole_tok.end),
        )

    def parse_field_decl(self) -> FieldDecl:
        self.expect_ident("field")
        name = ""
        if self.at(TokKind.IDENT):
            name = self.advance().text
        params, obs = self.parse_param_list()
        self.expect(TokKind.LBRACE)
        body, ret = self.parse_impl_body()
        self.expect(TokKind.RBRACE)
        return FieldDecl(name, tuple(params), tuple(obs), body, ret)

    def parse_impl_body(self) -> tuple[tuple[Stmt, ...], Optional[Expr]]:
        stmts: list[Stmt] = []
        ret: Optional[Expr] = None
        while not self.at(TokKind.RBRACE):
            stmt = self.parse_stmt()
            if isinstance(stmt, ReturnStmt):
                if ret is not None:
                    t = self.peek()
                    raise ParseError("module body may contain at most one return statement", t.line, t.col)
                ret = stmt.value
                if not self.at(TokKind.RBRACE):
                    t = self.peek()
                    raise ParseError("return must be the last statement of a module body", t.line, t.col)
                break
            stmts.append(stmt)
        return tuple(stmts), ret

    def parse_ident_list(self) -> tuple[str, ...]:
        names = [self.expect(TokKind.IDENT).text]
        while self.at(TokKind.COMMA):
            self.advance()
            names.append(self.expect(TokKind.IDENT).text)
        return tuple(names)

    def parse_param_list(self) -> tuple[tuple[Param, ...], tuple[Param, ...]]:
        """Parse `(a | b, c)` style parameter lists; returns (params, observed)."""
        self.expect(TokKind.LPAREN)
        obs: list[Param] = []
        params: list[Param] = []
        if not self.at(TokKind.RPAREN):
            current: list[Param] = []
            while True:
                current.append(self.parse_param())
                if self.at(TokKind.COMMA):
                    self.advance()
                    continue
                if self.at(TokKind.PIPE):
                    if obs:
                        t = self.peek()
                        raise ParseError("at most one '|' separator in a parameter list", t.line, t.col)
                    self.advance()
                    obs = current
                    current = []
                    continue
                break
            params = current
        self.expect(TokKind.RPAREN)
        return tuple(params), tuple(obs)

    def parse_param(self) -> Param:
        t = self.peek()
        if t.kind == TokKind.IDENT and t.text in TYPE_KEYWORDS and not (
            self.peek(1).kind in (TokKind.COMMA, TokKind.RPAREN, TokKind.PIPE)
        ):
            ty = self.parse_type()
            name = self.expect(TokKind.IDENT).text
            return Param(ty, name)
        name = self.expect(TokKind.IDENT, "parameter name").text
        return Param(None, name)

    # -- types ---------------------------------------------------------------

    def parse_type(self) -> TypeNode:
        t = self.expect(TokKind.IDENT, "type name")
        if t.text not in TYPE_KEYWORDS:
            raise ParseError(f"unknown type '{t.text}'", t.line, t.col, expected=tuple(sorted(TYPE_KEYWORDS)))
        constraint = ""
        if self.at(TokKind.LT):
            self.advance()
            pieces = []
            while not self.at(TokKind.GT):
                tok = self.peek()
                if tok.kind in (TokKind.EOF, TokKind.SEMI, TokKind.LBRACE, TokKind.RBRACE):
                    raise ParseError("unterminated type constraint", tok.line, tok.col, expected=(">",))
                pieces.append(self.advance())
            self.expect(TokKind.GT)
            out = []
            for k, tok in enumerate(pieces):
                if k and tok.kind == TokKind.IDENT and pieces[k - 1].kind == TokKind.COMMA:
                    pass
                out.append(tok.text)
            constraint = "".join(out)
        sizes: tuple[Expr, ...] = ()
        if self.at(TokKind.LBRACK):
            self.advance()
            lst = [self.parse_expr()]
            while self.at(TokKind.COMMA):
                self.advance()
                lst.append(self.parse_expr())
            self.expect(TokKind.RBRACK)
            sizes = tuple(lst)
        return TypeNode(t.text, sizes, constraint)

    # -- statements ----------------------------------------------------------

    def parse_stmt(self) -> Stmt:
        t = self.peek()
        span = Span(t.line, t.col, t.start, t.end)
        if t.kind == TokKind.IDENT:
            if t.text == "for":
                return self.parse_for()
            if t.text == "if":
                return self.parse_if()
            if t.text == "return":
                self.advance()
                if self.at(TokKind.SEMI):
                    self.advance()
                    return ReturnStmt(None, span)
                value = self.parse_expr()
                self.expect(TokKind.SEMI)
                return ReturnStmt(value, span)
            if t.text in TYPE_KEYWORDS:
                return self.parse_decl()
        expr = self.parse_expr()
        if self.at(TokKind.TILDE):
            self.advance()
            callee = self.parse_expr()
            if not isinstance(callee, (Call, HoleCall)):
                raise ParseError("right-hand side of '~' must be a distribution call", t.line, t.col)
            self.expect(TokKind.SEMI)
            return TildeStmt(expr, callee, span)
        if self.at(TokKind.ASSIGN) or self.at(TokKind.PLUSASSIGN):
            op = self.advance().text
            if not isinstance(expr, (Var, Index)):
                raise ParseError("assignment target must be a variable or indexed variable", t.line, t.col)
            value = self.parse_expr()
            self.expect(TokKind.SEMI)
            return AssignStmt(expr, op, value, span)
        self.expect(TokKind.SEMI)
        if not isinstance(expr, (Call, HoleCall)):
            raise ParseError("expression statement must be a call", t.line, t.col)
        return CallStmt(expr, span)

    def parse_decl(self) -> DeclStmt:
        t = self.peek()
        ty = self.parse_type()
        name_tok = self.expect(TokKind.IDENT, "variable name")
        dims: tuple[Expr, ...] = ()
        if self.at(TokKind.LBRACK):
            self.advance()
            lst = [self.parse_expr()]
            while self.at(TokKind.COMMA):
                self.advance()
                lst.append(self.parse_expr())
            self.expect(TokKind.RBRACK)
            dims = tuple(lst)
        ty = TypeNode(ty.base, ty.size_args, ty.constraint, dims)
        init = None
        if self.at(TokKind.ASSIGN):
            self.advance()
            init = self.parse_expr()
        self.expect(TokKind.SEMI)
        return DeclStmt(ty, name_tok.text, init, Span(t.line, t.col, t.start, name_tok.end))

    def parse_braced_stmts(self) -> tuple[Stmt, ...]:
        self.expect(TokKind.LBRACE)
        stmts = []
        while not self.at(TokKind.RBRACE):
            stmts.append(self.parse_stmt())
        self.expect(TokKind.RBRACE)
        return tuple(stmts)

    def parse_for(self) -> ForStmt:
        kw = self.expect_ident("for")
        self.expect(TokKind.LPAREN)
        if self.at(TokKind.LPAREN):
            self.advance()
            names = self.parse_ident_list()
            self.expect(TokKind.RPAREN)
        else:
            names = (self.expect(TokKind.IDENT, "loop variable").text,)
        self.expect_ident("in")
        first = self.parse_expr()
        lo = hi = seq = None
        if self.at(TokKind.COLON):
            self.advance()
            lo, hi = first, self.parse_expr()
        else:
            seq = first
        self.expect(TokKind.RPAREN)
        body = self.parse_braced_stmts()
        return ForStmt(names, lo, hi, seq, body, Span(kw.line, kw.col, kw.start, kw.end))

    def parse_if(self) -> IfStmt:
        kw = self.expect_ident("if")
        self.expect(TokKind.LPAREN)
        cond = self.parse_expr()
        self.expect(TokKind.RPAREN)
        then = self.parse_braced_stmts()
        els = None
        if self.at(TokKind.IDENT, "else"):
            self.advance()
            if self.at(TokKind.IDENT, "if"):
                els = (self.parse_if(),)
            else:
                els = self.parse_braced_stmts()
        return IfStmt(cond, then, els, Span(kw.line, kw.col, kw.start, kw.end))

    # -- expressions -----------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.at(TokKind.OROR):
            self.advance()
            left = Binary("||", left, self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_cmp()
        while self.at(TokKind.ANDAND):
            self.advance()
            left = Binary("&&", left, self.parse_cmp())
        return left

    def parse_cmp(self) -> Expr:
        left = self.parse_add()
        while self.peek().kind in _CMP_OPS:
            op = _CMP_OPS[self.advance().kind]
            left = Binary(op, left, self.parse_add())
        return left

    def parse_add(self) -> Expr:
        left = self.parse_mul()
        while self.peek().kind in _ADD_OPS:
            op = _ADD_OPS[self.advance().kind]
            left = Binary(op, left, self.parse_mul())
        return left

    def parse_mul(self) -> Expr:
        left = self.parse_unary()
        while self.peek().kind in _MUL_OPS:
            op = _MUL_OPS[self.advance().kind]
            left = Binary(op, left, self.parse_unary())
        return left

    def parse_unary(self) -> Expr:
        t = self.peek()
        if t.kind in (TokKind.MINUS, TokKind.PLUS, TokKind.BANG):
            self.advance()
            return Unary(t.text, self.parse_unary())
        return self.parse_pow()

    def parse_pow(self) -> Expr:
        left = self.parse_postfix()
        if self.at(TokKind.CARET):
            self.advance()
            return Binary("^", left, self.parse_unary())
        return left

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while self.at(TokKind.LBRACK):
            self.advance()
            idxs: list[Union[Expr, Slice]] = [self.parse_index_entry()]
            while self.at(TokKind.COMMA):
                self.advance()
                idxs.append(self.parse_index_entry())
            self.expect(TokKind.RBRACK)
            expr = Index(expr, tuple(idxs))
        return expr

    def parse_index_entry(self) -> Union[Expr, Slice]:
        if self.at(TokKind.COLON):
            self.advance()
            return Slice(None, None)
        lo = self.parse_expr()
        if self.at(TokKind.COLON):
            self.advance()
            if self.at(TokKind.RBRACK) or self.at(TokKind.COMMA):
                return Slice(lo, None)
            return Slice(lo, self.parse_expr())
        return lo

    def parse_primary(self) -> Expr:
        t = self.peek()
        if t.kind == TokKind.INT:
            self.advance()
            return IntLit(int(t.text))
        if t.kind == TokKind.REAL:
            self.advance()
            return RealLit(t.text)
        if t.kind == TokKind.LPAREN:
            self.advance()
            first = self.parse_expr()
            if self.at(TokKind.COMMA):
                elems = [first]
                while self.at(TokKind.COMMA):
                    self.advance()
                    elems.append(self.parse_expr())
                self.expect(TokKind.RPAREN)
                return TupleLit(tuple(elems))
            self.expect(TokKind.RPAREN)
            return first
        if t.kind == TokKind.LBRACE:
            self.advance()
            elems = []
            if not self.at(TokKind.RBRACE):
                elems.append(self.parse_expr())
                while self.at(TokKind.COMMA):
                    self.advance()
                    elems.append(self.parse_expr())
            self.expect(TokKind.RBRACE)
            return ArrayLit(tuple(elems))
        if t.kind == TokKind.IDENT:
            site = self.try_hole_site()
            if site is not None:
                return site
            self.advance()
            if self.at(TokKind.LPAREN):
                args = self.parse_call_args()
                return Call(t.text, args, Span(t.line, t.col, t.start, self.toks[self.pos - 1].end))
            return Var(t.text)
        raise self.fail(("expression",))

    def parse_call_args(self) -> tuple[Expr, ...]:
        self.expect(TokKind.LPAREN)
        args: list[Expr] = []
        if not self.at(TokKind.RPAREN):
            args.append(self.parse_expr())
            while True:
                if self.at(TokKind.COMMA) or self.at(TokKind.PIPE):
                    self.advance()
                    args.append(self.parse_expr())
                    continue
                break
        self.expect(TokKind.RPAREN)
        return tuple(args)

    # -- speculative hole-site parsing -----------------------------------------

    def try_hole_site(self) -> Optional[HoleCall]:
        """Attempt a macro-decorated hole reference; backtrack on mismatch.

        Commits only when a decoration is present (ranges, exponent, instance
        or copy tag, trailing `+`, a field suffix, or two or more argument
        lists). Plain `Name(args)` is parsed as an ordinary call and promoted
        to a hole later.
        """
        start = self.pos
        t0 = self.peek()
        try:
            terms: list[HoleTerm] = []
            decorated = False
            while True:
                term, dec = self.parse_hole_term()
                terms.append(term)
                decorated = decorated or dec
                if self.at(TokKind.STAR) and self.peek(1).kind == TokKind.IDENT:
                    self.advance()
                    continue
                break
            inst = self.try_instance_tag()
            if inst is not None:
                decorated = True
            collect = False
            if self.at(TokKind.PLUS) and self.peek(1).kind == TokKind.LPAREN:
                self.advance()
                collect = True
                decorated = True
            field_name = ""
            if self.at(TokKind.DOT) and self.peek(1).kind == TokKind.IDENT and self.peek(2).kind == TokKind.LPAREN:
                self.advance()
                field_name = self.advance().text
                decorated = True
            if not self.at(TokKind.LPAREN):
                raise _Back()
            args = list(self.parse_call_args())
            arg_lists = 1
            while self.at(TokKind.LPAREN):
                args.extend(self.parse_call_args())
                arg_lists += 1
            if len(terms) > 1 and not decorated and arg_lists < 2:
                raise _Back()
            if len(terms) == 1 and not decorated:
                raise _Back()
            if len(terms) > 1 and field_name:
                raise _Back()
            ref = HoleRef(tuple(terms), field_name, inst, collect)
            return HoleCall(ref, tuple(args), Span(t0.line, t0.col, t0.start, self.toks[self.pos - 1].end))
        except (_Back, ParseError):
            self.pos = start
            return None

    def parse_hole_term(self) -> tuple[HoleTerm, bool]:
        name = self.peek()
        if name.kind != TokKind.IDENT:
            raise _Back()
        self.advance()
        ranges: tuple[IndexAtom, ...] = ()
        decorated = False
        if self.at(TokKind.LBRACK):
            save = self.pos
            atoms = self.try_range_list(TokKind.RBRACK)
            if atoms is None:
                self.pos = save
            else:
                ranges = atoms
                decorated = True
        exp, mode = 1, ""
        if self.at(TokKind.CARET):
            save = self.pos
            self.advance()
            parsed = self.try_exponent()
            if parsed is None:
                self.pos = save
            else:
                exp, mode = parsed
                decorated = True
        return HoleTerm(name.text, ranges, exp, mode), decorated

    def try_exponent(self) -> Optional[tuple[int, str]]:
        t = self.peek()
        if t.kind == TokKind.INT:
            self.advance()
            return int(t.text), ""
        if t.kind == TokKind.IDENT and len(t.text) > 1 and t.text[0] in "PC" and t.text[1:].isdigit():
            self.advance()
            return int(t.text[1:]), t.text[0]
        return None

    def try_range_list(self, closer: TokKind) -> Optional[tuple[IndexAtom, ...]]:
        """Parse `[1..3, (1..9)^C2, j]`; requires at least one true range/exponent."""
        self.advance()  # opening bracket
        atoms: list[IndexAtom] = []
        real_range = False
        while True:
            atom = self.try_range_atom()
            if atom is None:
                return None
            if isinstance(atom, RangeAtom) and (atom.lo != atom.hi or atom.exp != 1 or atom.mode):
                real_range = True
            atoms.append(atom)
            if self.at(TokKind.COMMA):
                self.advance()
                continue
            break
        if not self.at(closer):
            return None
        self.advance()
        if not real_range:
            return None
        return tuple(atoms)

    def try_range_atom(self) -> Optional[IndexAtom]:
        t = self.peek()
        if t.kind == TokKind.IDENT:
            self.advance()
            return SymAtom(t.text)
        if t.kind == TokKind.INT:
            self.advance()
            lo = int(t.text)
            if self.at(TokKind.DOTDOT):
                self.advance()
                hi_tok = self.peek()
                if hi_tok.kind != TokKind.INT:
                    return None
                self.advance()
                hi = int(hi_tok.text)
                if hi < lo:
                    raise ParseError("range bounds must satisfy low <= high", t.line, t.col)
                return RangeAtom(lo, hi)
            return RangeAtom(lo, lo)
        if t.kind == TokKind.LPAREN:
            self.advance()
            inner = self.try_range_atom()
            if inner is None or not self.at(TokKind.RPAREN):
                return None
            self.advance()
            if not self.at(TokKind.CARET):
                return inner
            self.advance()
            parsed = self.try_exponent()
            if parsed is None or not isinstance(inner, RangeAtom):
                return None
            exp, mode = parsed
            return RangeAtom(inner.lo, inner.hi, exp, mode)
        return None

    def try_instance_tag(self) -> Optional[InstanceTag]:
        if self.at(TokKind.LTLT):
            kind, closer = "copy", TokKind.GTGT
        elif self.at(TokKind.LT):
            kind, closer = "instance", TokKind.GT
        else:
            return None
        save = self.pos
        self.advance()
        atoms: list[IndexAtom] = []
        while True:
            atom = self.try_range_atom()
            if atom is None:
                self.pos = save
                return None
            atoms.append(atom)
            if self.at(TokKind.COMMA):
                self.advance()
                continue
            break
        if not self.at(closer):
            self.pos = save
            return None
        self.advance()
        if not self.at(TokKind.LPAREN) and not (self.at(TokKind.PLUS) and self.peek(1).kind == TokKind.LPAREN):
            self.pos = save
            return None
        return InstanceTag(kind, tuple(atoms))


class _Back(Exception):
    pass


# ---------------------------------------------------------------------------
# Post-parse hole resolution
# ---------------------------------------------------------------------------


def _user_functions(program: Program) -> frozenset[str]:
    fns = set()
    for b in program.blocks:
        if b.kind == "functions":
            fns.update(f.name for f in b.stmts)
    for impl in program.impls:
        for ab in impl.append_blocks:
            if ab.kind == "functions":
                fns.update(f.name for f in ab.stmts)
    return frozenset(fns)


def _looks_like_hole(name: str, declared: frozenset[str], funcs: frozenset[str]) -> bool:
    from .stantypes import BUILTIN_NAMES

    if name in declared:
        return True
    if name in funcs or name in BUILTIN_NAMES or name.endswith("_rng"):
        return False
    return name[:1].isupper()


def resolve_holes(program: Program) -> Program:
    """Promote `Call` nodes to `HoleCall` for declared or hole-like names."""
    declared = frozenset(i.hole_name for i in program.impls)
    funcs = _user_functions(program)

    def rx(e: Expr) -> Expr:
        if isinstance(e, Call):
            args = tuple(rx(a) for a in e.args)
            if _looks_like_hole(e.name, declared, funcs):
                return HoleCall(HoleRef((HoleTerm(e.name),)), args, e.span)
            return Call(e.name, args, e.span)
        if isinstance(e, HoleCall):
            return HoleCall(e.ref, tuple(rx(a) for a in e.args), e.span)
        if isinstance(e, Unary):
            return Unary(e.op, rx(e.operand))
        if isinstance(e, Binary):
            return Binary(e.op, rx(e.left), rx(e.right))
        if isinstance(e, ArrayLit):
            return ArrayLit(tuple(rx(x) for x in e.elems))
        if isinstance(e, TupleLit):
            return TupleLit(tuple(rx(x) for x in e.elems))
        if isinstance(e, Index):
            return Index(rx(e.base), tuple(Slice(rx(i.lo) if i.lo else None, rx(i.hi) if i.hi else None) if isinstance(i, Slice) else rx(i) for i in e.idxs))
        return e

    def rs(s: Stmt) -> Stmt:
        if isinstance(s, DeclStmt):
            return DeclStmt(s.ty, s.name, rx(s.init) if s.init else None, s.span)
        if isinstance(s, AssignStmt):
            return AssignStmt(rx(s.target), s.op, rx(s.value), s.span)
        if isinstance(s, TildeStmt):
            return TildeStmt(rx(s.lhs), rx(s.call), s.span)
        if isinstance(s, CallStmt):
            return CallStmt(rx(s.call), s.span)
        if isinstance(s, ReturnStmt):
            return ReturnStmt(rx(s.value) if s.value else None, s.span)
        if isinstance(s, ForStmt):
            return ForStmt(s.vars, rx(s.lo) if s.lo else None, rx(s.hi) if s.hi else None, rx(s.seq) if s.seq else None, tuple(rs(x) for x in s.body), s.span)
        if isinstance(s, IfStmt):
            return IfStmt(rx(s.cond), tuple(rs(x) for x in s.then), tuple(rs(x) for x in s.els) if s.els else None, s.span)
        return s

    def rblock(b: Block) -> Block:
        if b.kind == "functions":
            return Block(b.kind, tuple(FuncDecl(f.ret, f.name, f.params, tuple(rs(x) for x in f.body)) for f in b.stmts))
        return Block(b.kind, tuple(rs(x) for x in b.stmts))

    blocks = tuple(rblock(b) for b in program.blocks)
    impls = tuple(
        ImplDecl(
            i.impl_name,
            i.hole_name,
            tuple(
                FieldDecl(f.name, f.params, f.obs_params, tuple(rs(x) for x in f.body), rx(f.ret) if f.ret else None)
                for f in i.fields
            ),
            tuple(rblock(ab) for ab in i.append_blocks),
            i.range_index_params,
            i.inst_index_params,
            i.span,
        )
        for i in program.impls
    )
    return Program(blocks, impls)


def parse(source: Union[str, SourceProgram]) -> Program:
    """Parse modular program text into an AST; raises ParseError/LexError."""
    text = source.text if isinstance(source, SourceProgram) else source
    tokens, _comments = tokenize(text)
    program = Parser(tokens).parse_program()
    return resolve_holes(program)


def parse_with_comments(source: Union[str, SourceProgram]) -> tuple[Program, list[Comment]]:
    text = source.text if isinstance(source, SourceProgram) else source
    tokens, comments = tokenize(text)
    program = Parser(tokens).parse_program()
    return resolve_holes(program), comments
