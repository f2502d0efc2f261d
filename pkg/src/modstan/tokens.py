"""Tokenizer for the modular Stan subset.

Produces a flat token list with 1-based line/column positions and absolute
offsets so that downstream consumers (parser, hole sites, diagnostics) can
point back into the source text. `//` line comments are collected separately
as trivia and never reach the parser.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class TokKind(Enum):
    IDENT = "identifier"
    INT = "integer"
    REAL = "real"
    STRING = "string"
    LBRACE = "{"
    RBRACE = "}"
    LPAREN = "("
    RPAREN = ")"
    LBRACK = "["
    RBRACK = "]"
    COMMA = ","
    SEMI = ";"
    COLON = ":"
    PIPE = "|"
    TILDE = "~"
    DOT = "."
    DOTDOT = ".."
    ELTTIMES = ".*"
    ELTDIV = "./"
    PLUS = "+"
    MINUS = "-"
    STAR = "*"
    SLASH = "/"
    CARET = "^"
    BANG = "!"
    ASSIGN = "="
    PLUSASSIGN = "+="
    LT = "<"
    GT = ">"
    LE = "<="
    GE = ">="
    EQ = "=="
    NE = "!="
    ANDAND = "&&"
    OROR = "||"
    LTLT = "<<"
    GTGT = ">>"
    EOF = "end of input"


@dataclass(frozen=True)
class Token:
    kind: TokKind
    text: str
    line: int
    col: int
    start: int
    end: int


@dataclass(frozen=True)
class Comment:
    text: str
    line: int


class LexError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, col {col}")
        self.message = message
        self.line = line
        self.col = col


_PUNCT2 = {
    "+=": TokKind.PLUSASSIGN,
    "==": TokKind.EQ,
    "!=": TokKind.NE,
    "<=": TokKind.LE,
    ">=": TokKind.GE,
    "&&": TokKind.ANDAND,
    "||": TokKind.OROR,
    "<<": TokKind.LTLT,
    ">>": TokKind.GTGT,
    "..": TokKind.DOTDOT,
    ".*": TokKind.ELTTIMES,
    "./": TokKind.ELTDIV,
}

_PUNCT1 = {
    "{": TokKind.LBRACE,
    "}": TokKind.RBRACE,
    "(": TokKind.LPAREN,
    ")": TokKind.RPAREN,
    "[": TokKind.LBRACK,
    "]": TokKind.RBRACK,
    ",": TokKind.COMMA,
    ";": TokKind.SEMI,
    ":": TokKind.COLON,
    "|": TokKind.PIPE,
    "~": TokKind.TILDE,
    ".": TokKind.DOT,
    "+": TokKind.PLUS,
    "-": TokKind.MINUS,
    "*": TokKind.STAR,
    "/": TokKind.SLASH,
    "^": TokKind.CARET,
    "!": TokKind.BANG,
    "=": TokKind.ASSIGN,
    "<": TokKind.LT,
    ">": TokKind.GT,
}


def tokenize(text: str) -> tuple[list[Token], list[Comment]]:
    tokens: list[Token] = []
    comments: list[Comment] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def here(start: int, end: int, kind: TokKind, lexeme: str, tline: int, tcol: int):
        tokens.append(Token(kind, lexeme, tline, tcol, start, end))

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "/" and i + 1 < n and text[i + 1] == "/":
            j = text.find("\n", i)
            if j == -1:
                j = n
            comments.append(Comment(text[i + 2 : j].strip(), line))
            col += j - i
            i = j
            continue
        start, tline, tcol = i, line, col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            here(start, j, TokKind.IDENT, text[i:j], tline, tcol)
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_real = False
            # `1..3` keeps the integer and leaves `..` for the next token
            if j < n and text[j] == "." and not (j + 1 < n and text[j + 1] == "."):
                if j + 1 < n and text[j + 1].isdigit():
                    is_real = True
                    j += 1
                    while j < n and text[j].isdigit():
                        j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_real = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            here(start, j, TokKind.REAL if is_real else TokKind.INT, text[i:j], tline, tcol)
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise LexError("unterminated string", tline, tcol)
                j += 1
            if j >= n:
                raise LexError("unterminated string", tline, tcol)
            here(start, j + 1, TokKind.STRING, text[i + 1 : j], tline, tcol)
            col += j + 1 - i
            i = j + 1
            continue
        two = text[i : i + 2]
        if two in _PUNCT2:
            here(start, i + 2, _PUNCT2[two], two, tline, tcol)
            i += 2
            col += 2
            continue
        if c in _PUNCT1:
            here(start, i + 1, _PUNCT1[c], c, tline, tcol)
            i += 1
            col += 1
            continue
        raise LexError(f"unexpected character {c!r}", tline, tcol)

    tokens.append(Token(TokKind.EOF, "", line, col, n, n))
    return tokens, comments
