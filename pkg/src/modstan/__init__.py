"""Compiler and model-space toolkit for a Stan subset with swappable modules.

A program in this language is an ordinary block-structured host program whose
statements and expressions may contain *holes*, plus a list of named module
implementations that fill those holes. Each way of filling every reachable
hole is one concrete program; the package parses and validates such programs,
synthesizes any selected concrete program by static inlining, and enumerates
or searches the induced network of programs.
"""

from .parser import ParseError, SourceProgram, parse
from .render import render
from .program import ModularProgram, Selection
from .selections import SelectionError, parse_selection

__all__ = [
    "ModularProgram",
    "ParseError",
    "Selection",
    "SelectionError",
    "SourceProgram",
    "parse",
    "parse_selection",
    "render",
]

__version__ = "0.1.0"
