"""Reader for the implemented R5RS syntax subset.

Only ``quote`` (and its ``'`` abbreviation) is supported; quasiquote,
unquote and the macro forms are rejected, as are number literals in any
radix other than 10 and exactness prefixes.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .types import NIL, Char, Pair, SString, Symbol, Vector, normalize, sym

__all__ = ["SchemeSyntaxError", "read", "read_tokens", "parse_atom", "parse_number"]


class SchemeSyntaxError(Exception):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} at {position}"
        super().__init__(message)
        self.position = position


CHAR_NAMES = {"space": " ", "newline": "\n", "tab": "\t", "nul": "\0"}

REJECTED_FORMS = frozenset(
    {
        "quasiquote",
        "unquote",
        "unquote-splicing",
        "define-syntax",
        "let-syntax",
        "letrec-syntax",
        "syntax-rules",
    }
)

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|;[^\n]*)
  | (?P<open>\()
  | (?P<close>\))
  | (?P<vec>\#\()
  | (?P<quote>')
  | (?P<qq>`|,@|,)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<char>\#\\(?:[A-Za-z]+|.))
  | (?P<atom>[^\s()";'`,]+)
  | (?P<bad>.)
    """,
    re.VERBOSE | re.DOTALL,
)

_INT = re.compile(r"[+-]?\d+\Z")
_RAT = re.compile(r"[+-]?\d+/\d+\Z")
_DEC = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\Z")
_SPECIAL_FLOATS = {"+inf.0": float("inf"), "-inf.0": float("-inf"), "+nan.0": float("nan")}


def parse_number(text: str):
    """Return the number denoted by ``text`` or None."""
    if _INT.match(text):
        return int(text)
    if _RAT.match(text):
        n, d = text.split("/")
        if int(d) == 0:
            return None
        return normalize(Fraction(int(n), int(d)))
    if _DEC.match(text):
        return float(text)
    return _SPECIAL_FLOATS.get(text)


def _unescape(body: str) -> str:
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\":
            i += 1
            nxt = body[i]
            out.append({"n": "\n", "t": "\t"}.get(nxt, nxt))
        else:
            out.append(c)
        i += 1
    return "".join(out)


def parse_atom(text: str, position=None):
    """Turn one atom token into a datum."""
    if text[0] == '"':
        return SString(_unescape(text[1:-1]))
    if text.startswith("#\\"):
        name = text[2:]
        if len(name) == 1:
            return Char(name)
        if name.lower() in CHAR_NAMES:
            return Char(CHAR_NAMES[name.lower()])
        raise SchemeSyntaxError(f"unknown character name {text!r}", position)
    if text in ("#t", "#true"):
        return True
    if text in ("#f", "#false"):
        return False
    if text[0] == "#":
        raise SchemeSyntaxError(
            f"unsupported syntax {text!r} (only base-10 literals without prefixes)", position
        )
    n = parse_number(text)
    if n is not None:
        return n
    if text == ".":
        raise SchemeSyntaxError("unexpected '.'", position)
    return sym(text)


def tokenize(text: str):
    """Yield (kind, token, position) triples; position is 'line:col'."""
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        tok = m.group()
        pos = f"{line}:{m.start() - line_start + 1}"
        if kind == "ws":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = m.start() + tok.rindex("\n") + 1
            continue
        if kind == "qq":
            raise SchemeSyntaxError(f"quasiquotation syntax {tok!r} is not supported", pos)
        if kind == "bad":
            raise SchemeSyntaxError(f"unexpected character {tok!r}", pos)
        if kind == "string" and "\n" in tok:
            nl = tok.count("\n")
            line += nl
            line_start = m.start() + tok.rindex("\n") + 1
        yield kind, tok, pos


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def datum(self):
        if self.i >= len(self.tokens):
            raise SchemeSyntaxError("unexpected end of input")
        kind, tok, pos = self.tokens[self.i]
        self.i += 1
        if kind == "open":
            return self._list(pos)
        if kind == "vec":
            items = []
            while True:
                if self.i >= len(self.tokens):
                    raise SchemeSyntaxError("unterminated vector", pos)
                if self.tokens[self.i][0] == "close":
                    self.i += 1
                    return Vector(items)
                items.append(self.datum())
        if kind == "quote":
            return Pair(sym("quote"), Pair(self.datum(), NIL))
        if kind == "close":
            raise SchemeSyntaxError("unexpected ')'", pos)
        return parse_atom(tok, pos)

    def _list(self, pos):
        items = []
        tail = NIL
        while True:
            if self.i >= len(self.tokens):
                raise SchemeSyntaxError("unterminated list", pos)
            kind, tok, p = self.tokens[self.i]
            if kind == "close":
                self.i += 1
                break
            if kind == "atom" and tok == ".":
                if not items:
                    raise SchemeSyntaxError("unexpected '.'", p)
                self.i += 1
                tail = self.datum()
                if self.i >= len(self.tokens) or self.tokens[self.i][0] != "close":
                    raise SchemeSyntaxError("expected ')' after dotted tail", p)
                self.i += 1
                break
            items.append(self.datum())
        if items and type(items[0]) is Symbol and items[0] in REJECTED_FORMS:
            raise SchemeSyntaxError(f"{items[0]} forms are not supported", pos)
        out = tail
        for x in reversed(items):
            out = Pair(x, out)
        return out

    def all(self):
        out = []
        while self.i < len(self.tokens):
            out.append(self.datum())
        return out


def read(text: str) -> list:
    """Read every datum in ``text``."""
    return _Parser(list(tokenize(text))).all()


def read_tokens(tokens) -> list:
    """Read data from an already split token sequence (as produced by grammar sentences)."""
    classified = []
    for n, tok in enumerate(tokens):
        pos = f"token {n}"
        if tok == "(":
            classified.append(("open", tok, pos))
        elif tok == ")":
            classified.append(("close", tok, pos))
        elif tok == "#(":
            classified.append(("vec", tok, pos))
        elif tok == "'":
            classified.append(("quote", tok, pos))
        else:
            classified.append(("string" if tok[0] == '"' else "atom", tok, pos))
    return _Parser(classified).all()
