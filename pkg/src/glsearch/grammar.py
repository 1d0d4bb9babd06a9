"""Stochastic context-free grammars with procedural non-terminals.

Grammar file format (UTF-8, one item per line)::

    # full-line comment
    %start program
    %zeta 2 1024
    %hook previous-solution
    %solution sqr ::= ( sqr <expression> ) : (define (sqr x) (* x x))
    <head> ::= 0.5 : ( if <expression> <expression> )

Non-terminals are written ``<name>``, procedural non-terminals ``<!name>``
(optionally ``<!name:arg>``), scope markers ``<@begin>``, ``<@end>`` and
``<@bind>``.  Any other token is a terminal; terminals that would be
ambiguous are written as JSON strings.  ``%hook`` declares a head that may
legitimately have no productions (its alternatives are added by learning).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "NonTerminal",
    "Procedural",
    "Marker",
    "BEGIN",
    "END",
    "BIND",
    "Production",
    "Grammar",
    "ZetaTable",
    "Solution",
    "GrammarError",
    "PROCEDURAL_NAMES",
    "load_grammar",
    "loads",
    "dumps",
    "save_grammar",
    "validate",
    "zeta_alternatives",
    "symbol_text",
]

SUM_TOLERANCE = 1e-9

# Procedural non-terminals implemented by the derivation engine.
PROCEDURAL_NAMES = frozenset(
    {
        "integer-literal",
        "variable-definition",
        "variable-reference",
        "letrec-bindings",
        "solution-corpus",
        "solution-call",
    }
)


class GrammarError(Exception):
    """Malformed grammar text or a grammar that fails validation."""


class NonTerminal:
    __slots__ = ("name",)
    _cache: dict[str, "NonTerminal"] = {}

    def __new__(cls, name: str):
        nt = cls._cache.get(name)
        if nt is None:
            nt = object.__new__(cls)
            nt.name = name
            cls._cache[name] = nt
        return nt

    def __repr__(self):
        return f"<{self.name}>"

    def __reduce__(self):
        return (NonTerminal, (self.name,))


class Procedural:
    __slots__ = ("name", "arg")
    _cache: dict[tuple, "Procedural"] = {}

    def __new__(cls, name: str, arg: str | None = None):
        key = (name, arg)
        p = cls._cache.get(key)
        if p is None:
            p = object.__new__(cls)
            p.name = name
            p.arg = arg
            cls._cache[key] = p
        return p

    def __repr__(self):
        return f"<!{self.name}{':' + self.arg if self.arg else ''}>"

    def __reduce__(self):
        return (Procedural, (self.name, self.arg))


class Marker:
    __slots__ = ("kind",)
    _cache: dict[str, "Marker"] = {}

    def __new__(cls, kind: str):
        m = cls._cache.get(kind)
        if m is None:
            if kind not in ("begin", "end", "bind"):
                raise GrammarError(f"unknown scope marker {kind!r}")
            m = object.__new__(cls)
            m.kind = kind
            cls._cache[kind] = m
        return m

    def __repr__(self):
        return f"<@{self.kind}>"

    def __reduce__(self):
        return (Marker, (self.kind,))


BEGIN = Marker("begin")
END = Marker("end")
BIND = Marker("bind")

_NT_RE = re.compile(r"<([^<>!@\s][^<>\s]*)>\Z")
_PROC_RE = re.compile(r"<!([^<>\s:]+)(?::([^<>\s]+))?>\Z")
_MARK_RE = re.compile(r"<@([a-z]+)>\Z")
_BARE_OK = re.compile(r'[^\s"<%][^\s"]*\Z')


def symbol_text(s) -> str:
    """File representation of one grammar symbol."""
    if type(s) is str:
        if _BARE_OK.match(s) and s not in ("::=", ":"):
            return s
        return json.dumps(s)
    return repr(s)


def parse_symbol(tok: str):
    if tok.startswith('"'):
        return json.loads(tok)
    m = _PROC_RE.match(tok)
    if m:
        return Procedural(m.group(1), m.group(2))
    m = _MARK_RE.match(tok)
    if m:
        return Marker(m.group(1))
    m = _NT_RE.match(tok)
    if m:
        return NonTerminal(m.group(1))
    return tok


_SYM_TOKEN = re.compile(r'"(?:[^"\\]|\\.)*"|\S+')


def parse_symbols(text: str) -> tuple:
    return tuple(parse_symbol(t) for t in _SYM_TOKEN.findall(text))


def body_text(body) -> str:
    return " ".join(symbol_text(s) for s in body)


@dataclass(frozen=True)
class Production:
    head: str
    body: tuple
    prob: float

    def __str__(self):
        return f"<{self.head}> ::= {self.prob!r} : {body_text(self.body)}".rstrip()


@dataclass(frozen=True)
class ZetaTable:
    """Truncated Zeta distribution P(k) = k^-s / sum_{j<=n} j^-s over k = 1..n."""

    s: float = 2.0
    n: int = 1024
    probs: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise GrammarError("zeta upper bound must be at least 1")
        weights = [k ** -self.s for k in range(1, self.n + 1)]
        norm = math.fsum(weights)
        object.__setattr__(self, "probs", tuple(w / norm for w in weights))

    def p(self, k: int) -> float:
        return self.probs[k - 1]


def zeta_alternatives(table: ZetaTable) -> list[tuple[int, float]]:
    """All (value, probability) pairs in decreasing probability."""
    return [(k, table.probs[k - 1]) for k in range(1, table.n + 1)]


@dataclass(frozen=True)
class Solution:
    """A solved problem available for re-use: its call template and its definition text."""

    name: str
    call: tuple
    definition: str


def _canonical(prods) -> tuple:
    return tuple(sorted(prods, key=lambda p: (-p.prob, body_text(p.body))))


@dataclass(frozen=True)
class Grammar:
    """Immutable stochastic CFG.

    ``productions`` maps each head name to its productions, kept in
    canonical order (descending probability, then body text).  The
    position of a production in that order is its tie-breaking index.
    """

    productions: dict
    start: str = "program"
    hooks: frozenset = frozenset()
    zeta: ZetaTable = ZetaTable()
    solutions: tuple = ()

    def __post_init__(self):
        object.__setattr__(
            self,
            "productions",
            {h: _canonical(ps) for h, ps in sorted(self.productions.items()) if ps or h in self.hooks},
        )
        object.__setattr__(self, "hooks", frozenset(self.hooks))

    def __hash__(self):
        return hash((self.start, tuple(self.productions.items())))

    @classmethod
    def from_productions(cls, prods, **kw) -> "Grammar":
        by_head: dict[str, list] = {}
        for p in prods:
            by_head.setdefault(p.head, []).append(p)
        for h in kw.get("hooks", ()):
            by_head.setdefault(h, [])
        return cls(by_head, **kw)

    def alternatives(self, head: str) -> tuple:
        return self.productions.get(head, ())

    def all_productions(self):
        for ps in self.productions.values():
            yield from ps

    def replace(self, **changes) -> "Grammar":
        kw = dict(
            productions=self.productions,
            start=self.start,
            hooks=self.hooks,
            zeta=self.zeta,
            solutions=self.solutions,
        )
        kw.update(changes)
        return Grammar(**kw)

    def with_head(self, head: str, prods) -> "Grammar":
        new = dict(self.productions)
        new[head] = tuple(prods)
        return self.replace(productions=new)

    def solution(self, name: str):
        for s in self.solutions:
            if s.name == name:
                return s
        return None


def validate(g: Grammar) -> list[str]:
    """Return a list of human-readable violations; empty when the grammar is valid."""
    problems = []
    for head, prods in g.productions.items():
        if not prods:
            if head not in g.hooks:
                problems.append(f"<{head}> has no productions")
            continue
        for p in prods:
            if not (0.0 < p.prob <= 1.0):
                problems.append(f"{p}: probability outside (0, 1]")
        total = math.fsum(p.prob for p in prods)
        # the small slack keeps a sum of exactly 1 - 1e-9 (as written) inside the tolerance
        if abs(total - 1.0) > SUM_TOLERANCE + 1e-15:
            problems.append(f"<{head}> probabilities sum to {total!r}, not 1")
    defined = set(g.productions)
    if g.start not in defined:
        problems.append(f"start symbol <{g.start}> is not defined")
    # reachability walk from the start symbol (solution call templates are reachable through hooks)
    seen = set()
    todo = [g.start]
    bodies_of = {h: [p.body for p in ps] for h, ps in g.productions.items()}
    extra = [s.call for s in g.solutions]
    while todo:
        head = todo.pop()
        if head in seen:
            continue
        seen.add(head)
        for body in bodies_of.get(head, []) + (extra if head == g.start else []):
            for s in body:
                if type(s) is NonTerminal:
                    if s.name not in defined:
                        problems.append(f"<{s.name}> is referenced from <{head}> but not defined")
                        defined.add(s.name)
                    todo.append(s.name)
                elif type(s) is Procedural and s.name not in PROCEDURAL_NAMES:
                    problems.append(f"unknown procedural non-terminal {s!r} in <{head}>")
    return problems


def loads(text: str, source: str = "<grammar>") -> Grammar:
    """Parse grammar text and validate it."""
    prods = []
    start = "program"
    hooks = set()
    zeta = ZetaTable()
    solutions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if line.startswith("%"):
            directive, _, rest = line.partition(" ")
            rest = rest.strip()
            if directive == "%start":
                start = rest.strip("<>")
            elif directive == "%hook":
                hooks.add(rest.strip("<>"))
            elif directive == "%zeta":
                try:
                    s, n = rest.split()
                    zeta = ZetaTable(float(s), int(n))
                except ValueError:
                    raise GrammarError(f"{where}: %zeta expects an exponent and an upper bound")
            elif directive == "%solution":
                m = re.match(r"(\S+)\s+::=\s+(.*?)\s+:\s+(.*)\Z", rest)
                if not m:
                    raise GrammarError(f"{where}: malformed %solution line")
                solutions.append(Solution(m.group(1), parse_symbols(m.group(2)), m.group(3)))
            else:
                raise GrammarError(f"{where}: unknown directive {directive}")
            continue
        m = re.match(r"<([^<>\s]+)>\s*::=\s*(\S+)\s*:(.*)\Z", line)
        if not m:
            raise GrammarError(f"{where}: expected '<head> ::= <p> : symbols'")
        try:
            prob = float(m.group(2))
        except ValueError:
            raise GrammarError(f"{where}: bad probability {m.group(2)!r}")
        try:
            body = parse_symbols(m.group(3))
        except ValueError as e:
            raise GrammarError(f"{where}: {e}")
        prods.append(Production(m.group(1), body, prob))
    g = Grammar.from_productions(prods, start=start, hooks=frozenset(hooks), zeta=zeta, solutions=tuple(solutions))
    problems = validate(g)
    if problems:
        raise GrammarError(f"{source}: invalid grammar:\n  " + "\n  ".join(problems))
    return g


def load_grammar(path) -> Grammar:
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), str(path))


def dumps(g: Grammar) -> str:
    lines = [f"%start {g.start}", f"%zeta {g.zeta.s!r} {g.zeta.n}"]
    for h in sorted(g.hooks):
        lines.append(f"%hook {h}")
    for s in g.solutions:
        lines.append(f"%solution {s.name} ::= {body_text(s.call)} : {s.definition}")
    for head in sorted(g.productions):
        for p in g.productions[head]:
            lines.append(str(p))
    return "\n".join(lines) + "\n"


def save_grammar(g: Grammar, path) -> None:
    Path(path).write_text(dumps(g), encoding="utf-8")
