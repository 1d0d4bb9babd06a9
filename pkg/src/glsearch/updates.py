"""Grammar updates driven by the solution corpus.

* :func:`update_probabilities` blends corpus production frequencies into
  the grammar by exponential smoothing.
* :func:`add_solution` makes a solved problem callable from later
  searches (gamma insertion into the ``<previous-solution>`` hook).
* :func:`extract_idioms` / :func:`add_idiom` turn pruned derivation trees
  into new productions.
* :func:`mine_subprograms` finds sub-expressions shared by several
  solutions.

Every function returns a new :class:`Grammar`; none mutates its input.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .derivation import Node, ProcChoice, build_derivation_tree
from .grammar import (
    PROCEDURAL_NAMES,
    Grammar,
    GrammarError,
    Marker,
    NonTerminal,
    Procedural,
    Production,
    Solution,
    body_text,
    parse_symbols,
)
from .scheme.machine import DuplicateSolution, Machine
from .scheme.printer import to_string
from .scheme.reader import read
from .scheme.types import NIL, Pair, Symbol, Vector

__all__ = [
    "SolutionRecord",
    "SolutionCorpus",
    "UpdateConfig",
    "update_probabilities",
    "add_solution",
    "retire_solution",
    "extract_idioms",
    "add_idiom",
    "mine_subprograms",
    "expression_subtrees",
    "free_variables",
    "gamma_insert",
    "PREVIOUS_SOLUTION",
]

PREVIOUS_SOLUTION = "previous-solution"


# --- records and corpus ---------------------------------------------------------------


def trace_to_json(trace) -> list:
    out = []
    for pos, choice in trace:
        if type(choice) is Production:
            out.append([pos, "p", choice.head, body_text(choice.body), choice.prob])
        else:
            out.append([pos, "!", repr(choice.symbol), body_text(choice.body), choice.prob])
    return out


def trace_from_json(data) -> list:
    out = []
    for pos, kind, head, body, prob in data:
        if kind == "p":
            out.append((pos, Production(head, parse_symbols(body), prob)))
        elif kind == "!":
            (sym,) = parse_symbols(head)
            out.append((pos, ProcChoice(sym, parse_symbols(body), prob)))
        else:
            raise ValueError(f"unknown trace entry kind {kind!r}")
    return out


@dataclass
class SolutionRecord:
    """One accepted (partial or complete) solution."""

    problem: str
    name: str  # name it is callable under once added to the library
    params: tuple
    call: tuple  # call template, e.g. ("(", "sqr", <expression>, ")")
    definition: str  # printed define form
    body: str  # the candidate sentence text
    trace: list
    start: str = "body"
    pairs: int = 1
    complete: bool = True
    trials: int = 0
    fuel: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "problem": self.problem,
                "name": self.name,
                "params": list(self.params),
                "call": body_text(self.call),
                "definition": self.definition,
                "body": self.body,
                "start": self.start,
                "pairs": self.pairs,
                "complete": self.complete,
                "trials": self.trials,
                "fuel": self.fuel,
                "trace": trace_to_json(self.trace),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "SolutionRecord":
        d = json.loads(line)
        return cls(
            problem=d["problem"],
            name=d["name"],
            params=tuple(d["params"]),
            call=parse_symbols(d["call"]),
            definition=d["definition"],
            body=d["body"],
            trace=trace_from_json(d["trace"]),
            start=d["start"],
            pairs=d["pairs"],
            complete=d["complete"],
            trials=d["trials"],
            fuel=d["fuel"],
        )

    def tree(self) -> Node:
        return build_derivation_tree(self.trace, NonTerminal(self.start))

    def definition_sexpr(self):
        (d,) = read(self.definition)
        return d


def _production_key(p: Production) -> tuple:
    return (p.head, body_text(p.body))


@dataclass
class SolutionCorpus:
    records: list = field(default_factory=list)

    def add(self, rec: SolutionRecord) -> None:
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def selected(self, include_partial: bool = True) -> list:
        return [r for r in self.records if include_partial or r.complete]

    def tally(self, include_partial: bool = True) -> Counter:
        """Frequency of every ordinary production over the stored traces."""
        counts = Counter()
        for rec in self.selected(include_partial):
            for _, choice in rec.trace:
                if type(choice) is Production:
                    counts[_production_key(choice)] += 1
        return counts

    def dumps(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    @classmethod
    def loads(cls, text: str) -> "SolutionCorpus":
        return cls([SolutionRecord.from_json(line) for line in text.splitlines() if line.strip()])

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SolutionCorpus":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class UpdateConfig:
    alpha: float = 0.2
    gamma: float = 0.5
    support: int = 2
    prune_levels: tuple = (1,)
    smoothing: bool = True
    reuse: bool = True
    reuse_mode: str = "library"  # or "define-block"
    # off by default: idioms and mined subprograms inserted at gamma pull
    # probability away from solution re-use (see the README's notes on defaults)
    idioms: bool = False
    mining: bool = False
    include_partial: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if self.support < 2:
            raise ValueError("support threshold must be at least 2")
        if any(k < 0 for k in self.prune_levels):
            raise ValueError("prune levels must be non-negative")
        if self.reuse_mode not in ("library", "define-block"):
            raise ValueError("reuse mode must be 'library' or 'define-block'")
        object.__setattr__(self, "prune_levels", tuple(self.prune_levels))


# --- probability smoothing -------------------------------------------------------------


def update_probabilities(g: Grammar, corpus: SolutionCorpus, alpha: float = 0.2, include_partial: bool = True) -> Grammar:
    """Exponential smoothing ``s = alpha * p_corpus + (1 - alpha) * s_prev`` per used head.

    Heads that never occur in the corpus are left alone.  Touched heads
    are rescaled to sum to one (needed only when the corpus mentions
    productions the grammar no longer has).
    """
    tally = corpus.tally(include_partial)
    if not tally:
        return g
    head_totals = Counter()
    for (head, _), n in tally.items():
        head_totals[head] += n
    new = dict(g.productions)
    for head, prods in g.productions.items():
        total = head_totals.get(head, 0)
        if not total or not prods:
            continue
        vals = [alpha * (tally.get(_production_key(p), 0) / total) + (1 - alpha) * p.prob for p in prods]
        s = math.fsum(vals)
        new[head] = tuple(Production(head, p.body, v / s) for p, v in zip(prods, vals))
    return g.replace(productions=new)


# --- gamma insertion ----------------------------------------------------------------------


def gamma_insert(g: Grammar, head: str, body: tuple, gamma: float) -> Grammar:
    """Give ``head -> body`` probability gamma and scale the others to 1 - gamma."""
    old = g.alternatives(head)
    if not old:
        prods = [Production(head, body, 1.0)]
    else:
        prods = [Production(head, p.body, p.prob * (1 - gamma)) for p in old]
        prods.append(Production(head, body, gamma))
    return g.with_head(head, prods)


def _has_body(g: Grammar, head: str, body: tuple) -> bool:
    key = body_text(body)
    return any(body_text(p.body) == key for p in g.alternatives(head))


def add_solution(
    g: Grammar,
    sol: SolutionRecord,
    gamma: float = 0.5,
    machine: Machine | None = None,
    mode: str = "library",
) -> Grammar:
    """Make ``sol`` available to later searches.

    Library mode installs the definition into ``machine`` and adds
    ``<previous-solution> -> call`` by gamma insertion.  Define-block mode
    instead lets ``<!solution-corpus>`` emit the definition inside the
    candidate, and ``<!solution-call>`` call it.
    """
    if g.solution(sol.name) is not None or _has_body(g, PREVIOUS_SOLUTION, sol.call):
        raise DuplicateSolution(f"{sol.name} is already a previous solution")
    entry = Solution(sol.name, sol.call, sol.definition)
    if mode == "library":
        if machine is not None:
            machine.install_solution(sol.name, sol.definition)
        g = gamma_insert(g, PREVIOUS_SOLUTION, sol.call, gamma)
        return g.replace(solutions=g.solutions + (entry,))
    if mode == "define-block":
        g = g.replace(solutions=g.solutions + (entry,))
        corpus_body = (Procedural("solution-corpus"),)
        if not _has_body(g, "definition", corpus_body):
            g = gamma_insert(g, "definition", corpus_body, gamma)
        call_body = (Procedural("solution-call"),)
        if not _has_body(g, PREVIOUS_SOLUTION, call_body):
            g = gamma_insert(g, PREVIOUS_SOLUTION, call_body, gamma)
        return g
    raise ValueError(f"unknown reuse mode {mode!r}")


def retire_solution(g: Grammar, name: str) -> Grammar:
    """Drop the ``<previous-solution>`` alternative calling ``name``, renormalizing the rest.

    The definition stays in the library (other solutions may call it).
    """
    sol = g.solution(name)
    if sol is None:
        return g
    key = body_text(sol.call)
    keep = [p for p in g.alternatives(PREVIOUS_SOLUTION) if body_text(p.body) != key]
    s = math.fsum(p.prob for p in keep)
    return g.with_head(PREVIOUS_SOLUTION, [Production(PREVIOUS_SOLUTION, p.body, p.prob / s) for p in keep])


# --- idioms -----------------------------------------------------------------------------------


def _effective_kids(node: Node):
    kids = node.children
    # A production whose whole body is one procedural symbol (e.g.
    # <variable> ::= <!variable-reference>) is read as deriving its
    # terminals directly, so the procedural level does not add height.
    if len(kids) == 1 and type(kids[0].label) is Procedural and kids[0].children is not None:
        return kids[0].children
    return kids


def _heights(node: Node, memo: dict) -> int:
    """Height ignoring scope markers; -1 for subtrees that yield nothing."""
    if node.children is None:
        h = -1 if type(node.label) is Marker else 0
    else:
        sub = [_heights(c, memo) for c in _effective_kids(node)]
        best = max(sub, default=-1)
        h = -1 if best < 0 else best + 1
    memo[id(node)] = h
    return h


def _frontier(node: Node, k: int, memo: dict, out: list) -> None:
    h = memo[id(node)]
    if node.children is None:
        out.append(node.label)
        return
    if h < 0:
        # derives the empty string: keep only its scope markers
        out.extend(n.label for n in node.walk() if type(n.label) is Marker)
        return
    if h <= k:
        out.append(node.label)
        return
    for c in _effective_kids(node):
        _frontier(c, k, memo, out)


def extract_idioms(tree: Node, levels=(1,)) -> list:
    """Sentential forms obtained by pruning ``k`` levels above the leaves.

    Returns ``(start head, symbols)`` pairs for the tree root and, when the
    root is ``<body>``, for its final ``<expression>``.  Frontiers made only
    of terminals or only of non-terminals are dropped.
    """
    roots = [tree]
    if type(tree.label) is NonTerminal and tree.label.name == "body":
        node = tree
        while node.children is not None and node.children:
            exprs = [c for c in node.children if type(c.label) is NonTerminal and c.label.name in ("expression", "body")]
            if not exprs:
                break
            node = exprs[-1]
            if node.label.name == "expression":
                roots.append(node)
                break
    out = []
    for root in roots:
        memo: dict = {}
        _heights(root, memo)
        for k in levels:
            symbols: list = []
            _frontier(root, k, memo, symbols)
            form = tuple(symbols)
            kinds = {type(s) for s in form if type(s) is not Marker}
            if not kinds or kinds == {str} or str not in kinds:
                continue
            item = (root.label.name, form)
            if item not in out:
                out.append(item)
    return out


def add_idiom(g: Grammar, start: str, form: tuple, gamma: float = 0.5) -> Grammar:
    """Insert ``start -> form`` with probability gamma; no-op if already present."""
    if start not in g.productions:
        raise GrammarError(f"idiom head <{start}> is not defined")
    for s in form:
        if type(s) is NonTerminal and s.name not in g.productions:
            raise GrammarError(f"idiom uses undefined non-terminal <{s.name}>")
        if type(s) is Procedural and s.name not in PROCEDURAL_NAMES:
            raise GrammarError(f"idiom uses unknown procedural non-terminal {s!r}")
    if _has_body(g, start, form):
        return g
    return gamma_insert(g, start, tuple(form), gamma)


# --- sub-program mining ----------------------------------------------------------------------

_S = Symbol
_BINDING_FORMS = {"let", "let*", "letrec"}


def _items(x) -> list | None:
    out = []
    while type(x) is Pair:
        out.append(x.car)
        x = x.cdr
    return out if x is NIL else None


def expression_subtrees(x, top: bool = True):
    """Yield every sub-expression of ``x`` that sits in expression position.

    ``x`` itself is included unless it is a definition.  Data inside
    ``quote`` and binding lists are not expressions.
    """
    stack = [x]
    while stack:
        e = stack.pop()
        items = _items(e) if type(e) is Pair else None
        if items is None or not items:
            if type(e) is not Pair:
                yield e
            continue
        head = items[0]
        name = str(head) if type(head) is Symbol else None
        if name != "define":
            yield e
        if name == "quote":
            continue
        if name == "define":
            if len(items) >= 3:
                stack.extend(reversed(items[2:]))
        elif name == "lambda":
            stack.extend(reversed(items[2:]))
        elif name in _BINDING_FORMS and len(items) >= 3:
            for b in _items(items[1]) or []:
                bi = _items(b)
                if bi and len(bi) == 2:
                    stack.append(bi[1])
            stack.extend(reversed(items[2:]))
        elif name == "do" and len(items) >= 3:
            for b in _items(items[1]) or []:
                stack.extend((_items(b) or [])[1:])
            stack.extend(_items(items[2]) or [])
            stack.extend(items[3:])
        elif name == "cond":
            for clause in items[1:]:
                ci = _items(clause) or []
                stack.extend(c for c in ci if not (type(c) is Symbol and c in ("else", "=>")))
        elif name == "case" and len(items) >= 2:
            stack.append(items[1])
            for clause in items[2:]:
                stack.extend((_items(clause) or [])[1:])
        elif name == "set!" and len(items) == 3:
            stack.append(items[2])
        else:
            stack.extend(reversed(items[1:] if name in ("if", "and", "or", "begin", "delay") else items))


def _atoms(x) -> int:
    n = 0
    stack = [x]
    while stack:
        e = stack.pop()
        if type(e) is Pair:
            stack.append(e.car)
            stack.append(e.cdr)
        elif type(e) is Vector:
            stack.extend(e)
        elif e is not NIL:
            n += 1
    return n


def free_variables(x) -> set:
    """Names referenced by ``x`` but not bound inside it (a conservative syntactic scan)."""
    free = set()

    def walk(e, bound):
        if type(e) is Symbol:
            if e not in bound:
                free.add(str(e))
            return
        items = _items(e) if type(e) is Pair else None
        if not items:
            return
        head = items[0]
        name = str(head) if type(head) is Symbol else None
        if name == "quote":
            return
        if name == "lambda" and len(items) >= 3:
            params = items[1]
            new = set(bound)
            while type(params) is Pair:
                new.add(params.car)
                params = params.cdr
            if type(params) is Symbol:
                new.add(params)
            for b in items[2:]:
                walk(b, new)
            return
        if name == "define" and len(items) >= 3:
            target = items[1]
            new = set(bound)
            if type(target) is Pair:
                for p in _items(target) or []:
                    new.add(p)
            else:
                new.add(target)
            for b in items[2:]:
                walk(b, new)
            return
        if name in _BINDING_FORMS and len(items) >= 3:
            binds = [_items(b) or [] for b in _items(items[1]) or []]
            names = {b[0] for b in binds if b}
            inner = set(bound) | names
            for b in binds:
                if len(b) == 2:
                    walk(b[1], inner if name != "let" else bound)
            for b in items[2:]:
                walk(b, inner)
            return
        if name == "do" and len(items) >= 3:
            binds = [_items(b) or [] for b in _items(items[1]) or []]
            inner = set(bound) | {b[0] for b in binds if b}
            for b in binds:
                if len(b) >= 2:
                    walk(b[1], bound)
                for s in b[2:]:
                    walk(s, inner)
            for b in items[2:]:
                walk(b, inner)
            return
        special = name in ("if", "and", "or", "begin", "delay", "set!", "cond", "case")
        for sub in items[1:] if special else items:
            if type(sub) is Symbol and sub in ("else", "=>") and special:
                continue
            walk(sub, bound)

    walk(x, frozenset())
    return free


def mine_subprograms(corpus: SolutionCorpus, support: int = 2, min_atoms: int = 3, include_partial: bool = False) -> list:
    """Sub-expressions shared by at least ``support`` solutions.

    Each solution counts a sub-expression once.  A sub-expression is
    reported only if no larger reported one contains it with the same
    count.  Results are ``(sexpr, count)`` sorted by count, then size,
    then text.
    """
    if support < 2:
        raise ValueError("support threshold must be at least 2")
    counts = Counter()
    exemplar = {}
    for rec in corpus.selected(include_partial):
        seen = set()
        for e in expression_subtrees(rec.definition_sexpr()):
            if type(e) is not Pair or _atoms(e) < min_atoms:
                continue
            key = to_string(e)
            if key in seen:
                continue
            seen.add(key)
            counts[key] += 1
            exemplar.setdefault(key, e)
    frequent = [k for k, n in counts.items() if n >= support]
    reported: list = []
    for k in sorted(frequent, key=lambda k: (-_atoms(exemplar[k]), k)):
        if any(counts[r] == counts[k] and k in _sub_keys(exemplar[r]) for r in reported):
            continue
        reported.append(k)
    reported.sort(key=lambda k: (-counts[k], -_atoms(exemplar[k]), k))
    return [(exemplar[k], counts[k]) for k in reported]


def _sub_keys(e) -> set:
    return {to_string(s) for s in expression_subtrees(e) if s is not e}


def mined_productions(mined, library_names) -> list:
    """Closed mined sub-expressions as ``<expression>`` bodies (terminal tuples)."""
    from .derivation import program_tokens
    from .scheme.stdlib import builtins

    known = {str(k) for k in builtins()} | set(library_names)
    out = []
    for e, _ in mined:
        if free_variables(e) <= known:
            out.append(program_tokens(to_string(e)))
    return out
