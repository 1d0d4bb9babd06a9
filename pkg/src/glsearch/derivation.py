"""Leftmost derivation over sentential forms.

A sentential form keeps the terminals already derived (its fixed prefix),
the symbols still to derive, the running probability, the static scope
stack and the derivation trace.  Scope markers and terminals at the left
edge are consumed eagerly, so the first pending symbol of a form is
always a non-terminal (ordinary or procedural) unless the form is a
finished sentence.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .grammar import BEGIN, END, Grammar, Marker, NonTerminal, Procedural, Production, ZetaTable
from .scheme.reader import read_tokens, tokenize

__all__ = [
    "StaticEnvironment",
    "SententialForm",
    "ProcChoice",
    "DerivationError",
    "Node",
    "initial_form",
    "expand_leftmost",
    "expand",
    "gen_variable_definition",
    "gen_variable_reference",
    "gen_previous_solution_call",
    "is_sentence",
    "to_program",
    "sentence_text",
    "build_derivation_tree",
    "random_derivation",
    "find_derivation",
    "program_tokens",
]


class DerivationError(Exception):
    """A grammar bug surfaced during derivation (undefined symbol, unreadable sentence, bad trace)."""


_EMPTY_FRAME = ((), (), ())


class StaticEnvironment:
    """Stack of static frames.

    Each frame holds the names bound in it, the names defined but not yet
    bound (a definition's own expression must not see the name), and the
    previous-solution names whose definitions were emitted in it.
    """

    __slots__ = ("frames", "_visible", "_solutions")

    def __init__(self, frames=(_EMPTY_FRAME,)):
        self.frames = frames
        self._visible = None
        self._solutions = None

    @classmethod
    def with_params(cls, params: Iterable[str] = ()) -> "StaticEnvironment":
        return cls(((tuple(params), (), ()),))

    def push(self) -> "StaticEnvironment":
        return StaticEnvironment(self.frames + (_EMPTY_FRAME,))

    def pop(self) -> "StaticEnvironment":
        if len(self.frames) == 1:
            raise DerivationError("scope end without matching scope begin")
        return StaticEnvironment(self.frames[:-1])

    def current_names(self) -> tuple:
        bound, pending, _ = self.frames[-1]
        return bound + pending

    def define(self, *names: str) -> "StaticEnvironment":
        bound, pending, sols = self.frames[-1]
        return StaticEnvironment(self.frames[:-1] + ((bound, pending + names, sols),))

    def bind(self) -> "StaticEnvironment":
        bound, pending, sols = self.frames[-1]
        if not pending:
            return self
        return StaticEnvironment(self.frames[:-1] + ((bound + pending, (), sols),))

    def add_solution(self, name: str) -> "StaticEnvironment":
        bound, pending, sols = self.frames[-1]
        return StaticEnvironment(self.frames[:-1] + ((bound, pending, sols + (name,)),))

    def visible(self) -> tuple:
        """Every referenceable name, sorted."""
        if self._visible is None:
            names = set()
            for bound, _, _ in self.frames:
                names.update(bound)
            self._visible = tuple(sorted(names))
        return self._visible

    def solutions(self) -> tuple:
        if self._solutions is None:
            names = set()
            for _, _, sols in self.frames:
                names.update(sols)
            self._solutions = tuple(sorted(names))
        return self._solutions

    def __eq__(self, other):
        return isinstance(other, StaticEnvironment) and self.frames == other.frames

    def __hash__(self):
        return hash(self.frames)

    def __repr__(self):
        return f"StaticEnvironment({self.frames!r})"


class ProcChoice(NamedTuple):
    """One alternative picked by a procedural non-terminal."""

    symbol: Procedural
    body: tuple
    prob: float


def _head_of(choice):
    return NonTerminal(choice.head) if type(choice) is Production else choice.symbol


class SententialForm:
    """Immutable partially derived program.

    ``done`` and ``trace`` are reversed linked lists ``(item, previous)``;
    ``rest`` is a linked list ``(symbol, next)`` of the symbols still to
    derive.  Use :attr:`symbols` or :meth:`tokens` for flat views.
    """

    __slots__ = ("done", "ndone", "rest", "prob", "env", "trace", "ntrace")

    def __init__(self, done, ndone, rest, prob, env, trace, ntrace):
        self.done = done
        self.ndone = ndone
        self.rest = rest
        self.prob = prob
        self.env = env
        self.trace = trace
        self.ntrace = ntrace

    def tokens(self) -> list:
        out = []
        d = self.done
        while d is not None:
            out.append(d[0])
            d = d[1]
        out.reverse()
        return out

    @property
    def pending(self) -> tuple:
        out = []
        r = self.rest
        while r is not None:
            out.append(r[0])
            r = r[1]
        return tuple(out)

    @property
    def symbols(self) -> tuple:
        return tuple(self.tokens()) + self.pending

    def trace_list(self) -> list:
        out = []
        t = self.trace
        while t is not None:
            out.append(t[0])
            t = t[1]
        out.reverse()
        return out

    @property
    def leftmost(self):
        return None if self.rest is None else self.rest[0]

    def __repr__(self):
        from .grammar import body_text

        return f"SententialForm({body_text(self.symbols)!r}, p={self.prob!r})"


def _advance(done, ndone, rest, env):
    """Consume terminals and scope markers at the left edge."""
    while rest is not None:
        s = rest[0]
        t = type(s)
        if t is str:
            done = (s, done)
            ndone += 1
        elif t is Marker:
            if s is BEGIN:
                env = env.push()
            elif s is END:
                env = env.pop()
            else:
                env = env.bind()
        else:
            break
        rest = rest[1]
    return done, ndone, rest, env


def initial_form(symbols, env: StaticEnvironment | None = None, prob: float = 1.0) -> SententialForm:
    """A starting form, e.g. ``initial_form([NonTerminal("body")], StaticEnvironment.with_params(["x"]))``."""
    if isinstance(symbols, (str, NonTerminal, Procedural, Marker)):
        symbols = (symbols,)
    rest = None
    for s in reversed(tuple(symbols)):
        rest = (s, rest)
    env = env if env is not None else StaticEnvironment()
    done, ndone, rest, env = _advance(None, 0, rest, env)
    return SententialForm(done, ndone, rest, prob, env, None, 0)


def is_sentence(form: SententialForm) -> bool:
    return form.rest is None


# --- compiled grammar tables -------------------------------------------------


def _compiled(g: Grammar) -> dict:
    table = g.__dict__.get("_compiled")
    if table is None:
        table = {head: tuple((p.prob, p.body, p) for p in prods) for head, prods in g.productions.items()}
        object.__setattr__(g, "_compiled", table)
    return table


def _zeta_list(z: ZetaTable) -> tuple:
    lst = z.__dict__.get("_int_alts")
    if lst is None:
        lst = tuple(((str(k),), p) for k, p in zip(range(1, z.n + 1), z.probs))
        object.__setattr__(z, "_int_alts", lst)
    return lst


# --- procedural non-terminals ------------------------------------------------


def gen_variable_definition(env: StaticEnvironment, zeta: ZetaTable = ZetaTable(), min_prob: float = 0.0):
    """Alternatives ``(name, probability)`` for a fresh robotic variable.

    Choosing a name adds it (still unbound) to the current frame.  Names
    already in the current frame are skipped without renormalizing.
    """
    taken = env.current_names()
    out = []
    for k, p in enumerate(zeta.probs, 1):
        if p < min_prob:
            break
        name = f"var{k}"
        if name in taken:
            continue
        out.append((name, p))
    return out


def gen_variable_reference(env: StaticEnvironment, min_prob: float = 0.0):
    """Uniform alternatives ``(name, probability)`` over every visible name."""
    vis = env.visible()
    if not vis:
        return []
    p = 1.0 / len(vis)
    if p < min_prob:
        return []
    return [(name, p) for name in vis]


def gen_previous_solution_call(env: StaticEnvironment, g: Grammar, min_prob: float = 0.0):
    """Uniform alternatives ``(call template, probability)`` over the solutions visible in ``env``."""
    names = [n for n in env.solutions() if g.solution(n) is not None]
    if not names:
        return []
    p = 1.0 / len(names)
    if p < min_prob:
        return []
    return [(g.solution(n).call, p) for n in names]


def program_tokens(text: str) -> tuple:
    """Split program text into grammar terminals."""
    out = []
    for kind, tok, _ in tokenize(text):
        if kind == "quote":
            raise DerivationError("quote abbreviation is not a grammar terminal; use (quote ...)")
        out.append(tok)
    return tuple(out)


def _solution_definition_alts(env, g, min_prob):
    sols = g.solutions
    if not sols:
        return []
    p = 1.0 / len(sols)
    if p < min_prob:
        return []
    present = set(env.solutions())
    # already present solutions get the nil production of probability 0, i.e. nothing
    return [(program_tokens(s.definition), p, ("solution", s.name)) for s in sols if s.name not in present]


def _letrec_alts(env, zeta, n, min_prob):
    taken = set(env.current_names())
    probs = zeta.probs
    if n == 1:
        combos = [((k,), probs[k - 1]) for k in range(1, zeta.n + 1) if probs[k - 1] >= min_prob]
    elif n == 2:
        combos = []
        for j in range(1, zeta.n + 1):
            if probs[j - 1] * probs[0] < min_prob:
                break
            for k in range(1, zeta.n + 1):
                p = probs[j - 1] * probs[k - 1]
                if p < min_prob:
                    break
                if j != k:
                    combos.append(((j, k), p))
        combos.sort(key=lambda c: -c[1])
    else:
        raise DerivationError(f"letrec-bindings supports 1 or 2 bindings, not {n}")
    out = []
    for ks, p in combos:
        names = tuple(f"var{k}" for k in ks)
        if taken.intersection(names):
            continue
        out.append((_letrec_body(names), p, ("letrec", names)))
    return out


def _letrec_body(names) -> tuple:
    body = ["("]
    for name in names:
        body += ["(", name, NonTerminal("expression"), ")"]
    body.append(")")
    return tuple(body)


def _sample_procedural(sym, env, g, rng):
    """Draw one alternative of a procedural non-terminal without listing them all."""
    z = g.zeta
    ks = range(1, z.n + 1)
    cum = z.__dict__.get("_cum")
    if cum is None:
        cum = list(itertools.accumulate(z.probs))
        object.__setattr__(z, "_cum", cum)
    if sym.name in ("variable-definition", "integer-literal", "letrec-bindings"):
        n = int(sym.arg or 1) if sym.name == "letrec-bindings" else 1
        taken = set(env.current_names()) if sym.name != "integer-literal" else set()
        for _ in range(100):
            picks = rng.choices(ks, cum_weights=cum, k=n)
            names = tuple(f"var{k}" for k in picks)
            if len(set(picks)) < n or taken.intersection(names):
                continue
            p = 1.0
            for k in picks:
                p *= z.probs[k - 1]
            if sym.name == "integer-literal":
                return (str(picks[0]),), p, None
            if sym.name == "variable-definition":
                return names, p, ("define", names[0])
            return _letrec_body(names), p, ("letrec", names)
        return None
    alts = _procedural_alts(sym, env, g, 0.0)
    if not alts:
        return None
    return rng.choices(alts, weights=[a[1] for a in alts])[0]


def _procedural_alts(sym: Procedural, env: StaticEnvironment, g: Grammar, min_prob: float):
    """Alternatives ``(body, probability, effect)`` in decreasing probability.

    ``effect`` is None or a ``(kind, arg)`` pair describing the change to
    the static environment; it is applied only to alternatives actually used.
    """
    name = sym.name
    if name == "variable-reference":
        return [((n,), p, None) for n, p in gen_variable_reference(env, min_prob)]
    if name == "variable-definition":
        return [((n,), p, ("define", n)) for n, p in gen_variable_definition(env, g.zeta, min_prob)]
    if name == "integer-literal":
        out = []
        for body, p in _zeta_list(g.zeta):
            if p < min_prob:
                break
            out.append((body, p, None))
        return out
    if name == "letrec-bindings":
        return _letrec_alts(env, g.zeta, int(sym.arg or 1), min_prob)
    if name == "solution-call":
        return [(body, p, None) for body, p in gen_previous_solution_call(env, g, min_prob)]
    if name == "solution-corpus":
        return _solution_definition_alts(env, g, min_prob)
    raise DerivationError(f"unknown procedural non-terminal {sym!r}")


# --- expansion -----------------------------------------------------------------


def _apply_effect(env, effect):
    if effect is None:
        return env
    kind, arg = effect
    if kind == "define":
        return env.define(arg)
    if kind == "letrec":
        return env.define(*arg).bind()
    if kind == "solution":
        return env.add_solution(arg)
    raise DerivationError(f"unknown environment effect {kind!r}")


def _proc_child(form, sym, tail, body, p, effect):
    r = tail
    for s in reversed(body):
        r = (s, r)
    done, ndone, r, env = _advance(form.done, form.ndone, r, _apply_effect(form.env, effect))
    choice = ProcChoice(sym, body, p)
    return SententialForm(done, ndone, r, form.prob * p, env, ((form.ndone, choice), form.trace), form.ntrace + 1)


def expand(form: SententialForm, g: Grammar, horizon: float = 0.0) -> list:
    """Successors of ``form`` whose probability is at least ``horizon``.

    Successors come in decreasing local probability; ties keep grammar
    order (which is already by descending probability then body text).
    """
    rest = form.rest
    if rest is None:
        raise DerivationError("form is already a sentence")
    sym = rest[0]
    tail = rest[1]
    prob = form.prob
    min_local = horizon / prob if horizon > 0.0 else 0.0
    out = []
    if type(sym) is NonTerminal:
        alts = _compiled(g).get(sym.name)
        if alts is None:
            raise DerivationError(f"undefined non-terminal <{sym.name}>")
        env = form.env
        for p, body, prod in alts:
            if p < min_local:
                break
            r = tail
            for s in reversed(body):
                r = (s, r)
            done, ndone, r, env2 = _advance(form.done, form.ndone, r, env)
            out.append(
                SententialForm(
                    done, ndone, r, prob * p, env2, ((form.ndone, prod), form.trace), form.ntrace + 1
                )
            )
        return out
    if type(sym) is Procedural:
        for body, p, effect in _procedural_alts(sym, form.env, g, min_local):
            out.append(_proc_child(form, sym, tail, body, p, effect))
        return out
    raise DerivationError(f"cannot expand {sym!r}")


def expand_leftmost(form: SententialForm, g: Grammar) -> list:
    """Every successor of ``form`` (no horizon)."""
    return expand(form, g, 0.0)


# --- sentences ------------------------------------------------------------------


def _glue_strings(tokens) -> list:
    """Merge the pieces of generated string literals (``"`` ... ``"``) into single tokens."""
    out = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok == '"':
            j = i + 1
            chars = []
            while j < n and tokens[j] != '"':
                chars.append(tokens[j])
                j += 1
            if j >= n:
                raise DerivationError("unterminated string literal in sentence")
            text = "".join(chars).replace("\\", "\\\\").replace('"', '\\"')
            out.append('"' + text + '"')
            i = j + 1
        else:
            out.append(tok)
            i += 1
    return out


def sentence_text(tokens) -> str:
    return " ".join(_glue_strings(list(tokens)))


def to_program(form) -> list:
    """Read a finished sentence (a form or a token sequence) as a list of S-expressions."""
    if isinstance(form, SententialForm):
        if form.rest is not None:
            raise DerivationError("not a sentence: non-terminals remain")
        tokens = form.tokens()
    else:
        tokens = list(form)
    try:
        return read_tokens(_glue_strings(tokens))
    except Exception as e:  # a grammar bug; never swallow it
        raise DerivationError(f"finished sentence does not read: {sentence_text(tokens)!r}: {e}") from e


# --- derivation trees -------------------------------------------------------------


@dataclass
class Node:
    label: object  # NonTerminal, Procedural, or a terminal string
    children: list | None = None
    choice: object = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def walk(self):
        """Nodes in pre-order (scope-marker leaves included)."""
        stack = [self]
        while stack:
            n = stack.pop()
            yield n
            if n.children:
                stack.extend(reversed(n.children))

    def leaves(self) -> list:
        """Terminal leaves, left to right."""
        return [n.label for n in self.walk() if n.children is None and type(n.label) is str]

    def count(self) -> int:
        """Internal nodes plus terminal leaves (scope markers are not counted)."""
        return sum(1 for n in self.walk() if type(n.label) is not Marker)

    def height(self) -> int:
        if self.children is None:
            return 0
        return 1 + max((c.height() for c in self.children), default=0)


def build_derivation_tree(trace, start) -> Node:
    """Rebuild the derivation tree from a complete leftmost trace.

    ``start`` is the start symbol (or a sequence of symbols, in which case
    the returned root is an unlabelled node holding one subtree each).
    """
    if isinstance(start, (NonTerminal, Procedural)):
        roots = [Node(start, None)]
        single = True
    else:
        roots = [Node(s, None) for s in start]
        single = False
    # the current sentential form as a list of unexpanded nodes; scope
    # markers stay in the tree as leaves but do not count as positions
    frontier = list(roots)
    i = 0
    pos_here = 0
    for pos, choice in trace:
        while i < len(frontier) and type(frontier[i].label) in (str, Marker):
            if type(frontier[i].label) is str:
                pos_here += 1
            i += 1
        if i >= len(frontier):
            raise DerivationError("trace continues after the derivation finished")
        node = frontier[i]
        if node.label is not _head_of(choice):
            raise DerivationError(f"trace entry for {_head_of(choice)!r} applied to {node.label!r}")
        if pos != pos_here:
            raise DerivationError(f"trace position {pos} does not match leftmost non-terminal at {pos_here}")
        node.children = [Node(s, None) for s in choice.body]
        node.choice = choice
        frontier[i : i + 1] = node.children
    for n in frontier[i:]:
        if type(n.label) not in (str, Marker):
            raise DerivationError(f"incomplete trace: {n.label!r} left unexpanded")
    if single:
        return roots[0]
    return Node(None, roots)


# --- random generation ---------------------------------------------------------------


def random_derivation(
    g: Grammar,
    form: SententialForm,
    rng: random.Random,
    max_steps: int = 2000,
) -> SententialForm | None:
    """Sample a leftmost derivation by following production probabilities.

    Sub-normalized alternative lists are renormalized for sampling.
    Returns None if the walk dies (no alternatives) or exceeds ``max_steps``.
    """
    for _ in range(max_steps):
        if form.rest is None:
            return form
        sym = form.rest[0]
        if type(sym) is Procedural:
            pick = _sample_procedural(sym, form.env, g, rng)
            if pick is None:
                return None
            body, p, effect = pick
            form = _proc_child(form, sym, form.rest[1], body, p, effect)
        else:
            kids = expand(form, g, 0.0)
            if not kids:
                return None
            form = rng.choices(kids, weights=[k.trace[0][1].prob for k in kids])[0]
    return None


def find_derivation(g: Grammar, form: SententialForm, tokens, max_nodes: int = 200_000) -> SententialForm | None:
    """Search for a derivation of ``tokens`` from ``form`` (most probable first).

    A small test and tooling aid: prunes every form whose derived prefix
    disagrees with ``tokens``.  Not meant for large programs.
    """
    import heapq

    tokens = list(tokens)
    n = len(tokens)
    heap = [(-form.prob, 0, form)]
    counter = 1
    visited = 0
    while heap and visited < max_nodes:
        _, _, f = heapq.heappop(heap)
        visited += 1
        if f.rest is None:
            if f.ndone == n:
                return f
            continue
        for kid in expand(f, g, 0.0):
            if kid.ndone > n:
                continue
            if kid.tokens() != tokens[: kid.ndone]:
                continue
            # every remaining terminal needs at least one token
            heapq.heappush(heap, (-kid.prob, counter, kid))
            counter += 1
    return None
