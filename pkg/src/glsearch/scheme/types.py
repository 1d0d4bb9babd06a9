"""Runtime data for the reference machine.

Scheme values map onto Python as follows: exact integers are ``int``,
exact non-integral rationals are ``fractions.Fraction`` (always in lowest
terms, never with denominator 1), reals are ``float``, booleans are
``bool``.  Everything else gets a small class below.
"""

from __future__ import annotations

from fractions import Fraction


class Symbol(str):
    """Interned identifier.  Always build through :func:`sym`."""

    __slots__ = ()

    def __repr__(self):
        return f"Symbol({str.__repr__(self)})"


_symbols: dict[str, Symbol] = {}


def sym(name: str) -> Symbol:
    s = _symbols.get(name)
    if s is None:
        s = _symbols[name] = Symbol(name)
    return s


class Nil:
    __slots__ = ()

    def __repr__(self):
        return "NIL"

    def __iter__(self):
        return iter(())

    def __bool__(self):
        return True


NIL = Nil()


class Pair:
    __slots__ = ("car", "cdr")

    def __init__(self, car, cdr):
        self.car = car
        self.cdr = cdr

    def __repr__(self):
        from .printer import to_string

        return f"Pair<{to_string(self)}>"


class Char:
    __slots__ = ("ch",)
    _cache: dict[str, "Char"] = {}

    def __new__(cls, ch: str):
        c = cls._cache.get(ch)
        if c is None:
            c = object.__new__(cls)
            c.ch = ch
            cls._cache[ch] = c
        return c

    def __repr__(self):
        return f"Char({self.ch!r})"


class SString:
    """Mutable Scheme string."""

    __slots__ = ("s",)

    def __init__(self, s: str):
        self.s = s

    def __repr__(self):
        return f"SString({self.s!r})"


class Vector(list):
    """Scheme vector; a list subclass so it is distinguishable from Python lists."""

    __slots__ = ()


class Unspecified:
    __slots__ = ()

    def __repr__(self):
        return "#<unspecified>"


UNSPECIFIED = Unspecified()


class Procedure:
    __slots__ = ()


class Primitive(Procedure):
    __slots__ = ("name", "fn", "min_args", "max_args", "needs_ev")

    def __init__(self, name, fn, min_args, max_args=None, needs_ev=False):
        self.name = name
        self.fn = fn
        self.min_args = min_args
        # None means variadic
        self.max_args = max_args
        self.needs_ev = needs_ev

    def __repr__(self):
        return f"#<primitive {self.name}>"


class Closure(Procedure):
    __slots__ = ("params", "rest", "body", "env", "name")

    def __init__(self, params, rest, body, env, name=None):
        self.params = params
        self.rest = rest
        self.body = body
        self.env = env
        self.name = name

    def __repr__(self):
        return f"#<procedure {self.name or 'anonymous'}>"


class Continuation(Procedure):
    """Escape-only continuation."""

    __slots__ = ("live",)

    def __init__(self):
        self.live = True

    def __repr__(self):
        return "#<continuation>"


class Promise:
    __slots__ = ("expr", "env", "done", "value")

    def __init__(self, expr, env):
        self.expr = expr
        self.env = env
        self.done = False
        self.value = None


class MultipleValues:
    __slots__ = ("values",)

    def __init__(self, values):
        self.values = values


class EnvSpec:
    """Value returned by scheme-report-environment and friends."""

    __slots__ = ("kind",)

    def __init__(self, kind):
        self.kind = kind

    def __repr__(self):
        return f"#<environment {self.kind}>"


class Environment:
    """One frame of a lexical environment; ``outer`` links to the enclosing frame."""

    __slots__ = ("vars", "outer")

    def __init__(self, vars, outer=None):
        self.vars = vars
        self.outer = outer

    def lookup(self, name):
        env = self
        while env is not None:
            v = env.vars
            if name in v:
                return v[name]
            env = env.outer
        raise SchemeError("unbound-variable", f"unbound variable: {name}")

    def find(self, name):
        env = self
        while env is not None:
            if name in env.vars:
                return env
            env = env.outer
        return None


class SchemeError(Exception):
    """A runtime error carrying one of the machine's error kinds."""

    KINDS = (
        "unbound-variable",
        "type-error",
        "arity-error",
        "division-by-zero",
        "domain-error",
        "user-error",
    )

    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind
        self.message = message


def is_number(x) -> bool:
    t = type(x)
    return t is int or t is float or t is Fraction


def normalize(x):
    """Collapse an integral Fraction to int."""
    if type(x) is Fraction and x.denominator == 1:
        return x.numerator
    return x


def from_list(items, tail=NIL):
    out = tail
    for x in reversed(items):
        out = Pair(x, out)
    return out


def to_list(x) -> list:
    out = []
    while type(x) is Pair:
        out.append(x.car)
        x = x.cdr
    if x is not NIL:
        raise SchemeError("type-error", "improper list")
    return out


def sexpr_equal(a, b) -> bool:
    """Structural identity of two data (numbers compare by type and value)."""
    stack = [(a, b)]
    while stack:
        a, b = stack.pop()
        ta, tb = type(a), type(b)
        if ta is not tb:
            return False
        if ta is Pair:
            stack.append((a.cdr, b.cdr))
            stack.append((a.car, b.car))
        elif ta is Vector:
            if len(a) != len(b):
                return False
            stack.extend(zip(a, b))
        elif ta is SString:
            if a.s != b.s:
                return False
        elif ta is float:
            if not (a == b or (a != a and b != b)):
                return False
        elif a is not b and a != b:
            return False
    return True
