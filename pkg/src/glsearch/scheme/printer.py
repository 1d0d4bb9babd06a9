from __future__ import annotations

import math
from fractions import Fraction

from .types import (
    NIL,
    Char,
    Closure,
    Continuation,
    EnvSpec,
    MultipleValues,
    Pair,
    Primitive,
    Promise,
    SString,
    Symbol,
    Unspecified,
    Vector,
)
from .reader import CHAR_NAMES

_CHAR_OUT = {v: k for k, v in CHAR_NAMES.items()}


def number_to_string(x) -> str:
    t = type(x)
    if t is int:
        return str(x)
    if t is Fraction:
        return f"{x.numerator}/{x.denominator}"
    if math.isnan(x):
        return "+nan.0"
    if math.isinf(x):
        return "+inf.0" if x > 0 else "-inf.0"
    return repr(x)


def _escape(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def to_string(x, limit: int = 100_000) -> str:
    """Canonical written form of a datum or value.

    Reading the output gives back a structurally equal datum.  Output of
    cyclic or enormous structures is cut off after ``limit`` pieces.
    """
    out: list[str] = []
    budget = [limit]

    def emit(s):
        out.append(s)
        budget[0] -= 1

    def walk(x):
        if budget[0] <= 0:
            emit("...")
            return
        t = type(x)
        if t is bool:
            emit("#t" if x else "#f")
        elif t is Symbol:
            emit(str(x))
        elif t is int or t is float or t is Fraction:
            emit(number_to_string(x))
        elif t is Pair:
            emit("(")
            walk(x.car)
            x = x.cdr
            while type(x) is Pair:
                if budget[0] <= 0:
                    emit(" ...")
                    break
                emit(" ")
                walk(x.car)
                x = x.cdr
            else:
                if x is not NIL:
                    emit(" . ")
                    walk(x)
            emit(")")
        elif x is NIL:
            emit("()")
        elif t is SString:
            emit(_escape(x.s))
        elif t is Char:
            emit("#\\" + _CHAR_OUT.get(x.ch, x.ch))
        elif t is Vector:
            emit("#(")
            for i, item in enumerate(x):
                if i:
                    emit(" ")
                walk(item)
            emit(")")
        elif t is Closure:
            emit(f"#<procedure {x.name or 'anonymous'}>")
        elif t is Primitive:
            emit(f"#<procedure {x.name}>")
        elif t is Continuation:
            emit("#<continuation>")
        elif t is Promise:
            emit("#<promise>")
        elif t is Unspecified:
            emit("#<unspecified>")
        elif t is EnvSpec:
            emit(f"#<environment {x.kind}>")
        elif t is MultipleValues:
            for i, v in enumerate(x.values):
                if i:
                    emit(" ")
                walk(v)
        else:
            emit(f"#<{t.__name__}>")

    walk(x)
    return "".join(out)


def write_program(forms) -> str:
    return "\n".join(to_string(f) for f in forms)
