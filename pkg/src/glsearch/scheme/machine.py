"""Fuel-limited evaluator for the reference machine.

One fuel step is charged per evaluator dispatch: every evaluation of a
literal or variable, every special-form entry and every procedure
application (including each tail call).  Some primitives charge extra
steps for work proportional to the size of their arguments.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

from .printer import to_string
from .reader import read
from .stdlib import builtins
from .types import (
    NIL,
    UNSPECIFIED,
    Closure,
    Continuation,
    Environment,
    Pair,
    Primitive,
    Promise,
    SchemeError,
    Symbol,
    sym,
)

# Deepest chain of nested non-tail evaluations allowed.
MAX_DEPTH = 4000

if sys.getrecursionlimit() < 4 * MAX_DEPTH + 1000:
    sys.setrecursionlimit(4 * MAX_DEPTH + 1000)

ERROR_KINDS = SchemeError.KINDS


@dataclass(frozen=True)
class Value:
    value: object
    steps: int

    @property
    def kind(self):
        return "value"


@dataclass(frozen=True)
class FuelExhausted:
    steps: int

    @property
    def kind(self):
        return "fuel-exhausted"


@dataclass(frozen=True)
class RuntimeFailure:
    """Evaluation stopped with one of the machine's runtime error kinds."""

    error: str
    message: str
    steps: int

    @property
    def kind(self):
        return self.error


EvalOutcome = Value | FuelExhausted | RuntimeFailure


class OutOfFuel(Exception):
    pass


class _Escape(Exception):
    def __init__(self, k, value):
        self.k = k
        self.value = value


class _Unassigned:
    __slots__ = ()


UNASSIGNED = _Unassigned()


class DuplicateSolution(Exception):
    pass


S = sym
QUOTE, IF, DEFINE, SET, LAMBDA, BEGIN = S("quote"), S("if"), S("define"), S("set!"), S("lambda"), S("begin")
LET, LETSTAR, LETREC, COND, CASE, AND, OR = S("let"), S("let*"), S("letrec"), S("cond"), S("case"), S("and"), S("or")
DO, DELAY, ELSE, ARROW = S("do"), S("delay"), S("else"), S("=>")

SPECIAL_FORMS = frozenset({QUOTE, IF, DEFINE, SET, LAMBDA, BEGIN, LET, LETSTAR, LETREC, COND, CASE, AND, OR, DO, DELAY})


def _syntax(msg):
    raise SchemeError("type-error", f"bad syntax: {msg}")


def _items(x):
    out = []
    while type(x) is Pair:
        out.append(x.car)
        x = x.cdr
    if x is not NIL:
        _syntax("improper form")
    return out


def _parse_params(spec):
    params = []
    while type(spec) is Pair:
        if type(spec.car) is not Symbol:
            _syntax("parameter must be an identifier")
        params.append(spec.car)
        spec = spec.cdr
    if spec is NIL:
        return tuple(params), None
    if type(spec) is Symbol:
        return tuple(params), spec
    _syntax("bad parameter list")


class Evaluator:
    """State of one evaluation: remaining fuel and nesting depth."""

    def __init__(self, machine, fuel):
        self.machine = machine
        self.budget = fuel
        self.left = fuel
        self.depth = 0

    @property
    def steps(self):
        return self.budget - max(self.left, 0)

    def charge(self, n):
        self.left -= n
        if self.left < 0:
            raise OutOfFuel()

    def eval(self, x, env):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            self.depth -= 1
            raise SchemeError("domain-error", "recursion depth limit exceeded")
        try:
            return self._eval(x, env)
        finally:
            self.depth -= 1

    def apply(self, proc, args):
        """Apply a procedure from inside a primitive (a non-tail call)."""
        self.charge(1)
        t = type(proc)
        if t is Primitive:
            return self._call_primitive(proc, args)
        if t is Closure:
            env = self._bind(proc, args)
            body = proc.body
            for form in body[:-1]:
                self.eval(form, env)
            return self.eval(body[-1], env)
        if t is Continuation:
            self._throw(proc, args)
        raise SchemeError("type-error", "not a procedure")

    def call_cc(self, proc):
        k = Continuation()
        depth = self.depth
        try:
            return self.apply(proc, [k])
        except _Escape as e:
            if e.k is not k:
                raise
            self.depth = depth
            return e.value
        finally:
            k.live = False

    def _throw(self, k, args):
        if not k.live:
            raise SchemeError("domain-error", "continuation re-entry is not supported")
        raise _Escape(k, args[0] if len(args) == 1 else UNSPECIFIED)

    def eval_in_fresh_env(self, expr):
        env = Environment({}, self.machine.base_env)
        return self.eval(expr, env)

    def _call_primitive(self, p, args):
        n = len(args)
        if n < p.min_args or (p.max_args is not None and n > p.max_args):
            raise SchemeError("arity-error", f"{p.name}: wrong number of arguments ({n})")
        try:
            if p.needs_ev:
                return p.fn(self, *args)
            return p.fn(*args)
        except (SchemeError, OutOfFuel, _Escape):
            raise
        except ZeroDivisionError as e:
            raise SchemeError("division-by-zero", f"{p.name}: {e}")
        except (TypeError, AttributeError) as e:
            raise SchemeError("type-error", f"{p.name}: {e}")
        except (ValueError, OverflowError, IndexError, MemoryError, RecursionError) as e:
            raise SchemeError("domain-error", f"{p.name}: {e}")

    def _bind(self, proc, args):
        params = proc.params
        n = len(params)
        if proc.rest is None:
            if len(args) != n:
                raise SchemeError("arity-error", f"{proc.name or 'procedure'}: expected {n} arguments, got {len(args)}")
            frame = dict(zip(params, args))
        else:
            if len(args) < n:
                raise SchemeError("arity-error", f"{proc.name or 'procedure'}: expected at least {n} arguments")
            frame = dict(zip(params, args))
            rest = NIL
            for a in reversed(args[n:]):
                rest = Pair(a, rest)
            frame[proc.rest] = rest
        return Environment(frame, proc.env)

    def _make_lambda(self, spec, body, env, name=None):
        params, rest = _parse_params(spec)
        forms = _items(body)
        if not forms:
            _syntax("empty body")
        return Closure(params, rest, forms, env, name)

    def _eval(self, x, env):
        ev = self.eval
        while True:
            self.left -= 1
            if self.left < 0:
                raise OutOfFuel()
            t = type(x)
            if t is Symbol:
                e = env
                while e is not None:
                    v = e.vars
                    if x in v:
                        val = v[x]
                        if val is UNASSIGNED:
                            raise SchemeError("domain-error", f"variable {x} used before its initialization")
                        return val
                    e = e.outer
                raise SchemeError("unbound-variable", f"unbound variable: {x}")
            if t is not Pair:
                if x is NIL:
                    raise SchemeError("type-error", "empty combination")
                return x
            op = x.car
            if type(op) is Symbol and op in SPECIAL_FORMS:
                rest = x.cdr
                if op is QUOTE:
                    if type(rest) is not Pair or rest.cdr is not NIL:
                        _syntax("quote")
                    return rest.car
                if op is IF:
                    parts = _items(rest)
                    if len(parts) not in (2, 3):
                        _syntax("if")
                    if ev(parts[0], env) is not False:
                        x = parts[1]
                    elif len(parts) == 3:
                        x = parts[2]
                    else:
                        return UNSPECIFIED
                    continue
                if op is DEFINE:
                    if type(rest) is not Pair:
                        _syntax("define")
                    target = rest.car
                    if type(target) is Pair:
                        name = target.car
                        if type(name) is not Symbol:
                            _syntax("define")
                        env.vars[name] = self._make_lambda(target.cdr, rest.cdr, env, str(name))
                    elif type(target) is Symbol:
                        parts = _items(rest.cdr)
                        if len(parts) != 1:
                            _syntax("define")
                        value = ev(parts[0], env)
                        if type(value) is Closure and value.name is None:
                            value.name = str(target)
                        env.vars[target] = value
                    else:
                        _syntax("define")
                    return UNSPECIFIED
                if op is SET:
                    parts = _items(rest)
                    if len(parts) != 2 or type(parts[0]) is not Symbol:
                        _syntax("set!")
                    name = parts[0]
                    frame = env.find(name)
                    if frame is None:
                        raise SchemeError("unbound-variable", f"set! of unbound variable: {name}")
                    value = ev(parts[1], env)
                    if frame is self.machine.base_env:
                        # never mutate the shared library frame
                        frame = self._top
                    frame.vars[name] = value
                    return UNSPECIFIED
                if op is LAMBDA:
                    if type(rest) is not Pair:
                        _syntax("lambda")
                    return self._make_lambda(rest.car, rest.cdr, env)
                if op is BEGIN:
                    forms = _items(rest)
                    if not forms:
                        return UNSPECIFIED
                    for form in forms[:-1]:
                        ev(form, env)
                    x = forms[-1]
                    continue
                if op is LET:
                    if type(rest) is not Pair:
                        _syntax("let")
                    if type(rest.car) is Symbol:
                        # named let
                        name = rest.car
                        if type(rest.cdr) is not Pair:
                            _syntax("let")
                        bindings = self._bindings(rest.cdr.car)
                        args = [ev(init, env) for _, init in bindings]
                        loop_env = Environment({}, env)
                        proc = Closure(tuple(n for n, _ in bindings), None, _items(rest.cdr.cdr), loop_env, str(name))
                        if not proc.body:
                            _syntax("let")
                        loop_env.vars[name] = proc
                        env = self._bind(proc, args)
                        body = proc.body
                    else:
                        bindings = self._bindings(rest.car)
                        frame = {}
                        for name, init in bindings:
                            frame[name] = ev(init, env)
                        env = Environment(frame, env)
                        body = _items(rest.cdr)
                    if not body:
                        _syntax("let")
                    for form in body[:-1]:
                        ev(form, env)
                    x = body[-1]
                    continue
                if op is LETSTAR:
                    if type(rest) is not Pair:
                        _syntax("let*")
                    for name, init in self._bindings(rest.car):
                        env = Environment({name: ev(init, env)}, env)
                    env = Environment({}, env)
                    body = _items(rest.cdr)
                    if not body:
                        _syntax("let*")
                    for form in body[:-1]:
                        ev(form, env)
                    x = body[-1]
                    continue
                if op is LETREC:
                    if type(rest) is not Pair:
                        _syntax("letrec")
                    bindings = self._bindings(rest.car)
                    env = Environment({name: UNASSIGNED for name, _ in bindings}, env)
                    values = [ev(init, env) for _, init in bindings]
                    for (name, _), value in zip(bindings, values):
                        if type(value) is Closure and value.name is None:
                            value.name = str(name)
                        env.vars[name] = value
                    body = _items(rest.cdr)
                    if not body:
                        _syntax("letrec")
                    for form in body[:-1]:
                        ev(form, env)
                    x = body[-1]
                    continue
                if op is COND:
                    clauses = _items(rest)
                    chosen = None
                    for clause in clauses:
                        parts = _items(clause)
                        if not parts:
                            _syntax("cond")
                        if parts[0] is ELSE:
                            chosen = parts[1:]
                            if not chosen:
                                _syntax("cond")
                            break
                        test = ev(parts[0], env)
                        if test is not False:
                            if len(parts) == 1:
                                return test
                            if parts[1] is ARROW:
                                if len(parts) != 3:
                                    _syntax("cond =>")
                                f = ev(parts[2], env)
                                return self.apply(f, [test])
                            chosen = parts[1:]
                            break
                    if chosen is None:
                        return UNSPECIFIED
                    for form in chosen[:-1]:
                        ev(form, env)
                    x = chosen[-1]
                    continue
                if op is CASE:
                    parts = _items(rest)
                    if not parts:
                        _syntax("case")
                    key = ev(parts[0], env)
                    chosen = None
                    from .stdlib import eqv

                    for clause in parts[1:]:
                        cl = _items(clause)
                        if len(cl) < 2:
                            _syntax("case")
                        if cl[0] is ELSE or any(eqv(key, d) for d in _items(cl[0])):
                            chosen = cl[1:]
                            break
                    if chosen is None:
                        return UNSPECIFIED
                    for form in chosen[:-1]:
                        ev(form, env)
                    x = chosen[-1]
                    continue
                if op is AND:
                    forms = _items(rest)
                    if not forms:
                        return True
                    for form in forms[:-1]:
                        if ev(form, env) is False:
                            return False
                    x = forms[-1]
                    continue
                if op is OR:
                    forms = _items(rest)
                    if not forms:
                        return False
                    for form in forms[:-1]:
                        v = ev(form, env)
                        if v is not False:
                            return v
                    x = forms[-1]
                    continue
                if op is DO:
                    return self._do(rest, env)
                if op is DELAY:
                    parts = _items(rest)
                    if len(parts) != 1:
                        _syntax("delay")
                    return Promise(parts[0], env)
            # application
            proc = ev(op, env)
            args = []
            a = x.cdr
            while type(a) is Pair:
                args.append(ev(a.car, env))
                a = a.cdr
            if a is not NIL:
                _syntax("improper argument list")
            tp = type(proc)
            if tp is Primitive:
                return self._call_primitive(proc, args)
            if tp is Closure:
                env = self._bind(proc, args)
                body = proc.body
                for form in body[:-1]:
                    ev(form, env)
                x = body[-1]
                continue
            if tp is Continuation:
                self._throw(proc, args)
            raise SchemeError("type-error", f"not a procedure: {to_string(proc, 20)}")

    def _bindings(self, spec):
        out = []
        for b in _items(spec):
            parts = _items(b)
            if len(parts) != 2 or type(parts[0]) is not Symbol:
                _syntax("binding")
            out.append((parts[0], parts[1]))
        return out

    def _do(self, rest, env):
        parts = _items(rest)
        if len(parts) < 2:
            _syntax("do")
        specs = []
        for b in _items(parts[0]):
            bp = _items(b)
            if len(bp) not in (2, 3) or type(bp[0]) is not Symbol:
                _syntax("do binding")
            specs.append(bp)
        exit_clause = _items(parts[1])
        if not exit_clause:
            _syntax("do exit clause")
        commands = parts[2:]
        frame = {}
        for bp in specs:
            frame[bp[0]] = self.eval(bp[1], env)
        loop_env = Environment(frame, env)
        while True:
            self.charge(1)
            if self.eval(exit_clause[0], loop_env) is not False:
                result = UNSPECIFIED
                for form in exit_clause[1:]:
                    result = self.eval(form, loop_env)
                return result
            for c in commands:
                self.eval(c, loop_env)
            new = {}
            for bp in specs:
                new[bp[0]] = self.eval(bp[2], loop_env) if len(bp) == 3 else loop_env.vars[bp[0]]
            loop_env = Environment(new, env)

    def run(self, program):
        self._top = Environment({}, self.machine.base_env)
        result = UNSPECIFIED
        for form in program:
            result = self.eval(form, self._top)
        return result


class Machine:
    """Reference machine: the standard library plus installed solutions.

    Installing a solution evaluates its definition once and binds the
    resulting closure in the shared library frame, so later programs call
    it without re-reading or re-evaluating its text.
    """

    def __init__(self):
        self.base_env = Environment(builtins())
        self.installed: dict[str, object] = {}

    def evaluate(self, program, fuel: int) -> EvalOutcome:
        if isinstance(program, str):
            program = read(program)
        if fuel <= 0:
            raise ValueError("fuel budget must be positive")
        ev = Evaluator(self, fuel)
        try:
            value = ev.run(program)
        except OutOfFuel:
            return FuelExhausted(fuel)
        except SchemeError as e:
            return RuntimeFailure(e.kind, e.message, ev.steps)
        except _Escape as e:
            # a continuation escaping to top level delivers its value
            return Value(e.value, ev.steps)
        return Value(value, ev.steps)

    def install_solution(self, name, definition) -> None:
        if isinstance(definition, str):
            (definition,) = read(definition)
        name = sym(str(name))
        if name in self.installed or name in self.base_env.vars:
            raise DuplicateSolution(f"{name} is already defined in the library")
        if not (type(definition) is Pair and definition.car is DEFINE and type(definition.cdr) is Pair):
            raise ValueError("solution must be a define form")
        target = definition.cdr.car
        defined = target.car if type(target) is Pair else target
        if defined is not name:
            raise ValueError(f"definition defines {defined}, not {name}")
        scratch = Environment({}, self.base_env)
        ev = Evaluator(self, 10_000)
        ev._top = scratch
        try:
            ev.eval(definition, scratch)
        except (SchemeError, OutOfFuel) as e:
            raise ValueError(f"cannot install {name}: {e}")
        value = scratch.vars[name]
        if type(value) is Closure:
            # re-home the closure so it sees the library frame directly
            value.env = self.base_env if value.env is scratch else value.env
        self.base_env.vars[name] = value
        self.installed[name] = definition

    def copy(self) -> "Machine":
        m = Machine()
        for name, definition in self.installed.items():
            m.install_solution(name, definition)
        return m
