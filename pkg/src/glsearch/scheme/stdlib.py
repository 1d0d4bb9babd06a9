"""R5RS standard procedures (sections 6.1 to 6.5, no I/O, no complex numbers).

``PROCEDURES`` lists every procedure with the R5RS section it comes from
and the argument count used when the grammar generates a call to it.
Procedures that walk or build large structures charge extra fuel through
the evaluator so that candidate programs cannot stall the search.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .types import (
    NIL,
    UNSPECIFIED,
    Char,
    EnvSpec,
    MultipleValues,
    Pair,
    Primitive,
    Procedure,
    Promise,
    SchemeError,
    SString,
    Symbol,
    Vector,
    normalize,
    sym,
)

# Largest exact integer (in bits) the machine will build.
INT_BITS_CAP = 1 << 16
# Longest string or vector the machine will build.
SIZE_CAP = 1 << 20
_BIG = 1 << 64

_NUM = (int, float, Fraction)


def _err(kind, msg):
    raise SchemeError(kind, msg)


def num(x):
    t = type(x)
    if t is int or t is float or t is Fraction:
        return x
    _err("type-error", "number expected")


def integer(x):
    if type(x) is int:
        return x
    if type(x) is float and x.is_integer():
        return x
    _err("type-error", "integer expected")


def index(x):
    if type(x) is not int:
        _err("type-error", "exact integer index expected")
    if x < 0:
        _err("domain-error", "negative index")
    return x


def check_num(ev, x):
    """Normalize an arithmetic result, enforcing the size cap and charging for big values."""
    t = type(x)
    if t is int:
        if -_BIG < x < _BIG:
            return x
        bits = x.bit_length()
    elif t is Fraction:
        if x.denominator == 1:
            return check_num(ev, x.numerator)
        bits = max(x.numerator.bit_length(), x.denominator.bit_length())
        if bits < 64:
            return x
    else:
        return x
    if bits > INT_BITS_CAP:
        _err("domain-error", "exact number too large")
    ev.charge(bits >> 6)
    return x


def _to_exact(x):
    if type(x) is float:
        if math.isnan(x) or math.isinf(x):
            _err("domain-error", "no exact representation")
        return normalize(Fraction(x))
    return x


def _sum(ev, *args):
    total = 0
    for a in args:
        total = total + num(a)
    return check_num(ev, total)


def _product(ev, *args):
    total = 1
    for a in args:
        total = total * num(a)
    return check_num(ev, total)


def _minus(ev, first, *rest):
    num(first)
    if not rest:
        return check_num(ev, -first)
    for a in rest:
        first = first - num(a)
    return check_num(ev, first)


def _divide(ev, first, *rest):
    num(first)
    if not rest:
        rest = (first,)
        first = 1
    for a in rest:
        num(a)
        if type(first) is float or type(a) is float:
            if a == 0:
                _err("division-by-zero", "division by zero")
            first = first / a
        else:
            if a == 0:
                _err("division-by-zero", "division by zero")
            first = Fraction(first) / a
    return check_num(ev, normalize(first) if type(first) is Fraction else first)


def _compare(op):
    def f(*args):
        for a in args:
            num(a)
        for a, b in zip(args, args[1:]):
            if not op(a, b):
                return False
        return True

    return f


def _inexact_if_any(args, value):
    if any(type(a) is float for a in args):
        return float(value)
    return value


def _max(*args):
    for a in args:
        num(a)
    return _inexact_if_any(args, max(args))


def _min(*args):
    for a in args:
        num(a)
    return _inexact_if_any(args, min(args))


def _int_division(kind):
    def f(a, b):
        integer(a)
        integer(b)
        if b == 0:
            _err("division-by-zero", "integer division by zero")
        inexact = type(a) is float or type(b) is float
        a, b = int(a), int(b)
        if kind == "quotient":
            q = abs(a) // abs(b)
            r = q if (a >= 0) == (b >= 0) else -q
        elif kind == "remainder":
            r = abs(a) % abs(b)
            r = r if a >= 0 else -r
        else:
            r = a % b
        return float(r) if inexact else r

    return f


def _gcd(*args):
    g = 0
    inexact = False
    for a in args:
        integer(a)
        inexact |= type(a) is float
        g = math.gcd(g, int(a))
    return float(g) if inexact else g


def _lcm(*args):
    m = 1
    inexact = False
    for a in args:
        integer(a)
        inexact |= type(a) is float
        a = abs(int(a))
        if a == 0:
            return 0.0 if inexact else 0
        m = m * a // math.gcd(m, a)
    return float(m) if inexact else m


def _numerator(x):
    num(x)
    if type(x) is float:
        return float(Fraction(x).numerator)
    return Fraction(x).numerator


def _denominator(x):
    num(x)
    if type(x) is float:
        return float(Fraction(x).denominator)
    return Fraction(x).denominator


def _rounder(fn):
    def f(x):
        num(x)
        if type(x) is float:
            if math.isinf(x) or math.isnan(x):
                return x
            return float(fn(x))
        return fn(x)

    return f


def _round(x):
    # Python's round() already rounds half to even for float and Fraction.
    return round(x)


def _rationalize(x, y):
    num(x)
    num(y)
    inexact = type(x) is float or type(y) is float
    ex, ey = Fraction(_to_exact(x)), abs(Fraction(_to_exact(y)))
    lo, hi = ex - ey, ex + ey
    result = _simplest_between(lo, hi)
    return float(result) if inexact else normalize(result)


def _simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    if lo > 0:
        return _simplest_positive(lo, hi)
    if hi < 0:
        return -_simplest_positive(-hi, -lo)
    return Fraction(0)


def _simplest_positive(lo: Fraction, hi: Fraction) -> Fraction:
    fl = math.floor(lo)
    if fl == lo:
        return Fraction(fl)
    if fl < math.floor(hi):
        return Fraction(fl + 1)
    rest = _simplest_positive(1 / (hi - fl), 1 / (lo - fl))
    return fl + 1 / rest


def _float_fn(fn):
    def f(x):
        return fn(float(num(x)))

    return f


def _exp(x):
    num(x)
    if x == 0 and type(x) is not float:
        return 1
    return math.exp(x)


def _log(x):
    num(x)
    if x == 1 and type(x) is not float:
        return 0
    if x <= 0:
        _err("domain-error", "log of non-positive number")
    return math.log(x)


def _atan(y, x=None):
    num(y)
    if x is None:
        return math.atan(y)
    num(x)
    return math.atan2(y, x)


def _sqrt(ev, x):
    num(x)
    if x < 0:
        _err("domain-error", "square root of a negative number (complex numbers are not supported)")
    if type(x) is int:
        r = math.isqrt(x)
        if r * r == x:
            return r
        return math.sqrt(x)
    if type(x) is Fraction:
        n, d = math.isqrt(x.numerator), math.isqrt(x.denominator)
        if n * n == x.numerator and d * d == x.denominator:
            return Fraction(n, d)
        return math.sqrt(x)
    return math.sqrt(x)


def _expt(ev, base, power):
    num(base)
    num(power)
    if type(power) is int and type(base) is not float:
        if base == 0 and power < 0:
            _err("division-by-zero", "zero raised to a negative power")
        if base in (0, 1, -1):
            return normalize(Fraction(base) ** power)
        if type(base) is int:
            bits = base.bit_length() * abs(power)
        else:
            bits = max(base.numerator.bit_length(), base.denominator.bit_length()) * abs(power)
        if bits > INT_BITS_CAP:
            _err("domain-error", "exact number too large")
        ev.charge(bits >> 6)
        return check_num(ev, normalize(Fraction(base) ** power))
    b, p = float(base), float(power)
    if b < 0 and not p.is_integer():
        _err("domain-error", "complex result (complex numbers are not supported)")
    if b == 0 and p < 0:
        _err("division-by-zero", "zero raised to a negative power")
    return math.pow(b, p)


def _exact_to_inexact(x):
    num(x)
    return float(x)


def _inexact_to_exact(x):
    num(x)
    return _to_exact(x)


def _number_to_string(ev, x, radix=10):
    from .printer import number_to_string

    num(x)
    if radix != 10 or type(radix) is not int:
        _err("domain-error", "only radix 10 is supported")
    if type(x) is int and x.bit_length() > 64:
        ev.charge(x.bit_length() >> 6)
    return SString(number_to_string(x))


def _string_to_number(s, radix=10):
    from .reader import parse_number

    _str(s)
    if radix != 10 or type(radix) is not int:
        _err("domain-error", "only radix 10 is supported")
    if len(s.s) > 4000:
        return False
    n = parse_number(s.s)
    return False if n is None else n


def _pred_number(p):
    def f(x):
        t = type(x)
        if t is int or t is Fraction or t is float:
            return p(x)
        return False

    return f


def _is_rational(x):
    return type(x) is not float or not (math.isinf(x) or math.isnan(x))


def _is_integer(x):
    return type(x) is int or (type(x) is float and x.is_integer())


def _num_pred(p):
    def f(x):
        num(x)
        return p(x)

    return f


def _int_pred(p):
    def f(x):
        integer(x)
        return p(int(x))

    return f


# 6.1 equivalence


def eqv(a, b):
    if a is b:
        return True
    ta = type(a)
    if ta is not type(b):
        return False
    if ta is int or ta is Fraction:
        return a == b
    if ta is float:
        return a == b or (a != a and b != b)
    if ta is SString:
        return a is b or (not a.s and not b.s)
    if ta is Symbol:
        return a == b
    return False


def eq(a, b):
    return eqv(a, b)


def equal(ev, a, b):
    stack = [(a, b)]
    while stack:
        ev.charge(1)
        a, b = stack.pop()
        if eqv(a, b):
            continue
        ta = type(a)
        if ta is not type(b):
            return False
        if ta is Pair:
            stack.append((a.cdr, b.cdr))
            stack.append((a.car, b.car))
        elif ta is SString:
            if a.s != b.s:
                return False
        elif ta is Vector:
            if len(a) != len(b):
                return False
            stack.extend(zip(a, b))
        else:
            return False
    return True


def output_equal(ev, a, b):
    """equal?, except that inexact numbers match within 1e-9 relative."""
    stack = [(a, b)]
    while stack:
        ev.charge(1)
        a, b = stack.pop()
        if type(a) is float or type(b) is float:
            if type(a) in _NUM and type(b) in _NUM and type(a) is not bool and type(b) is not bool:
                fa, fb = float(a), float(b)
                if fa == fb or abs(fa - fb) <= 1e-9 * max(abs(fa), abs(fb)):
                    continue
            return False
        if eqv(a, b):
            continue
        ta = type(a)
        if ta is not type(b):
            return False
        if ta is Pair:
            stack.append((a.cdr, b.cdr))
            stack.append((a.car, b.car))
        elif ta is SString:
            if a.s != b.s:
                return False
        elif ta is Vector:
            if len(a) != len(b):
                return False
            stack.extend(zip(a, b))
        else:
            return False
    return True


# 6.3.2 pairs and lists


def _pair(x):
    if type(x) is not Pair:
        _err("type-error", "pair expected")
    return x


def _set_car(p, v):
    _pair(p).car = v
    return UNSPECIFIED


def _set_cdr(p, v):
    _pair(p).cdr = v
    return UNSPECIFIED


def _cxr(path):
    # path is read right to left: cadr = car of cdr
    ops = path[::-1]

    def f(x):
        for op in ops:
            if type(x) is not Pair:
                _err("type-error", "pair expected")
            x = x.car if op == "a" else x.cdr
        return x

    return f


def list_items(ev, x) -> list:
    """Elements of a proper list, charging one fuel step per element."""
    out = []
    while type(x) is Pair:
        ev.charge(1)
        out.append(x.car)
        x = x.cdr
    if x is not NIL:
        _err("type-error", "proper list expected")
    return out


def _is_list(ev, x):
    slow = x
    while True:
        if x is NIL:
            return True
        if type(x) is not Pair:
            return False
        ev.charge(1)
        x = x.cdr
        if x is NIL:
            return True
        if type(x) is not Pair:
            return False
        x = x.cdr
        slow = slow.cdr
        if x is slow:
            return False


def _list(*args):
    out = NIL
    for a in reversed(args):
        out = Pair(a, out)
    return out


def _length(ev, x):
    return len(list_items(ev, x))


def _append(ev, *args):
    if not args:
        return NIL
    out = args[-1]
    for a in reversed(args[:-1]):
        for item in reversed(list_items(ev, a)):
            out = Pair(item, out)
    return out


def _reverse(ev, x):
    out = NIL
    for item in list_items(ev, x):
        out = Pair(item, out)
    return out


def _list_tail(ev, x, k):
    index(k)
    for _ in range(k):
        ev.charge(1)
        x = _pair(x).cdr
    return x


def _list_ref(ev, x, k):
    return _pair(_list_tail(ev, x, k)).car


def _mem(test):
    def f(ev, obj, lst):
        x = lst
        while type(x) is Pair:
            ev.charge(1)
            if test(ev, obj, x.car):
                return x
            x = x.cdr
        if x is not NIL:
            _err("type-error", "proper list expected")
        return False

    return f


def _ass(test):
    def f(ev, obj, alist):
        x = alist
        while type(x) is Pair:
            ev.charge(1)
            entry = x.car
            if type(entry) is not Pair:
                _err("type-error", "association list of pairs expected")
            if test(ev, obj, entry.car):
                return entry
            x = x.cdr
        if x is not NIL:
            _err("type-error", "proper list expected")
        return False

    return f


def _eqv3(ev, a, b):
    return eqv(a, b)


# 6.3.3 symbols


def _symbol_to_string(s):
    if type(s) is not Symbol:
        _err("type-error", "symbol expected")
    return SString(str(s))


def _string_to_symbol(s):
    return sym(_str(s).s)


# 6.3.4 characters


def _char(c):
    if type(c) is not Char:
        _err("type-error", "character expected")
    return c.ch


def _char_cmp(op, fold=False):
    def f(*args):
        cs = [_char(c) for c in args]
        if fold:
            cs = [c.lower() for c in cs]
        return all(op(a, b) for a, b in zip(cs, cs[1:]))

    return f


def _char_pred(p):
    def f(c):
        return p(_char(c))

    return f


def _integer_to_char(n):
    index(n)
    if n > 0x10FFFF or 0xD800 <= n <= 0xDFFF:
        _err("domain-error", "not a character code")
    return Char(chr(n))


# 6.3.5 strings


def _str(s):
    if type(s) is not SString:
        _err("type-error", "string expected")
    return s


def _make_string(ev, k, fill=None):
    index(k)
    if k > SIZE_CAP:
        _err("domain-error", "string too large")
    ev.charge(k >> 3)
    return SString((_char(fill) if fill is not None else " ") * k)


def _string(*chars):
    return SString("".join(_char(c) for c in chars))


def _string_ref(s, k):
    index(k)
    s = _str(s).s
    if k >= len(s):
        _err("domain-error", "string index out of range")
    return Char(s[k])


def _string_set(s, k, c):
    index(k)
    _str(s)
    if k >= len(s.s):
        _err("domain-error", "string index out of range")
    s.s = s.s[:k] + _char(c) + s.s[k + 1 :]
    return UNSPECIFIED


def _string_cmp(op, fold=False):
    def f(*args):
        ss = [_str(s).s for s in args]
        if fold:
            ss = [s.lower() for s in ss]
        return all(op(a, b) for a, b in zip(ss, ss[1:]))

    return f


def _substring(s, start, end):
    index(start)
    index(end)
    s = _str(s).s
    if not start <= end <= len(s):
        _err("domain-error", "substring range out of bounds")
    return SString(s[start:end])


def _string_append(ev, *args):
    parts = [_str(s).s for s in args]
    total = sum(len(p) for p in parts)
    if total > SIZE_CAP:
        _err("domain-error", "string too large")
    ev.charge(total >> 3)
    return SString("".join(parts))


def _string_to_list(ev, s):
    s = _str(s).s
    ev.charge(len(s))
    return _list(*[Char(c) for c in s])


def _list_to_string(ev, lst):
    return SString("".join(_char(c) for c in list_items(ev, lst)))


def _string_copy(ev, s):
    s = _str(s).s
    ev.charge(len(s) >> 3)
    return SString(s)


def _string_fill(ev, s, c):
    _str(s)
    ev.charge(len(s.s) >> 3)
    s.s = _char(c) * len(s.s)
    return UNSPECIFIED


# 6.3.6 vectors


def _vec(v):
    if type(v) is not Vector:
        _err("type-error", "vector expected")
    return v


def _make_vector(ev, k, fill=UNSPECIFIED):
    index(k)
    if k > SIZE_CAP:
        _err("domain-error", "vector too large")
    ev.charge(k >> 3)
    return Vector([fill] * k)


def _vector_ref(v, k):
    index(k)
    _vec(v)
    if k >= len(v):
        _err("domain-error", "vector index out of range")
    return v[k]


def _vector_set(v, k, obj):
    index(k)
    _vec(v)
    if k >= len(v):
        _err("domain-error", "vector index out of range")
    v[k] = obj
    return UNSPECIFIED


def _vector_to_list(ev, v):
    _vec(v)
    ev.charge(len(v))
    return _list(*v)


def _list_to_vector(ev, lst):
    return Vector(list_items(ev, lst))


def _vector_fill(ev, v, obj):
    _vec(v)
    ev.charge(len(v) >> 3)
    v[:] = [obj] * len(v)
    return UNSPECIFIED


# 6.4 control features


def _proc(p):
    if not isinstance(p, Procedure):
        _err("type-error", "procedure expected")
    return p


def _apply(ev, proc, *args):
    _proc(proc)
    if not args:
        return ev.apply(proc, [])
    spread = list(args[:-1]) + list_items(ev, args[-1])
    return ev.apply(proc, spread)


def _map(ev, proc, *lists):
    _proc(proc)
    cols = [list_items(ev, lst) for lst in lists]
    n = min(len(c) for c in cols)
    out = [ev.apply(proc, [c[i] for c in cols]) for i in range(n)]
    return _list(*out)


def _for_each(ev, proc, *lists):
    _proc(proc)
    cols = [list_items(ev, lst) for lst in lists]
    n = min(len(c) for c in cols)
    for i in range(n):
        ev.apply(proc, [c[i] for c in cols])
    return UNSPECIFIED


def _force(ev, p):
    if type(p) is not Promise:
        return p
    if not p.done:
        value = ev.eval(p.expr, p.env)
        if not p.done:
            p.done, p.value = True, value
            p.expr = p.env = None
    return p.value


def _callcc(ev, proc):
    _proc(proc)
    return ev.call_cc(proc)


def _values(*args):
    if len(args) == 1:
        return args[0]
    return MultipleValues(list(args))


def _call_with_values(ev, producer, consumer):
    v = ev.apply(_proc(producer), [])
    args = v.values if type(v) is MultipleValues else [v]
    return ev.apply(_proc(consumer), list(args))


def _dynamic_wind(ev, before, thunk, after):
    ev.apply(_proc(before), [])
    try:
        result = ev.apply(_proc(thunk), [])
    finally:
        ev.apply(_proc(after), [])
    return result


# 6.5 eval


def _eval(ev, expr, env_spec):
    if type(env_spec) is not EnvSpec:
        _err("type-error", "environment specifier expected")
    return ev.eval_in_fresh_env(expr)


def _report_env(version):
    if version != 5 or type(version) is not int:
        _err("domain-error", "only version 5 is supported")
    return EnvSpec("scheme-report")


def _null_env(version):
    if version != 5 or type(version) is not int:
        _err("domain-error", "only version 5 is supported")
    return EnvSpec("null")


def _error(message, *irritants):
    from .printer import to_string

    text = message.s if type(message) is SString else to_string(message)
    if irritants:
        text += " " + " ".join(to_string(i) for i in irritants)
    _err("user-error", text)


# (name, python function, min args, max args or None, needs evaluator, R5RS section, generated arity)
_TABLE = [
    # 6.1
    ("eqv?", eqv, 2, 2, False, "6.1", 2),
    ("eq?", eq, 2, 2, False, "6.1", 2),
    ("equal?", equal, 2, 2, True, "6.1", 2),
    # 6.2
    ("number?", _pred_number(lambda x: True), 1, 1, False, "6.2", 1),
    ("complex?", _pred_number(lambda x: True), 1, 1, False, "6.2", 1),
    ("real?", _pred_number(lambda x: True), 1, 1, False, "6.2", 1),
    ("rational?", _pred_number(_is_rational), 1, 1, False, "6.2", 1),
    ("integer?", _pred_number(_is_integer), 1, 1, False, "6.2", 1),
    ("exact?", _num_pred(lambda x: type(x) is not float), 1, 1, False, "6.2", 1),
    ("inexact?", _num_pred(lambda x: type(x) is float), 1, 1, False, "6.2", 1),
    ("=", _compare(lambda a, b: a == b), 2, None, False, "6.2", 2),
    ("<", _compare(lambda a, b: a < b), 2, None, False, "6.2", 2),
    (">", _compare(lambda a, b: a > b), 2, None, False, "6.2", 2),
    ("<=", _compare(lambda a, b: a <= b), 2, None, False, "6.2", 2),
    (">=", _compare(lambda a, b: a >= b), 2, None, False, "6.2", 2),
    ("zero?", _num_pred(lambda x: x == 0), 1, 1, False, "6.2", 1),
    ("positive?", _num_pred(lambda x: x > 0), 1, 1, False, "6.2", 1),
    ("negative?", _num_pred(lambda x: x < 0), 1, 1, False, "6.2", 1),
    ("odd?", _int_pred(lambda x: x % 2 == 1), 1, 1, False, "6.2", 1),
    ("even?", _int_pred(lambda x: x % 2 == 0), 1, 1, False, "6.2", 1),
    ("max", _max, 1, None, False, "6.2", 2),
    ("min", _min, 1, None, False, "6.2", 2),
    ("+", _sum, 0, None, True, "6.2", 2),
    ("*", _product, 0, None, True, "6.2", 2),
    ("-", _minus, 1, None, True, "6.2", 2),
    ("/", _divide, 1, None, True, "6.2", 2),
    ("abs", _num_pred(abs), 1, 1, False, "6.2", 1),
    ("quotient", _int_division("quotient"), 2, 2, False, "6.2", 2),
    ("remainder", _int_division("remainder"), 2, 2, False, "6.2", 2),
    ("modulo", _int_division("modulo"), 2, 2, False, "6.2", 2),
    ("gcd", _gcd, 0, None, False, "6.2", 2),
    ("lcm", _lcm, 0, None, False, "6.2", 2),
    ("numerator", _numerator, 1, 1, False, "6.2", 1),
    ("denominator", _denominator, 1, 1, False, "6.2", 1),
    ("floor", _rounder(math.floor), 1, 1, False, "6.2", 1),
    ("ceiling", _rounder(math.ceil), 1, 1, False, "6.2", 1),
    ("truncate", _rounder(math.trunc), 1, 1, False, "6.2", 1),
    ("round", _rounder(_round), 1, 1, False, "6.2", 1),
    ("rationalize", _rationalize, 2, 2, False, "6.2", 2),
    ("exp", _exp, 1, 1, False, "6.2", 1),
    ("log", _log, 1, 1, False, "6.2", 1),
    ("sin", _float_fn(math.sin), 1, 1, False, "6.2", 1),
    ("cos", _float_fn(math.cos), 1, 1, False, "6.2", 1),
    ("tan", _float_fn(math.tan), 1, 1, False, "6.2", 1),
    ("asin", _float_fn(math.asin), 1, 1, False, "6.2", 1),
    ("acos", _float_fn(math.acos), 1, 1, False, "6.2", 1),
    ("atan", _atan, 1, 2, False, "6.2", 1),
    ("sqrt", _sqrt, 1, 1, True, "6.2", 1),
    ("expt", _expt, 2, 2, True, "6.2", 2),
    ("exact->inexact", _exact_to_inexact, 1, 1, False, "6.2", 1),
    ("inexact->exact", _inexact_to_exact, 1, 1, False, "6.2", 1),
    ("number->string", _number_to_string, 1, 2, True, "6.2", 1),
    ("string->number", _string_to_number, 1, 2, False, "6.2", 1),
    # 6.3.1
    ("not", lambda x: x is False, 1, 1, False, "6.3.1", 1),
    ("boolean?", lambda x: type(x) is bool, 1, 1, False, "6.3.1", 1),
    # 6.3.2
    ("pair?", lambda x: type(x) is Pair, 1, 1, False, "6.3.2", 1),
    ("cons", Pair, 2, 2, False, "6.3.2", 2),
    ("car", _cxr("a"), 1, 1, False, "6.3.2", 1),
    ("cdr", _cxr("d"), 1, 1, False, "6.3.2", 1),
    ("set-car!", _set_car, 2, 2, False, "6.3.2", 2),
    ("set-cdr!", _set_cdr, 2, 2, False, "6.3.2", 2),
]
for _n in (2, 3, 4):
    import itertools as _it

    for _path in _it.product("ad", repeat=_n):
        _p = "".join(_path)
        _TABLE.append((f"c{_p}r", _cxr(_p), 1, 1, False, "6.3.2", 1))
_TABLE += [
    ("null?", lambda x: x is NIL, 1, 1, False, "6.3.2", 1),
    ("list?", _is_list, 1, 1, True, "6.3.2", 1),
    ("list", _list, 0, None, False, "6.3.2", 2),
    ("length", _length, 1, 1, True, "6.3.2", 1),
    ("append", _append, 0, None, True, "6.3.2", 2),
    ("reverse", _reverse, 1, 1, True, "6.3.2", 1),
    ("list-tail", _list_tail, 2, 2, True, "6.3.2", 2),
    ("list-ref", _list_ref, 2, 2, True, "6.3.2", 2),
    ("memq", _mem(_eqv3), 2, 2, True, "6.3.2", 2),
    ("memv", _mem(_eqv3), 2, 2, True, "6.3.2", 2),
    ("member", _mem(equal), 2, 2, True, "6.3.2", 2),
    ("assq", _ass(_eqv3), 2, 2, True, "6.3.2", 2),
    ("assv", _ass(_eqv3), 2, 2, True, "6.3.2", 2),
    ("assoc", _ass(equal), 2, 2, True, "6.3.2", 2),
    # 6.3.3
    ("symbol?", lambda x: type(x) is Symbol, 1, 1, False, "6.3.3", 1),
    ("symbol->string", _symbol_to_string, 1, 1, False, "6.3.3", 1),
    ("string->symbol", _string_to_symbol, 1, 1, False, "6.3.3", 1),
    # 6.3.4
    ("char?", lambda x: type(x) is Char, 1, 1, False, "6.3.4", 1),
    ("char=?", _char_cmp(lambda a, b: a == b), 1, None, False, "6.3.4", 2),
    ("char<?", _char_cmp(lambda a, b: a < b), 1, None, False, "6.3.4", 2),
    ("char>?", _char_cmp(lambda a, b: a > b), 1, None, False, "6.3.4", 2),
    ("char<=?", _char_cmp(lambda a, b: a <= b), 1, None, False, "6.3.4", 2),
    ("char>=?", _char_cmp(lambda a, b: a >= b), 1, None, False, "6.3.4", 2),
    ("char-ci=?", _char_cmp(lambda a, b: a == b, True), 1, None, False, "6.3.4", 2),
    ("char-ci<?", _char_cmp(lambda a, b: a < b, True), 1, None, False, "6.3.4", 2),
    ("char-ci>?", _char_cmp(lambda a, b: a > b, True), 1, None, False, "6.3.4", 2),
    ("char-ci<=?", _char_cmp(lambda a, b: a <= b, True), 1, None, False, "6.3.4", 2),
    ("char-ci>=?", _char_cmp(lambda a, b: a >= b, True), 1, None, False, "6.3.4", 2),
    ("char-alphabetic?", _char_pred(str.isalpha), 1, 1, False, "6.3.4", 1),
    ("char-numeric?", _char_pred(str.isdigit), 1, 1, False, "6.3.4", 1),
    ("char-whitespace?", _char_pred(str.isspace), 1, 1, False, "6.3.4", 1),
    ("char-upper-case?", _char_pred(str.isupper), 1, 1, False, "6.3.4", 1),
    ("char-lower-case?", _char_pred(str.islower), 1, 1, False, "6.3.4", 1),
    ("char->integer", lambda c: ord(_char(c)), 1, 1, False, "6.3.4", 1),
    ("integer->char", _integer_to_char, 1, 1, False, "6.3.4", 1),
    ("char-upcase", lambda c: Char(_char(c).upper()[0]), 1, 1, False, "6.3.4", 1),
    ("char-downcase", lambda c: Char(_char(c).lower()[0]), 1, 1, False, "6.3.4", 1),
    # 6.3.5
    ("string?", lambda x: type(x) is SString, 1, 1, False, "6.3.5", 1),
    ("make-string", _make_string, 1, 2, True, "6.3.5", 1),
    ("string", _string, 0, None, False, "6.3.5", 1),
    ("string-length", lambda s: len(_str(s).s), 1, 1, False, "6.3.5", 1),
    ("string-ref", _string_ref, 2, 2, False, "6.3.5", 2),
    ("string-set!", _string_set, 3, 3, False, "6.3.5", 3),
    ("string=?", _string_cmp(lambda a, b: a == b), 1, None, False, "6.3.5", 2),
    ("string-ci=?", _string_cmp(lambda a, b: a == b, True), 1, None, False, "6.3.5", 2),
    ("string<?", _string_cmp(lambda a, b: a < b), 1, None, False, "6.3.5", 2),
    ("string>?", _string_cmp(lambda a, b: a > b), 1, None, False, "6.3.5", 2),
    ("string<=?", _string_cmp(lambda a, b: a <= b), 1, None, False, "6.3.5", 2),
    ("string>=?", _string_cmp(lambda a, b: a >= b), 1, None, False, "6.3.5", 2),
    ("string-ci<?", _string_cmp(lambda a, b: a < b, True), 1, None, False, "6.3.5", 2),
    ("string-ci>?", _string_cmp(lambda a, b: a > b, True), 1, None, False, "6.3.5", 2),
    ("string-ci<=?", _string_cmp(lambda a, b: a <= b, True), 1, None, False, "6.3.5", 2),
    ("string-ci>=?", _string_cmp(lambda a, b: a >= b, True), 1, None, False, "6.3.5", 2),
    ("substring", _substring, 3, 3, False, "6.3.5", 3),
    ("string-append", _string_append, 0, None, True, "6.3.5", 2),
    ("string->list", _string_to_list, 1, 1, True, "6.3.5", 1),
    ("list->string", _list_to_string, 1, 1, True, "6.3.5", 1),
    ("string-copy", _string_copy, 1, 1, True, "6.3.5", 1),
    ("string-fill!", _string_fill, 2, 2, True, "6.3.5", 2),
    # 6.3.6
    ("vector?", lambda x: type(x) is Vector, 1, 1, False, "6.3.6", 1),
    ("make-vector", _make_vector, 1, 2, True, "6.3.6", 1),
    ("vector", lambda *xs: Vector(xs), 0, None, False, "6.3.6", 1),
    ("vector-length", lambda v: len(_vec(v)), 1, 1, False, "6.3.6", 1),
    ("vector-ref", _vector_ref, 2, 2, False, "6.3.6", 2),
    ("vector-set!", _vector_set, 3, 3, False, "6.3.6", 3),
    ("vector->list", _vector_to_list, 1, 1, True, "6.3.6", 1),
    ("list->vector", _list_to_vector, 1, 1, True, "6.3.6", 1),
    ("vector-fill!", _vector_fill, 2, 2, True, "6.3.6", 2),
    # 6.4
    ("procedure?", lambda x: isinstance(x, Procedure), 1, 1, False, "6.4", 1),
    ("apply", _apply, 1, None, True, "6.4", 2),
    ("map", _map, 2, None, True, "6.4", 2),
    ("for-each", _for_each, 2, None, True, "6.4", 2),
    ("force", _force, 1, 1, True, "6.4", 1),
    ("call-with-current-continuation", _callcc, 1, 1, True, "6.4", 1),
    ("values", _values, 0, None, False, "6.4", 1),
    ("call-with-values", _call_with_values, 2, 2, True, "6.4", 2),
    ("dynamic-wind", _dynamic_wind, 3, 3, True, "6.4", 3),
    # 6.5
    ("eval", _eval, 2, 2, True, "6.5", 2),
    ("scheme-report-environment", _report_env, 1, 1, False, "6.5", 1),
    ("null-environment", _null_env, 1, 1, False, "6.5", 1),
    ("interaction-environment", lambda: EnvSpec("interaction"), 0, 0, False, "6.5", 0),
]

# Callable from programs but never generated by the grammar.
_EXTRAS = [
    ("error", _error, 1, None, False),
    ("call/cc", _callcc, 1, 1, True),
    ("%output-equal?", output_equal, 2, 2, True),
]


class ProcedureInfo:
    __slots__ = ("name", "section", "arity")

    def __init__(self, name, section, arity):
        self.name = name
        self.section = section
        self.arity = arity

    def __repr__(self):
        return f"ProcedureInfo({self.name!r}, {self.section!r}, {self.arity})"


PROCEDURES = [ProcedureInfo(name, section, arity) for name, _, _, _, _, section, arity in _TABLE]

SECTION_NAMES = {
    "6.1": "equivalence",
    "6.2": "number",
    "6.3.1": "boolean",
    "6.3.2": "list",
    "6.3.3": "symbol",
    "6.3.4": "char",
    "6.3.5": "string",
    "6.3.6": "vector",
    "6.4": "control",
    "6.5": "eval",
}


def builtins() -> dict:
    """Fresh mapping from Symbol to Primitive for every standard procedure."""
    out = {}
    for name, fn, lo, hi, needs_ev, _, _ in _TABLE:
        out[sym(name)] = Primitive(name, fn, lo, hi, needs_ev)
    for name, fn, lo, hi, needs_ev in _EXTRAS:
        out[sym(name)] = Primitive(name, fn, lo, hi, needs_ev)
    return out

