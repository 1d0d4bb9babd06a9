import math

import pytest

from glsearch.default_grammar import default_grammar, default_grammar_text
from glsearch.grammar import (
    BEGIN,
    END,
    Grammar,
    GrammarError,
    Marker,
    NonTerminal,
    Procedural,
    Production,
    ZetaTable,
    dumps,
    load_grammar,
    loads,
    parse_symbols,
    save_grammar,
    symbol_text,
    validate,
    zeta_alternatives,
)
from glsearch.scheme.stdlib import PROCEDURES


def tiny(*lines, start="s"):
    return loads(f"%start {start}\n" + "\n".join(lines) + "\n")


def test_default_grammar_is_valid():
    g = default_grammar()
    assert validate(g) == []
    assert g.start == "program"
    calls = [p.body for p in g.alternatives("procedure-call")]
    assert (NonTerminal("standard-procedure"),) in calls
    assert (NonTerminal("previous-solution"),) in calls


def test_every_library_procedure_has_a_production():
    g = default_grammar()
    names = set()
    for head, prods in g.productions.items():
        if head.endswith("-procedure") and head != "standard-procedure":
            names.update(p.body[1] for p in prods)
    assert names == {p.name for p in PROCEDURES}


def test_default_round_trip():
    g = default_grammar()
    back = loads(dumps(g))
    assert back == g
    assert dumps(back) == dumps(g)
    assert loads(default_grammar_text()) == g


def test_bad_sums_rejected():
    with pytest.raises(GrammarError, match="sum"):
        tiny("<s> ::= 0.6 : a", "<s> ::= 0.5 : b")
    with pytest.raises(GrammarError, match="sum"):
        tiny("<s> ::= 0.9 : a")


def test_sum_tolerance_boundary():
    g = tiny("<s> ::= 0.5 : a", "<s> ::= 0.499999999 : b")
    assert validate(g) == []


def test_undefined_nonterminal_rejected():
    with pytest.raises(GrammarError, match="foo"):
        tiny("<s> ::= 1.0 : <foo>")


def test_unknown_procedural_rejected():
    with pytest.raises(GrammarError, match="unknown procedural"):
        tiny("<s> ::= 1.0 : <!mystery>")


def test_parse_errors_carry_line_numbers():
    with pytest.raises(GrammarError, match=":3:"):
        loads("%start s\n<s> ::= 1.0 : a\n<s> = nonsense\n")
    with pytest.raises(GrammarError, match="unknown directive"):
        loads("%bogus 1\n")


def test_symbol_syntax():
    syms = parse_symbols('( <expression> <!integer-literal> <@begin> <@end> "\\"" "<" x )')
    assert syms[1] == NonTerminal("expression")
    assert syms[2] == Procedural("integer-literal")
    assert syms[3] is BEGIN and syms[4] is END
    assert syms[5] == '"' and syms[6] == "<"
    for s in syms:
        if isinstance(s, str):
            assert parse_symbols(symbol_text(s)) == (s,)
    assert isinstance(BEGIN, Marker)


def test_canonical_order_and_deterministic_dump():
    a = tiny("<s> ::= 0.25 : b", "<s> ::= 0.5 : a", "<s> ::= 0.25 : a a")
    b = tiny("<s> ::= 0.25 : a a", "<s> ::= 0.25 : b", "<s> ::= 0.5 : a")
    assert dumps(a) == dumps(b)
    bodies = [p.body for p in a.alternatives("s")]
    assert bodies == [("a",), ("a", "a"), ("b",)]


def test_save_and_load(tmp_path):
    g = default_grammar()
    # a grammar with awkward probabilities survives exactly
    weird = g.with_head("boolean", [Production("boolean", ("#t",), 1 / 3), Production("boolean", ("#f",), 2 / 3)])
    path = tmp_path / "g.txt"
    save_grammar(weird, path)
    back = load_grammar(path)
    for p, q in zip(weird.all_productions(), back.all_productions()):
        assert p == q
    with pytest.raises(OSError):
        save_grammar(g, tmp_path / "missing-dir" / "g.txt")


def test_zeta_table():
    z = ZetaTable()
    alts = zeta_alternatives(z)
    assert len(alts) == 1024
    assert abs(math.fsum(p for _, p in alts) - 1.0) <= 1e-12
    assert z.p(1) / z.p(2) == 4.0
    assert all(alts[i][1] > alts[i + 1][1] for i in range(1023))
    partial = 0.0
    for j in range(1, 1025):
        partial += 1.0 / (j * j)
    assert abs(z.p(1) - 1.0 / partial) <= 1e-12
    assert round(z.p(1), 5) == 0.60829


def test_solution_directive_round_trip():
    text = (
        "%start s\n%hook h\n"
        "%solution sqr ::= ( sqr <s> ) : (define (sqr x) (* x x))\n"
        "<s> ::= 0.5 : a\n<s> ::= 0.5 : <h>\n"
    )
    g = loads(text)
    assert g.solution("sqr").definition == "(define (sqr x) (* x x))"
    assert loads(dumps(g)) == g
    assert g.alternatives("h") == ()
    assert validate(Grammar.from_productions([Production("s", ("a",), 1.0)], start="s")) == []
