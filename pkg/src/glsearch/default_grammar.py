"""The shipped Scheme grammar.

Generated from the standard-library table so the <standard-procedure>
alternatives always match what the interpreter can run.  Every head gets
uniform probabilities over its alternatives.
"""

from __future__ import annotations

import re
from functools import lru_cache

from .grammar import Grammar, loads, symbol_text
from .scheme.stdlib import PROCEDURES, SECTION_NAMES

# Characters available to character and string literals.
LITERAL_CHARS = ("a", "b", "c", "x", "y", "z", "0", "1", " ")
# Symbols available inside quoted data.
DATUM_SYMBOLS = ("a", "b", "c")

# Hand-written part of the grammar: one head per line group, alternatives
# separated by " | ".  Probabilities are filled in uniformly.
_RULES = """
program             := <command-or-definition> | <command-or-definition> <program>
command-or-definition := <expression> | <definition>
definition          := ( define <!variable-definition> <expression> <@bind> ) | ( define ( <!variable-definition> <@bind> <@begin> <def-formals> <@bind> ) <body> <@end> )
def-formals         := | <!variable-definition> <def-formals>
body                := <expression> | <definition> <body>
expression          := <variable> | <literal> | <procedure-call> | <special-form>
variable            := <!variable-reference>
literal             := <quotation> | <self-evaluating>
self-evaluating     := <boolean> | <number> | <character> | <string>
boolean             := #t | #f
number              := <uinteger-10>
uinteger-10         := 0 | <!integer-literal>
character           := {chars}
string              := "\\"" <string-chars> "\\""
string-chars        := | <string-char> <string-chars>
string-char         := {string_chars}
quotation           := ( quote <datum> )
datum               := <boolean> | <number> | <character> | <symbol-datum> | <list-datum>
symbol-datum        := {symbols}
list-datum          := ( ) | ( <datum> <datum-tail> )
datum-tail          := | <datum> <datum-tail>
procedure-call      := <standard-procedure> | <previous-solution> | ( <operator> <operands> )
operator            := <expression>
operands            := | <expression> <operands>
special-form        := <lambda-expression> | <conditional> | <assignment> | <derived-expression>
lambda-expression   := ( lambda <@begin> ( <formals> ) <@bind> <body> <@end> )
formals             := | <!variable-definition> <formals>
conditional         := ( if <expression> <expression> <expression> ) | ( if <expression> <expression> )
assignment          := ( set! <variable> <expression> )
derived-expression  := <cond-expression> | <case-expression> | <and-expression> | <or-expression> | <let-expression> | <let*-expression> | <letrec-expression> | <begin-expression> | <do-expression> | <delay-expression>
cond-expression     := ( cond <cond-clause> ( else <expression> ) ) | ( cond <cond-clause> <cond-clause> ( else <expression> ) )
cond-clause         := ( <expression> <expression> )
case-expression     := ( case <expression> <case-clause> ( else <expression> ) )
case-clause         := ( ( <datum> <datum-tail> ) <expression> )
and-expression      := ( and <expression> <test-sequence> )
or-expression       := ( or <expression> <test-sequence> )
test-sequence       := <expression> | <expression> <test-sequence>
let-expression      := ( let <@begin> ( <let-bindings> ) <@bind> <body> <@end> )
let-bindings        := <let-binding> | <let-binding> <let-bindings>
let-binding         := ( <!variable-definition> <expression> )
let*-expression     := ( let* <@begin> ( <let*-bindings> ) <body> <@end> )
let*-bindings       := <let*-binding> | <let*-binding> <let*-bindings>
let*-binding        := ( <!variable-definition> <expression> <@bind> )
letrec-expression   := ( letrec <@begin> <!letrec-bindings:1> <body> <@end> ) | ( letrec <@begin> <!letrec-bindings:2> <body> <@end> )
begin-expression    := ( begin <sequence> )
sequence            := <expression> | <expression> <sequence>
do-expression       := ( do <@begin> ( ( <!variable-definition> <expression> <@bind> <expression> ) ) ( <expression> <expression> ) <@end> )
delay-expression    := ( delay <expression> )
"""


def _category_head(section: str) -> str:
    return SECTION_NAMES[section] + "-procedure"


def _rule_lines() -> list[tuple[str, list[str]]]:
    rules = []
    fill = {
        "chars": " | ".join(symbol_text("#\\" + ("space" if c == " " else c)) for c in LITERAL_CHARS),
        "string_chars": " | ".join(symbol_text(c) for c in LITERAL_CHARS),
        "symbols": " | ".join(DATUM_SYMBOLS),
    }
    for line in _RULES.strip().splitlines():
        head, _, alts = line.partition(":=")
        alts = alts.strip().format(**fill)
        rules.append((head.strip(), [a.strip() for a in re.split(r"(?<!\S)\|(?!\S)", alts)]))
    categories = []
    by_cat: dict[str, list[str]] = {}
    for info in PROCEDURES:
        head = _category_head(info.section)
        if head not in by_cat:
            categories.append(head)
            by_cat[head] = []
        body = " ".join(["(", symbol_text(info.name)] + ["<expression>"] * info.arity + [")"])
        by_cat[head].append(body)
    rules.append(("standard-procedure", [f"<{c}>" for c in categories]))
    for c in categories:
        rules.append((c, by_cat[c]))
    return rules


@lru_cache(maxsize=1)
def default_grammar_text() -> str:
    lines = [
        "# Default grammar for the Scheme subset; uniform initial probabilities.",
        "%start program",
        "%zeta 2.0 1024",
        "%hook previous-solution",
    ]
    for head, alts in _rule_lines():
        p = 1.0 / len(alts)
        for alt in alts:
            lines.append(f"<{head}> ::= {p!r} : {alt}".rstrip())
    return "\n".join(lines) + "\n"


@lru_cache(maxsize=1)
def default_grammar() -> Grammar:
    return loads(default_grammar_text(), "<default grammar>")
