"""Incremental operator induction over training sequences.

A problem is solved prefix by prefix: first its first input/output pair,
then the first two, and so on.  Every accepted solution, partial or
complete, goes into the corpus and triggers the configured grammar
updates before the next search.
"""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from .derivation import SententialForm, StaticEnvironment, initial_form
from .grammar import Grammar, NonTerminal, save_grammar, validate
from .lsearch import SearchConfig, SearchOutcome, TestOracle, lsearch, probe_error_rate
from .scheme.machine import Machine
from .scheme.printer import to_string
from .scheme.reader import SchemeSyntaxError, read
from .scheme.types import NIL, Pair, Symbol, from_list, sym, to_list
from .updates import (
    SolutionCorpus,
    SolutionRecord,
    UpdateConfig,
    add_idiom,
    add_solution,
    extract_idioms,
    mine_subprograms,
    mined_productions,
    retire_solution,
    update_probabilities,
)

__all__ = [
    "Problem",
    "TrainingSequence",
    "SequenceError",
    "PrefixReport",
    "ProblemReport",
    "parse_sequence",
    "load_sequence",
    "toy_sequence",
    "TOY_SEQUENCE_TEXT",
    "FACTORIAL_TEXT",
    "make_test_oracle",
    "run_problem",
    "run_sequence",
    "format_reports",
    "reports_to_json",
]

_AND = sym("and")
_DEFINE = sym("define")
_QUOTE = sym("quote")
_CHECK = sym("%output-equal?")

TOY_SEQUENCE_TEXT = """\
; The built-in toy training sequence.  Pair values are our own choices.
(problem (name id) (params (x)) (pairs ((1) 1) ((2) 2) ((3) 3)))
(problem (name sqr) (params (x)) (pairs ((1) 1) ((2) 4) ((3) 9)))
(problem (name add) (params (x y)) (pairs ((1 2) 3) ((2 3) 5) ((3 5) 8)))
(problem (name is0) (params (x)) (pairs ((0) #t) ((1) #f) ((2) #f)))
(problem (name pow4) (params (x)) (pairs ((2) 16) ((3) 81)))
(problem (name nand) (params (x y)) (pairs ((#f #f) #t) ((#f #t) #t) ((#t #f) #t) ((#t #t) #f)))
(problem (name nor) (params (x y)) (pairs ((#f #f) #t) ((#f #t) #f) ((#t #f) #f) ((#t #t) #f)))
(problem (name xor) (params (x y)) (pairs ((#f #f) #f) ((#f #t) #t) ((#t #f) #t) ((#t #t) #f)))
"""

FACTORIAL_TEXT = """\
(problem (name fact) (params (x)) (pairs ((0) 1) ((1) 1) ((2) 2) ((3) 6) ((4) 24) ((5) 120) ((6) 720)))
"""


class SequenceError(ValueError):
    """Malformed training-sequence text."""


@dataclass(frozen=True)
class Problem:
    name: str
    params: tuple
    pairs: tuple  # ((inputs tuple, output), ...)
    overrides: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if not self.pairs:
            raise SequenceError(f"problem {self.name}: needs at least one pair")
        for inputs, _ in self.pairs:
            if len(inputs) != len(self.params):
                raise SequenceError(
                    f"problem {self.name}: pair has {len(inputs)} inputs for {len(self.params)} parameters"
                )

    @property
    def call(self) -> tuple:
        return ("(", self.name) + (NonTerminal("expression"),) * len(self.params) + (")",)


@dataclass
class TrainingSequence:
    problems: list
    update: UpdateConfig = UpdateConfig()
    search: SearchConfig = SearchConfig()

    def __post_init__(self):
        names = [p.name for p in self.problems]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise SequenceError(f"duplicate problem names: {', '.join(sorted(dup))}")


# --- sequence files -------------------------------------------------------------------

_SEARCH_KEYS = {
    "t0": "t0",
    "tq": "tq",
    "max-trials": "max_trials",
    "max-epochs": "max_epochs",
    "max-fuel": "max_fuel",
    "strategy": "strategy",
    "memory-cap": "memory_cap",
}


def _parse_problem(form, where: str) -> Problem:
    items = to_list(form) if type(form) is Pair else None
    if not items or items[0] is not sym("problem"):
        raise SequenceError(f"{where}: expected (problem ...)")
    fields = {}
    for part in items[1:]:
        sub = to_list(part) if type(part) is Pair else None
        if not sub or type(sub[0]) is not Symbol:
            raise SequenceError(f"{where}: malformed clause {to_string(part)}")
        fields[str(sub[0])] = sub[1:]
    try:
        (name,) = fields["name"]
        (params,) = fields["params"]
        pairs_raw = fields["pairs"]
    except (KeyError, ValueError):
        raise SequenceError(f"{where}: problem needs (name n), (params (...)) and (pairs ...)")
    params = tuple(str(p) for p in to_list(params)) if params is not NIL else ()
    pairs = []
    for pr in pairs_raw:
        pi = to_list(pr) if type(pr) is Pair else None
        if not pi or len(pi) != 2:
            raise SequenceError(f"{where}: pair must look like ((inputs ...) output)")
        inputs = tuple(to_list(pi[0])) if pi[0] is not NIL else ()
        pairs.append((inputs, pi[1]))
    overrides = {}
    for entry in fields.get("search", []):
        kv = to_list(entry) if type(entry) is Pair else None
        if not kv or len(kv) != 2 or str(kv[0]) not in _SEARCH_KEYS:
            raise SequenceError(f"{where}: bad search override {to_string(entry)}")
        value = kv[1]
        overrides[_SEARCH_KEYS[str(kv[0])]] = str(value) if type(value) is Symbol else value
    try:
        return Problem(str(name), params, tuple(pairs), overrides)
    except SequenceError as e:
        raise SequenceError(f"{where}: {e}") from None


def parse_sequence(text: str, source: str = "<sequence>") -> list:
    try:
        forms = read(text)
    except SchemeSyntaxError as e:
        raise SequenceError(f"{source}: {e}") from None
    problems = [_parse_problem(f, f"{source}: problem {i}") for i, f in enumerate(forms, 1)]
    TrainingSequence(problems)  # name uniqueness
    return problems


def load_sequence(path) -> list:
    path = Path(path)
    return parse_sequence(path.read_text(encoding="utf-8"), str(path))


def toy_sequence(factorial: bool = False) -> list:
    text = TOY_SEQUENCE_TEXT + (FACTORIAL_TEXT if factorial else "")
    return parse_sequence(text, "<toy sequence>")


# --- oracles --------------------------------------------------------------------------------


def _quoted(x):
    return from_list([_QUOTE, x])


def make_test_oracle(prob: Problem, k: int, machine: Machine | None = None) -> tuple[TestOracle, SententialForm]:
    """Oracle for the first ``k`` pairs plus the ``<body>`` start form with the parameters bound.

    The test program is ``(define (name params...) body...)`` followed by
    ``(and (%output-equal? (name inputs...) output) ...)``.
    """
    if not 1 <= k <= len(prob.pairs):
        raise ValueError(f"prefix length {k} out of range for {prob.name}")
    name = sym(prob.name)
    head = from_list([name] + [sym(p) for p in prob.params])
    checks = []
    for inputs, output in prob.pairs[:k]:
        call = from_list([name] + [_quoted(i) for i in inputs])
        checks.append(from_list([_CHECK, call, _quoted(output)]))
    test = from_list([_AND] + checks)

    def build(forms):
        return [Pair(_DEFINE, Pair(head, from_list(forms))), test]

    start = initial_form(NonTerminal("body"), StaticEnvironment.with_params(prob.params))
    return TestOracle(build, machine), start


# --- reports -------------------------------------------------------------------------------------


@dataclass
class PrefixReport:
    k: int
    solved: bool
    trials: int
    generated: int
    fuel: int
    epochs: int
    seconds: float
    stop_reason: str
    solution: str | None
    probability: float | None
    outcomes: dict
    epoch_stats: list

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "solved": self.solved,
            "trials": self.trials,
            "generated": self.generated,
            "fuel": self.fuel,
            "epochs": self.epochs,
            "seconds": round(self.seconds, 3),
            "stop_reason": self.stop_reason,
            "solution": self.solution,
            "probability": self.probability,
            "outcomes": self.outcomes,
            "epoch_stats": self.epoch_stats,
        }


@dataclass
class ProblemReport:
    problem: str
    pairs: int
    prefixes: list = field(default_factory=list)
    solved: bool = False
    solution: str | None = None
    probe: dict | None = None

    @property
    def trials(self) -> int:
        return sum(p.trials for p in self.prefixes)

    @property
    def fuel(self) -> int:
        return sum(p.fuel for p in self.prefixes)

    def as_dict(self) -> dict:
        return {
            "problem": self.problem,
            "pairs": self.pairs,
            "solved": self.solved,
            "solution": self.solution,
            "trials": self.trials,
            "fuel": self.fuel,
            "probe": self.probe,
            "prefixes": [p.as_dict() for p in self.prefixes],
        }


def _prefix_report(k: int, out: SearchOutcome) -> PrefixReport:
    return PrefixReport(
        k=k,
        solved=out.solved,
        trials=out.trials,
        generated=out.generated,
        fuel=out.fuel_used,
        epochs=len(out.epochs),
        seconds=out.elapsed,
        stop_reason=out.stop_reason,
        solution=out.text,
        probability=out.solution.prob if out.solution is not None else None,
        outcomes=dict(sorted(out.outcomes.items())),
        epoch_stats=list(out.epochs),
    )


# --- the induction loop -------------------------------------------------------------------------


def _check(g: Grammar, what: str) -> Grammar:
    problems = validate(g)
    if problems:
        raise AssertionError(f"grammar invalid after {what}: {problems[:3]}")
    return g


def apply_updates(
    g: Grammar,
    corpus: SolutionCorpus,
    rec: SolutionRecord,
    ucfg: UpdateConfig,
    machine: Machine,
    on_update: Callable | None = None,
) -> Grammar:
    """Commit ``rec`` to the corpus and run every enabled update, validating after each."""

    def step(new, what):
        _check(new, what)
        if on_update is not None:
            on_update(what, new)
        return new

    corpus.add(rec)
    if ucfg.smoothing:
        g = step(update_probabilities(g, corpus, ucfg.alpha, ucfg.include_partial), "smoothing")
    if ucfg.reuse and (rec.complete or ucfg.reuse_mode == "library"):
        # at most one library entry per problem stays callable: the newest
        for old in [s.name for s in g.solutions if s.name.startswith(rec.problem + "-") or s.name == rec.problem]:
            if _same_problem(old, rec.problem):
                g = step(retire_solution(g, old), "retire")
        g = step(add_solution(g, rec, ucfg.gamma, machine, ucfg.reuse_mode), "add-solution")
    if ucfg.idioms and ucfg.prune_levels:
        for head, form in extract_idioms(rec.tree(), ucfg.prune_levels):
            g = step(add_idiom(g, head, form, ucfg.gamma), "idiom")
    if ucfg.mining and rec.complete:
        mined = mine_subprograms(corpus, ucfg.support)
        for body in mined_productions(mined, [s.name for s in g.solutions]):
            g = step(add_idiom(g, "expression", body, ucfg.gamma), "mining")
    return g


def _same_problem(solution_name: str, problem: str) -> bool:
    if solution_name == problem:
        return True
    base, _, suffix = solution_name.rpartition("-")
    return base == problem and suffix.isdigit()


def run_problem(
    prob: Problem,
    g: Grammar,
    cfg: SearchConfig,
    ucfg: UpdateConfig,
    machine: Machine,
    corpus: SolutionCorpus,
    progress: Callable | None = None,
    on_update: Callable | None = None,
    seed: bool = False,
) -> tuple[Grammar, SolutionRecord | None, ProblemReport]:
    """Solve ``prob`` prefix by prefix, updating the grammar after each accepted solution.

    Partial solutions are callable as ``name-k``; the complete one as ``name``.
    Stops at the first prefix that exhausts its budget, keeping earlier
    partial solutions.  With ``seed`` the previous prefix's solution is
    tried once against the longer prefix before a fresh search.
    """
    if prob.overrides:
        cfg = replace(cfg, **prob.overrides)
    report = ProblemReport(prob.name, len(prob.pairs))
    complete = None
    n = len(prob.pairs)
    last = None
    for k in range(1, n + 1):
        oracle, start = make_test_oracle(prob, k, machine)
        out = None
        if seed and last is not None:
            out = _seeded(oracle, last, cfg)
        if out is None:
            out = lsearch(g, oracle, cfg, start, progress=progress)
        report.prefixes.append(_prefix_report(k, out))
        if not out.solved:
            break
        body_forms = out.program
        is_complete = k == n
        name = prob.name if is_complete else f"{prob.name}-{k}"
        head = " ".join([name] + list(prob.params))
        definition = f"(define ({head}) {' '.join(to_string(f) for f in body_forms)})"
        call = ("(", name) + prob.call[2:]
        rec = SolutionRecord(
            problem=prob.name,
            name=name,
            params=prob.params,
            call=call,
            definition=definition,
            body=out.text,
            trace=out.trace,
            start="body",
            pairs=k,
            complete=is_complete,
            trials=out.trials,
            fuel=out.fuel_used,
        )
        g = apply_updates(g, corpus, rec, ucfg, machine, on_update)
        last = out
        report.solution = definition
        if is_complete:
            complete = rec
            report.solved = True
    return g, complete, report


def _seeded(oracle: TestOracle, prev: SearchOutcome, cfg: SearchConfig) -> SearchOutcome | None:
    # one trial of the previous prefix's program, with the fuel it would get in epoch 1
    fuel = max(1, int(prev.solution.prob * cfg.t0))
    outcome = oracle.run(prev.program, fuel)
    if not oracle.accepts(outcome):
        return None
    return replace(
        prev,
        trials=1,
        generated=1,
        fuel_used=outcome.steps,
        epochs=[],
        outcomes=Counter({outcome.kind: 1}),
        elapsed=0.0,
        stop_reason="seeded",
    )


def run_sequence(
    problems: list,
    g0: Grammar,
    cfg: SearchConfig = SearchConfig(),
    ucfg: UpdateConfig = UpdateConfig(),
    machine: Machine | None = None,
    corpus: SolutionCorpus | None = None,
    out_dir=None,
    progress: Callable | None = None,
    on_update: Callable | None = None,
    probe_epoch: int | None = 12,
    log: Callable | None = None,
    seed: bool = False,
) -> tuple[Grammar, list]:
    """Fold :func:`run_problem` over ``problems``, threading the grammar.

    With ``out_dir`` the grammar and corpus are written after every
    problem.  With ``probe_epoch`` each problem first gets an error-rate
    probe: all candidates of that search epoch are run once under the
    grammar the problem starts with.
    """
    machine = machine if machine is not None else Machine()
    corpus = corpus if corpus is not None else SolutionCorpus()
    g = _check(g0, "loading")
    reports = []
    for prob in problems:
        began = time.perf_counter()
        probe = None
        if probe_epoch:
            oracle, start = make_test_oracle(prob, 1, machine)
            probe = probe_error_rate(g, oracle, start, cfg.t0 * 2 ** (probe_epoch - 1), cfg.tq)
        g, _, report = run_problem(prob, g, cfg, ucfg, machine, corpus, progress, on_update, seed)
        report.probe = probe
        reports.append(report)
        if out_dir is not None:
            out = Path(out_dir)
            save_grammar(g, out / "grammar.g")
            corpus.save(out / "corpus.jsonl")
        if log is not None:
            status = "solved" if report.solved else "unsolved"
            log(f"{prob.name}: {status} after {report.trials} trials ({time.perf_counter() - began:.1f}s)")
    return g, reports


def format_reports(reports: list) -> str:
    """Line-oriented plain-text report."""
    lines = []
    for r in reports:
        status = "solved" if r.solved else "UNSOLVED"
        lines.append(f"problem {r.problem}: {status}, {r.trials} trials, {r.fuel} fuel")
        if r.probe is not None:
            lines.append(
                f"  probe t={r.probe['t']}: {r.probe['errors']}/{r.probe['candidates']} errors"
                f" ({100 * r.probe['error_rate']:.1f}%)"
            )
        for p in r.prefixes:
            sol = p.solution if p.solution is not None else "-"
            lines.append(
                f"  pairs 1..{p.k}: {'ok' if p.solved else 'no'} trials={p.trials} generated={p.generated}"
                f" fuel={p.fuel} epochs={p.epochs} solution: {sol}"
            )
        if r.solution:
            lines.append(f"  definition: {r.solution}")
    return "\n".join(lines) + "\n"


def reports_to_json(reports: list, include_timing: bool = True) -> str:
    data = [r.as_dict() for r in reports]
    if not include_timing:
        for d in data:
            for p in d["prefixes"]:
                p.pop("seconds", None)
    return json.dumps({"schema": "glsearch-report/1", "problems": data}, indent=2, sort_keys=True) + "\n"
