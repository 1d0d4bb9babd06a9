import json

import pytest

from glsearch.default_grammar import default_grammar
from glsearch.derivation import to_program
from glsearch.grammar import validate
from glsearch.induction import (
    Problem,
    SequenceError,
    TrainingSequence,
    format_reports,
    load_sequence,
    make_test_oracle,
    parse_sequence,
    reports_to_json,
    run_problem,
    run_sequence,
    toy_sequence,
)
from glsearch.lsearch import SearchConfig
from glsearch.scheme.machine import Machine
from glsearch.updates import SolutionCorpus, UpdateConfig


def test_toy_sequence_shape():
    probs = toy_sequence()
    assert [p.name for p in probs] == ["id", "sqr", "add", "is0", "pow4", "nand", "nor", "xor"]
    assert [len(p.pairs) for p in probs] == [3, 3, 3, 3, 2, 4, 4, 4]
    fact = toy_sequence(factorial=True)[-1]
    assert fact.name == "fact" and len(fact.pairs) == 7


def test_sequence_parsing_and_overrides(tmp_path):
    text = "(problem (name f) (params (a b)) (pairs ((1 2) 3)) (search (max-trials 50) (strategy best)))"
    (p,) = parse_sequence(text)
    assert p.params == ("a", "b")
    assert p.overrides == {"max_trials": 50, "strategy": "best"}
    path = tmp_path / "seq.scm"
    path.write_text(text)
    assert load_sequence(path) == [p]


@pytest.mark.parametrize(
    "text",
    [
        "(problem (name f) (params (x)))",
        "(problem (name f) (params (x)) (pairs ((1 2) 3)))",
        "(problem (name f) (params (x)) (pairs))",
        "(foo)",
        "(problem (name f) (params (x)) (pairs ((1) 1)) (search (bogus 1)))",
        "(problem (name f) (params (x)) (pairs ((1) 1)))(problem (name f) (params (x)) (pairs ((1) 1)))",
        "(problem (name f",
    ],
)
def test_sequence_errors(text):
    with pytest.raises(SequenceError):
        parse_sequence(text)


def test_duplicate_names_rejected():
    p = Problem("f", ("x",), (((1,), 1),))
    with pytest.raises(SequenceError):
        TrainingSequence([p, p])


def _check(prob, k, body, fuel=10_000):
    oracle, start = make_test_oracle(prob, k, Machine())
    return oracle.run(to_program(body.split()), fuel), oracle


def test_oracle_examples():
    (sq,) = parse_sequence("(problem (name sqr) (params (x)) (pairs ((6) 36) ((2) 5)))")
    out, oracle = _check(sq, 1, "( * x x )")
    assert oracle.accepts(out)
    out, oracle = _check(sq, 1, "( quote 0 )")
    assert not oracle.accepts(out)
    out, oracle = _check(sq, 2, "( * x x )")  # second pair is deliberately wrong
    assert not oracle.accepts(out)
    out, oracle = _check(sq, 1, "( sqr x )", fuel=500)
    assert out.kind == "fuel-exhausted" and not oracle.accepts(out)
    with pytest.raises(ValueError):
        make_test_oracle(sq, 3)


def test_oracle_compares_structured_outputs():
    (p,) = parse_sequence("(problem (name pr) (params (x)) (pairs ((1) (1 1))))")
    out, oracle = _check(p, 1, "( list x x )")
    assert oracle.accepts(out)


def test_empty_sequence_returns_grammar_unchanged():
    g = default_grammar()
    g2, reports = run_sequence([], g, probe_epoch=None)
    assert g2 == g and reports == []


def test_short_sequence_learns():
    probs = toy_sequence()[:3]
    g = default_grammar()
    seen = []
    corpus = SolutionCorpus()
    g2, reports = run_sequence(
        probs, g, probe_epoch=None, corpus=corpus, on_update=lambda what, new: seen.append((what, validate(new)))
    )
    assert [r.solved for r in reports] == [True, True, True]
    assert g2 != g
    assert seen and all(v == [] for _, v in seen)
    # library holds every complete and partial solution; only the newest per problem is callable
    names = {s.name for s in g2.solutions}
    assert {"id", "sqr", "add"} <= names
    callable_ = [p.body[1] for p in g2.alternatives("previous-solution")]
    assert sorted(callable_) == ["add", "id", "sqr"]
    assert [r.name for r in corpus.records if r.complete] == ["id", "sqr", "add"]
    text = format_reports(reports)
    assert "sqr" in text
    data = json.loads(reports_to_json(reports, include_timing=False))
    assert data["schema"] == "glsearch-report/1"
    assert "seconds" not in json.dumps(data)


def test_pow4_reuses_sqr():
    probs = [p for p in toy_sequence() if p.name in ("sqr", "pow4")]
    g, reports = run_sequence(probs, default_grammar(), probe_epoch=None)
    assert all(r.solved for r in reports)
    # the complete solution may delegate to a partial one; follow the library
    name = "pow4"
    while True:
        body = g.solution(name).definition.split(")", 1)[1]
        if "(pow4-" not in body:
            break
        name = "pow4-" + body.split("(pow4-")[1].split()[0]
    assert "(sqr " in body


def test_partial_solutions_stop_at_first_failure():
    (p,) = parse_sequence("(problem (name w) (params (x)) (pairs ((1) 1) ((2) 77777)))")
    cfg = SearchConfig(max_epochs=3)
    g, rec, report = run_problem(p, default_grammar(), cfg, UpdateConfig(), Machine(), SolutionCorpus())
    assert rec is None and not report.solved
    assert report.prefixes[0].solved and not report.prefixes[1].solved
    assert report.solution.startswith("(define (w-1 x)")
    assert g.solution("w-1") is not None


def test_seeded_prefix_takes_one_trial():
    (p,) = parse_sequence("(problem (name ident) (params (x)) (pairs ((1) 1) ((2) 2) ((3) 3)))")
    _, rec, report = run_problem(p, default_grammar(), SearchConfig(), UpdateConfig(), Machine(), SolutionCorpus(), seed=True)
    assert report.solved
    assert [pr.trials for pr in report.prefixes[1:]] == [1, 1]
    assert [pr.stop_reason for pr in report.prefixes[1:]] == ["seeded", "seeded"]


def test_single_pair_problem():
    (p,) = parse_sequence("(problem (name one) (params (x)) (pairs ((5) 5)))")
    g, rec, report = run_problem(p, default_grammar(), SearchConfig(), UpdateConfig(), Machine(), SolutionCorpus())
    assert report.solved and rec.name == "one" and rec.complete


def test_probe_is_recorded():
    (p,) = parse_sequence("(problem (name one) (params (x)) (pairs ((5) 5)))")
    _, (report,) = run_sequence([p], default_grammar(), probe_epoch=3)
    assert report.probe["t"] == 8000 * 4
    assert report.probe["candidates"] > 0
    assert 0.0 <= report.probe["error_rate"] <= 1.0


def test_out_dir_checkpoints(tmp_path):
    probs = toy_sequence()[:1]
    run_sequence(probs, default_grammar(), probe_epoch=None, out_dir=tmp_path)
    assert (tmp_path / "grammar.g").exists() and (tmp_path / "corpus.jsonl").exists()
