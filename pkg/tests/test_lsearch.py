import math
import random

import pytest

from glsearch.default_grammar import default_grammar
from glsearch.derivation import StaticEnvironment, initial_form, sentence_text
from glsearch.grammar import Grammar, NonTerminal, Production, body_text, loads
from glsearch.lsearch import (
    MemoryCapExceeded,
    SearchConfig,
    TestOracle,
    enumerate_best_first,
    enumerate_dfs,
    enumerate_hybrid,
    lsearch,
)
from glsearch.scheme.types import from_list, sym

# --- independent brute-force enumerator -------------------------------------------------
#
# Builds derivation *trees* recursively (not leftmost sentential forms), so it
# shares no code with the enumerators under test.  Each result carries the
# productions in pre-order, which is exactly the leftmost-derivation order.


class TooMany(Exception):
    pass


def brute_force(g: Grammar, start: str, horizon: float, limit: int = 10_000):
    out = []

    def derive(symbol, min_p):
        if not isinstance(symbol, NonTerminal):
            yield (symbol,), 1.0, ()
            return
        for prod in g.alternatives(symbol.name):
            if prod.prob < min_p:
                continue
            for toks, q, steps in derive_seq(prod.body, min_p / prod.prob):
                yield toks, prod.prob * q, ((prod.head, body_text(prod.body)),) + steps

    def derive_seq(body, min_p):
        if not body:
            yield (), 1.0, ()
            return
        for t1, q1, s1 in derive(body[0], min_p):
            if q1 < min_p:
                continue
            for t2, q2, s2 in derive_seq(body[1:], min_p / q1):
                yield t1 + t2, q1 * q2, s1 + s2

    for toks, q, steps in derive(NonTerminal(start), horizon * (1 - 1e-9)):
        out.append((toks, q, steps))
        if len(out) > limit:
            raise TooMany
    return out


def as_keys(forms):
    keys = []
    for f in forms:
        steps = tuple((p.head, body_text(p.body)) for _, p in f.trace_list())
        keys.append((tuple(f.tokens()), steps))
    return keys


def random_toy_grammar(rng: random.Random):
    n = rng.randint(1, 6)
    names = [f"n{i}" for i in range(n)]
    prods = []
    for name in names:
        k = rng.randint(2, 4)
        if rng.random() < 0.3:
            weights = [1.0] * k  # exercise ties
        else:
            weights = [rng.random() + 0.05 for _ in range(k)]
        total = math.fsum(weights)
        for j, w in enumerate(weights):
            body = []
            for _ in range(rng.randint(0, 3)):
                if rng.random() < 0.35:
                    body.append(NonTerminal(rng.choice(names)))
                else:
                    body.append(rng.choice("abc"))
            # keep bodies distinct within a head
            body.append(f"t{j}")
            prods.append(Production(name, tuple(body), w / total))
    return Grammar.from_productions(prods, start="n0")


def test_enumerators_match_brute_force_on_random_grammars():
    rng = random.Random(20240611)
    checked = 0
    while checked < 120:
        g = random_toy_grammar(rng)
        horizon = 10 ** -rng.uniform(0.3, 3.0)
        try:
            expected = brute_force(g, "n0", horizon)
        except TooMany:
            continue
        want = {}
        for toks, q, steps in expected:
            if q >= horizon:
                want[(toks, steps)] = q
        # sentences within rounding of the horizon are ambiguous: pick another horizon
        if any(abs(q - horizon) <= 1e-9 * horizon for _, q, _ in expected):
            continue
        start = initial_form(NonTerminal("n0"))
        runs = {
            "dfs": list(enumerate_dfs(g, start, horizon)),
            "best": list(enumerate_best_first(g, start, horizon)),
            "hybrid": list(enumerate_hybrid(g, start, horizon, 8)),
        }
        for name, forms in runs.items():
            keys = as_keys(forms)
            assert len(keys) == len(set(keys)), name
            assert set(keys) == set(want), name
            for key, f in zip(keys, forms):
                assert abs(f.prob - want[key]) <= 1e-12 * want[key], name
                prod = math.prod(p.prob for _, p in f.trace_list())
                assert abs(f.prob - prod) <= 1e-12 * prod
        probs = [f.prob for f in runs["best"]]
        assert all(a >= b for a, b in zip(probs, probs[1:]))
        checked += 1


CHAIN = loads("%start s\n<s> ::= 0.5 : a\n<s> ::= 0.5 : b <s>\n")


def texts(forms):
    return [(" ".join(f.tokens()), f.prob) for f in forms]


def test_chain_grammar_examples():
    start = initial_form(NonTerminal("s"))
    assert texts(enumerate_dfs(CHAIN, start, 0.2)) == [("a", 0.5), ("b a", 0.25)]
    assert texts(enumerate_best_first(CHAIN, start, 0.1)) == [("a", 0.5), ("b a", 0.25), ("b b a", 0.125)]
    assert list(enumerate_dfs(CHAIN, start, 1.0)) == []
    sets = [set(texts(enumerate_dfs(CHAIN, start, h))) for h in (0.5, 0.25, 0.125)]
    assert sets[0] <= sets[1] <= sets[2]


def test_hybrid_extremes():
    g = random_toy_grammar(random.Random(5))
    start = initial_form(NonTerminal("n0"))
    h = 0.01
    best = as_keys(enumerate_best_first(g, start, h))
    assert as_keys(enumerate_hybrid(g, start, h, 10**9)) == best
    assert as_keys(enumerate_hybrid(g, start, h, 1)) == as_keys(enumerate_dfs(g, start, h))


def test_best_first_memory_cap():
    start = initial_form(NonTerminal("s"))
    wide = loads("%start s\n" + "\n".join(f"<s> ::= 0.125 : a{i} <s>" for i in range(8)) + "\n")
    with pytest.raises(MemoryCapExceeded):
        list(enumerate_best_first(wide, start, 1e-4, memory_cap=10))


def test_single_production_grammar():
    g = loads("%start s\n<s> ::= 1.0 : only\n")
    start = initial_form(NonTerminal("s"))
    assert texts(enumerate_dfs(g, start, 1.0)) == texts(enumerate_best_first(g, start, 1.0)) == [("only", 1.0)]


# --- Levin search on toy problems --------------------------------------------------------------


def quoted(x):
    return from_list([sym("quote"), x])


def member_oracle(accepted):
    """Accept candidates whose token list equals one of ``accepted``."""
    targets = quoted(from_list([from_list(a) for a in accepted]))

    def build(forms):
        return [from_list([sym("if"), from_list([sym("member"), quoted(from_list(forms)), targets]), True, False])]

    return TestOracle(build)


FOUR = loads(
    "%start s\n<s> ::= 0.4 : 1\n<s> ::= 0.3 : 2\n<s> ::= 0.2 : 3\n<s> ::= 0.1 : 4\n"
)


def test_epoch_candidate_sets_follow_the_horizon():
    seen = []
    cfg = SearchConfig(t0=2000, tq=1000, max_epochs=4)
    out = lsearch(FOUR, member_oracle([]), cfg, initial_form(NonTerminal("s")),
                  observer=lambda e, t, p, fuel: seen.append((e, p)))
    assert out.status == "exhausted"
    # t = 2000, 4000, 8000, 16000 -> horizons 0.5, 0.25, 0.125, 0.0625; brute force by hand
    sentences = {1: 0.4, 2: 0.3, 3: 0.2, 4: 0.1}
    for epoch, t in zip(range(1, 5), (2000, 4000, 8000, 16000)):
        expected = sorted(p for p in sentences.values() if p * t >= 1000)
        got = sorted(p for e, p in seen if e == epoch)
        # suppression may skip candidates that already failed for good
        assert set(got) <= set(expected)
    cfg_all = SearchConfig(t0=2000, tq=1000, max_epochs=4, suppress_duplicates=False)
    seen.clear()
    lsearch(FOUR, member_oracle([]), cfg_all, initial_form(NonTerminal("s")),
            observer=lambda e, t, p, fuel: seen.append((e, p)))
    by_epoch = {e: sorted(p for ee, p in seen if ee == e) for e in range(1, 5)}
    assert by_epoch == {1: [], 2: [0.3, 0.4], 3: [0.2, 0.3, 0.4], 4: [0.1, 0.2, 0.3, 0.4]}


def test_accept_anything_returns_most_probable_first():
    out = lsearch(FOUR, TestOracle(lambda forms: [True]), SearchConfig(), initial_form(NonTerminal("s")))
    assert out.solved and out.text == "1" and out.trials == 1


def test_accept_nothing_is_exhausted_and_sets_grow():
    cfg = SearchConfig(max_epochs=3, suppress_duplicates=False)
    out = lsearch(CHAIN, member_oracle([]), cfg, initial_form(NonTerminal("s")))
    assert out.status == "exhausted" and out.stop_reason == "max-epochs"
    sizes = [e["generated"] for e in out.epochs]
    assert len(sizes) == 3 and sizes == sorted(sizes)
    zero = lsearch(CHAIN, member_oracle([]), SearchConfig(max_epochs=0), initial_form(NonTerminal("s")))
    assert zero.status == "exhausted" and zero.trials == 0


# The depth-first caveat: "p u" and "p v" each have 0.3, "r" has 0.4.  Depth
# first dives into the p branch (local probability 0.6) and accepts "p v";
# best first takes "r" first.
CAVEAT = loads(
    "%start s\n<s> ::= 0.6 : p <q>\n<s> ::= 0.4 : r\n<q> ::= 0.5 : u\n<q> ::= 0.5 : v\n"
)


def test_dfs_can_miss_the_most_probable_solution():
    oracle = member_oracle([[sym("p"), sym("v")], [sym("r")]])
    start = initial_form(NonTerminal("s"))
    dfs = lsearch(CAVEAT, oracle, SearchConfig(t0=4000, strategy="dfs"), start)
    best = lsearch(CAVEAT, oracle, SearchConfig(t0=4000, strategy="best"), start)
    assert dfs.text == "p v" and best.text == "r"
    assert dfs.solution.prob < best.solution.prob
    assert best.solution.prob == max(0.3, 0.4)


def test_solution_passes_again_with_its_fuel():
    oracle = member_oracle([[sym("p"), sym("v")]])
    out = lsearch(CAVEAT, oracle, SearchConfig(t0=4000), initial_form(NonTerminal("s")))
    assert oracle.accepts(oracle.run(out.program, out.fuel))


def sqr_oracle():
    head = from_list([sym("f"), sym("x")])
    test = from_list([sym("and")] + [
        from_list([sym("%output-equal?"), from_list([sym("f"), i]), i * i]) for i in (2, 3)
    ])
    return TestOracle(lambda forms: [from_list([sym("define"), head] + list(forms)), test])


@pytest.mark.parametrize("strategy", ["dfs", "best", "hybrid"])
def test_search_is_sound_and_deterministic(strategy):
    g = default_grammar()
    start = initial_form(NonTerminal("body"), StaticEnvironment.with_params(["x"]))
    cfg = SearchConfig(strategy=strategy, memory_cap=2000)
    granted = {}

    def observe(epoch, t, p, fuel):
        assert p * t >= cfg.tq
        assert fuel == math.floor(p * t)
        granted[epoch] = granted.get(epoch, 0) + fuel
        assert granted[epoch] <= t

    a = lsearch(g, sqr_oracle(), cfg, start, observer=observe)
    b = lsearch(g, sqr_oracle(), cfg, start)
    assert a.solved and sentence_text(a.solution.tokens()) == "( * x x )"
    assert (a.text, a.trials, a.generated, a.fuel_used, a.epochs) == (b.text, b.trials, b.generated, b.fuel_used, b.epochs)


def test_duplicate_suppression_never_changes_the_answer():
    g = default_grammar()
    start = initial_form(NonTerminal("body"), StaticEnvironment.with_params(["x"]))
    on = lsearch(g, sqr_oracle(), SearchConfig(suppress_duplicates=True), start)
    off = lsearch(g, sqr_oracle(), SearchConfig(suppress_duplicates=False), start)
    assert on.text == off.text and len(on.epochs) == len(off.epochs) and on.fuel == off.fuel
    assert on.trials < off.trials
    # and on random toy problems with arbitrary accepted sets
    rng = random.Random(3)
    for _ in range(40):
        g = random_toy_grammar(rng)
        start = initial_form(NonTerminal("n0"))
        pool = brute_force(g, "n0", 1e-3, limit=10**6)
        accepted = [list(map(sym, toks)) for toks, _, _ in rng.sample(pool, min(2, len(pool)))]
        oracle = member_oracle(accepted)
        cfg = dict(t0=1000, tq=1000, max_epochs=12)
        x = lsearch(g, oracle, SearchConfig(suppress_duplicates=True, **cfg), start)
        y = lsearch(g, oracle, SearchConfig(suppress_duplicates=False, **cfg), start)
        assert (x.status, x.text, len(x.epochs)) == (y.status, y.text, len(y.epochs))


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(t0=10, tq=100)
    with pytest.raises(ValueError):
        SearchConfig(strategy="breadth")
    assert SearchConfig(strategy="best-first").strategy == "best"
    assert SearchConfig(strategy="depth-first").strategy == "dfs"
