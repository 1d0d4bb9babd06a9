"""Generalized Levin search over a stochastic grammar.

Each epoch has a total budget ``t`` (t0, 2*t0, 4*t0, ...).  The candidates
of an epoch are the sentences ``x`` with ``P(x) * t >= tq``; each one is
run with ``floor(P(x) * t)`` fuel, so an epoch never grants more than
``t`` steps in total.  Candidates are produced lazily by one of three
enumerators that all yield the same set.
"""

from __future__ import annotations

import heapq
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .derivation import SententialForm, expand, sentence_text, to_program
from .grammar import Grammar
from .scheme.machine import EvalOutcome, Machine, Value

__all__ = [
    "SearchConfig",
    "TestOracle",
    "SearchOutcome",
    "EpochStats",
    "MemoryCapExceeded",
    "enumerate_dfs",
    "enumerate_best_first",
    "enumerate_hybrid",
    "enumerate_candidates",
    "lsearch",
    "probe_error_rate",
    "STRATEGIES",
]

STRATEGIES = {
    "dfs": "dfs",
    "depth-first": "dfs",
    "best": "best",
    "best-first": "best",
    "hybrid": "hybrid",
}

# Enumeration horizons are widened by this relative slack and the exact
# candidate test ``P(x) * t >= tq`` is applied afterwards, so float rounding
# in ``tq / t`` can never drop a candidate.
_SLACK = 1e-12


class MemoryCapExceeded(RuntimeError):
    """Best-first frontier grew beyond its configured cap."""


@dataclass(frozen=True)
class SearchConfig:
    t0: int = 8000
    tq: int = 1000
    strategy: str = "dfs"
    memory_cap: int | None = 100_000
    max_epochs: int | None = None
    max_trials: int | None = 10_000_000
    max_fuel: int | None = None
    suppress_duplicates: bool = True
    progress_every: int = 0

    def __post_init__(self):
        if not (isinstance(self.tq, int) and self.tq > 0):
            raise ValueError("tq must be a positive integer")
        if not (isinstance(self.t0, int) and self.t0 >= self.tq):
            raise ValueError("t0 must be an integer with t0 >= tq")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; pick one of dfs, best, hybrid")
        object.__setattr__(self, "strategy", STRATEGIES[self.strategy])
        if self.memory_cap is not None and self.memory_cap <= 0:
            raise ValueError("memory cap must be positive")
        for name in ("max_epochs", "max_trials", "max_fuel"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative")


class TestOracle:
    """Turns a candidate sentence into a test program and runs it.

    ``build`` maps the candidate's S-expressions to the full test program;
    a candidate is accepted when the test evaluates to exactly ``#t``.
    """

    __test__ = False  # not a pytest test class despite the name

    def __init__(self, build: Callable[[list], list], machine: Machine | None = None):
        self.build = build
        self.machine = machine if machine is not None else Machine()

    def run(self, candidate_forms: list, fuel: int) -> EvalOutcome:
        return self.machine.evaluate(self.build(candidate_forms), fuel)

    @staticmethod
    def accepts(outcome: EvalOutcome) -> bool:
        return type(outcome) is Value and outcome.value is True


@dataclass
class EpochStats:
    epoch: int
    t: int
    horizon: float
    generated: int = 0
    executed: int = 0
    skipped: int = 0
    granted: int = 0
    used: int = 0
    outcomes: Counter = field(default_factory=Counter)

    def as_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "t": self.t,
            "horizon": self.horizon,
            "generated": self.generated,
            "executed": self.executed,
            "skipped": self.skipped,
            "granted": self.granted,
            "used": self.used,
            "outcomes": dict(sorted(self.outcomes.items())),
        }


@dataclass
class SearchOutcome:
    status: str  # "solved" or "exhausted"
    solution: SententialForm | None
    fuel: int  # fuel the accepted candidate was granted
    trials: int  # executed candidates
    generated: int
    fuel_used: int
    epochs: list
    outcomes: Counter
    elapsed: float
    stop_reason: str = ""

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    @property
    def text(self) -> str | None:
        return None if self.solution is None else sentence_text(self.solution.tokens())

    @property
    def program(self) -> list | None:
        return None if self.solution is None else to_program(self.solution)

    @property
    def trace(self) -> list:
        return [] if self.solution is None else self.solution.trace_list()

    def error_count(self) -> int:
        return sum(v for k, v in self.outcomes.items() if k not in ("value", "fuel-exhausted"))


# --- enumerators ------------------------------------------------------------------


def _kids(form, g, horizon):
    return [k for k in expand(form, g, horizon * (1 - _SLACK)) if k.prob >= horizon]


def enumerate_dfs(g: Grammar, start: SententialForm, horizon: float):
    """Every sentence with probability >= horizon, depth first.

    Children are visited in decreasing local probability (grammar order on
    ties), using an explicit stack.
    """
    if not (0.0 < horizon <= 1.0):
        raise ValueError("horizon must be in (0, 1]")
    if start.prob < horizon:
        return
    stack = [start]
    pop = stack.pop
    push = stack.extend
    while stack:
        f = pop()
        if f.rest is None:
            yield f
            continue
        kids = _kids(f, g, horizon)
        kids.reverse()
        push(kids)


def enumerate_best_first(g: Grammar, start: SententialForm, horizon: float, memory_cap: int | None = None):
    """Same set as :func:`enumerate_dfs`, in non-increasing probability.

    Ties are broken by the derivation path (sequence of alternative ranks),
    which is the depth-first order.  Raises :class:`MemoryCapExceeded` if
    the frontier would exceed ``memory_cap``.
    """
    if not (0.0 < horizon <= 1.0):
        raise ValueError("horizon must be in (0, 1]")
    if start.prob < horizon:
        return
    heap = [(-start.prob, (), start)]
    while heap:
        _, path, f = heapq.heappop(heap)
        if f.rest is None:
            yield f
            continue
        kids = _kids(f, g, horizon)
        if memory_cap is not None and len(heap) + len(kids) > memory_cap:
            raise MemoryCapExceeded(f"best-first frontier exceeds {memory_cap} entries")
        for i, k in enumerate(kids):
            heapq.heappush(heap, (-k.prob, path + (i,), k))


def _dfs_from(g, forms, horizon):
    stack = list(reversed(forms))
    while stack:
        f = stack.pop()
        if f.rest is None:
            yield f
            continue
        kids = _kids(f, g, horizon)
        kids.reverse()
        stack.extend(kids)


def enumerate_hybrid(g: Grammar, start: SententialForm, horizon: float, memory_cap: int):
    """Best-first until the frontier would exceed ``memory_cap``, then depth-first.

    After the switch each frontier entry is drained depth-first, taking the
    entries in priority order.
    """
    if memory_cap is None or memory_cap <= 0:
        raise ValueError("memory cap must be positive")
    if not (0.0 < horizon <= 1.0):
        raise ValueError("horizon must be in (0, 1]")
    if start.prob < horizon:
        return
    heap = [(-start.prob, (), start)]
    while heap:
        _, path, f = heapq.heappop(heap)
        if f.rest is None:
            yield f
            continue
        kids = _kids(f, g, horizon)
        if len(heap) + len(kids) > memory_cap:
            yield from _dfs_from(g, kids, horizon)
            while heap:
                _, _, f = heapq.heappop(heap)
                yield from _dfs_from(g, [f], horizon)
            return
        for i, k in enumerate(kids):
            heapq.heappush(heap, (-k.prob, path + (i,), k))


def enumerate_candidates(g: Grammar, start: SententialForm, horizon: float, cfg: SearchConfig):
    if cfg.strategy == "dfs":
        return enumerate_dfs(g, start, horizon)
    if cfg.strategy == "best":
        return enumerate_best_first(g, start, horizon, None)
    return enumerate_hybrid(g, start, horizon, cfg.memory_cap or 1)


# --- Levin search ---------------------------------------------------------------------


def lsearch(
    g: Grammar,
    oracle: TestOracle,
    cfg: SearchConfig,
    start: SententialForm,
    progress: Callable | None = None,
    observer: Callable | None = None,
) -> SearchOutcome:
    """Run epochs t = t0, 2 t0, ... until a candidate's test returns #t or a cutoff hits.

    ``progress(trials, epoch, t, outcomes)`` is called every
    ``cfg.progress_every`` executed candidates.  ``observer(epoch, t, prob,
    fuel)`` sees every executed candidate (used by soundness checks).

    Duplicate suppression skips, in later epochs, candidates that already
    failed without running out of fuel: by determinism and fuel
    monotonicity they would fail again.  It relies on the enumeration order
    being the same from epoch to epoch, which holds for the depth-first and
    best-first enumerators; it is not applied with the hybrid one.
    """
    began = time.perf_counter()
    tq = cfg.tq
    t = cfg.t0
    totals = Counter()
    epochs = []
    trials = 0
    generated = 0
    fuel_used = 0
    suppress = cfg.suppress_duplicates and cfg.strategy in ("dfs", "best")
    prev_final = None  # bytearray over the previous epoch's candidates: 1 = failed for good
    epoch = 0

    def finish(status, solution=None, fuel=0, reason=""):
        return SearchOutcome(
            status=status,
            solution=solution,
            fuel=fuel,
            trials=trials,
            generated=generated,
            fuel_used=fuel_used,
            epochs=[e.as_dict() for e in epochs],
            outcomes=totals,
            elapsed=time.perf_counter() - began,
            stop_reason=reason,
        )

    while True:
        if cfg.max_epochs is not None and epoch >= cfg.max_epochs:
            return finish("exhausted", reason="max-epochs")
        epoch += 1
        stats = EpochStats(epoch, t, tq / t)
        epochs.append(stats)
        t_prev = t // 2
        final = bytearray() if suppress else None
        prev_i = 0
        for cand in enumerate_candidates(g, start, tq / t, cfg):
            p = cand.prob
            if p * t < tq:
                continue
            stats.generated += 1
            generated += 1
            if prev_final is not None and p * t_prev >= tq:
                was_final = prev_final[prev_i]
                prev_i += 1
                if was_final:
                    stats.skipped += 1
                    final.append(1)
                    continue
            if cfg.max_trials is not None and trials >= cfg.max_trials:
                return finish("exhausted", reason="max-trials")
            if cfg.max_fuel is not None and fuel_used >= cfg.max_fuel:
                return finish("exhausted", reason="max-fuel")
            fuel = math.floor(p * t)
            stats.granted += fuel
            outcome = oracle.run(to_program(cand), fuel)
            trials += 1
            stats.executed += 1
            stats.used += outcome.steps
            fuel_used += outcome.steps
            kind = outcome.kind
            stats.outcomes[kind] += 1
            totals[kind] += 1
            if observer is not None:
                observer(epoch, t, p, fuel)
            if progress is not None and cfg.progress_every and trials % cfg.progress_every == 0:
                progress(trials, epoch, t, Counter(totals))
            if oracle.accepts(outcome):
                return finish("solved", cand, fuel)
            if final is not None:
                final.append(0 if kind == "fuel-exhausted" else 1)
        assert stats.granted <= t, "epoch granted more fuel than its budget"
        prev_final = final
        t *= 2


def probe_error_rate(g: Grammar, oracle: TestOracle, start: SententialForm, t: int, tq: int = 1000) -> dict:
    """Run every candidate of the epoch with budget ``t`` and report outcome counts.

    Acceptance is ignored: this measures how often candidates of one fixed
    search iteration fail with a runtime error.
    """
    counts = Counter()
    for cand in enumerate_dfs(g, start, tq / t):
        if cand.prob * t < tq:
            continue
        outcome = oracle.run(to_program(cand), math.floor(cand.prob * t))
        counts[outcome.kind] += 1
    total = sum(counts.values())
    errors = sum(v for k, v in counts.items() if k not in ("value", "fuel-exhausted"))
    return {
        "t": t,
        "candidates": total,
        "errors": errors,
        "error_rate": errors / total if total else 0.0,
        "outcomes": dict(sorted(counts.items())),
    }
