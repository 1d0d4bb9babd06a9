"""Command-line front end: ``glsearch train | search | grammar``.

Settings come from built-in defaults, then an optional JSON config file,
then flags.  ``train`` writes the fully resolved settings to
``manifest.json`` in the output directory; feeding that file back with
``--config`` reproduces the run.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .default_grammar import default_grammar
from .derivation import DerivationError
from .grammar import Grammar, GrammarError, body_text, dumps, load_grammar, save_grammar, validate
from .induction import (
    SequenceError,
    format_reports,
    load_sequence,
    make_test_oracle,
    reports_to_json,
    run_sequence,
    toy_sequence,
)
from .lsearch import SearchConfig, lsearch
from .scheme.machine import DuplicateSolution, Machine
from .updates import SolutionCorpus, UpdateConfig

log = logging.getLogger("glsearch")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3, 4

# flag name -> (section, field)
_SEARCH_FLAGS = {
    "t0": "t0",
    "tq": "tq",
    "strategy": "strategy",
    "memory_cap": "memory_cap",
    "max_epochs": "max_epochs",
    "max_trials": "max_trials",
    "progress_every": "progress_every",
}
_UPDATE_FLAGS = {
    "alpha": "alpha",
    "gamma": "gamma",
    "support": "support",
    "prune_levels": "prune_levels",
}
_TOP_KEYS = ("grammar", "corpus", "sequence", "enable_factorial", "probe_epoch", "seed_prefix")


class InputError(Exception):
    """Bad user input: missing files, malformed formats, invalid settings."""


def _config_dicts(cfg_search: SearchConfig, cfg_update: UpdateConfig) -> tuple[dict, dict]:
    s = dataclasses.asdict(cfg_search)
    u = dataclasses.asdict(cfg_update)
    u["prune_levels"] = list(u["prune_levels"])
    return s, u


def resolve_settings(args) -> dict:
    """Merge defaults < config file < flags into one manifest-shaped dict."""
    s, u = _config_dicts(SearchConfig(), UpdateConfig())
    settings = {
        "grammar": None,
        "corpus": None,
        "sequence": None,
        "enable_factorial": False,
        "probe_epoch": 12,
        "seed_prefix": False,
        "search": s,
        "update": u,
    }
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InputError(f"{path}: no such config file") from None
        except json.JSONDecodeError as e:
            raise InputError(f"{path}:{e.lineno}: {e.msg}") from None
        for key, value in data.items():
            if key in ("search", "update"):
                unknown = set(value) - set(settings[key])
                if unknown:
                    raise InputError(f"{path}: unknown {key} setting(s) {', '.join(sorted(unknown))}")
                settings[key].update(value)
            elif key in _TOP_KEYS:
                settings[key] = value
            elif key not in ("out", "schema"):
                raise InputError(f"{path}: unknown setting {key!r}")
    for flag, fieldname in _SEARCH_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            settings["search"][fieldname] = v
    for flag, fieldname in _UPDATE_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            settings["update"][fieldname] = list(v) if flag == "prune_levels" else v
    if getattr(args, "no_reuse", False):
        settings["update"]["reuse"] = False
    if getattr(args, "idioms", False):
        settings["update"]["idioms"] = True
    if getattr(args, "mining", False):
        settings["update"]["mining"] = True
    for key in _TOP_KEYS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            settings[key] = v
    return settings


def build_configs(settings: dict) -> tuple[SearchConfig, UpdateConfig]:
    try:
        return SearchConfig(**settings["search"]), UpdateConfig(**settings["update"])
    except (TypeError, ValueError) as e:
        raise InputError(f"invalid settings: {e}") from None


def load_grammar_arg(path) -> Grammar:
    if path is None or path == "default":
        return default_grammar()
    try:
        g = load_grammar(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such grammar file") from None
    except GrammarError as e:
        raise InputError(str(e)) from None
    problems = validate(g)
    if problems:
        raise InputError(f"{path}: invalid grammar:\n  " + "\n  ".join(problems))
    return g


def machine_for(g: Grammar) -> Machine:
    """A fresh machine with every library solution of ``g`` installed."""
    m = Machine()
    for sol in g.solutions:
        try:
            m.install_solution(sol.name, sol.definition)
        except (DuplicateSolution, ValueError) as e:
            raise InputError(f"cannot install solution {sol.name}: {e}") from None
    return m


def _load_problems(settings: dict) -> list:
    seq = settings["sequence"]
    try:
        if seq is None or seq == "toy":
            return toy_sequence(settings["enable_factorial"])
        problems = load_sequence(seq)
    except FileNotFoundError:
        raise InputError(f"{seq}: no such sequence file") from None
    except SequenceError as e:
        raise InputError(str(e)) from None
    if settings["enable_factorial"]:
        names = {p.name for p in problems}
        problems += [p for p in toy_sequence(True) if p.name not in names and p.name == "fact"]
    return problems


def _load_corpus(path) -> SolutionCorpus:
    if path is None:
        return SolutionCorpus()
    try:
        return SolutionCorpus.load(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such corpus file") from None
    except (ValueError, KeyError) as e:
        raise InputError(f"{path}: malformed corpus: {e}") from None


def _progress_printer(every: int):
    if not every:
        return None

    def show(trials, epoch, t, outcomes):
        errors = sum(v for k, v in outcomes.items() if k not in ("value", "fuel-exhausted"))
        print(f"  ... epoch {epoch} (t={t}): {trials} trials, {errors} errors", file=sys.stderr, flush=True)

    return show


# --- commands ------------------------------------------------------------------------------------


def cmd_train(args) -> int:
    settings = resolve_settings(args)
    scfg, ucfg = build_configs(settings)
    g = load_grammar_arg(settings["grammar"])
    problems = _load_problems(settings)
    corpus = _load_corpus(settings["corpus"])
    machine = machine_for(g)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"schema": "glsearch-manifest/1", **settings}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    try:
        g, reports = run_sequence(
            problems,
            g,
            scfg,
            ucfg,
            machine=machine,
            corpus=corpus,
            out_dir=out,
            progress=_progress_printer(scfg.progress_every),
            probe_epoch=settings["probe_epoch"],
            log=lambda line: print(line, flush=True),
            seed=settings["seed_prefix"],
        )
    except DuplicateSolution as e:
        raise InputError(f"{e} (the grammar already holds a solution with a problem's name)") from None
    save_grammar(g, out / "grammar.g")
    corpus.save(out / "corpus.jsonl")
    (out / "report.txt").write_text(format_reports(reports), encoding="utf-8")
    (out / "report.json").write_text(reports_to_json(reports, include_timing=False), encoding="utf-8")
    (out / "timing.json").write_text(reports_to_json(reports, include_timing=True), encoding="utf-8")
    solved = sum(r.solved for r in reports)
    print(f"{solved}/{len(reports)} problems solved; outputs in {out}")
    return EXIT_OK


def cmd_search(args) -> int:
    settings = resolve_settings(args)
    scfg, _ = build_configs(settings)
    g = load_grammar_arg(settings["grammar"])
    settings["sequence"] = args.problem
    problems = _load_problems(settings)
    if args.name:
        problems = [p for p in problems if p.name == args.name]
        if not problems:
            raise InputError(f"no problem named {args.name!r} in {args.problem}")
    prob = problems[0]
    k = args.pairs if args.pairs is not None else len(prob.pairs)
    if not 1 <= k <= len(prob.pairs):
        raise InputError(f"--pairs must be between 1 and {len(prob.pairs)}")
    oracle, start = make_test_oracle(prob, k, machine_for(g))
    out = lsearch(g, oracle, scfg, start, progress=_progress_printer(scfg.progress_every))
    if out.solved:
        print(f"solved {prob.name}: {out.text}")
        print(f"probability {out.solution.prob:.6g}, fuel granted {out.fuel}")
    else:
        print(f"exhausted {prob.name}: {out.stop_reason}")
    print(f"trials {out.trials}, generated {out.generated}, fuel used {out.fuel_used}, epochs {len(out.epochs)}")
    errors = ", ".join(f"{k}={v}" for k, v in sorted(out.outcomes.items()))
    if errors:
        print(f"outcomes {errors}")
    if args.dump_derivation and out.solved:
        for pos, step in out.trace:
            print(f"  {pos:4d}  {step}")
    return EXIT_OK


def grammar_diff(a: Grammar, b: Grammar) -> list[str]:
    """Production-level probability changes from ``a`` to ``b``."""
    pa = {(p.head, p.body): p.prob for p in a.all_productions()}
    pb = {(p.head, p.body): p.prob for p in b.all_productions()}
    lines = []
    for key in sorted(pa.keys() | pb.keys(), key=lambda k: (k[0], body_text(k[1]))):
        head, body = key
        old, new = pa.get(key), pb.get(key)
        if old == new:
            continue
        text = f"<{head}> ::= {body_text(body)}"
        if old is None:
            lines.append(f"+ {text}  {new!r}")
        elif new is None:
            lines.append(f"- {text}  {old!r}")
        else:
            lines.append(f"~ {text}  {old!r} -> {new!r} ({new - old:+.6g})")
    sa, sb = {s.name for s in a.solutions}, {s.name for s in b.solutions}
    lines += [f"+ solution {n}" for n in sorted(sb - sa)]
    lines += [f"- solution {n}" for n in sorted(sa - sb)]
    return lines


def cmd_grammar(args) -> int:
    if args.action == "show":
        sys.stdout.write(dumps(load_grammar_arg(args.paths[0] if args.paths else None)))
        return EXIT_OK
    if args.action == "validate":
        path = args.paths[0] if args.paths else None
        if path in (None, "default"):
            g = default_grammar()
        else:
            try:
                g = load_grammar(path)
            except FileNotFoundError:
                raise InputError(f"{path}: no such grammar file") from None
            except GrammarError as e:
                raise InputError(str(e)) from None
        problems = validate(g)
        if problems:
            for p in problems:
                print(p)
            return EXIT_INPUT
        print("OK")
        return EXIT_OK
    if len(args.paths) != 2:
        raise InputError("grammar diff needs two grammar files")
    for line in grammar_diff(load_grammar_arg(args.paths[0]), load_grammar_arg(args.paths[1])):
        print(line)
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------------------------------


def _search_flags(p: argparse.ArgumentParser) -> None:
    d = SearchConfig()
    p.add_argument("--config", help="JSON settings file (e.g. a previous run's manifest.json)")
    p.add_argument("--grammar", help="grammar file (default: the built-in Scheme grammar)")
    p.add_argument("--t0", type=int, help=f"fuel of the first epoch (default {d.t0})")
    p.add_argument("--tq", type=int, help=f"minimum fuel per candidate (default {d.tq})")
    p.add_argument(
        "--strategy",
        choices=["dfs", "best", "best-first", "hybrid"],
        help=f"candidate enumeration order (default {d.strategy})",
    )
    p.add_argument("--memory-cap", type=int, help=f"frontier cap for best/hybrid (default {d.memory_cap})")
    p.add_argument("--max-epochs", type=int, help="stop after this many epochs (default: no limit)")
    p.add_argument("--max-trials", type=int, help=f"executed candidates per search (default {d.max_trials})")
    p.add_argument("--progress-every", type=int, help="print progress every N trials (default 0, off)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glsearch", description="Grammar-guided Levin search over Scheme programs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    u = UpdateConfig()
    tr = sub.add_parser("train", help="run a training sequence")
    _search_flags(tr)
    tr.add_argument("--sequence", help="training-sequence file (default: the built-in toy sequence)")
    tr.add_argument("--corpus", help="existing solution corpus (JSON lines) to start from")
    tr.add_argument("--out", required=True, help="output directory")
    tr.add_argument("--alpha", type=float, help=f"smoothing rate (default {u.alpha})")
    tr.add_argument("--gamma", type=float, help=f"probability of inserted productions (default {u.gamma})")
    tr.add_argument("--support", type=int, help=f"minimum support for mined subprograms (default {u.support})")
    tr.add_argument(
        "--prune-levels", type=int, nargs="+", help=f"idiom prune levels (default {' '.join(map(str, u.prune_levels))})"
    )
    tr.add_argument("--no-reuse", action="store_true", help="do not add solutions to the grammar")
    tr.add_argument("--idioms", action="store_true", help="add pruned derivation idioms after each solution")
    tr.add_argument("--mining", action="store_true", help="add frequent subprograms after each complete solution")
    tr.add_argument("--enable-factorial", action="store_true", help="append the factorial problem")
    tr.add_argument("--probe-epoch", type=int, help="epoch used for error-rate probes, 0 disables (default 12)")
    tr.add_argument("--seed-prefix", action="store_true", help="try the previous prefix's solution first")
    tr.set_defaults(func=cmd_train)

    se = sub.add_parser("search", help="search one problem")
    _search_flags(se)
    se.add_argument("--problem", required=True, help="file holding (problem ...) forms")
    se.add_argument("--name", help="which problem in the file (default: the first)")
    se.add_argument("--pairs", type=int, help="use only the first N pairs (default: all)")
    se.add_argument("--dump-derivation", action="store_true", help="print the solution's derivation")
    se.set_defaults(func=cmd_search)

    gr = sub.add_parser("grammar", help="show, diff or validate grammars")
    gr.add_argument("action", choices=["show", "diff", "validate"])
    gr.add_argument("paths", nargs="*", help="grammar file(s); 'default' names the built-in grammar")
    gr.set_defaults(func=cmd_grammar)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (DerivationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001 - last-resort report
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
