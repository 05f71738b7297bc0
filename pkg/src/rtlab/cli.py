"""Command-line driver: ``rtlab {run,transform,validate,demo,corpus}``.

Pass flags follow the usual compiler spelling (``-ftailrec``,
``-fno-stack-protector``, ...); they may appear anywhere on the command
line and later ones win.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import resources
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .gen import DEFAULT_BUDGET, gen_random_program, main_arity, random_args
from .ir import ParseError, Program, WellformedError, parse_program, print_program
from .passes import CLI_DEFAULTS, PASS_NAMES, PassConfig, PassError, apply_pipeline, pass_lower_ra
from .passes.mutations import MUTANTS
from .semantics import DEFAULT_FUEL, RunResult, Stuck, render_trace, run
from .validate import DEFAULT_COSIM_FUEL, validate_pass

EXIT_OK, EXIT_STUCK, EXIT_ABORTED, EXIT_FUEL = 0, 2, 3, 4
EXIT_USAGE, EXIT_DATAERR = 64, 65
EXIT_REJECTED = 1

OUTCOME_EXIT = {"Final": EXIT_OK, "Stuck": EXIT_STUCK, "Aborted": EXIT_ABORTED, "OutOfFuel": EXIT_FUEL}

FLAGS: Dict[str, str] = {
    "tailcalls": "ftailcalls",
    "tailrec": "ftailrec",
    "stack-protector": "fstack_protector",
    "stack-protector-all": "fstack_protector_all",
    "retaddr-pac": "fretaddr_pac",
    "retaa": "fretaa",
}


class UsageError(Exception):
    pass


def split_flags(argv: Sequence[str], base: PassConfig = CLI_DEFAULTS) -> Tuple[PassConfig, List[str]]:
    """Pull ``-fX``/``-fno-X`` flags out of ``argv`` and fold them into ``base`` in order."""
    cfg, rest = base, []
    for tok in argv:
        if not tok.startswith("-f") or tok.startswith("--"):
            rest.append(tok)
            continue
        name, on = tok[2:], True
        if name.startswith("no-"):
            name, on = name[3:], False
        if name not in FLAGS:
            raise UsageError(f"unknown flag {tok}")
        cfg = replace(cfg, **{FLAGS[name]: on})
        # the two protector flags move together when they would contradict
        if name == "stack-protector" and not on:
            cfg = replace(cfg, fstack_protector_all=False)
        if name == "stack-protector-all" and on:
            cfg = replace(cfg, fstack_protector=True)
    return cfg, rest


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2, which is our Stuck code
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rtlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(p, args=True):
        if args:
            p.add_argument("--args", nargs="*", type=int, default=[], help="integer arguments of main")
        p.add_argument("--seed", type=int, default=0, help="canary seed / corpus start seed")
        p.add_argument("--fuel", type=int, default=None, help="step limit")
        p.add_argument("--format", choices=("text", "kv"), default="text")

    p = sub.add_parser("run", help="compile with the selected passes and execute")
    p.add_argument("file")
    common(p)
    p = sub.add_parser("transform", help="print the transformed IR and the rewrite report")
    p.add_argument("file")
    common(p, args=False)
    p = sub.add_parser("validate", help="co-simulate one pass on one input")
    p.add_argument("file")
    p.add_argument("--pass", dest="pass_name", required=True, choices=PASS_NAMES)
    p.add_argument("--mutant", choices=sorted(MUTANTS), help="use a seeded-bug variant of the pass")
    common(p)
    p = sub.add_parser("demo", help="run a bundled scenario in each protection mode")
    p.add_argument("name", choices=sorted(DEMOS))
    common(p, args=False)
    p = sub.add_parser("corpus", help="validate passes over generated programs")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--passes", default=",".join(PASS_NAMES), help="comma-separated pass names")
    p.add_argument("--mutant", choices=sorted(MUTANTS))
    p.add_argument("--jobs", type=int, default=1)
    common(p, args=False)
    return ap


def _load(path: str) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


def _bundled(name: str) -> Program:
    return parse_program(resources.files("rtlab").joinpath("demos", name).read_text(encoding="utf-8"))


# -- output -------------------------------------------------------------------


def _result_fields(r: RunResult) -> Dict[str, str]:
    d = {"outcome": r.outcome}
    if r.outcome == "Final":
        d["value"] = str(r.value)
    if isinstance(r.state, Stuck):
        d["stuck_reason"] = r.state.reason.value
        if r.state.at:
            d["stuck_at"] = f"{r.state.at[0]}:{r.state.at[1]}"
    d.update(steps=str(r.stats.steps), allocs=str(r.stats.allocs), frees=str(r.stats.frees),
             max_live_frames=str(r.stats.max_live_frames), events=str(len(r.trace)))
    return d


def _print_run(r: RunResult, fmt: str) -> None:
    if fmt == "kv":
        for k, v in _result_fields(r).items():
            print(f"{k}={v}")
        for n, e in enumerate(r.trace):
            print(f"event.{n}={e}")
        return
    sys.stdout.write(render_trace(r.trace))
    if r.outcome == "Final":
        print(f"result: Final {r.value}")
    elif r.outcome == "Stuck":
        print(f"result: {r.state}")
    elif r.outcome == "Aborted":
        print("result: Aborted")
    else:
        print("result: out of fuel")
    s = r.stats
    print(f"steps: {s.steps}  allocs: {s.allocs}  frees: {s.frees}  max_live_frames: {s.max_live_frames}")


# -- subcommands --------------------------------------------------------------


def cmd_run(ns, cfg: PassConfig) -> int:
    p, _ = apply_pipeline(_load(ns.file), cfg)
    r = run(p, ns.args, ns.fuel or DEFAULT_FUEL, ns.seed)
    _print_run(r, ns.format)
    return OUTCOME_EXIT[r.outcome]


def cmd_transform(ns, cfg: PassConfig) -> int:
    p, report = apply_pipeline(_load(ns.file), cfg)
    sys.stdout.write(print_program(p))
    print()
    sys.stdout.write(report.to_kv() if ns.format == "kv" else report.to_table())
    return EXIT_OK


def cmd_validate(ns, cfg: PassConfig) -> int:
    res = validate_pass(_load(ns.file), ns.pass_name, ns.args, cfg=cfg,
                        fuel=ns.fuel or DEFAULT_COSIM_FUEL, seed=ns.seed, mutant=ns.mutant)
    v = res.verdict
    if ns.format == "kv":
        print(f"accepted={str(v.accepted).lower()}")
        print(f"reason={v.reason}")
        for k, val in sorted(v.relation_log.items()):
            print(f"{k}={val}")
        for k, val in (v.counterexample or {}).items():
            print(f"counterexample.{k}={val}")
    else:
        print("accepted" if v.accepted else "rejected")
        sys.stdout.write(v.to_report())
    return EXIT_OK if v.accepted else EXIT_REJECTED


def _validate_one(job) -> Tuple[int, str, bool, str]:
    seed, budget, pass_name, mutant, fuel, cfg = job
    p = gen_random_program(seed, budget)
    v = validate_pass(p, pass_name, random_args(seed, main_arity(p)), cfg=cfg, fuel=fuel,
                      seed=seed, mutant=mutant).verdict
    return seed, pass_name, v.accepted, v.reason


def cmd_corpus(ns, cfg: PassConfig) -> int:
    passes = [x for x in ns.passes.split(",") if x]
    for x in passes:
        if x not in PASS_NAMES:
            raise UsageError(f"unknown pass {x!r}")
    if ns.mutant:
        passes = [MUTANTS[ns.mutant][0]]
    fuel = ns.fuel or DEFAULT_COSIM_FUEL
    jobs = [(s, ns.budget, x, ns.mutant, fuel, cfg) for s in range(ns.seed, ns.seed + ns.count) for x in passes]
    if ns.jobs > 1:
        with ProcessPoolExecutor(ns.jobs) as ex:
            results = list(ex.map(_validate_one, jobs, chunksize=16))
    else:
        results = [_validate_one(j) for j in jobs]
    results.sort(key=lambda r: (r[0], PASS_NAMES.index(r[1])))
    summary = {x: [0, 0] for x in passes}
    for seed, x, ok, reason in results:
        summary[x][0 if ok else 1] += 1
        if not ok and ns.format == "text":
            print(f"seed {seed} {x}: rejected ({reason})")
    if ns.format == "kv":
        for x, (a, r) in summary.items():
            print(f"{x}.accepted={a}")
            print(f"{x}.rejected={r}")
    else:
        print(f"{'pass':<12} {'accepted':>9} {'rejected':>9}")
        for x, (a, r) in summary.items():
            print(f"{x:<12} {a:>9} {r:>9}")
    rejected = sum(r for _, r in summary.values())
    return EXIT_OK if (rejected == 0) != bool(ns.mutant) else EXIT_REJECTED


# -- demos --------------------------------------------------------------------


Mode = Tuple[str, Callable[[Program], Program]]


def _cfg_mode(label: str, cfg: PassConfig) -> Mode:
    return label, lambda p: apply_pipeline(p, cfg)[0]


_NONE = PassConfig()
_TAILCALLS = PassConfig(ftailcalls=True)
_TAILREC = PassConfig(ftailcalls=True, ftailrec=True)

DEMOS: Dict[str, Tuple[str, List[Mode], List[List[int]]]] = {
    "canary-attack": ("canary_demo.rtl", [
        _cfg_mode("unprotected", _NONE),
        _cfg_mode("-fstack-protector", PassConfig(fstack_protector=True)),
    ], [[11], [12]]),
    "hijack": ("canary_demo.rtl", [
        _cfg_mode("abstract return", _NONE),
        ("saved return address", pass_lower_ra),
        _cfg_mode("-fstack-protector", PassConfig(fstack_protector=True)),
    ], [[11], [12]]),
    "pac-attack": ("canary_demo.rtl", [
        ("saved return address", pass_lower_ra),
        _cfg_mode("-fretaddr-pac", PassConfig(fretaddr_pac=True)),
        _cfg_mode("-fretaddr-pac -fretaa", PassConfig(fretaddr_pac=True, fretaa=True)),
    ], [[11], [12]]),
    "fac": ("fac.rtl", [
        _cfg_mode("no tail calls", _NONE),
        _cfg_mode("-ftailcalls", _TAILCALLS),
        _cfg_mode("-ftailcalls -ftailrec", _TAILREC),
        _cfg_mode("defaults", CLI_DEFAULTS),
    ], [[1], [10], [100]]),
    "last": ("last.rtl", [
        _cfg_mode("no tail calls", _NONE),
        _cfg_mode("-ftailcalls", _TAILCALLS),
        _cfg_mode("-ftailcalls -ftailrec", _TAILREC),
        _cfg_mode("defaults", CLI_DEFAULTS),
    ], [[10], [64]]),
    "quicksort": ("quicksort.rtl", [
        _cfg_mode("no tail calls", _NONE),
        _cfg_mode("-ftailcalls -ftailrec", _TAILREC),
        _cfg_mode("defaults", CLI_DEFAULTS),
        _cfg_mode("defaults -fretaa", replace(CLI_DEFAULTS, fretaa=True)),
    ], [[1, 40], [-1, 40]]),
    "cmp": ("cmp_demo.rtl", [
        _cfg_mode("unprotected", _NONE),
        _cfg_mode("-fstack-protector", PassConfig(fstack_protector=True)),
    ], [[]]),
}


def _short(r: RunResult) -> str:
    if r.outcome == "Final":
        res = f"Final {r.value}"
    elif r.outcome == "Stuck":
        res = f"Stuck({r.state.reason.value})"
    else:
        res = r.outcome
    if len(r.trace) <= 3:
        evs = "; ".join(str(e) for e in r.trace)
    else:
        evs = f"{len(r.trace)} events, last: {r.trace[-1]}"
    return f"{res} | {evs}" if evs else res


def cmd_demo(ns, cfg: PassConfig) -> int:
    fname, modes, inputs = DEMOS[ns.name]
    base = _bundled(fname)
    rows = []
    for label, transform in modes:
        p = transform(base)
        for args in inputs:
            r = run(p, args, ns.fuel or DEFAULT_FUEL, ns.seed)
            rows.append((label, args, r))
    if ns.format == "kv":
        for k, (label, args, r) in enumerate(rows):
            print(f"row.{k}.mode={label}")
            print(f"row.{k}.args={' '.join(map(str, args))}")
            for key, v in _result_fields(r).items():
                print(f"row.{k}.{key}={v}")
            for n, e in enumerate(r.trace):
                print(f"row.{k}.event.{n}={e}")
        return EXIT_OK
    w = max(len(label) for label, _, _ in rows)
    print(f"demo {ns.name} ({fname})")
    print(f"{'mode':<{w}}  {'args':<8} {'steps':>7} {'allocs':>6} {'live':>4}  outcome | trace")
    for label, args, r in rows:
        a = " ".join(map(str, args)) or "-"
        s = r.stats
        print(f"{label:<{w}}  {a:<8} {s.steps:>7} {s.allocs:>6} {s.max_live_frames:>4}  {_short(r)}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "transform": cmd_transform, "validate": cmd_validate,
            "demo": cmd_demo, "corpus": cmd_corpus}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg, rest = split_flags(argv)
        ns = _build_parser().parse_args(rest)
        return COMMANDS[ns.cmd](ns, cfg)
    except UsageError as e:
        print(f"rtlab: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"rtlab: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, WellformedError, PassError) as e:
        print(f"rtlab: {e}", file=sys.stderr)
        return EXIT_DATAERR


if __name__ == "__main__":
    sys.exit(main())
