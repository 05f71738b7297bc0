"""Stack canary insertion.

A protected function gets one extra word above its locals.  The prologue
stores the canary there; every exit (return or tail call) first reloads it
and compares with the canary, calling ``stack_chk_fail`` on mismatch.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Dict, Tuple

from ..ir import (
    FreshNodes, FreshRegs, Function, Icond, Iextcall, Iload, Iop, Iretaa, Iretvia,
    Ireturn, Istore, Itailcall, Operation, Program,
)
from ..memory import WORD, align8
from ..relations import CanaryEntry, CanarySpec
from .config import PassConfig

EXITS = (Ireturn, Itailcall, Iretvia, Iretaa)


def is_protected(f: Function, cfg: PassConfig) -> bool:
    return f.stacksize > 0 or cfg.normalized().fstack_protector_all


def protect_function(f: Function) -> Tuple[Function, CanaryEntry, int]:
    """Canary-protect one function; returns it, its layout entry and the number of checked exits."""
    off = align8(f.stacksize)
    entry = CanaryEntry(True, off, off + WORD)
    code = dict(f.code)
    node, reg = FreshNodes(code), FreshRegs(f)

    c, s, k, a = reg(), reg(), reg(), reg()
    p0, p1, p2, p3, p4 = (node() for _ in range(5))
    code[p0] = Iop(Operation("getcanary"), (), c, p1)
    code[p1] = Iop(Operation("getsp"), (), s, p2)
    code[p2] = Iop(Operation("const", imm=off), (), k, p3)
    code[p3] = Iop(Operation("addptr"), (s, k), a, p4)
    code[p4] = Istore(a, 0, c, f.entry)

    exits = [n for n in sorted(f.code) if isinstance(f.code[n], EXITS)]
    fail = None
    if exits:
        fail = node()
        code[fail] = Iextcall("stack_chk_fail", (), reg(), fail)
    for n in exits:
        c1, s1, v = reg(), reg(), reg()
        e1, e2, e3, moved = node(), node(), node(), node()
        code[moved] = f.code[n]
        code[n] = Iop(Operation("getcanary"), (), c1, e1)
        code[e1] = Iop(Operation("getsp"), (), s1, e2)
        code[e2] = Iload(s1, off, v, e3)
        code[e3] = Icond("eq", (c1, v), moved, fail)
    return replace(f, stacksize=entry.new_stacksize, entry=p0, code=code), entry, len(exits)


def canary_counted(p: Program, cfg: PassConfig) -> Tuple[Program, CanarySpec, Dict[str, int]]:
    funcs, spec, counts = {}, CanarySpec(), {}
    for name, f in p.functions.items():
        if is_protected(f, cfg):
            funcs[name], spec.entries[name], counts[name] = protect_function(f)
        else:
            funcs[name] = f
            spec.entries[name] = CanaryEntry(False, -1, f.stacksize)
            counts[name] = 0
    return p.replace_functions(funcs), spec, counts


def pass_canary(p: Program, cfg: PassConfig) -> Tuple[Program, CanarySpec]:
    out, spec, _ = canary_counted(p, cfg)
    return out, spec
