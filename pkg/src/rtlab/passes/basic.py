"""Division refinement, tail-call exposure and tail-recursion elimination."""
from __future__ import annotations

from dataclasses import replace
from typing import Dict, Tuple

from ..ir import (
    BUILTINS, FreshNodes, FreshRegs, Function, Icall, Iop, Ireturn, Itailcall,
    Operation, Program,
)


def refine_div_counted(p: Program) -> Tuple[Program, Dict[str, int]]:
    funcs, counts = {}, {}
    for name, f in p.functions.items():
        code, k = {}, 0
        for n, i in f.code.items():
            if isinstance(i, Iop) and i.op.name == "div_strict":
                i = replace(i, op=Operation("div_total"))
                k += 1
            code[n] = i
        funcs[name] = replace(f, code=code) if k else f
        counts[name] = k
    return p.replace_functions(funcs), counts


def pass_refine_div(p: Program) -> Program:
    """Replace every ``div_strict`` by ``div_total``."""
    return refine_div_counted(p)[0]


def tailcall_counted(f: Function) -> Tuple[Function, int]:
    if f.stacksize != 0:
        return f, 0
    code = dict(f.code)
    k = 0
    for n, i in f.code.items():
        if not isinstance(i, Icall) or i.callee in BUILTINS:
            continue
        nxt = f.code.get(i.succ)
        if isinstance(nxt, Ireturn) and nxt.src == i.dst:
            code[n] = Itailcall(i.callee, i.args)
            k += 1
    return (replace(f, code=code), k) if k else (f, 0)


def pass_tailcall(f: Function) -> Function:
    """Turn ``call g; return result`` into ``tailcall g`` in frameless functions."""
    return tailcall_counted(f)[0]


def tailrec_counted(f: Function) -> Tuple[Function, int]:
    sites = [n for n, i in sorted(f.code.items())
             if isinstance(i, Itailcall) and i.callee == f.name and len(i.args) == len(f.params)]
    if not sites:
        return f, 0
    code = dict(f.code)
    fresh_node, fresh_reg = FreshNodes(code), FreshRegs(f)
    for n in sites:
        args = f.code[n].args
        temps = [fresh_reg() for _ in args]
        moves = [(t, a) for t, a in zip(temps, args)] + list(zip(f.params, temps))
        if not moves:
            t = fresh_reg()
            code[n] = Iop(Operation("const", imm=0), (), t, f.entry)
            continue
        nodes = [n] + [fresh_node() for _ in moves[1:]] + [f.entry]
        for k, (dst, src) in enumerate(moves):
            code[nodes[k]] = Iop(Operation("move"), (src,), dst, nodes[k + 1])
    return replace(f, code=code), len(sites)


def pass_tailrec(f: Function) -> Function:
    """Turn self tail calls into parameter moves and a jump to the entry.

    Arguments are first copied into fresh temporaries and only then into the
    parameters, so arguments that mention other parameters see old values.
    """
    return tailrec_counted(f)[0]
