"""Deliberately broken pass variants for checking that the validator rejects them."""
from __future__ import annotations

from dataclasses import replace
from typing import Callable, Dict, Tuple

from ..ir import FreshNodes, FreshRegs, Function, Icond, Iop, Iretvia, Itailcall, Operation, Program
from .canary import EXITS, canary_counted
from .config import PassConfig
from .peephole import fusion_candidates
from .pipeline import PassOutput, run_pass


def _map_functions(p: Program, fn: Callable[[Function], Function]) -> Program:
    return p.replace_functions({n: fn(f) for n, f in p.functions.items()})


def canary_wrong_offset(p: Program, cfg: PassConfig) -> PassOutput:
    """Prologue stores the canary one word low; the reported layout is still the correct one."""
    out, spec, counts = canary_counted(p, cfg)

    def shift(f: Function) -> Function:
        e = spec.get(f.name)
        if not e or not e.protected:
            return f
        # prologue: getcanary -> getsp -> const off -> addptr -> store
        n = f.code[f.code[f.entry].succ].succ
        k = f.code[n]
        return replace(f, code={**f.code, n: replace(k, op=Operation("const", imm=k.op.imm - 8))})

    return PassOutput(_map_functions(out, shift), counts, spec)


def canary_skip_check(p: Program, cfg: PassConfig) -> PassOutput:
    """The first exit of every protected function is left unchecked."""
    out, spec, counts = canary_counted(p, cfg)

    def skip(f: Function) -> Function:
        e = spec.get(f.name)
        src = p.functions[f.name]
        exits = [n for n in sorted(src.code) if isinstance(src.code[n], EXITS)]
        if not e or not e.protected or not exits:
            return f
        n = exits[0]
        cond = f.code[f.code[f.code[f.code[n].succ].succ].succ]
        assert isinstance(cond, Icond)
        return replace(f, code={**f.code, n: f.code[cond.if_true]})

    return PassOutput(_map_functions(out, skip), counts, spec)


def tailrec_swapped_moves(p: Program, cfg: PassConfig) -> PassOutput:
    """Parameters are assigned from the temporaries before the temporaries are filled."""
    counts: Dict[str, int] = {}

    def bad(f: Function) -> Function:
        sites = [n for n, i in sorted(f.code.items())
                 if isinstance(i, Itailcall) and i.callee == f.name and len(i.args) == len(f.params) and i.args]
        counts[f.name] = len(sites)
        if not sites:
            return f
        code = dict(f.code)
        node, reg = FreshNodes(code), FreshRegs(f)
        for n in sites:
            args = f.code[n].args
            temps = [reg() for _ in args]
            moves = list(zip(f.params, temps)) + list(zip(temps, args))
            nodes = [n] + [node() for _ in moves[1:]] + [f.entry]
            for k, (dst, src) in enumerate(moves):
                code[nodes[k]] = Iop(Operation("move"), (src,), dst, nodes[k + 1])
        return replace(f, code=code)

    return PassOutput(_map_functions(p, bad), counts)


def pac_wrong_modifier(p: Program, cfg: PassConfig) -> PassOutput:
    """Epilogue decodes against a zero modifier instead of the stack pointer."""
    out = run_pass(p, "pac", cfg)

    def bad(f: Function) -> Function:
        code = dict(f.code)
        for n, i in f.code.items():
            if isinstance(i, Iop) and i.op.name == "pac_decode":
                mod = i.args[1]
                for m, j in f.code.items():
                    if isinstance(j, Iop) and j.dst == mod and j.op.name == "getsp" and j.succ == n:
                        code[m] = Iop(Operation("const", imm=0), (), mod, j.succ)
        return replace(f, code=code)

    return PassOutput(_map_functions(out.program, bad), out.counts)


def peephole_no_decode(p: Program, cfg: PassConfig) -> PassOutput:
    """Fuses the epilogue pair into a plain ``retvia`` of the still-encoded value."""
    counts: Dict[str, int] = {}

    def bad(f: Function) -> Function:
        pairs = fusion_candidates(f)
        counts[f.name] = len(pairs)
        if not pairs:
            return f
        code = dict(f.code)
        for b, c in pairs:
            code[b] = Iretvia(f.code[b].args[0], f.code[c].val)
            del code[c]
        return replace(f, code=code)

    return PassOutput(_map_functions(p, bad), counts)


# name -> (pass it impersonates, implementation)
MUTANTS: Dict[str, Tuple[str, Callable[[Program, PassConfig], PassOutput]]] = {
    "canary_wrong_offset": ("canary", canary_wrong_offset),
    "canary_skip_check": ("canary", canary_skip_check),
    "tailrec_swapped_moves": ("tailrec", tailrec_swapped_moves),
    "pac_wrong_modifier": ("pac", pac_wrong_modifier),
    "peephole_no_decode": ("peephole", peephole_no_decode),
}
