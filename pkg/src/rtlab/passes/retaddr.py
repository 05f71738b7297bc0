"""Return-address lowering and pointer authentication of the saved slot.

Lowering makes the return address an ordinary value: the prologue saves
``getra`` into a frame slot above the locals and every return reloads it and
jumps through it with ``retvia``.  Leaf functions keep the abstract return.
The PAC pass then encodes the saved value with the stack pointer as
modifier and decodes it just before the jump.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Dict, Tuple

from ..ir import (
    FreshNodes, FreshRegs, Function, Icall, Iload, Iop, Iretvia, Ireturn, Istore,
    Itailcall, Operation, Program,
)
from ..memory import WORD, align8
from .config import PassError


def is_leaf(f: Function) -> bool:
    return not any(isinstance(i, (Icall, Itailcall)) for i in f.code.values())


def lower_function(f: Function) -> Tuple[Function, int]:
    raoff = align8(f.stacksize)
    code = dict(f.code)
    node, reg = FreshNodes(code), FreshRegs(f)
    r, s = reg(), reg()
    p0, p1, p2 = node(), node(), node()
    code[p0] = Iop(Operation("getra"), (), r, p1)
    code[p1] = Iop(Operation("getsp"), (), s, p2)
    code[p2] = Istore(s, raoff, r, f.entry)
    rets = [n for n in sorted(f.code) if isinstance(f.code[n], Ireturn)]
    for n in rets:
        s1, rr = reg(), reg()
        e1, e2 = node(), node()
        code[n] = Iop(Operation("getsp"), (), s1, e1)
        code[e1] = Iload(s1, raoff, rr, e2)
        code[e2] = Iretvia(rr, f.code[n].src)
    return replace(f, stacksize=raoff + WORD, entry=p0, code=code, ra_offset=raoff), len(rets)


def lower_ra_counted(p: Program) -> Tuple[Program, Dict[str, int]]:
    funcs, counts = {}, {}
    for name, f in p.functions.items():
        if is_leaf(f) or f.ra_offset is not None:
            funcs[name], counts[name] = f, 0
        else:
            funcs[name], counts[name] = lower_function(f)
    return p.replace_functions(funcs), counts


def pass_lower_ra(p: Program) -> Program:
    """Save the return address of every non-leaf function in its frame."""
    return lower_ra_counted(p)[0]


def pac_function(f: Function) -> Tuple[Function, int]:
    if f.ra_offset is None:
        if not is_leaf(f) or any(isinstance(i, Iretvia) for i in f.code.values()):
            raise PassError(f"{f.name}: return address not lowered (no raslot)")
        return f, 0
    ra_regs = {i.dst for i in f.code.values() if isinstance(i, Iop) and i.op.name == "getra"}
    saves = [n for n in sorted(f.code)
             if isinstance(f.code[n], Istore) and f.code[n].off == f.ra_offset and f.code[n].src in ra_regs]
    if not saves:
        raise PassError(f"{f.name}: no return-address save found for raslot {f.ra_offset}")
    code = dict(f.code)
    node, reg = FreshNodes(code), FreshRegs(f)
    for n in saves:
        st = f.code[n]
        s, e = reg(), reg()
        x, y = node(), node()
        code[n] = Iop(Operation("getsp"), (), s, x)
        code[x] = Iop(Operation("pac_encode"), (st.src, s), e, y)
        code[y] = replace(st, src=e)
    rets = [n for n in sorted(f.code) if isinstance(f.code[n], Iretvia)]
    for n in rets:
        rv = f.code[n]
        s = reg()
        x, y = node(), node()
        code[n] = Iop(Operation("getsp"), (), s, x)
        # decoded in place so the register reads the same as after a fused retaa
        code[x] = Iop(Operation("pac_decode"), (rv.src, s), rv.src, y)
        code[y] = rv
    return replace(f, code=code), len(saves) + len(rets)


def pac_counted(p: Program) -> Tuple[Program, Dict[str, int]]:
    funcs, counts = {}, {}
    for name, f in p.functions.items():
        funcs[name], counts[name] = pac_function(f)
    return p.replace_functions(funcs), counts


def pass_pac(p: Program) -> Program:
    """Authenticate saved return addresses; requires :func:`pass_lower_ra` first."""
    return pac_counted(p)[0]
