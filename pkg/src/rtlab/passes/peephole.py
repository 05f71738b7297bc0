"""The ``retaa`` peephole and the symbolic executor that licenses it."""
from __future__ import annotations

from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

from ..ir import (
    Function, Iextcall, Iload, Iop, Iretaa, Iretvia, Ireturn, Istore, Instr, Node,
)

UNDEF = ("undef",)
SP = ("sp",)
_MAX_CHAIN = 8


class _Sym:
    def __init__(self):
        self.regs: Dict[str, tuple] = {}
        self.mem: List[tuple] = []
        self.events: List[tuple] = []

    def get(self, r: str) -> tuple:
        return self.regs.get(r, ("reg", r))

    def final_regs(self) -> Dict[str, tuple]:
        return {r: t for r, t in self.regs.items() if t != ("reg", r)}


def _op_term(i: Iop, sym: _Sym) -> tuple:
    name = i.op.name
    if name == "move":
        return sym.get(i.args[0])
    if name == "getsp":
        return SP
    if name in ("getra", "getcanary"):
        return (name,)
    if name == "const":
        return ("const", i.op.imm)
    if name == "codeaddr":
        return ("codeaddr",) + tuple(i.op.target)
    return (name,) + tuple(sym.get(a) for a in i.args)


def _execute(seq: Sequence[Instr]) -> Optional[tuple]:
    """Final symbolic state of a straight-line sequence, or None if it is not one."""
    if not seq:
        return None
    sym = _Sym()
    for i in seq[:-1]:
        if isinstance(i, Iop):
            sym.regs[i.dst] = _op_term(i, sym)
        elif isinstance(i, Iload):
            sym.regs[i.dst] = ("load", sym.get(i.addr), i.off, tuple(sym.mem))
        elif isinstance(i, Istore):
            sym.mem.append((sym.get(i.addr), i.off, sym.get(i.src)))
        elif isinstance(i, Iextcall):
            sym.events.append((i.name,) + tuple(sym.get(a) for a in i.args))
            sym.regs[i.dst] = ("result", len(sym.events))
        else:
            return None
    last = seq[-1]
    if isinstance(last, Ireturn):
        target, val = ("caller",), None if last.src is None else sym.get(last.src)
    elif isinstance(last, (Iretvia, Iretaa)):
        val = None if last.val is None else sym.get(last.val)
        target = sym.get(last.src)
        if isinstance(last, Iretaa):
            target = ("pac_decode", target, SP)
        # the register holding the return address is left undefined
        sym.regs[last.src] = UNDEF
    else:
        return None
    return sym.final_regs(), tuple(sym.mem), tuple(sym.events), target, val


def symexec_equiv(seq1: Sequence[Instr], seq2: Sequence[Instr]) -> bool:
    """Do two straight-line sequences ending in a return have identical symbolic effect?"""
    r1, r2 = _execute(seq1), _execute(seq2)
    return r1 is not None and r1 == r2


def _chain_before(f: Function, preds: Dict[Node, List[Node]], n: Node) -> List[Node]:
    chain: List[Node] = []
    cur = n
    while len(chain) < _MAX_CHAIN:
        ps = preds.get(cur, [])
        if len(ps) != 1 or ps[0] in chain or ps[0] == n:
            break
        q = ps[0]
        if not isinstance(f.code[q], (Iop, Iload, Istore)):
            break
        chain.insert(0, q)
        cur = q
    return chain


def fusion_candidates(f: Function) -> List[Tuple[Node, Node]]:
    """``(decode node, retvia node)`` pairs that are adjacent and exclusively linked."""
    preds = f.predecessors()
    out = []
    for c in sorted(f.code):
        rv = f.code[c]
        if not isinstance(rv, Iretvia) or len(preds.get(c, [])) != 1:
            continue
        b = preds[c][0]
        d = f.code[b]
        if isinstance(d, Iop) and d.op.name == "pac_decode" and d.dst == rv.src and d.succ == c and b != f.entry:
            out.append((b, c))
    return out


def peephole_counted(f: Function) -> Tuple[Function, int]:
    pairs = fusion_candidates(f)
    if not pairs:
        return f, 0
    preds = f.predecessors()
    code = dict(f.code)
    k = 0
    for b, c in pairs:
        d, rv = f.code[b], f.code[c]
        fused = Iretaa(d.args[0], rv.val)
        prefix = [f.code[q] for q in _chain_before(f, preds, b)]
        if symexec_equiv(prefix + [d, rv], prefix + [fused]):
            code[b] = fused
            del code[c]
            k += 1
    return (replace(f, code=code), k) if k else (f, 0)


def peephole_retaa(f: Function) -> Function:
    """Fuse ``pac_decode`` followed by ``retvia`` into ``retaa`` when provably equivalent."""
    return peephole_counted(f)[0]
