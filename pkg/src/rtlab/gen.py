"""Seeded random generator of terminating, well-formed programs.

Termination is structural: calls only go to functions defined later in the
list, loops count up to a small constant, and self-recursion decreases a
depth parameter that callers set to a small constant.  Frame traffic stays
at constant in-bounds offsets, and every slot is initialised before use so
printed values are always defined integers.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from .ir import (
    Function, Icall, Icond, Iextcall, Iload, Iop, Ireturn, Istore, Itailcall, Operation, Program,
)

DEFAULT_BUDGET = 12

_ARITH = ("add", "sub", "mul")


@dataclass
class _Sig:
    name: str
    arity: int
    ptr_param: bool  # first parameter is a pointer into the caller's frame
    recursive: bool  # first parameter is a recursion depth
    stacksize: int
    tail_self: bool = False


class _Builder:
    """Appends instructions at consecutive node ids; successors are patched later."""

    def __init__(self) -> None:
        self.code: Dict[int, object] = {}
        self.n = 1
        self.regs = 0

    def reg(self) -> str:
        self.regs += 1
        return f"v{self.regs}"

    def emit(self, make: Callable[[int], object]) -> int:
        n = self.n
        self.n += 1
        self.code[n] = make(n + 1)
        return n

    def hole(self) -> int:
        n = self.n
        self.n += 1
        return n

    def const(self, k: int) -> str:
        r = self.reg()
        self.emit(lambda s: Iop(Operation("const", imm=k), (), r, s))
        return r


@dataclass
class _Ctx:
    b: _Builder
    rng: random.Random
    sig: _Sig
    sigs: List[_Sig]
    index: int
    ints: List[str] = field(default_factory=list)
    sp: Optional[str] = None
    ptr: Optional[str] = None
    budget: int = 0


def _pick(ctx: _Ctx) -> str:
    return ctx.rng.choice(ctx.ints)


def _arith(ctx: _Ctx) -> None:
    b, rng = ctx.b, ctx.rng
    op = rng.choice(_ARITH)
    x, y = _pick(ctx), _pick(ctx)
    d = b.reg()
    b.emit(lambda s: Iop(Operation(op), (x, y), d, s))
    ctx.ints.append(d)


def _div(ctx: _Ctx) -> None:
    b, rng = ctx.b, ctx.rng
    x = _pick(ctx)
    # mostly a nonzero constant divisor; sometimes a computed one that may be zero
    y = b.const(rng.choice([-3, -1, 2, 3, 7])) if rng.random() < 0.85 else _pick(ctx)
    d = b.reg()
    b.emit(lambda s: Iop(Operation("div_strict"), (x, y), d, s))
    ctx.ints.append(d)


def _frame_access(ctx: _Ctx) -> None:
    b, rng = ctx.b, ctx.rng
    choices = []
    if ctx.sp:
        choices += [(ctx.sp, o) for o in range(0, ctx.sig.stacksize, 8)]
    if ctx.ptr:
        choices += [(ctx.ptr, 0), (ctx.ptr, 8)]
    base, off = rng.choice(choices)
    if rng.random() < 0.5:
        src = _pick(ctx)
        b.emit(lambda s: Istore(base, off, src, s))
    else:
        d = b.reg()
        b.emit(lambda s: Iload(base, off, d, s))
        ctx.ints.append(d)


def _print(ctx: _Ctx) -> None:
    x = _pick(ctx)
    d = ctx.b.reg()
    ctx.b.emit(lambda s: Iextcall("print_int", (x,), d, s))


def _call_args(ctx: _Ctx, callee: _Sig, tail: bool) -> Optional[List[str]]:
    args = []
    for k in range(callee.arity):
        if k == 0 and callee.ptr_param:
            if tail or ctx.sp is None or ctx.sig.stacksize < 16:
                return None
            args.append(ctx.sp)
        elif k == 0 and callee.recursive:
            args.append(ctx.b.const(ctx.rng.randint(0, 6)))
        else:
            args.append(_pick(ctx))
    return args


def _call(ctx: _Ctx) -> None:
    later = ctx.sigs[ctx.index + 1:]
    if not later:
        return _arith(ctx)
    callee = ctx.rng.choice(later)
    args = _call_args(ctx, callee, tail=False)
    if args is None:
        return _arith(ctx)
    d = ctx.b.reg()
    ctx.b.emit(lambda s: Icall(callee.name, tuple(args), d, s))
    ctx.ints.append(d)


def _block(ctx: _Ctx, n: int, in_loop: bool = False) -> None:
    rng = ctx.rng
    for _ in range(n):
        r = rng.random()
        if r < 0.35:
            _arith(ctx)
        elif r < 0.45:
            _div(ctx)
        elif r < 0.65 and (ctx.sp or ctx.ptr):
            _frame_access(ctx)
        elif r < 0.78:
            _print(ctx)
        elif r < 0.88 and not in_loop:
            _call(ctx)
        elif r < 0.94 and not in_loop and ctx.budget > 0:
            ctx.budget -= 1
            _loop(ctx)
        elif not in_loop and ctx.budget > 0:
            ctx.budget -= 1
            _branch(ctx)
        else:
            _arith(ctx)


def _loop(ctx: _Ctx) -> None:
    b, rng = ctx.b, ctx.rng
    i = b.const(0)
    lim = b.const(rng.randint(1, 4))
    one = b.const(1)
    head = b.hole()
    saved = list(ctx.ints)
    body = b.n
    ctx.ints.append(i)
    _block(ctx, rng.randint(1, 3), in_loop=True)
    b.emit(lambda s: Iop(Operation("add"), (i, one), i, head))
    ctx.ints = saved + [i]
    b.code[head] = Icond("lt", (i, lim), body, b.n)


def _branch(ctx: _Ctx) -> None:
    b, rng = ctx.b, ctx.rng
    x, y = _pick(ctx), _pick(ctx)
    cond = rng.choice(("eq", "lt", "ge", "ne"))
    test = b.hole()
    saved = list(ctx.ints)
    then = b.n
    _block(ctx, rng.randint(1, 2))
    jump = b.hole()
    ctx.ints = list(saved)
    els = b.n
    _block(ctx, rng.randint(1, 2))
    jump2 = b.hole()
    join = b.n
    b.code[test] = Icond(cond, (x, y), then, els)
    # both arms jump to the join through a harmless move
    t = b.reg()
    b.code[jump] = Iop(Operation("move"), (saved[0],), t, join)
    b.code[jump2] = Iop(Operation("move"), (saved[0],), t, join)
    ctx.ints = saved


def _function(rng: random.Random, sigs: List[_Sig], index: int, budget: int) -> Function:
    sig = sigs[index]
    b = _Builder()
    params = [f"p{k}" for k in range(sig.arity)]
    ctx = _Ctx(b, rng, sig, sigs, index, budget=max(1, budget // 4))
    ints = [p for k, p in enumerate(params) if not (k == 0 and sig.ptr_param)]
    if sig.ptr_param:
        ctx.ptr = params[0]
    ctx.ints = ints or []
    ctx.ints.append(b.const(rng.randint(-5, 20)))
    if sig.stacksize:
        s = b.reg()
        b.emit(lambda n: Iop(Operation("getsp"), (), s, n))
        ctx.sp = s
        for o in range(0, sig.stacksize, 8):
            v = _pick(ctx)
            b.emit(lambda n, o=o, v=v: Istore(s, o, v, n))

    if sig.recursive:
        depth = params[0]
        one = b.const(1)
        test = b.hole()
        saved = list(ctx.ints)
        rec = b.n
        d1 = b.reg()
        b.emit(lambda n: Iop(Operation("sub"), (depth, one), d1, n))
        _block(ctx, rng.randint(1, 3))
        args = [d1] + [_pick(ctx) for _ in params[1:]]
        if sig.tail_self:
            b.emit(lambda n: Itailcall(sig.name, tuple(args)))
        else:
            r = b.reg()
            b.emit(lambda n: Icall(sig.name, tuple(args), r, n))
            b.emit(lambda n: Ireturn(r))
        base = b.n
        ctx.ints = saved
        b.code[test] = Icond("lt", (depth, one), base, rec)
        _block(ctx, rng.randint(1, 2))
        ret = _pick(ctx)
        b.emit(lambda n: Ireturn(ret))
    else:
        _block(ctx, rng.randint(2, max(2, budget)))
        later = sigs[index + 1:]
        r = rng.random()
        callee = rng.choice(later) if later else None
        args = _call_args(ctx, callee, tail=True) if callee else None
        if args is not None and r < 0.25:
            b.emit(lambda n: Itailcall(callee.name, tuple(args)))
        elif args is not None and r < 0.5:
            d = b.reg()
            b.emit(lambda n: Icall(callee.name, tuple(args), d, n))
            b.emit(lambda n: Ireturn(d))
        else:
            ret = _pick(ctx)
            b.emit(lambda n: Ireturn(ret))
    return Function(sig.name, tuple(params), sig.stacksize, 1, dict(b.code))


def main_arity(p: Program) -> int:
    return len(p.functions[p.main].params)


def gen_random_program(seed: int, budget: int = DEFAULT_BUDGET) -> Program:
    """A terminating, well-formed program determined entirely by ``seed`` and ``budget``."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = random.Random(seed)
    nfun = rng.randint(1, 2 + budget // 4)
    sigs: List[_Sig] = []
    for k in range(nfun):
        name = "main" if k == 0 else f"f{k}"
        if k == 0:
            sigs.append(_Sig(name, rng.randint(0, 2), False, False, rng.choice((0, 0, 16, 24))))
            continue
        kind = rng.random()
        if kind < 0.45:
            # recursive workers keep no frame so their self calls are tail calls
            sigs.append(_Sig(name, rng.randint(1, 4), False, True, 0, tail_self=rng.random() < 0.5))
        elif kind < 0.65:
            sigs.append(_Sig(name, rng.randint(1, 3), True, False, rng.choice((0, 8, 16))))
        else:
            sigs.append(_Sig(name, rng.randint(0, 4), False, False, rng.choice((0, 0, 8, 16, 32))))
    if not any(s.recursive for s in sigs) and nfun > 1 and rng.random() < 0.5:
        k = rng.randrange(1, nfun)
        sigs[k] = _Sig(sigs[k].name, max(1, sigs[k].arity), False, True, 0, tail_self=True)
    funcs = {s.name: _function(rng, sigs, k, budget) for k, s in enumerate(sigs)}
    return Program(funcs, "main")


def random_args(seed: int, arity: int) -> List[int]:
    rng = random.Random(seed ^ 0x5EED)
    return [rng.randint(-10, 10) for _ in range(arity)]
