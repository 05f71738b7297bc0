"""Small-step interpreter for the RTL IR.

States are regular (executing an instruction), call (about to enter a
function), return (about to resume a caller) or terminal.  Undefined
behaviour is a :class:`Stuck` state: the semantics has no successor there.
Operators are strict in ``Vundef``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

from .ir import (
    BUILTINS, Icall, Icond, Iextcall, Ijumptable, Iload, Iop, Iretaa, Iretvia,
    Ireturn, Istore, Itailcall, Node, Operation, Program, Reg,
)
from .memory import (
    VUNDEF, MemError, Memory, PAC_KEY_A, Value, Vcode, Venc, Vint, Vptr,
    empty_memory, vint, wrap64,
)

DEFAULT_FUEL = 10_000_000

STACK_SMASHING_MSG = "*** stack smashing detected ***: terminated"

# Return address of ``main``; no instruction can construct it.
EXIT_RA = Vcode("$exit", 0)


class StuckReason(str, enum.Enum):
    DivideError = "DivideError"
    UndefCondition = "UndefCondition"
    MemFault = "MemFault"
    BadReturnAddress = "BadReturnAddress"
    UndefObservable = "UndefObservable"
    ArityMismatch = "ArityMismatch"
    JumptableRange = "JumptableRange"


# -- events -------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ExtCall:
    name: str
    args: Tuple[int, ...]

    def __str__(self) -> str:
        return f"extcall {self.name}({', '.join(map(str, self.args))})"


@dataclass(frozen=True, slots=True)
class Abort:
    msg: str

    def __str__(self) -> str:
        return f"abort: {self.msg}"


Event = Union[ExtCall, Abort]


def render_trace(trace: Sequence[Event]) -> str:
    return "".join(f"{e}\n" for e in trace)


# -- states -------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Frame:
    ret_dst: Reg
    caller: str
    caller_regs: Mapping[Reg, Value]
    ret_node: Node
    caller_sp: Value


Stack = Tuple[Frame, ...]  # innermost caller last


@dataclass(frozen=True, slots=True)
class Regular:
    stack: Stack
    f: str
    sp: Value
    pc: Node
    regs: Mapping[Reg, Value]
    m: Memory


@dataclass(frozen=True, slots=True)
class Call:
    stack: Stack
    callee: str
    args: Tuple[Value, ...]
    m: Memory


@dataclass(frozen=True, slots=True)
class Return:
    """About to resume the innermost caller.

    ``ra`` is ``None`` for an abstract return, otherwise the validated code
    address an ``Iretvia``/``Iretaa`` jumped through.
    """

    stack: Stack
    v: Value
    m: Memory
    ra: Optional[Vcode] = None


@dataclass(frozen=True, slots=True)
class Final:
    v: Value
    m: Memory


@dataclass(frozen=True, slots=True)
class Aborted:
    msg: str
    m: Memory


@dataclass(frozen=True, slots=True)
class Stuck:
    reason: StuckReason
    at: Optional[Tuple[str, Node]] = None
    detail: str = ""

    def __str__(self) -> str:
        where = f" at {self.at[0]}:{self.at[1]}" if self.at else ""
        extra = f" ({self.detail})" if self.detail else ""
        return f"stuck: {self.reason.value}{where}{extra}"


State = Union[Regular, Call, Return, Final, Aborted, Stuck]
TERMINAL = (Final, Aborted, Stuck)


def return_address(stack: Stack) -> Vcode:
    """The code address a function running on top of ``stack`` returns to."""
    if not stack:
        return EXIT_RA
    fr = stack[-1]
    return Vcode(fr.caller, fr.ret_node)


def canary_from_seed(seed: int) -> Vint:
    """Nonzero canary derived from a seed by a fixed 64-bit mixing bijection."""
    z = (seed + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & ((1 << 64) - 1)
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & ((1 << 64) - 1)
    z ^= z >> 31
    return Vint(wrap64(z or 0x2545F4914F6CDD1D))


# -- operators ----------------------------------------------------------------


class OpContext(NamedTuple):
    canary: Value
    sp: Value
    ra: Value
    m: Optional[Memory] = None


def _weakly_valid(m: Optional[Memory], p: Vptr) -> bool:
    if m is None:
        return False
    blk = m.block(p.b)
    return blk is not None and blk.live and 0 <= p.o <= blk.size


def _live(m: Optional[Memory], b: int) -> bool:
    return m is not None and m.is_live(b)


def _trunc_div(a: int, b: int) -> Optional[int]:
    if b == 0 or (a == -(1 << 63) and b == -1):
        return None
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def cmp_eq(a: Value, b: Value, m: Optional[Memory]) -> Value:
    ta, tb = type(a), type(b)
    if ta is Vint and tb is Vint:
        return Vint(int(a.i == b.i))
    if ta is Vptr and tb is Vptr:
        if a.b == b.b:
            return Vint(int(a.o == b.o))
        return Vint(0) if _live(m, a.b) and _live(m, b.b) else VUNDEF
    # a live pointer is never null
    if ta is Vptr and tb is Vint and b.i == 0 and _live(m, a.b):
        return Vint(0)
    if tb is Vptr and ta is Vint and a.i == 0 and _live(m, b.b):
        return Vint(0)
    if ta is Vcode and tb is Vcode:
        return Vint(int(a == b))
    # code labels live outside every data block and never equal an integer
    if (ta is Vcode and tb is Vint) or (ta is Vint and tb is Vcode):
        return Vint(0)
    return VUNDEF


def cmp_lt(a: Value, b: Value, m: Optional[Memory]) -> Value:
    ta, tb = type(a), type(b)
    if ta is Vint and tb is Vint:
        return Vint(int(a.i < b.i))
    if ta is Vptr and tb is Vptr and a.b == b.b and _weakly_valid(m, a) and _weakly_valid(m, b):
        return Vint(int(a.o < b.o))
    return VUNDEF


def pac_encode(v: Value, mod: Value) -> Value:
    if v is VUNDEF or mod is VUNDEF:
        return VUNDEF
    if type(v) in (Vint, Vptr, Vcode):
        return Venc(v, mod, PAC_KEY_A)
    return VUNDEF


def pac_decode(e: Value, mod: Value) -> Value:
    if type(e) is Venc and mod is not VUNDEF and e.key == PAC_KEY_A and e.digest == mod:
        return e.inner
    return VUNDEF


def eval_op(op: Operation, args: Sequence[Value], ctx: OpContext) -> Value:
    """Evaluate an operator.  Total: every failure case yields Vundef."""
    name = op.name
    if name == "const":
        return vint(op.imm)
    if name == "move":
        return args[0]
    if name == "getcanary":
        return ctx.canary
    if name == "getsp":
        return ctx.sp
    if name == "getra":
        return ctx.ra
    if name == "codeaddr":
        return Vcode(*op.target)
    a, b = args
    if a is VUNDEF or b is VUNDEF:
        return VUNDEF
    ta, tb = type(a), type(b)
    if name in ("add", "sub", "mul"):
        if ta is not Vint or tb is not Vint:
            return VUNDEF
        if name == "add":
            return Vint(wrap64(a.i + b.i))
        if name == "sub":
            return Vint(wrap64(a.i - b.i))
        return Vint(wrap64(a.i * b.i))
    if name in ("div_strict", "div_total"):
        if ta is not Vint or tb is not Vint:
            return VUNDEF
        q = _trunc_div(a.i, b.i)
        return VUNDEF if q is None else Vint(q)
    if name == "addptr":
        if ta is Vptr and tb is Vint:
            return Vptr(a.b, a.o + b.i)
        return VUNDEF
    if name == "cmp_eq":
        return cmp_eq(a, b, ctx.m)
    if name == "cmp_lt":
        return cmp_lt(a, b, ctx.m)
    if name == "pac_encode":
        return pac_encode(a, b)
    if name == "pac_decode":
        return pac_decode(a, b)
    raise ValueError(f"unknown opcode {name!r}")


def eval_cond(cond: str, a: Value, b: Value, m: Memory) -> Optional[bool]:
    """Branch outcome, or None when the comparison is undefined."""
    r = cmp_eq(a, b, m) if cond in ("eq", "ne") else cmp_lt(a, b, m)
    if r is VUNDEF:
        return None
    t = r.i != 0
    return t if cond in ("eq", "lt") else not t


# -- stepping -----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class FrameEvent:
    kind: str  # "alloc" | "free"
    block: int
    size: int
    step: int = -1


def _set(regs: Mapping[Reg, Value], r: Reg, v: Value) -> Dict[Reg, Value]:
    d = dict(regs)
    d[r] = v
    return d


def _get(regs: Mapping[Reg, Value], r: Reg) -> Value:
    return regs.get(r, VUNDEF)


def _free_frame(s: Regular) -> Tuple[Memory, FrameEvent]:
    b = s.sp.b
    return s.m.free(b), FrameEvent("free", b, s.m.size(b))


def _builtin(name: str, args: Sequence[Value], at) -> Tuple[Optional[Value], List[Event], Optional[State]]:
    """Run a builtin: (result, events, terminal state or None)."""
    if name == "print_int":
        (v,) = args
        if type(v) is not Vint:
            return None, [], Stuck(StuckReason.UndefObservable, at, f"print_int({v})")
        return Vint(0), [ExtCall("print_int", (v.i,))], None
    if name == "stack_chk_fail":
        return None, [Abort(STACK_SMASHING_MSG)], None
    raise ValueError(f"unknown builtin {name!r}")


def _retvia(s: Regular, target: Value, val: Value, at) -> Tuple[State, List[FrameEvent]]:
    if type(target) is not Vcode:
        return Stuck(StuckReason.BadReturnAddress, at, f"return through {target}"), []
    if s.stack:
        fr = s.stack[-1]
        if target.f != fr.caller:
            return Stuck(StuckReason.BadReturnAddress, at, f"return into {target.f}, caller is {fr.caller}"), []
    elif target != EXIT_RA:
        return Stuck(StuckReason.BadReturnAddress, at, f"return through {target} with empty stack"), []
    m, ev = _free_frame(s)
    return Return(s.stack, val, m, target), [ev]


def step_ex(p: Program, s: State, canary: Value) -> Tuple[State, List[Event], List[FrameEvent]]:
    """One deterministic step, also reporting frame allocations and frees."""
    ts = type(s)
    if ts is Regular:
        f = p.functions[s.f]
        i = f.code[s.pc]
        regs = s.regs
        at = (s.f, s.pc)
        ti = type(i)
        if ti is Iop:
            if i.op.name == "div_strict":
                a, b = (_get(regs, r) for r in i.args)
                if type(a) is not Vint or type(b) is not Vint or _trunc_div(a.i, b.i) is None:
                    return Stuck(StuckReason.DivideError, at, f"{a} / {b}"), [], []
            args = [_get(regs, r) for r in i.args]
            ctx = OpContext(canary, s.sp, return_address(s.stack), s.m)
            v = eval_op(i.op, args, ctx)
            return Regular(s.stack, s.f, s.sp, i.succ, _set(regs, i.dst, v), s.m), [], []
        if ti is Iload or ti is Istore:
            a = _get(regs, i.addr)
            if type(a) is not Vptr:
                return Stuck(StuckReason.MemFault, at, f"address {a} is not a pointer"), [], []
            try:
                if ti is Iload:
                    v = s.m.load64(a.b, a.o + i.off)
                    return Regular(s.stack, s.f, s.sp, i.succ, _set(regs, i.dst, v), s.m), [], []
                m = s.m.store64(a.b, a.o + i.off, _get(regs, i.src))
            except MemError as e:
                return Stuck(StuckReason.MemFault, at, str(e)), [], []
            return Regular(s.stack, s.f, s.sp, i.succ, regs, m), [], []
        if ti is Icond:
            a, b = (_get(regs, r) for r in i.args)
            c = eval_cond(i.cond, a, b, s.m)
            if c is None:
                return Stuck(StuckReason.UndefCondition, at, f"{i.cond} {a}, {b}"), [], []
            return Regular(s.stack, s.f, s.sp, i.if_true if c else i.if_false, regs, s.m), [], []
        if ti is Icall:
            args = tuple(_get(regs, r) for r in i.args)
            if i.callee in BUILTINS:
                return _step_builtin(s, i.callee, args, i.dst, i.succ, at)
            fr = Frame(i.dst, s.f, regs, i.succ, s.sp)
            return Call(s.stack + (fr,), i.callee, args, s.m), [], []
        if ti is Iextcall:
            args = tuple(_get(regs, r) for r in i.args)
            return _step_builtin(s, i.name, args, i.dst, i.succ, at)
        if ti is Itailcall:
            args = tuple(_get(regs, r) for r in i.args)
            m, ev = _free_frame(s)
            if i.callee in BUILTINS:
                res, events, term = _builtin(i.callee, args, at)
                if term is not None:
                    return term, events, [ev]
                if res is None:
                    return Aborted(STACK_SMASHING_MSG, m), events, [ev]
                return Return(s.stack, res, m), events, [ev]
            return Call(s.stack, i.callee, args, m), [], [ev]
        if ti is Ijumptable:
            v = _get(regs, i.index)
            if v is VUNDEF:
                return Stuck(StuckReason.UndefCondition, at, "jumptable index undef"), [], []
            if type(v) is not Vint or not 0 <= v.i < len(i.targets):
                return Stuck(StuckReason.JumptableRange, at, f"index {v}"), [], []
            return Regular(s.stack, s.f, s.sp, i.targets[v.i], regs, s.m), [], []
        if ti is Ireturn:
            v = VUNDEF if i.src is None else _get(regs, i.src)
            m, ev = _free_frame(s)
            return Return(s.stack, v, m), [], [ev]
        if ti is Iretvia:
            val = VUNDEF if i.val is None else _get(regs, i.val)
            st, evs = _retvia(s, _get(regs, i.src), val, at)
            return st, [], evs
        if ti is Iretaa:
            val = VUNDEF if i.val is None else _get(regs, i.val)
            # the authenticated register reads as Vundef afterwards; the bank is discarded
            st, evs = _retvia(s, pac_decode(_get(regs, i.src), s.sp), val, at)
            return st, [], evs
        raise TypeError(f"unknown instruction {i!r}")
    if ts is Call:
        f = p.functions[s.callee]
        if len(s.args) != len(f.params):
            return Stuck(StuckReason.ArityMismatch, (s.callee, f.entry),
                         f"{len(s.args)} arguments for {len(f.params)} parameters"), [], []
        m, b = s.m.alloc(f.stacksize)
        regs = dict(zip(f.params, s.args))
        return Regular(s.stack, s.callee, Vptr(b, 0), f.entry, regs, m), [], [FrameEvent("alloc", b, f.stacksize)]
    if ts is Return:
        if not s.stack:
            if s.ra is None or s.ra == EXIT_RA:
                return Final(s.v, s.m), [], []
            return Stuck(StuckReason.BadReturnAddress, None, f"return through {s.ra}"), [], []
        fr = s.stack[-1]
        if s.ra is None or s.ra.n == fr.ret_node:
            regs = _set(fr.caller_regs, fr.ret_dst, s.v)
            pc = fr.ret_node
        else:
            if s.ra.n not in p.functions[fr.caller].code:
                return Stuck(StuckReason.BadReturnAddress, (fr.caller, s.ra.n), "no such node"), [], []
            regs, pc = fr.caller_regs, s.ra.n
        return Regular(s.stack[:-1], fr.caller, fr.caller_sp, pc, regs, s.m), [], []
    raise ValueError(f"cannot step terminal state {s!r}")


def _step_builtin(s: Regular, name, args, dst, succ, at):
    res, events, term = _builtin(name, args, at)
    if term is not None:
        return term, events, []
    if res is None:
        return Aborted(STACK_SMASHING_MSG, s.m), events, []
    return Regular(s.stack, s.f, s.sp, succ, _set(s.regs, dst, res), s.m), events, []


def step(p: Program, s: State, canary: Value) -> Tuple[State, List[Event]]:
    st, events, _ = step_ex(p, s, canary)
    return st, events


def initial_state(p: Program, args: Sequence[Value], concrete_ints: bool = False) -> Call:
    return Call((), p.main, tuple(args), empty_memory(concrete_ints))


# -- driver -------------------------------------------------------------------


@dataclass
class ExecStats:
    steps: int = 0
    allocs: int = 0
    frees: int = 0
    max_live_frames: int = 0


@dataclass
class RunResult:
    outcome: str  # "Final" | "Aborted" | "Stuck" | "OutOfFuel"
    state: State
    trace: List[Event]
    stats: ExecStats
    alloc_log: List[FrameEvent] = field(default_factory=list)

    @property
    def value(self) -> Optional[Value]:
        return self.state.v if isinstance(self.state, Final) else None


class Machine:
    """Incremental runner used by both :func:`run` and the co-simulator."""

    def __init__(self, p: Program, args: Sequence[Value], canary_seed: int = 0,
                 concrete_ints: bool = False):
        self.p = p
        self.canary = canary_from_seed(canary_seed)
        self.state: State = initial_state(p, args, concrete_ints)
        self.trace: List[Event] = []
        self.stats = ExecStats()
        self.alloc_log: List[FrameEvent] = []
        self._live = 0

    @property
    def done(self) -> bool:
        return isinstance(self.state, TERMINAL)

    def step(self) -> Tuple[List[Event], List[FrameEvent]]:
        st, events, fevs = step_ex(self.p, self.state, self.canary)
        n = self.stats.steps
        self.stats.steps = n + 1
        if fevs:
            fevs = [FrameEvent(e.kind, e.block, e.size, n) for e in fevs]
            for e in fevs:
                if e.kind == "alloc":
                    self.stats.allocs += 1
                    self._live += 1
                    if self._live > self.stats.max_live_frames:
                        self.stats.max_live_frames = self._live
                else:
                    self.stats.frees += 1
                    self._live -= 1
            self.alloc_log.extend(fevs)
        if events:
            self.trace.extend(events)
        self.state = st
        return events, fevs


def run(p: Program, args: Sequence[Value] = (), fuel: int = DEFAULT_FUEL, canary_seed: int = 0,
        concrete_ints: bool = False) -> RunResult:
    """Execute ``p.main`` on ``args`` for at most ``fuel`` steps."""
    mach = Machine(p, [a if isinstance(a, Value) else vint(a) for a in args], canary_seed, concrete_ints)
    while not mach.done:
        if mach.stats.steps >= fuel:
            return RunResult("OutOfFuel", mach.state, mach.trace, mach.stats, mach.alloc_log)
        mach.step()
    return RunResult(type(mach.state).__name__, mach.state, mach.trace, mach.stats, mach.alloc_log)
