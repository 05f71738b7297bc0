"""Differential co-execution of a program and its transformed version.

Both programs run from the same arguments and canary seed.  After every step
of the original, the transformed program is advanced by a bounded number of
steps until its state is related to the original's again; the relation
depends on the pass (definedness order, memory extension, memory injection,
or an encoded return-address slot).  Events must agree window by window.

This is per-input checking: an accepted verdict says the two runs matched on
this input, nothing more.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

from .ir import Iload, Iretaa, Iretvia, Ireturn, Itailcall, Node, Program
from .memory import VUNDEF, MemError, Memory, Value, Vptr, vint
from .passes import PassConfig, PassError
from .passes.canary import EXITS
from .passes.mutations import MUTANTS
from .passes.pipeline import PassOutput, prepare_pass, run_pass, PREREQUISITES
from .relations import (
    CanarySpec, InjectionMap, block_extends, block_inject, inject_match, inject_value, lessdef,
)
from .semantics import (
    Aborted, Call, EXIT_RA, Final, FrameEvent, Regular, Return, State, Stuck, TERMINAL,
    canary_from_seed, initial_state, pac_encode, return_address, step_ex,
)

DEFAULT_MAX_K = 16
DEFAULT_COSIM_FUEL = 1_000_000


class Kind(str, enum.Enum):
    LESSDEF = "lessdef"
    EXTENSION = "extension"
    INJECTION = "injection"
    SLOT_ENCODE = "slot_encode"


class Policy(str, enum.Enum):
    LOCKSTEP = "lockstep"
    PLUS = "plus"
    STAR = "star"


class Reason(str, enum.Enum):
    ACCEPTED = "accepted"
    TRACE_MISMATCH = "TraceMismatch"
    RELATION_VIOLATION = "RelationViolation"
    NO_MATCHING_STEP = "NoMatchingStep"
    FUEL_EXHAUSTED = "FuelExhausted"
    LOG_DESYNC = "LogDesync"


@dataclass
class MatchSpec:
    """How the states of the two runs must correspond.

    ``ra_slots`` names functions whose transformed frame holds the raw return
    address at the given offset; ``encoded_slots`` names functions whose slot
    holds a raw address in the original and its encoding in the transformed
    program.  ``pc_alias`` maps an original ``(function, node)`` to the node
    it was fused into.  ``skip_tail_frames`` lets original frames that only
    forward a callee's result go unmatched.
    """

    kind: Kind
    policy: Policy = Policy.LOCKSTEP
    max_k: int = DEFAULT_MAX_K
    canaries: Optional[CanarySpec] = None
    ra_slots: Dict[str, int] = field(default_factory=dict)
    encoded_slots: Dict[str, int] = field(default_factory=dict)
    pc_alias: Dict[Tuple[str, Node], Node] = field(default_factory=dict)
    skip_tail_frames: bool = False

    def __post_init__(self) -> None:
        self.kind, self.policy = Kind(self.kind), Policy(self.policy)
        if self.max_k < 1:
            raise ValueError("max_k must be at least 1")

    def window_sizes(self) -> List[int]:
        if self.policy is Policy.LOCKSTEP:
            return [1]
        ks = list(range(1, self.max_k + 1))
        return ks + [0] if self.policy is Policy.STAR else ks


@dataclass
class Verdict:
    accepted: bool
    reason: str
    counterexample: Optional[Dict[str, object]] = None
    relation_log: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        assert not (self.accepted and self.counterexample), "accepted verdicts carry no counterexample"

    def to_report(self) -> str:
        lines = [f"verdict: {'accepted' if self.accepted else 'rejected'} ({self.reason})"]
        for k in sorted(self.relation_log):
            lines.append(f"  {k}: {self.relation_log[k]}")
        if self.counterexample:
            lines.append("counterexample:")
            for k, v in self.counterexample.items():
                lines.append(f"  {k}: {v}")
        return "\n".join(lines) + "\n"


class LogDesync(Exception):
    pass


# -- frames -------------------------------------------------------------------


def _frames(s: State) -> List[Tuple[str, Value, Value]]:
    """``(function, sp, return address)`` of every frame that should be live, outermost first."""
    out = []
    stack = getattr(s, "stack", ())
    for k, fr in enumerate(stack):
        out.append((fr.caller, fr.caller_sp, return_address(stack[:k])))
    if type(s) is Regular:
        out.append((s.f, s.sp, return_address(stack)))
    return out


def check_weakly_allocated(s: State, p: Program) -> bool:
    """Every frame block on the stack is no larger than its function's declared frame."""
    m = getattr(s, "m", None)
    if m is None:
        return True
    for fn, sp, _ in _frames(s):
        if type(sp) is not Vptr:
            return False
        blk = m.block(sp.b)
        if blk is None or not blk.live:
            continue
        if sp.o != 0 or blk.size > p.functions[fn].stacksize:
            return False
    return True


# -- injection tracking -------------------------------------------------------


class InjectionTracker:
    """Maintains the block injection across synchronization windows.

    Paired allocations map at offset 0.  A frame the original frees while the
    transformed run frees nothing (a tail-recursive call) leaves its target
    pending; the next unpaired original allocation takes it over.
    """

    def __init__(self, j: Optional[InjectionMap] = None, pending: Optional[List[int]] = None):
        self.j = j or InjectionMap()
        self.pending = list(pending or [])
        self.remaps = 0

    def copy(self) -> "InjectionTracker":
        t = InjectionTracker(self.j.copy(), self.pending)
        t.remaps = self.remaps
        return t

    def window(self, evs_o: Sequence[FrameEvent], evs_t: Sequence[FrameEvent]) -> None:
        frees_o = [e for e in evs_o if e.kind == "free"]
        frees_t = [e for e in evs_t if e.kind == "free"]
        allocs_o = [e for e in evs_o if e.kind == "alloc"]
        allocs_t = [e for e in evs_t if e.kind == "alloc"]
        if len(frees_t) > len(frees_o) or len(allocs_t) > len(allocs_o):
            raise LogDesync("transformed run changed frames the original did not")
        for k, eo in enumerate(frees_o):
            tgt = self.j.get(eo.block)
            if k < len(frees_t):
                if tgt is None or tgt != (frees_t[k].block, 0):
                    raise LogDesync(f"original frees block {eo.block}, transformed frees {frees_t[k].block}")
            else:
                if tgt is None:
                    raise LogDesync(f"orphaned free of unmapped block {eo.block}")
                self.pending.append(tgt[0])
            self.j.drop(eo.block)
        for k, eo in enumerate(allocs_o):
            if k < len(allocs_t):
                self.j.set(eo.block, (allocs_t[k].block, 0))
            elif self.pending:
                self.j.set(eo.block, (self.pending.pop(), 0))
                self.remaps += 1
            else:
                raise LogDesync(f"original allocates block {eo.block} with no transformed counterpart")


def track_injection(alloc_log_o: Sequence[FrameEvent], alloc_log_t: Sequence[FrameEvent],
                    tailrec_events: Set[int]) -> List[InjectionMap]:
    """Replay two allocation logs into the sequence of injections, one per original event.

    ``tailrec_events`` holds the original step indices at which a
    tail-recursive call freed a frame the transformed run kept.
    """
    tr = InjectionTracker()
    out: List[InjectionMap] = []
    it = iter(alloc_log_t)
    for e in alloc_log_o:
        if e.kind == "free" and e.step in tailrec_events:
            tr.window([e], [])
        elif e.kind == "alloc" and tr.pending:
            tr.window([e], [])
        else:
            et = next(it, None)
            if et is None or et.kind != e.kind:
                raise LogDesync(f"original {e.kind} of block {e.block} has no matching transformed event")
            tr.window([e], [et])
        out.append(tr.j.copy())
    if next(it, None) is not None:
        raise LogDesync("transformed log has unmatched trailing events")
    return out


def self_tailcall_steps(p: Program, args: Sequence, fuel: int = DEFAULT_COSIM_FUEL, seed: int = 0) -> Set[int]:
    """Step indices at which a run of ``p`` executes a self tail call."""
    from .semantics import Machine
    mach = Machine(p, [a if isinstance(a, Value) else vint(a) for a in args], seed)
    out = set()
    while not mach.done and mach.stats.steps < fuel:
        s = mach.state
        if type(s) is Regular:
            i = p.functions[s.f].code[s.pc]
            if isinstance(i, Itailcall) and i.callee == s.f:
                out.add(mach.stats.steps)
        mach.step()
    return out


def _peek(m: Memory, b: int, o: int) -> Value:
    try:
        return m.load64(b, o)
    except MemError:
        return VUNDEF


# -- the relation -------------------------------------------------------------


class _Relation:
    def __init__(self, p_o: Program, p_t: Program, spec: MatchSpec, canary: Value):
        self.p_o, self.p_t, self.spec, self.canary = p_o, p_t, spec, canary
        self.tracker: Optional[InjectionTracker] = None
        self._block_cache: Dict[tuple, tuple] = {}

    # values

    def val(self, vo: Value, vt: Value, sp_t: Value = VUNDEF) -> bool:
        if vo is VUNDEF or vo == vt:
            return True
        kind = self.spec.kind
        if kind is Kind.INJECTION:
            return inject_match(self.tracker.j, vo, vt)
        if kind is Kind.SLOT_ENCODE and sp_t is not VUNDEF:
            return vt == pac_encode(vo, sp_t)
        return False

    def sp(self, so: Value, st: Value) -> bool:
        if self.spec.kind is Kind.INJECTION:
            return inject_value(self.tracker.j, so) == st
        return so == st

    def regs(self, ro, rt, sp_t) -> Optional[str]:
        for r, vo in ro.items():
            vt = rt.get(r, VUNDEF)
            if not self.val(vo, vt, sp_t):
                return f"register {r}: {vo} vs {vt}"
        return None

    # stacks

    def _skippable(self, fr) -> bool:
        f = self.p_o.functions[fr.caller]
        return f.stacksize == 0 and f.code.get(fr.ret_node) == Ireturn(fr.ret_dst)

    def _frame(self, fo, ft) -> bool:
        return (fo.caller == ft.caller and fo.ret_node == ft.ret_node and fo.ret_dst == ft.ret_dst
                and self.sp(fo.caller_sp, ft.caller_sp)
                and self.regs(fo.caller_regs, ft.caller_regs, ft.caller_sp) is None)

    def stacks(self, so, st) -> Optional[str]:
        skip = self.spec.skip_tail_frames

        @lru_cache(maxsize=None)
        def ok(i: int, j: int) -> bool:
            if i == 0:
                return j == 0
            if j > 0 and self._frame(so[i - 1], st[j - 1]) and ok(i - 1, j - 1):
                return True
            return skip and self._skippable(so[i - 1]) and ok(i - 1, j)

        return None if ok(len(so), len(st)) else f"call stacks differ (depth {len(so)} vs {len(st)})"

    # memory

    def _cached(self, key, blk_o, blk_t, fn) -> bool:
        hit = self._block_cache.get(key)
        if hit is not None and hit[0] is blk_o and hit[1] is blk_t:
            return hit[2]
        r = fn()
        if len(self._block_cache) > 50_000:
            self._block_cache.clear()
        self._block_cache[key] = (blk_o, blk_t, r)
        return r

    def memory(self, s_o: State, s_t: State) -> Optional[str]:
        m_o: Memory = s_o.m
        m_t: Memory = s_t.m
        spec = self.spec
        frames_o = _frames(s_o)
        if spec.kind is Kind.INJECTION:
            j = self.tracker.j
            for b, (bt, d) in j.items():
                blk_o = m_o.block(b)
                if blk_o is None or not blk_o.live:
                    continue
                if not block_inject(j, blk_o, m_t.block(bt), d):
                    return f"block {b} does not inject into block {bt}{d:+d}"
            bad = j.invariant_violations(m_o, m_t)
            return bad[0] if bad else None
        allowance = None
        if spec.kind is Kind.SLOT_ENCODE and spec.encoded_slots:
            allowance = set()
            for fn, sp, _ in frames_o:
                off = spec.encoded_slots.get(fn)
                if off is not None and type(sp) is Vptr:
                    allowance.add((sp.b, off))
                    vo = _peek(m_o, sp.b, off)
                    if vo is not VUNDEF:
                        vt = _peek(m_t, sp.b, off)
                        if vt != pac_encode(vo, sp):
                            return f"return-address slot of {fn}: {vt} is not the encoding of {vo}"
        for fn, sp, _ in frames_o:
            if type(sp) is not Vptr:
                continue
            b = sp.b
            blk_o, blk_t = m_o.block(b), m_t.block(b)
            if blk_o is None:
                continue
            key = (b, id(blk_o), id(blk_t), bool(allowance))
            if not self._cached(key, blk_o, blk_t, lambda: block_extends(b, blk_o, blk_t, allowance)):
                return f"block {b} of {fn} is not extended"
        return None

    def slots(self, s_t: State) -> Optional[str]:
        spec = self.spec
        m = s_t.m
        for fn, sp, ra in _frames(s_t):
            if type(sp) is not Vptr or not m.is_live(sp.b):
                continue
            if spec.canaries is not None:
                e = spec.canaries.get(fn)
                if e is not None and e.protected:
                    v = _peek(m, sp.b, e.canary_offset)
                    if v != self.canary:
                        return f"canary slot of {fn} at {e.canary_offset} holds {v}"
            off = spec.ra_slots.get(fn)
            if off is not None:
                v = _peek(m, sp.b, off)
                if v != ra:
                    return f"return-address slot of {fn} holds {v}, expected {ra}"
        return None

    # states

    def states(self, s_o: State, s_t: State) -> Optional[str]:
        to, tt = type(s_o), type(s_t)
        if to is Final or to is Aborted:
            if tt is not to:
                return f"{to.__name__} vs {tt.__name__}"
            if to is Final and not self.val(s_o.v, s_t.v):
                return f"result {s_o.v} vs {s_t.v}"
            return None
        if tt in TERMINAL:
            return f"transformed run ended: {s_t}"
        why = self._shape(s_o, s_t)
        if why:
            return why
        why = self.memory(s_o, s_t) or self.slots(s_t)
        if why:
            return why
        if not check_weakly_allocated(s_o, self.p_o) or not check_weakly_allocated(s_t, self.p_t):
            return "frame larger than declared"
        return None

    def _shape(self, s_o: State, s_t: State) -> Optional[str]:
        to, tt = type(s_o), type(s_t)
        if to is Regular and tt is Regular:
            if s_o.f != s_t.f:
                return f"function {s_o.f} vs {s_t.f}"
            want = self.spec.pc_alias.get((s_o.f, s_o.pc), s_o.pc)
            if s_t.pc != want:
                return f"{s_o.f}: node {s_o.pc} vs {s_t.pc}"
            if not self.sp(s_o.sp, s_t.sp):
                return f"stack pointer {s_o.sp} vs {s_t.sp}"
            return self.regs(s_o.regs, s_t.regs, s_t.sp) or self.stacks(s_o.stack, s_t.stack)
        if to is Call and tt is Call:
            if s_o.callee != s_t.callee or len(s_o.args) != len(s_t.args):
                return f"call to {s_o.callee} vs {s_t.callee}"
            for a, b in zip(s_o.args, s_t.args):
                if not self.val(a, b):
                    return f"argument {a} vs {b}"
            return self.stacks(s_o.stack, s_t.stack)
        if to is Return and tt is Return:
            if not self.val(s_o.v, s_t.v):
                return f"return value {s_o.v} vs {s_t.v}"
            if s_o.ra is not None or s_t.ra is not None:
                ra_o = s_o.ra or return_address(s_o.stack)
                ra_t = s_t.ra or return_address(s_t.stack)
                if ra_o != ra_t:
                    return f"return target {ra_o} vs {ra_t}"
            return self.stacks(s_o.stack, s_t.stack)
        if to is Regular and tt is Return and self.spec.skip_tail_frames:
            f = self.p_o.functions[s_o.f]
            i = f.code[s_o.pc]
            if f.stacksize == 0 and isinstance(i, Ireturn) and i.src is not None and s_t.ra is None:
                if not self.val(s_o.regs.get(i.src, VUNDEF), s_t.v):
                    return f"forwarded result {s_o.regs.get(i.src)} vs {s_t.v}"
                return self.stacks(s_o.stack, s_t.stack)
        if to is Call and tt is Regular and self.spec.kind is Kind.INJECTION:
            # a self tail call became moves and a jump; the transformed side is at the old call site
            i = self.p_o.functions.get(s_t.f).code.get(s_t.pc) if s_t.f in self.p_o.functions else None
            if isinstance(i, Itailcall) and i.callee == s_t.f == s_o.callee and len(i.args) == len(s_o.args):
                for a, r in zip(s_o.args, i.args):
                    if not self.val(a, s_t.regs.get(r, VUNDEF)):
                        return f"tail-call argument {a} vs {s_t.regs.get(r)}"
                return self.stacks(s_o.stack, s_t.stack)
        return f"{to.__name__} vs {tt.__name__}"


def _summary(s: State) -> str:
    t = type(s)
    if t is Regular:
        regs = ", ".join(f"{r}={v}" for r, v in sorted(s.regs.items())[:8])
        return f"Regular {s.f}:{s.pc} depth={len(s.stack)} sp={s.sp} [{regs}]"
    if t is Call:
        return f"Call {s.callee}({', '.join(map(str, s.args))}) depth={len(s.stack)}"
    if t is Return:
        return f"Return {s.v} depth={len(s.stack)} ra={s.ra}"
    if t is Final:
        return f"Final {s.v}"
    if t is Aborted:
        return f"Aborted {s.msg}"
    return str(s)


def _loads_from(p: Program, s: State) -> Optional[Tuple[int, int]]:
    if type(s) is not Regular:
        return None
    i = p.functions[s.f].code[s.pc]
    if type(i) is Iload:
        a = s.regs.get(i.addr)
        if type(a) is Vptr:
            return (a.b, a.o + i.off)
    return None


def cosim_run(p_o: Program, p_t: Program, spec: MatchSpec, args: Sequence = (),
              fuel: int = DEFAULT_COSIM_FUEL, seed: int = 0) -> Verdict:
    """Co-execute ``p_o`` and ``p_t`` and check ``spec`` at every original step."""
    args = tuple(a if isinstance(a, Value) else vint(a) for a in args)
    canary = canary_from_seed(seed)
    rel = _Relation(p_o, p_t, spec, canary)
    if spec.kind is Kind.INJECTION:
        rel.tracker = InjectionTracker()
    s_o, s_t = initial_state(p_o, args), initial_state(p_t, args)
    trace: List = []
    windows: Counter = Counter()
    log: Dict[str, object] = {"kind": spec.kind.value, "policy": spec.policy.value}
    steps_o = steps_t = 0
    t_budget = fuel * max(1, spec.max_k)
    sizes = spec.window_sizes()

    def reject(reason: Reason, detail: str, before: State, after: State, cand: Optional[State] = None) -> Verdict:
        log.update(sync_points=steps_o, windows=dict(sorted(windows.items())), events=len(trace))
        return Verdict(False, reason.value, {
            "step": steps_o,
            "original_before": _summary(before),
            "original_after": _summary(after),
            "transformed": _summary(cand if cand is not None else s_t),
            "detail": detail,
        }, log)

    why = rel.states(s_o, s_t)
    if why:
        return reject(Reason.RELATION_VIOLATION, why, s_o, s_o)

    while True:
        if isinstance(s_o, TERMINAL):
            break
        if steps_o >= fuel:
            return reject(Reason.FUEL_EXHAUSTED, f"original did not finish in {fuel} steps", s_o, s_o)
        before = s_o
        s_o, ev_o, fev_o = step_ex(p_o, s_o, canary)
        steps_o += 1
        if type(s_o) is Stuck:
            log["original_stuck"] = str(s_o)
            break
        exit_check = None
        if spec.canaries is not None and type(before) is Regular:
            e = spec.canaries.get(before.f)
            if e is not None and e.protected and isinstance(p_o.functions[before.f].code[before.pc], EXITS):
                exit_check = (s_t.sp.b if type(s_t) is Regular and type(s_t.sp) is Vptr else None,
                              e.canary_offset)

        # explore the transformed run up to the largest window
        cands: List[Tuple[State, list, list, set]] = [(s_t, [], [], set())]
        cur, evs, fevs, loads = s_t, [], [], set()
        for _ in range(max(sizes)):
            if isinstance(cur, TERMINAL) or steps_t + len(cands) > t_budget:
                break
            ld = _loads_from(p_t, cur)
            if ld:
                loads = loads | {ld}
            cur, e, fe = step_ex(p_t, cur, canary)
            evs, fevs = evs + e, fevs + fe
            cands.append((cur, evs, fevs, loads))

        chosen, failure = None, None
        saw_events_match = False
        for k in sizes:
            if k >= len(cands):
                continue
            cand, evs, fevs, loads = cands[k]
            if evs != ev_o:
                continue
            saw_events_match = True
            if exit_check is not None and k > 0 and (exit_check[0], exit_check[1]) not in loads:
                failure = failure or (cand, f"exit of {before.f} does not reload the canary slot")
                continue
            saved = rel.tracker
            if saved is not None:
                rel.tracker = saved.copy()
                try:
                    rel.tracker.window(fev_o, fevs)
                except LogDesync as ex:
                    failure = failure or (cand, f"LogDesync: {ex}")
                    rel.tracker = saved
                    continue
            why = rel.states(s_o, cand)
            if why is None:
                chosen = k
                break
            failure = failure or (cand, why)
            if saved is not None:
                rel.tracker = saved
        if chosen is None:
            last = cands[-1][0]
            if not saw_events_match:
                got = cands[1][1] if len(cands) > 1 else []
                reason = Reason.NO_MATCHING_STEP if isinstance(last, Stuck) else Reason.TRACE_MISMATCH
                return reject(reason, f"original events {list(map(str, ev_o))}, transformed "
                              f"{list(map(str, got))} (transformed run: {_summary(last)})", before, s_o, last)
            cand, why = failure
            if why.startswith("LogDesync"):
                return reject(Reason.LOG_DESYNC, why, before, s_o, cand)
            if isinstance(last, Stuck):
                return reject(Reason.NO_MATCHING_STEP, f"{why}; transformed run is {last}", before, s_o, cand)
            return reject(Reason.RELATION_VIOLATION, why, before, s_o, cand)
        s_t = cands[chosen][0]
        steps_t += chosen
        trace += ev_o
        windows[chosen] += 1

    log.update(sync_points=steps_o, windows=dict(sorted(windows.items())), events=len(trace),
               transformed_steps=steps_t)
    if rel.tracker is not None:
        log["remaps"] = rel.tracker.remaps
    return Verdict(True, Reason.ACCEPTED.value, None, log)


# -- per-pass wiring ----------------------------------------------------------


def _fusion_aliases(p_o: Program, p_t: Program) -> Dict[Tuple[str, Node], Node]:
    out = {}
    for name, ft in p_t.functions.items():
        fo = p_o.functions[name]
        for n, i in ft.code.items():
            if isinstance(i, (Iretaa, Iretvia)):
                io = fo.code.get(n)
                if io is not None and not isinstance(io, (Iretaa, Iretvia)) and hasattr(io, "succ"):
                    if io.succ not in ft.code:
                        out[(name, io.succ)] = n
    return out


def match_spec_for(name: str, p_o: Program, p_t: Program, out: PassOutput,
                   max_k: int = DEFAULT_MAX_K) -> MatchSpec:
    """The relation and step policy a pass is validated under."""
    if name == "refine_div":
        return MatchSpec(Kind.LESSDEF, Policy.LOCKSTEP, 1)
    if name == "tailcall":
        return MatchSpec(Kind.LESSDEF, Policy.STAR, max_k, skip_tail_frames=True)
    if name == "tailrec":
        return MatchSpec(Kind.INJECTION, Policy.STAR, max_k)
    if name == "canary":
        return MatchSpec(Kind.EXTENSION, Policy.PLUS, max_k, canaries=out.canary)
    if name == "lower_ra":
        slots = {f: fn.ra_offset for f, fn in p_t.functions.items()
                 if fn.ra_offset is not None and p_o.functions[f].ra_offset is None}
        return MatchSpec(Kind.EXTENSION, Policy.PLUS, max_k, ra_slots=slots)
    if name == "pac":
        slots = {f: fn.ra_offset for f, fn in p_o.functions.items() if fn.ra_offset is not None}
        return MatchSpec(Kind.SLOT_ENCODE, Policy.PLUS, max_k, encoded_slots=slots)
    if name == "peephole":
        return MatchSpec(Kind.SLOT_ENCODE, Policy.STAR, max_k, pc_alias=_fusion_aliases(p_o, p_t))
    raise PassError(f"unknown pass {name!r}")


@dataclass
class PassValidation:
    verdict: Verdict
    original: Program
    transformed: Program
    spec: MatchSpec


def validate_pass(p: Program, name: str, args: Sequence = (), *, cfg: Optional[PassConfig] = None,
                  fuel: int = DEFAULT_COSIM_FUEL, seed: int = 0, mutant: Optional[str] = None,
                  max_k: int = DEFAULT_MAX_K) -> PassValidation:
    """Apply pass ``name`` (after its prerequisites) to ``p`` and co-simulate on ``args``.

    ``mutant`` substitutes one of the seeded-bug variants for the real pass.
    """
    cfg = cfg or PassConfig(fstack_protector=True)
    if mutant is not None:
        target, impl = MUTANTS[mutant]
        if target != name:
            raise PassError(f"mutant {mutant} replaces {target}, not {name}")
        for pre in PREREQUISITES.get(name, ()):
            p = run_pass(p, pre, cfg).program
        out = impl(p, cfg)
        p_o = p
    else:
        p_o, out = prepare_pass(p, name, cfg)
    p_t = out.program
    spec = match_spec_for(name, p_o, p_t, out, max_k)
    return PassValidation(cosim_run(p_o, p_t, spec, args, fuel, seed), p_o, p_t, spec)
