"""Seeded randomized law checkers; each returns the number of violations in ``n`` cases."""
import random

from rtlab.ir import OPCODES, Operation
from rtlab.memory import VUNDEF, MemError, Memory, Vcode, Vint, Vptr
from rtlab.relations import InjectionMap, extends, inject_value, lessdef, mem_inject
from rtlab.semantics import OpContext, eval_op, pac_decode, pac_encode

from strategies import rand_memory, rand_value, refine_memory


def lessdef_order(n, seed=0):
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        a, b, c = (rand_value(rng, 0.3) for _ in range(3))
        if rng.random() < 0.3:
            b = a
        if rng.random() < 0.3:
            c = b
        bad += not lessdef(a, a)
        bad += lessdef(a, b) and lessdef(b, a) and a != b
        bad += lessdef(a, b) and lessdef(b, c) and not lessdef(a, c)
    return bad


def extends_laws(n, seed=0):
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        m1 = rand_memory(rng)
        m2 = refine_memory(rng, m1)
        m3 = refine_memory(rng, m2)
        bad += not extends(m1, m1)
        bad += not extends(m1, m2)
        bad += extends(m1, m2) and extends(m2, m3) and not extends(m1, m3)
    return bad


def _injected_pair(rng):
    """A source memory, a target memory and an injection relating them."""
    m1 = Memory()
    m2 = Memory()
    j = InjectionMap()
    m2, big = m2.alloc(64)
    cursor = 0
    for _ in range(rng.randint(1, 3)):
        size = 8 * rng.randint(1, 3)
        m1, b = m1.alloc(size)
        if rng.random() < 0.5 and cursor + size <= 64:
            j.set(b, (big, cursor))
            cursor += size + 8 * rng.randint(0, 1)
        else:
            m2, tb = m2.alloc(size)
            j.set(b, (tb, 0))
    for b, (tb, d) in j.items():
        for o in range(0, m1.size(b), 8):
            v = Vptr(rng.choice(list(j.as_dict())), 8 * rng.randint(0, 1)) if rng.random() < 0.3 else \
                Vint(rng.randint(-5, 5))
            if rng.random() < 0.2:
                continue
            m1 = m1.store64(b, o, v)
            m2 = m2.store64(tb, o + d, inject_value(j, v))
    return j, m1, m2


def store_inject_commutes(n, seed=0):
    """Counts only cases where the source store succeeds and its value injects."""
    rng = random.Random(seed)
    bad = done = 0
    while done < n:
        j, m1, m2 = _injected_pair(rng)
        if not mem_inject(j, m1, m2) or j.invariant_violations(m1, m2):
            bad += 1
            done += 1
            continue
        b = rng.choice(list(j.as_dict()))
        o = 8 * rng.randint(-1, 4)
        v = rand_value(rng, 0.1)
        try:
            m1s = m1.store64(b, o, v)
        except MemError:
            continue
        v2 = inject_value(j, v)
        if v2 is None:
            continue
        done += 1
        tb, d = j.get(b)
        try:
            m2s = m2.store64(tb, o + d, v2)
        except MemError:
            bad += 1
            continue
        bad += not mem_inject(j, m1s, m2s)
        bad += inject_value(j, m1s.load64(b, o)) != m2s.load64(tb, o + d)
    return bad


def _refine(rng, v):
    return rand_value(rng, 0) if v is VUNDEF and rng.random() < 0.7 else v


def eval_op_monotone(n, seed=0):
    rng = random.Random(seed)
    ops = [o for o in OPCODES if o not in ("const", "codeaddr")]
    m = Memory()
    for size in (32, 40, 8):
        m, _ = m.alloc(size)
    m = m.free(3)
    bad = 0
    for _ in range(n):
        name = rng.choice(ops)
        arity = OPCODES[name]
        args = [rand_value(rng, 0.35) for _ in range(arity)]
        if name == "pac_decode" and rng.random() < 0.5:
            args[0] = pac_encode(Vcode("main", 1), args[1])
        refined = [_refine(rng, a) for a in args]
        ctx = OpContext(Vint(77), Vptr(1, 0), Vcode("main", 2), m)
        bad += not lessdef(eval_op(Operation(name), args, ctx), eval_op(Operation(name), refined, ctx))
    return bad


def _pointerish(rng):
    return Vcode(rng.choice(["main", "f", "g"]), rng.randint(1, 50)) if rng.random() < 0.5 else \
        Vptr(rng.randint(1, 9), 8 * rng.randint(-2, 8))


def pac_axioms(n, seed=0):
    """Encode/decode identity, Vundef iff an input is Vundef, pointer type preserved, and
    no decode under a different modifier."""
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        p = _pointerish(rng)
        mod = rand_value(rng, 0)
        other = rand_value(rng, 0)
        e = pac_encode(p, mod)
        bad += pac_decode(e, mod) != p
        bad += other != mod and pac_decode(e, other) is not VUNDEF
        x = rng.choice([VUNDEF, p])
        y = rng.choice([VUNDEF, mod])
        bad += (pac_encode(x, y) is VUNDEF) != (x is VUNDEF or y is VUNDEF)
        bad += type(e).__name__ not in ("Vptr", "Vcode", "Venc")
        bad += pac_decode(p, mod) is not VUNDEF
    return bad
