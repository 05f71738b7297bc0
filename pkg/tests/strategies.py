"""Hypothesis strategies and seeded samplers shared by the property tests."""
import random

from hypothesis import strategies as st

from rtlab.memory import VUNDEF, PAC_KEY_A, Memory, Vcode, Venc, Vint, Vptr

INT64 = st.integers(-(2**63), 2**63 - 1)
SMALL_INT = st.integers(-4, 4)
BLOCKS = st.integers(1, 4)

vints = st.builds(Vint, st.one_of(SMALL_INT, INT64))
vptrs = st.builds(Vptr, BLOCKS, st.sampled_from([0, 8, 16, 24, 32, 40]))
vcodes = st.builds(Vcode, st.sampled_from(["main", "f", "g"]), st.integers(1, 9))
plain = st.one_of(vints, vptrs, vcodes)
vencs = st.builds(lambda v, m: Venc(v, m, PAC_KEY_A), st.one_of(vptrs, vcodes), st.one_of(vptrs, vints))
values = st.one_of(st.just(VUNDEF), plain, vencs)


def rand_value(rng: random.Random, undef_p=0.2):
    r = rng.random()
    if r < undef_p:
        return VUNDEF
    r = rng.random()
    if r < 0.45:
        return Vint(rng.choice([rng.randint(-3, 3), rng.randint(-(2**63), 2**63 - 1)]))
    if r < 0.75:
        return Vptr(rng.randint(1, 3), 8 * rng.randint(-1, 5))
    if r < 0.9:
        return Vcode(rng.choice(["main", "f"]), rng.randint(1, 5))
    return Venc(Vcode("main", rng.randint(1, 5)), Vptr(rng.randint(1, 3), 0), PAC_KEY_A)


def rand_memory(rng: random.Random, nblocks=3, max_words=5) -> Memory:
    m = Memory()
    for _ in range(nblocks):
        m, b = m.alloc(8 * rng.randint(0, max_words))
        for o in range(0, m.size(b), 8):
            if rng.random() < 0.7:
                m = m.store64(b, o, rand_value(rng))
        if rng.random() < 0.15:
            m = m.free(b)
    return m


def refine_memory(rng: random.Random, m: Memory, grow=True) -> Memory:
    """A memory that extends ``m``: undefined words filled, blocks possibly grown."""
    out = Memory(next_block=1)
    for b in sorted(m.blocks):
        blk = m.block(b)
        extra = 8 * rng.randint(0, 2) if grow else 0
        out, nb = out.alloc(blk.size + extra if blk.live else blk.size)
        assert nb == b
        if not blk.live:
            out = out.free(b)
            continue
        for o in range(0, blk.size + extra, 8):
            v = m.load64(b, o) if o < blk.size else VUNDEF
            if v is VUNDEF and rng.random() < 0.5:
                v = rand_value(rng, undef_p=0)
            if v is not VUNDEF:
                out = out.store64(b, o, v)
    return out
