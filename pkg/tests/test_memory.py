import pytest
from hypothesis import given, strategies as st

from rtlab.memory import (
    UNDEF_BYTE, VUNDEF, Block, ConcreteByte, DeadBlock, DoubleFree, Fragment, Memory, Misaligned,
    OutOfBounds, Vint, Vptr, alloc, decode_cells, empty_memory, free, load64, store64,
)

from strategies import values


def test_alloc_empty_block_gets_id_1():
    m, b = alloc(empty_memory(), 0)
    assert b == 1 and m.size(1) == 0 and m.is_live(1)


def test_alloc_ids_are_monotone():
    m, b1 = alloc(empty_memory(), 16)
    m, b2 = alloc(m, 16)
    assert (b1, b2) == (1, 2)
    m = free(m, b1)
    m, b3 = alloc(m, 16)
    assert b3 == 3


@pytest.mark.parametrize("o", [0, 8, 24])
def test_fresh_block_reads_undef(o):
    m, b = alloc(empty_memory(), 32)
    assert load64(m, b, o) is VUNDEF


def test_alloc_rejects_unaligned_size():
    with pytest.raises(ValueError):
        alloc(empty_memory(), 12)


def test_load_after_free_fails():
    m, b = alloc(empty_memory(), 8)
    with pytest.raises(DeadBlock):
        load64(free(m, b), b, 0)


def test_double_free():
    m, b = alloc(empty_memory(), 8)
    m = free(m, b)
    with pytest.raises(DoubleFree):
        free(m, b)
    with pytest.raises(DoubleFree):
        free(m, 42)


def test_free_keeps_other_blocks():
    m, b1 = alloc(empty_memory(), 16)
    m, b2 = alloc(m, 16)
    m = store64(m, b2, 8, Vint(5))
    m2 = free(m, b1)
    assert m2.block(b2) == m.block(b2)
    assert not m2.is_live(b1) and m2.block(b1) is not None


def test_store_at_end_of_32_byte_block_is_out_of_bounds():
    m, b = alloc(empty_memory(), 32)
    with pytest.raises(OutOfBounds):
        store64(m, b, 32, Vint(1))


def test_store_at_32_in_40_byte_block_succeeds():
    m, b = alloc(empty_memory(), 40)
    assert load64(store64(m, b, 32, Vint(1)), b, 32) == Vint(1)


@pytest.mark.parametrize("o, exc", [(-8, OutOfBounds), (4, Misaligned), (16, OutOfBounds)])
def test_store_errors(o, exc):
    m, b = alloc(empty_memory(), 16)
    with pytest.raises(exc):
        store64(m, b, o, Vint(0))


def test_fragments_reassemble_pointer():
    v = Vptr(3, 16)
    assert decode_cells(tuple(Fragment(v, k) for k in range(8))) == v


def test_undef_bytes_decode_undef():
    assert decode_cells((UNDEF_BYTE,) * 8) is VUNDEF


def _bit_oracle(cells):
    """Reference decoder for integer payloads: only all-concrete bytes give a value."""
    if all(type(c) is ConcreteByte for c in cells):
        u = sum(c.u << (8 * k) for k, c in enumerate(cells))
        return Vint(u - (1 << 64) if u >= 1 << 63 else u)
    frags = [c for c in cells if type(c) is Fragment]
    if len(frags) == 8 and all(c.idx == k and c.v == frags[0].v for k, c in enumerate(frags)):
        return frags[0].v
    return VUNDEF


@given(x=st.integers(-(2**63), 2**63 - 1), hole=st.integers(0, 7),
       kind=st.sampled_from(["undef", "byte", "shifted", "other"]))
def test_mixed_cells_match_bit_oracle(x, hole, kind):
    frag = [Fragment(Vint(x), k) for k in range(8)]
    conc = [ConcreteByte(((x & (2**64 - 1)) >> (8 * k)) & 0xFF) for k in range(8)]
    for base in (frag, conc):
        cells = list(base)
        cells[hole] = {"undef": UNDEF_BYTE, "byte": ConcreteByte(7),
                       "shifted": Fragment(Vint(x), (hole + 1) % 8),
                       "other": Fragment(Vint(x + 1), hole)}[kind]
        cells = tuple(cells)
        assert decode_cells(cells) == _bit_oracle(cells)
        assert decode_cells(tuple(base)) == Vint(x)


def test_seven_fragments_then_undef():
    cells = tuple(Fragment(Vint(9), k) for k in range(7)) + (UNDEF_BYTE,)
    assert decode_cells(cells) is VUNDEF


@given(v=values, o=st.sampled_from([0, 8, 16, 24]), concrete=st.booleans())
def test_read_after_write(v, o, concrete):
    m, b = alloc(empty_memory(concrete), 32)
    assert load64(store64(m, b, o, v), b, o) == v


@given(v=values, o=st.sampled_from([0, 8, 16]), w=values)
def test_store_frame_rule(v, o, w):
    m, b = alloc(empty_memory(), 24)
    m, b2 = alloc(m, 8)
    m = store64(store64(m, b2, 0, w), b, 0, w)
    m2 = store64(m, b, o, v)
    before, after = m.block(b).cells, m2.block(b).cells
    assert before[:o] == after[:o] and before[o + 8:] == after[o + 8:]
    assert m2.block(b2) == m.block(b2)


@given(sizes=st.lists(st.integers(0, 4), min_size=1, max_size=5), new=st.integers(0, 4))
def test_alloc_freshness(sizes, new):
    m = empty_memory()
    for s in sizes:
        m, b = alloc(m, 8 * s)
        if s:
            m = store64(m, b, 0, Vint(s))
    m2, nb = alloc(m, 8 * new)
    assert nb not in set(m.live_blocks()) and nb not in m.blocks
    for b in m.blocks:
        assert m2.block(b) == m.block(b)


def test_concrete_mode_stores_bytes():
    m, b = alloc(empty_memory(concrete_ints=True), 8)
    m = store64(m, b, 0, Vint(-2))
    assert all(type(c) is ConcreteByte for c in m.block(b).cells)
    assert load64(m, b, 0) == Vint(-2)


def test_memory_equality_is_structural():
    m1, _ = alloc(Memory(), 8)
    m2, _ = alloc(Memory(), 8)
    assert m1 == m2
    assert m1.block(1) == Block(8, True, (UNDEF_BYTE,) * 8)
