"""Block/offset memory model with abstract byte cells.

Memory is a map from block ids to fixed-size arrays of abstract cells.  A
pointer is a ``(block, offset)`` pair; only aligned 8-byte accesses exist.
Every operation returns a new :class:`Memory` and leaves its input untouched.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterator, Mapping, Optional, Tuple

WORD = 8
_MASK64 = (1 << 64) - 1


def wrap64(x: int) -> int:
    """Reduce an integer to the signed 64-bit range (two's complement)."""
    x &= _MASK64
    return x - (1 << 64) if x >> 63 else x


def align8(n: int) -> int:
    return (n + WORD - 1) // WORD * WORD


# -- values -----------------------------------------------------------------


class Value:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class _Undef(Value):
    def __repr__(self) -> str:
        return "Vundef"

    def __str__(self) -> str:
        return "undef"


VUNDEF = _Undef()


@dataclass(frozen=True, slots=True)
class Vint(Value):
    """A 64-bit signed integer.  Construct through :func:`vint` to wrap."""

    i: int

    def __str__(self) -> str:
        return str(self.i)


@dataclass(frozen=True, slots=True)
class Vptr(Value):
    b: int
    o: int

    def __str__(self) -> str:
        return f"ptr(b{self.b}{self.o:+d})"


@dataclass(frozen=True, slots=True)
class Vcode(Value):
    """A code location: node ``n`` of function ``f``."""

    f: str
    n: int

    def __str__(self) -> str:
        return f"code({self.f}.{self.n})"


PAC_KEY_A = "A"


@dataclass(frozen=True, slots=True)
class Venc(Value):
    """Opaque authenticated encoding of ``inner`` under a modifier and key.

    The digest is the modifier value itself; only ``pac_encode`` builds these
    and only ``pac_decode`` with the same modifier opens them.
    """

    inner: Value
    digest: Value
    key: str = PAC_KEY_A

    def __post_init__(self) -> None:
        if isinstance(self.inner, Venc) or self.inner is VUNDEF:
            raise ValueError("Venc cannot wrap Venc or Vundef")
        if self.key != PAC_KEY_A:
            raise ValueError(f"unsupported key {self.key!r}")

    def __str__(self) -> str:
        return f"enc({self.inner}, {self.digest})"


def vint(x: int) -> Vint:
    return Vint(wrap64(x))


def is_defined(v: Value) -> bool:
    return v is not VUNDEF


# -- cells ------------------------------------------------------------------


class MemCell:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class _UndefByte(MemCell):
    def __repr__(self) -> str:
        return "UndefByte"


UNDEF_BYTE = _UndefByte()


@dataclass(frozen=True, slots=True)
class ConcreteByte(MemCell):
    u: int


@dataclass(frozen=True, slots=True)
class Fragment(MemCell):
    """The ``idx``-th eighth of a stored value."""

    v: Value
    idx: int


# -- errors -----------------------------------------------------------------


class MemError(Exception):
    """Base class for failed memory operations."""


class OutOfBounds(MemError):
    pass


class Misaligned(MemError):
    pass


class DeadBlock(MemError):
    pass


class DoubleFree(MemError):
    pass


# -- memory -----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Block:
    size: int
    live: bool
    cells: Tuple[MemCell, ...]


class Memory:
    """Immutable memory state.

    Freed blocks stay in the map with ``live=False`` so that a freed block can
    be told apart from one that was never allocated.
    """

    __slots__ = ("_blocks", "next_block", "concrete_ints")

    def __init__(
        self,
        blocks: Optional[Mapping[int, Block]] = None,
        next_block: int = 1,
        concrete_ints: bool = False,
    ) -> None:
        self._blocks = dict(blocks) if blocks else {}
        self.next_block = next_block
        self.concrete_ints = concrete_ints

    @property
    def blocks(self) -> Mapping[int, Block]:
        return MappingProxyType(self._blocks)

    def _with(self, b: int, blk: Block, next_block: Optional[int] = None) -> "Memory":
        m = Memory.__new__(Memory)
        blocks = self._blocks.copy()
        blocks[b] = blk
        m._blocks = blocks
        m.next_block = self.next_block if next_block is None else next_block
        m.concrete_ints = self.concrete_ints
        return m

    def block(self, b: int) -> Optional[Block]:
        return self._blocks.get(b)

    def is_live(self, b: int) -> bool:
        blk = self._blocks.get(b)
        return blk is not None and blk.live

    def size(self, b: int) -> int:
        blk = self._blocks.get(b)
        if blk is None:
            raise DeadBlock(f"unknown block {b}")
        return blk.size

    def live_blocks(self) -> Iterator[int]:
        return (b for b, blk in self._blocks.items() if blk.live)

    def alloc(self, size: int) -> Tuple["Memory", int]:
        if size < 0 or size % WORD:
            raise ValueError(f"block size must be a non-negative multiple of 8, got {size}")
        b = self.next_block
        return self._with(b, Block(size, True, (UNDEF_BYTE,) * size), b + 1), b

    def free(self, b: int) -> "Memory":
        blk = self._blocks.get(b)
        if blk is None or not blk.live:
            raise DoubleFree(f"block {b} is not live")
        return self._with(b, Block(blk.size, False, ()))

    def _check(self, b: int, o: int) -> Block:
        blk = self._blocks.get(b)
        if blk is None:
            raise DeadBlock(f"unknown block {b}")
        if not blk.live:
            raise DeadBlock(f"block {b} was freed")
        if o % WORD:
            raise Misaligned(f"offset {o} in block {b} is not 8-aligned")
        if o < 0 or o + WORD > blk.size:
            raise OutOfBounds(f"offset {o} outside block {b} of size {blk.size}")
        return blk

    def store64(self, b: int, o: int, v: Value) -> "Memory":
        blk = self._check(b, o)
        if self.concrete_ints and type(v) is Vint:
            u = v.i & _MASK64
            new = tuple(ConcreteByte((u >> (8 * k)) & 0xFF) for k in range(WORD))
        else:
            new = tuple(Fragment(v, k) for k in range(WORD))
        cells = blk.cells[:o] + new + blk.cells[o + WORD:]
        return self._with(b, Block(blk.size, True, cells))

    def load64(self, b: int, o: int) -> Value:
        blk = self._check(b, o)
        return decode_cells(blk.cells[o:o + WORD])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Memory):
            return NotImplemented
        return self._blocks == other._blocks and self.next_block == other.next_block

    def __repr__(self) -> str:
        live = sum(1 for _ in self.live_blocks())
        return f"Memory(blocks={len(self._blocks)}, live={live}, next={self.next_block})"


def decode_cells(cells: Tuple[MemCell, ...]) -> Value:
    """Reassemble eight cells into a value; anything mixed reads as Vundef."""
    c0 = cells[0]
    if type(c0) is Fragment:
        if c0.idx != 0:
            return VUNDEF
        v = c0.v
        for k in range(1, WORD):
            c = cells[k]
            if type(c) is not Fragment or c.idx != k or c.v != v:
                return VUNDEF
        return v
    if type(c0) is ConcreteByte:
        u = 0
        for k in range(WORD):
            c = cells[k]
            if type(c) is not ConcreteByte:
                return VUNDEF
            u |= c.u << (8 * k)
        return Vint(wrap64(u))
    return VUNDEF


# Functional aliases matching the operation names used across the package.


def empty_memory(concrete_ints: bool = False) -> Memory:
    return Memory(concrete_ints=concrete_ints)


def alloc(m: Memory, size: int) -> Tuple[Memory, int]:
    return m.alloc(size)


def free(m: Memory, b: int) -> Memory:
    return m.free(b)


def store64(m: Memory, b: int, o: int, v: Value) -> Memory:
    return m.store64(b, o, v)


def load64(m: Memory, b: int, o: int) -> Value:
    return m.load64(b, o)
