"""Match relations between values and memories.

``lessdef`` is the definedness order (Vundef below everything).  A memory
extends another when it holds every positive-size block at least as large
and at least as defined.  An injection relocates source blocks to offsets
inside target blocks; unmapped blocks map to nothing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Collection, Dict, List, Optional, Tuple

from .memory import VUNDEF, WORD, Memory, Value, Venc, Vptr, align8, decode_cells


def lessdef(v1: Value, v2: Value) -> bool:
    return v1 is VUNDEF or v1 == v2


def lessdef_list(vs1, vs2) -> bool:
    return len(vs1) == len(vs2) and all(lessdef(a, b) for a, b in zip(vs1, vs2))


def extends(m1: Memory, m2: Memory, allowance: Optional[Collection[Tuple[int, int]]] = None) -> bool:
    """Does ``m2`` extend ``m1``?

    ``allowance`` lists ``(block, offset)`` words whose contents are checked
    by someone else (e.g. an encoded return-address slot) and skipped here.
    Dead and zero-size blocks of ``m1`` are exempt.
    """
    for b, blk1 in m1.blocks.items():
        if not block_extends(b, blk1, m2.block(b), allowance):
            return False
    return True


def block_extends(b: int, blk1, blk2, allowance: Optional[Collection[Tuple[int, int]]] = None) -> bool:
    """Extension check for a single block ``b``; ``blk2`` may be None."""
    if not blk1.live or blk1.size == 0:
        return True
    if blk2 is None or not blk2.live or blk2.size < blk1.size:
        return False
    if blk1 is blk2:
        return True
    c1, c2 = blk1.cells, blk2.cells
    for o in range(0, blk1.size, WORD):
        if allowance and (b, o) in allowance:
            continue
        v1 = decode_cells(c1[o:o + WORD])
        if v1 is not VUNDEF and v1 != decode_cells(c2[o:o + WORD]):
            return False
    return True


# -- injections ---------------------------------------------------------------


class InjectionMap:
    """Partial map from source blocks to ``(target block, delta)``."""

    __slots__ = ("_map",)

    def __init__(self, mapping: Optional[Dict[int, Tuple[int, int]]] = None):
        self._map: Dict[int, Tuple[int, int]] = dict(mapping or {})

    def get(self, b: int) -> Optional[Tuple[int, int]]:
        return self._map.get(b)

    def __contains__(self, b: int) -> bool:
        return b in self._map

    def __len__(self) -> int:
        return len(self._map)

    def items(self):
        return self._map.items()

    def copy(self) -> "InjectionMap":
        return InjectionMap(self._map)

    def set(self, b: int, target: Tuple[int, int]) -> None:
        self._map[b] = target

    def drop(self, b: int) -> None:
        self._map.pop(b, None)

    def as_dict(self) -> Dict[int, Tuple[int, int]]:
        return dict(self._map)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, InjectionMap) and self._map == other._map

    def __repr__(self) -> str:
        inner = ", ".join(f"{b}->({t},{d:+d})" for b, (t, d) in sorted(self._map.items()))
        return f"InjectionMap({{{inner}}})"

    def invariant_violations(self, m1: Memory, m2: Memory) -> List[str]:
        """Aligned deltas and disjoint images of live source blocks."""
        out = []
        ranges: Dict[int, List[Tuple[int, int, int]]] = {}
        for b, (t, d) in sorted(self._map.items()):
            if d % WORD:
                out.append(f"delta {d} of block {b} is not a multiple of 8")
            if not m1.is_live(b):
                continue
            size = m1.size(b)
            if size == 0:
                continue
            for (lo, hi, other) in ranges.get(t, []):
                if d < hi and lo < d + size:
                    out.append(f"blocks {other} and {b} overlap in target block {t}")
            ranges.setdefault(t, []).append((d, d + size, b))
        return out


def inject_value(j: InjectionMap, v: Value) -> Optional[Value]:
    """Image of a value under ``j``; None when it mentions an unmapped block."""
    tv = type(v)
    if tv is Vptr:
        tgt = j.get(v.b)
        if tgt is None:
            return None
        return Vptr(tgt[0], v.o + tgt[1])
    if tv is Venc:
        return v if inject_value(j, v.inner) == v.inner else None
    return v  # Vundef, Vint, Vcode


def inject_match(j: InjectionMap, v1: Value, v2: Value) -> bool:
    if v1 is VUNDEF:
        return True
    return inject_value(j, v1) == v2


def mem_inject(j: InjectionMap, m1: Memory, m2: Memory) -> bool:
    for b1, (b2, d) in j.items():
        blk1 = m1.block(b1)
        if blk1 is None or not blk1.live:
            continue
        if not block_inject(j, blk1, m2.block(b2), d):
            return False
    return True


def block_inject(j: InjectionMap, blk1, blk2, d: int) -> bool:
    if blk2 is None or not blk2.live or d < 0 or d + blk1.size > blk2.size:
        return False
    c1, c2 = blk1.cells, blk2.cells
    for o in range(0, blk1.size, WORD):
        v1 = decode_cells(c1[o:o + WORD])
        if v1 is VUNDEF:
            continue
        if inject_value(j, v1) != decode_cells(c2[o + d:o + d + WORD]):
            return False
    return True


# -- canary layout ------------------------------------------------------------


@dataclass(frozen=True)
class CanaryEntry:
    protected: bool
    canary_offset: int
    new_stacksize: int


@dataclass
class CanarySpec:
    """Per-function canary placement produced by the canary pass."""

    entries: Dict[str, CanaryEntry] = field(default_factory=dict)

    def __getitem__(self, fname: str) -> CanaryEntry:
        return self.entries[fname]

    def get(self, fname: str) -> Optional[CanaryEntry]:
        return self.entries.get(fname)

    def protected(self) -> Dict[str, CanaryEntry]:
        return {f: e for f, e in self.entries.items() if e.protected}

    def violations(self, old_stacksizes: Dict[str, int]) -> List[str]:
        out = []
        for f, e in self.entries.items():
            if not e.protected:
                continue
            want = align8(old_stacksizes[f])
            if e.canary_offset != want or e.new_stacksize != want + WORD:
                out.append(f"{f}: canary at {e.canary_offset}, frame {e.new_stacksize}; expected {want}, {want + WORD}")
        return out


def lessdef_or(pred: Callable[[Value, Value], bool]) -> Callable[[Value, Value], bool]:
    """Widen ``lessdef`` with an extra acceptance predicate."""

    def rel(v1: Value, v2: Value) -> bool:
        return v1 is VUNDEF or v1 == v2 or pred(v1, v2)

    return rel

