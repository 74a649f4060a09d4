"""Bitmask subset helpers. Bit i of a mask stands for element i (0-based)."""

from __future__ import annotations


def members(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def to_mask(items) -> int:
    m = 0
    for i in items:
        m |= 1 << int(i)
    return m


def full(n: int) -> int:
    return (1 << n) - 1


def complement(mask: int, n: int) -> int:
    return full(n) & ~mask


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def fmt(mask: int) -> str:
    """1-based set notation used in reports, e.g. 0b101 -> '{1,3}'."""
    return "{" + ",".join(str(i + 1) for i in members(mask)) + "}"
