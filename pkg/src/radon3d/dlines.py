"""Discrete-line primitives shared by every transform.

A discrete line of slope ``s`` over ``N = 2**n`` samples is a unit-step
staircase whose total rise is exactly ``s``.  It is built recursively: the
first half of the line is a line of slope ``s // 2`` over ``N / 2`` samples,
and the second half is the same half-line lifted by ``(s + 1) // 2``.
"""

from functools import lru_cache

import numpy as np

__all__ = [
    "bit_index",
    "bits_of",
    "is_power_of_two",
    "line_offset",
    "line_offset_closed_form",
    "line_offsets",
    "log2_exact",
]


def is_power_of_two(n):
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def log2_exact(n):
    """Return ``log2(n)`` for a power of two ``n``, raise ``ValueError`` otherwise."""
    if not is_power_of_two(n):
        raise ValueError(f"size must be a power of two, got {n}")
    return int(n).bit_length() - 1


def bit_index(bits):
    """Convert binary digits (least significant first) to an integer.

    >>> bit_index((1, 0, 1))
    5
    """
    total = 0
    for i, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError(f"digit {i} is {b!r}, expected 0 or 1")
        total += int(b) << i
    return total


def bits_of(value, n):
    """Inverse of :func:`bit_index`: the ``n`` binary digits of ``value``, LSB first."""
    if not 0 <= value < (1 << n):
        raise ValueError(f"{value} does not fit in {n} bits")
    return tuple((value >> i) & 1 for i in range(n))


def line_offset(n, s, u):
    """Vertical offset of the discrete line of slope `s` at position `u`.

    Evaluates the recursion ``l[n, s](u) = l[n-1, s//2](u mod 2**(n-1))
    + msb(u) * ((s + 1) // 2)`` with ``l[0, s] = 0``.

    Parameters
    ----------
    n : int
        Scale exponent; the line spans ``2**n`` samples.
    s : int
        Slope (total ascent), ``0 <= s < 2**n``.
    u : int
        Position along the line, ``0 <= u < 2**n``.

    Returns
    -------
    int
        The offset, which is 0 at ``u = 0`` and ``s`` at ``u = 2**n - 1``.
    """
    size = 1 << n
    if not 0 <= s < size:
        raise ValueError(f"slope {s} out of range for n={n}")
    if not 0 <= u < size:
        raise ValueError(f"position {u} out of range for n={n}")
    offset = 0
    # Unrolled recursion: peel the most significant bit of u at each level.
    while n > 0:
        half = 1 << (n - 1)
        if u >= half:
            offset += (s + 1) >> 1
            u -= half
        s >>= 1
        n -= 1
    return offset


def line_offset_closed_form(n, s, u):
    # Cross-check only; the recursion in line_offset is the definition.
    # Weight of the i-th most significant bit of u is floor((s / 2**i + 1) / 2),
    # evaluated here with integer shifts.
    total = 0
    for i in range(n):
        digit = (u >> (n - 1 - i)) & 1
        total += digit * (((s >> i) + 1) >> 1)
    return total


@lru_cache(maxsize=None)
def _offsets_table(n):
    size = 1 << n
    table = np.zeros((size, size), dtype=np.int64)
    for s in range(size):
        for u in range(size):
            table[s, u] = line_offset(n, s, u)
    table.setflags(write=False)
    return table


def line_offsets(n):
    """Read-only ``(2**n, 2**n)`` table of offsets indexed by ``[s, u]``."""
    return _offsets_table(n)
