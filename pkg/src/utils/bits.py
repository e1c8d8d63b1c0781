"""
Bit-level helpers for 64-bit machine words.
"""

import math
import struct
from typing import Union

from src.schemas.program import WORD_BITS, Bank

Word = Union[int, float]

MASK64 = (1 << WORD_BITS) - 1
INT64_MIN = -(1 << 63)


def to_signed64(value: int) -> int:
    """Wrap an arbitrary integer onto the signed 64-bit range."""
    value &= MASK64
    return value - (1 << WORD_BITS) if value >= (1 << 63) else value


def float_to_bits(value: float) -> int:
    """Unsigned 64-bit IEEE-754 pattern of a binary64 value."""
    return struct.unpack("<Q", struct.pack("<d", value))[0]


def bits_to_float(pattern: int) -> float:
    return struct.unpack("<d", struct.pack("<Q", pattern & MASK64))[0]


def word_bits(value: Word, bank: Bank) -> int:
    """Unsigned 64-bit pattern of a word of the given bank."""
    if bank is Bank.FLOAT:
        return float_to_bits(float(value))
    return int(value) & MASK64


def from_bits(pattern: int, bank: Bank) -> Word:
    if bank is Bank.FLOAT:
        return bits_to_float(pattern)
    return to_signed64(pattern)


def flip_bit(value: Word, bank: Bank, bit: int) -> Word:
    """Flip one bit of a word's 64-bit pattern."""
    return from_bits(word_bits(value, bank) ^ (1 << bit), bank)


def reinterpret(value: Word, source: Bank, target: Bank) -> Word:
    """Move a word between banks without changing its bit pattern."""
    if source is target:
        return value
    return from_bits(word_bits(value, source), target)


def same_word(a: Word, b: Word, bank: Bank) -> bool:
    """Bit-exact equality (distinguishes -0.0 and NaN payloads)."""
    return word_bits(a, bank) == word_bits(b, bank)


def magnitude(faulty: Word, golden: Word, bank: Bank) -> float:
    """Absolute deviation of a faulty word from its golden value.

    Integer differences are computed exactly and then rounded to the nearest double,
    so differences above 2**53 lose their low bits. A nonzero difference never rounds
    to zero, which keeps the masked/SDC split exact; only threshold comparisons at
    such magnitudes see the rounding. A non-finite faulty float whose golden value is
    finite deviates by +inf.
    """
    if bank is Bank.INT:
        return float(abs(int(faulty) - int(golden)))
    faulty, golden = float(faulty), float(golden)
    if faulty == golden or (math.isnan(faulty) and math.isnan(golden)):
        return 0.0
    if not (math.isfinite(faulty) and math.isfinite(golden)):
        return math.inf
    diff = abs(faulty - golden)
    return diff if math.isfinite(diff) else math.inf
