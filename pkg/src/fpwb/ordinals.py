"""IEEE-754 binary64 ordinal arithmetic and the ulps/bits error metrics.

A binary64 value is mapped to a signed integer index (its "ordinal") in the
total order of representable doubles: for x >= 0 the raw bit pattern read as
an integer, for x < 0 the negation of the bit pattern of |x|.  Adjacent
doubles are adjacent ordinals, so |ord(a) - ord(b)| counts the representable
values strictly between a and b (plus one endpoint), which is the ulps
distance used everywhere in this package.

All functions here are pure Python over exact integers; the vectorized
equivalents live in kernels.py and are tested against these.
"""

from __future__ import annotations

import math
import struct

# Bit patterns written as integers to keep the constants greppable.
_SIGN_MASK = 0x8000_0000_0000_0000
_ABS_MASK = 0x7FFF_FFFF_FFFF_FFFF
_INF_BITS = 0x7FF0_0000_0000_0000

#: ulps distance reported when exactly one of the two values is NaN.
NAN_ULPS = 1 << 64

#: Largest bits-of-error score; also the clamp ceiling.
MAX_BITS = 64.0


def float_to_bits(x: float) -> int:
    """Raw bit pattern of a binary64 as an unsigned 64-bit integer."""
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def bits_to_float(b: int) -> float:
    """Inverse of float_to_bits."""
    return struct.unpack("<d", struct.pack("<Q", b & 0xFFFF_FFFF_FFFF_FFFF))[0]


def to_ordinal(x: float) -> int:
    """Signed ordinal index of a finite or infinite binary64.

    Both zeros map to 0.  NaN is rejected: callers decide what NaN means
    (ulps() below treats it as total information loss).
    """
    if math.isnan(x):
        raise ValueError("NaN has no ordinal")
    b = float_to_bits(x)
    if b & _SIGN_MASK:
        return -(b & _ABS_MASK)
    return b


def from_ordinal(o: int) -> float:
    """Binary64 value at ordinal o. Accepts the full ordinal range of
    finite and infinite doubles."""
    if o < 0:
        if -o > _INF_BITS:
            raise ValueError("ordinal out of range")
        return bits_to_float(_SIGN_MASK | (-o))
    if o > _INF_BITS:
        raise ValueError("ordinal out of range")
    return bits_to_float(o)


#: Ordinal of +inf; -ORD_INF is the ordinal of -inf.
ORD_INF = _INF_BITS


def ulps(a: float, b: float) -> int:
    """Ordinal distance between two doubles.

    Both NaN -> 0 (equally broken is not an accuracy gap); exactly one
    NaN -> 2^64 (total information loss); otherwise |ord(a) - ord(b)| with
    +-0 normalized to +0 and +-inf at the ordinals just beyond the finite
    range.
    """
    a_nan = math.isnan(a)
    b_nan = math.isnan(b)
    if a_nan and b_nan:
        return 0
    if a_nan or b_nan:
        return NAN_ULPS
    return abs(to_ordinal(a) - to_ordinal(b))


def bits(a: float, b: float) -> float:
    """log2(1 + ulps(a, b)) clamped to [0, 64].

    0 means bit-identical (after zero-sign normalization); ~61.999 separates
    0.0 from 1.0; 64 is reserved for NaN-vs-number.
    """
    u = ulps(a, b)
    if u <= 0:
        return 0.0
    return min(MAX_BITS, math.log2(1 + u))


def next_up(x: float) -> float:
    """Next representable double toward +inf."""
    return from_ordinal(to_ordinal(x) + 1)


def next_down(x: float) -> float:
    """Next representable double toward -inf."""
    return from_ordinal(to_ordinal(x) - 1)
