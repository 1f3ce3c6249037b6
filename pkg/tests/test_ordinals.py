"""Ordinal mapping, ulps distance, and the bits error scale."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpwb.ordinals import (MAX_BITS, bits, bits_to_float, float_to_bits,
                           from_ordinal, to_ordinal, ulps)

finite_floats = st.floats(allow_nan=False, allow_infinity=False)
any_floats = st.floats(allow_nan=True, allow_infinity=True)


# ---------------------------------------------------------------------------
# anchors

def test_ordinal_of_one():
    assert to_ordinal(1.0) == 4607182418800017408


def test_bits_zero_to_one():
    assert bits(0.0, 1.0) == pytest.approx(61.99859042974533, abs=1e-12)


def test_identical_values_zero_ulps():
    assert ulps(1.0, 1.0) == 0
    assert bits(1.0, 1.0) == 0.0


def test_adjacent_doubles_one_ulp():
    nxt = math.nextafter(1.0, 2.0)
    assert ulps(1.0, nxt) == 1
    assert bits(1.0, nxt) == 1.0


def test_signed_zeros_are_equal():
    assert ulps(0.0, -0.0) == 0
    assert bits(-0.0, 0.0) == 0.0


def test_nan_rules():
    assert ulps(float("nan"), float("nan")) == 0
    assert bits(float("nan"), float("nan")) == 0.0
    assert ulps(float("nan"), 1.0) == 2 ** 64
    assert bits(float("nan"), 1.0) == MAX_BITS
    assert bits(1.0, float("nan")) == MAX_BITS


def test_infinities():
    inf = float("inf")
    assert ulps(inf, inf) == 0
    assert ulps(-inf, -inf) == 0
    # the whole ordinal span, +inf to -inf: just under the 64-bit ceiling
    assert ulps(inf, -inf) == 2 * to_ordinal(inf)
    assert bits(inf, -inf) == pytest.approx(63.99929538702341, abs=1e-12)
    # largest finite to +inf is one step
    assert ulps(1.7976931348623157e308, inf) == 1


def test_ordinal_round_trip_edges():
    for x in [0.0, -0.0, 1.0, -1.0, 5e-324, -5e-324,
              1.7976931348623157e308, -1.7976931348623157e308,
              float("inf"), float("-inf")]:
        assert from_ordinal(to_ordinal(x)) == x or (x == 0.0 and from_ordinal(to_ordinal(x)) == 0.0)


def test_bits_monotone_in_distance():
    xs = [bits(1.0, math.nextafter(1.0, 2.0)),
          bits(1.0, 1.0 + 2 ** -50),
          bits(1.0, 1.5),
          bits(1.0, 2.0),
          bits(1.0, 1e10)]
    assert all(a < b for a, b in zip(xs, xs[1:]))


# ---------------------------------------------------------------------------
# properties

def test_ordinal_monotone_100k_pairs():
    """x < y implies ord(x) < ord(y), over 10^5 random finite pairs."""
    rng = np.random.default_rng(20240817)
    raw = rng.integers(0, 2 ** 64, size=250_000, dtype=np.uint64)
    vals = raw.view(np.float64)
    vals = vals[np.isfinite(vals)][:200_000]
    assert vals.size == 200_000
    a, b = vals[:100_000], vals[100_000:]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    strict = lo < hi
    lo, hi = lo[strict], hi[strict]
    assert lo.size > 99_000  # essentially all pairs are strict
    ord_lo = np.array([to_ordinal(float(x)) for x in lo], dtype=np.int64)
    ord_hi = np.array([to_ordinal(float(x)) for x in hi], dtype=np.int64)
    assert np.all(ord_lo < ord_hi)


@settings(max_examples=300, deadline=None)
@given(finite_floats)
def test_ordinal_round_trip(x):
    assert from_ordinal(to_ordinal(x)) == x or (x == 0.0)


@settings(max_examples=300, deadline=None)
@given(any_floats, any_floats)
def test_ulps_symmetry(a, b):
    assert ulps(a, b) == ulps(b, a)
    assert bits(a, b) == bits(b, a)


@settings(max_examples=300, deadline=None)
@given(any_floats)
def test_ulps_zero_law(a):
    assert ulps(a, a) == 0
    assert bits(a, a) == 0.0


@settings(max_examples=300, deadline=None)
@given(any_floats, any_floats)
def test_bits_bounds(a, b):
    v = bits(a, b)
    assert 0.0 <= v <= MAX_BITS


def test_bits_to_float_inverse_of_float_to_bits():
    for x in [0.0, 1.0, -2.5, 5e-324, 1e308, float("inf")]:
        assert bits_to_float(float_to_bits(x)) == x
