"""Batched binary64 program evaluation: correctness of ops, program
compilation (including branches), the fma emulation, and the batch
ordinal/ulps/bits helpers against their scalar references."""

import math
import os
from fractions import Fraction

import numpy as np
import pytest

from fpwb import kernels as K
from fpwb import ordinals as O
from fpwb.oracle import eval_float64, eval_float64_batch
from fpwb.parser import parse_math

RNG = np.random.default_rng(123)


def test_backend_flag_is_reported():
    assert isinstance(K.NUMBA_ENABLED, bool)
    if os.environ.get("FPWB_DISABLE_NUMBA", "").strip():
        assert not K.NUMBA_ENABLED


# ---------------------------------------------------------------------------
# op-by-op agreement with scalar references on bit-safe operations

_BIT_SAFE_CASES = {
    "+": [(1.0, 2.0), (0.1, 0.2), (1e308, 1e308), (1.0, -1.0), (0.0, -0.0)],
    "-": [(1.0, 2.0), (1e16, 1.0), (0.1, 0.3), (0.0, 0.0)],
    "*": [(3.0, 4.0), (1e200, 1e200), (1e-200, 1e-200), (-0.0, 5.0)],
    "/": [(1.0, 3.0), (1e-300, 1e300), (5.0, 0.0), (-5.0, 0.0), (0.0, 0.0)],
    "sqrt": [(2.0,), (1e308,), (4.9e-324,), (0.0,)],
    "fabs": [(-2.5,), (0.0,), (-0.0,), (float("-inf"),)],
    "neg": [(2.5,), (-0.0,), (float("inf"),)],
    "hypot": [(3.0, 4.0), (1e300, 1e300), (0.0, -7.0)],
}

_PY_REF = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: np.divide(a, b),  # IEEE: finite/0 -> inf, 0/0 -> nan
    "sqrt": math.sqrt,
    "fabs": math.fabs,
    "neg": lambda a: -a,
    "hypot": math.hypot,
}


@pytest.mark.parametrize("opname", sorted(_BIT_SAFE_CASES))
def test_ops_match_scalar_reference(opname):
    cases = _BIT_SAFE_CASES[opname]
    cols = np.array(cases, dtype=np.float64).T
    got = K.apply_op_float64(opname, [cols[i] for i in range(cols.shape[0])])
    with np.errstate(all="ignore"):
        want = [float(_PY_REF[opname](*c)) for c in cases]
    for g, w, c in zip(got, want, cases):
        assert O.float_to_bits(float(g)) == O.float_to_bits(w), (opname, c)


def test_transcendentals_match_numpy():
    xs = np.concatenate([
        RNG.uniform(-10, 10, 50),
        RNG.uniform(1e-300, 1e-10, 20),
        np.array([0.5, 1.0, 2.0, 1e15]),
    ])
    with np.errstate(all="ignore"):
        for opname, ref in [("exp", np.exp), ("log", np.log),
                            ("expm1", np.expm1), ("log1p", np.log1p),
                            ("sin", np.sin), ("atan", np.arctan),
                            ("tanh", np.tanh), ("cbrt", np.cbrt)]:
            dom = xs if opname not in ("log",) else np.abs(xs) + 1e-310
            got = K.apply_op_float64(opname, [dom])
            want = ref(dom)
            ok = got.view(np.uint64) == want.view(np.uint64)
            both_nan = np.isnan(got) & np.isnan(want)
            assert np.all(ok | both_nan), opname


# ---------------------------------------------------------------------------
# fma: correctly rounded a*b+c

def _ref_fma(a: float, b: float, c: float) -> float:
    if any(map(math.isnan, (a, b, c))):
        return float("nan")
    if math.isinf(a) or math.isinf(b) or math.isinf(c):
        with np.errstate(all="ignore"):
            return float(np.float64(a) * np.float64(b) + np.float64(c))
    exact = Fraction(a) * Fraction(b) + Fraction(c)
    try:
        return float(exact)
    except OverflowError:
        return math.copysign(float("inf"), exact)


def test_fma_correctly_rounded_random():
    n = 500
    a = RNG.uniform(-1e3, 1e3, n)
    b = RNG.uniform(-1e3, 1e3, n)
    c = -(a * b) + RNG.uniform(-1e-10, 1e-10, n)  # stress cancellation
    got = K.apply_op_float64("fma", [a, b, c])
    for i in range(n):
        want = _ref_fma(float(a[i]), float(b[i]), float(c[i]))
        assert O.float_to_bits(float(got[i])) == O.float_to_bits(want), i


def test_fma_double_rounding_traps():
    # cases where fma(a,b,c) != a*b+c under double rounding
    cases = [
        (1.0 + 2.0 ** -52, 1.0 + 2.0 ** -52, -(1.0 + 2.0 ** -51)),
        (1e308, 2.0, -1e308),
        (2.0 ** 500, 2.0 ** 500, -(2.0 ** 1000)),
        (3.0, 1.0 / 3.0, -1.0),
    ]
    a, b, c = (np.array(col) for col in zip(*cases))
    got = K.apply_op_float64("fma", [a, b, c])
    for i, case in enumerate(cases):
        want = _ref_fma(*case)
        assert O.float_to_bits(float(got[i])) == O.float_to_bits(want), case
    # and at least one of these differs from the naive product-sum
    naive = a * b + c
    assert any(float(g) != float(nv) for g, nv in zip(got, naive))


# ---------------------------------------------------------------------------
# batch ordinal helpers against scalar ordinals

def _edge_values():
    return np.array([0.0, -0.0, 1.0, -1.0, 5e-324, -5e-324, 1e308, -1e308,
                     float("inf"), float("-inf"), 0.1, -2.5e-100])


def test_to_ordinal_batch_matches_scalar():
    xs = np.concatenate([_edge_values(),
                         RNG.integers(0, 2 ** 64, 500, dtype=np.uint64)
                            .view(np.float64)])
    xs = xs[~np.isnan(xs)]
    got = K.to_ordinal_batch(xs)
    for x, g in zip(xs, got):
        assert int(g) == O.to_ordinal(float(x))


def test_ulps_bits_batch_match_scalar():
    pool = np.concatenate([_edge_values(),
                           RNG.uniform(-1e5, 1e5, 200),
                           np.array([float("nan")] * 3)])
    a = RNG.choice(pool, 300)
    b = RNG.choice(pool, 300)
    got_bits = K.bits_batch(a, b)
    for x, y, gb in zip(a, b, got_bits):
        assert float(gb) == pytest.approx(O.bits(float(x), float(y)),
                                          abs=0.0), (x, y)


# ---------------------------------------------------------------------------
# program compilation: expressions with branches evaluate pointwise-equal

def test_branchy_program_matches_pointwise_eval():
    e = parse_math("if x <= 1 and x >= -1 then expm1(x) "
                   "else if x > 1 then exp(x) - 1 else -1 / exp(-x)")
    xs = np.concatenate([RNG.uniform(-5, 5, 100), np.array([1.0, -1.0, 0.0])])
    batch = eval_float64_batch(e, ["x"], xs.reshape(1, -1))
    for x, g in zip(xs, batch):
        want = eval_float64(e, {"x": float(x)})
        assert O.float_to_bits(float(g)) == O.float_to_bits(want)


def test_named_constants_evaluate():
    e = parse_math("PI * E + INFINITY * 0")
    v = eval_float64(e, {})
    assert math.isnan(v)  # inf * 0 under IEEE
    e2 = parse_math("cos(PI)")
    assert eval_float64(e2, {}) == -1.0
