"""FPCore subset reader/writer."""

import pytest

from fpwb import expr as E
from fpwb.fpcore import (FPCoreError, UnsupportedConstructError, emit_fpcore,
                         parse_fpcore)
from fpwb.parser import parse_math

MAXD = E.MAX_DOUBLE


def test_usage_scenario_precondition():
    s = parse_fpcore("(FPCore (x) :pre (<= 0 x) "
                     "(log (+ x (sqrt (+ (* x x) 1)))))")
    assert s.expression == parse_math("log(x + sqrt(x*x + 1))")
    assert s.range_of("x") == (0.0, MAXD)


def test_identity_full_range():
    s = parse_fpcore("(FPCore (x) x)")
    assert s.expression == E.var("x")
    assert s.range_of("x") == (-MAXD, MAXD)


def test_while_is_unsupported():
    with pytest.raises(UnsupportedConstructError):
        parse_fpcore("(FPCore (x) (while (< i 3) ((i 0 (+ i 1))) x))")


def test_let_is_unsupported():
    with pytest.raises(UnsupportedConstructError):
        parse_fpcore("(FPCore (x) (let ((y (* x x))) y))")


def test_malformed_forms():
    with pytest.raises(FPCoreError):
        parse_fpcore("")
    with pytest.raises(FPCoreError):
        parse_fpcore("(NotFPCore (x) x)")
    with pytest.raises(FPCoreError):
        parse_fpcore("(FPCore (x) (+ x 1)) trailing")
    with pytest.raises(FPCoreError):
        parse_fpcore("(FPCore (x) (sin x y))")


def test_two_sided_pre_and_properties():
    s = parse_fpcore("(FPCore (x) :pre (and (<= 1e-300 x) (<= x 1.0)) "
                     ":fpwb-points 64 :fpwb-seed 7 (log1p x))")
    assert s.range_of("x") == (1e-300, 1.0)
    assert s.sample_size == 64 and s.seed == 7


def test_emit_parse_round_trip():
    expr = parse_math("log1p(x + x / (hypot(1, x) + x))")
    s = E.Spec(expr, [("x", 1e-10, 1e10)], sample_size=128, seed=9)
    text = emit_fpcore(s.expression, s)
    back = parse_fpcore(text)
    assert back.expression == expr
    assert back.range_of("x") == (1e-10, 1e10)
    assert back.sample_size == 128 and back.seed == 9
    assert back.key == s.key


def test_emit_requires_matching_expression():
    s = E.Spec(parse_math("x + 1"), [("x", 0.0, 1.0)], sample_size=8, seed=1)
    with pytest.raises(FPCoreError):
        emit_fpcore(parse_math("x"), s)


def test_huge_literal_bound_saturates():
    # a bound literal beyond binary64 saturates to the full range rather
    # than crashing
    s = parse_fpcore("(FPCore (x) :pre (<= x 1e999) (+ x 1))")
    assert s.range_of("x")[1] == MAXD


def test_if_round_trip():
    expr = parse_math("if x <= 1 then x else sqrt(x)")
    s = E.Spec(expr, [("x", 0.0, 4.0)], sample_size=8, seed=2)
    back = parse_fpcore(emit_fpcore(s.expression, s))
    assert back.expression == expr


def test_negative_literals_and_constants():
    s = parse_fpcore("(FPCore (x) :pre (and (<= -2.5 x) (<= x -0.5)) "
                     "(* PI (- x)))")
    assert s.range_of("x") == (-2.5, -0.5)
    assert s.expression == parse_math("PI * -x")
