"""Natural math syntax: parsing, precedence, errors, and emit round-trip."""

import random

import pytest

from fpwb import expr as E
from fpwb.parser import ParseError, UnknownFunctionError, parse_math


def test_fig_cancellation_shape():
    e = parse_math("x + 1 - x")
    assert e.op == "-" and e.args[0].op == "+"
    assert e.args[0].args[0] == E.var("x")


def test_usage_scenario_asinh_shape():
    e = parse_math("log(x + sqrt(x * x + 1))")
    assert e.op == "log"
    add = e.args[0]
    assert add.op == "+" and add.args[1].op == "sqrt"
    inner = add.args[1].args[0]
    assert inner.op == "+" and inner.args[0].op == "*"


def test_wrong_arity_is_an_error():
    with pytest.raises(ParseError):
        parse_math("sin()")
    with pytest.raises(ParseError):
        parse_math("hypot(x)")
    with pytest.raises(ParseError):
        parse_math("sin(x, y)")


def test_unknown_function():
    with pytest.raises(UnknownFunctionError) as ei:
        parse_math("frob(x)")
    assert "frob" in str(ei.value)
    assert isinstance(ei.value.offset, int)


def test_left_associativity():
    assert E.emit_math(parse_math("a - b - c")) == "a - b - c"
    e = parse_math("a - b - c")
    assert e.op == "-" and e.args[0].op == "-"


def test_pow_right_associative_and_caret():
    e = parse_math("a ^ b ^ c")
    assert e.op == "pow" and e.args[1].op == "pow"
    assert parse_math("pow(a, b)") == parse_math("a ^ b")


def test_unary_minus_precedence():
    # unary minus binds tighter than ^ in this grammar: -x^2 is (-x)^2,
    # and the emitter parenthesizes -(x^2) so both forms round-trip.
    e = parse_math("-x^2")
    assert e.op == "pow" and e.args[0].op == "neg"
    e2 = parse_math("-(x^2)")
    assert e2.op == "neg" and e2.args[0].op == "pow"
    for tree in (e, e2):
        assert parse_math(E.emit_math(tree)) == tree
    assert parse_math("-x + y").op == "+"


def test_literal_text_is_preserved():
    e = parse_math("x + 1.50e1")
    assert e.args[1].kind == "const" and e.args[1].text == "1.50e1"
    assert E.const_fraction(e.args[1]) == 15


def test_if_syntax():
    e = parse_math("if x <= 1 then x else sqrt(x)")
    assert e.kind == "if"
    assert e.args[0].kind == "cmp" and e.args[0].op == "<="
    nested = parse_math("if x < 0 and y < 0 then 1 else 2")
    assert nested.args[0].kind == "bool"


def test_comparison_outside_if_rejected():
    with pytest.raises(ParseError):
        parse_math("x <= 1")


def test_error_offsets():
    with pytest.raises(ParseError) as ei:
        parse_math("log(x +")
    assert ei.value.offset >= 6
    with pytest.raises(ParseError):
        parse_math("")
    with pytest.raises(ParseError):
        parse_math("x + * y")
    with pytest.raises(ParseError):
        parse_math("(x + 1")


# ---------------------------------------------------------------------------
# round-trip property over random ASTs (depth <= 6)

_CONST_TEXTS = ["0", "1", "2", "0.5", "1.5", "3", "1e-8", "2.5e10",
                "1.4142135623730951", "123456789", "1e308", "5e-324"]
_VARS = ["x", "y", "z", "long_name1"]


def _random_value(rng: random.Random, depth: int) -> E.Expr:
    if depth <= 0:
        kind = rng.random()
        if kind < 0.45:
            return E.var(rng.choice(_VARS))
        if kind < 0.85:
            return E.const(rng.choice(_CONST_TEXTS))
        return E.named(rng.choice(E.NAMED_CONSTS))
    roll = rng.random()
    if roll < 0.12:
        return _random_value(rng, 0)
    if roll < 0.2:
        return E.if_(_random_cond(rng, min(depth - 1, 2)),
                     _random_value(rng, depth - 1),
                     _random_value(rng, depth - 1))
    op = rng.choice(E.MATH_OPS)
    args = [_random_value(rng, rng.randint(0, depth - 1))
            for _ in range(E.op_arity(op))]
    return E.op(op, *args)


def _random_cond(rng: random.Random, depth: int) -> E.Expr:
    if depth <= 0 or rng.random() < 0.6:
        return E.cmp(rng.choice(E.CMP_OPS),
                     _random_value(rng, 1), _random_value(rng, 1))
    return E.bool_op(rng.choice(E.BOOL_OPS),
                     _random_cond(rng, depth - 1),
                     _random_cond(rng, depth - 1))


def test_parse_emit_round_trip_random_asts():
    rng = random.Random(987654321)
    for trial in range(400):
        e = _random_value(rng, rng.randint(1, 6))
        text = E.emit_math(e)
        back = parse_math(text)
        assert back == e, f"trial {trial}: {text!r}"
        # emitting again is a fixed point
        assert E.emit_math(back) == text


def test_round_trip_precedence_corners():
    cases = [
        "x - (y - z)",
        "x - (y + z)",
        "(x + y) * z",
        "x / (y * z)",
        "-(x + y)",
        "x * -y",
        "(x - y) ^ 2",
        "x ^ (y ^ z)",
        "(x ^ y) ^ z",
        "1 / -x",
        "if x <= 1 and y < 2 then x else y",
    ]
    for text in cases:
        e = parse_math(text)
        assert parse_math(E.emit_math(e)) == e
