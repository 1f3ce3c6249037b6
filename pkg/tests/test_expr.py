"""Expression AST, Spec validation, literal handling, and emitters."""

from fractions import Fraction

import pytest

from fpwb import expr as E
from fpwb.expr import Spec, SpecError
from fpwb.parser import parse_math


def test_structural_equality_and_hash():
    a = E.op("+", E.var("x"), E.const("1"))
    b = E.op("+", E.var("x"), E.const("1"))
    c = E.op("+", E.const("1"), E.var("x"))
    assert a == b and hash(a) == hash(b)
    assert a != c


def test_constructor_arity_checks():
    with pytest.raises(E.ExprError):
        E.op("sin", E.var("x"), E.var("y"))
    with pytest.raises(E.ExprError):
        E.op("hypot", E.var("x"))
    with pytest.raises(E.ExprError):
        E.op("frobnicate", E.var("x"))


def test_emit_math_round_trip_anchor():
    e = parse_math("x + 1 - x")
    assert E.emit_math(e) == "x + 1 - x"


def test_emit_math_asinh_anchor():
    e = parse_math("log(x + hypot(1, x))")
    assert E.emit_math(e) == "log(x + hypot(1, x))"


def test_emit_latex_sqrt_anchor():
    e = parse_math("sqrt(x*x + 1)")
    assert E.emit_latex(e) == r"\sqrt{x \cdot x + 1}"


def test_walk_get_replace():
    e = parse_math("log(x + sqrt(x*x + 1))")
    paths = [p for p, _ in E.walk(e)]
    assert paths[0] == ()
    node = E.get_at(e, (0, 1))
    assert node.op == "sqrt"
    out = E.replace_at(e, (0, 1), E.var("y"))
    assert E.emit_math(out) == "log(x + y)"
    assert E.emit_math(e) == "log(x + sqrt(x * x + 1))"  # original untouched


def test_free_vars():
    assert E.free_vars(parse_math("x + y*y - x")) == {"x", "y"}
    assert E.free_vars(parse_math("1 + 2")) == set()
    assert E.free_vars(parse_math("if x <= 1 then z else 2")) == {"x", "z"}


# ---------------------------------------------------------------------------
# exact float literals

@pytest.mark.parametrize("x", [
    0.5, 1.0, -0.75, 2.0 ** -26, 1e15, 5e-324, -5e-324,
    1.7976931348623157e308, 3.141592653589793, 1e308, -1.2345678901234567e-200,
])
def test_const_from_float_is_exact(x):
    node = E.const_from_float(x)
    # the decimal text denotes exactly the same rational as the float
    if node.kind == "const":
        f = E.const_fraction(node)
    else:  # neg(const)
        f = -E.const_fraction(node.args[0])
    assert f == Fraction(x)
    # and it reparses to the identical tree
    assert parse_math(E.emit_math(node)) == node


def test_const_from_float_zero_and_errors():
    assert E.emit_math(E.const_from_float(0.0)) == "0"
    with pytest.raises(E.ExprError):
        E.const_from_float(float("inf"))
    with pytest.raises(E.ExprError):
        E.const_from_float(float("nan"))


# ---------------------------------------------------------------------------
# Spec

def _spec(lo=0.0, hi=1.0, n=16, seed=42):
    return Spec(parse_math("x + 1"), [("x", lo, hi)], sample_size=n, seed=seed)


def test_spec_key_stable_and_sensitive():
    a, b = _spec(), _spec()
    assert a.key == b.key and a == b
    assert _spec(hi=2.0).key != a.key
    assert _spec(seed=7).key != a.key
    assert _spec(n=32).key != a.key


def test_spec_rejects_degenerate_range():
    with pytest.raises(SpecError):
        _spec(lo=1.0, hi=1.0)
    with pytest.raises(SpecError):
        _spec(lo=2.0, hi=1.0)


def test_spec_rejects_nonfinite_bounds():
    with pytest.raises(SpecError):
        _spec(hi=float("inf"))
    with pytest.raises(SpecError):
        _spec(lo=float("nan"))


def test_spec_requires_exact_variable_cover():
    with pytest.raises(SpecError):
        Spec(parse_math("x + y"), [("x", 0.0, 1.0)], sample_size=8, seed=1)
    with pytest.raises(SpecError):
        Spec(parse_math("x"), [("x", 0.0, 1.0), ("z", 0.0, 1.0)],
             sample_size=8, seed=1)


def test_spec_with_ranges():
    a = _spec()
    b = a.with_ranges([("x", 0.0, 2.0)])
    assert b.range_of("x") == (0.0, 2.0)
    assert b.sample_size == a.sample_size and b.seed == a.seed
    assert b.key != a.key
    # round trip back
    assert a.with_ranges([("x", 0.0, 1.0)]).key == a.key
