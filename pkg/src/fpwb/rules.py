"""Rewrite rules: pattern matching, substitution, and the built-in catalog.

A pattern is an ordinary Expr in which every variable node is a
metavariable.  Matching binds metavariables to subtrees (a repeated
metavariable must bind structurally equal subtrees); constant patterns
match any constant with the same exact rational value; operators match
by name and arity.

Every rule is either an `exact-identity` (a real-number identity wherever
both sides are defined) or a `guarded-approximation` (the right-hand side
embeds an if-guard and falls back to the left-hand side when the guard
fails, so the rewritten expression is total wherever the original was).
Rules never drop or invent metavariables: the left and right side always
use the same set, which keeps substitution total.  A consequence is that
cancellation laws such as (a+b)-b -> a are not expressible as rules here;
the catalog reaches the same normal forms through re-association and
conjugate forms instead.

`all_rewrites` also performs exact constant folding (as the pseudo-rule
name "const-fold") for +, -, *, /, neg, fabs and small integer powers,
but only when the folded value has a finite decimal spelling, so emitted
expressions always re-parse to the identical tree.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterator, Optional

from . import expr as E
from .parser import parse_math

EXACT = "exact-identity"
GUARDED = "guarded-approximation"

#: Guard threshold for series approximations: |t| <= 2^-26 keeps the
#: dropped next-order term below one half ulp of the kept terms.
SERIES_BOUND = 2.0 ** -26


class RuleError(ValueError):
    """Malformed rewrite rule."""


class RewriteRule:
    """One named rewrite with a left pattern, right pattern, and soundness tag."""

    __slots__ = ("name", "lhs", "rhs", "tag", "guard")

    def __init__(self, name: str, lhs: E.Expr, rhs: E.Expr, tag: str = EXACT,
                 guard: Optional[str] = None):
        if tag not in (EXACT, GUARDED):
            raise RuleError(f"unknown soundness tag {tag!r}")
        lvars = metavars(lhs)
        rvars = metavars(rhs)
        if lvars != rvars:
            raise RuleError(
                f"rule {name!r}: metavariable sets differ "
                f"({sorted(lvars)} vs {sorted(rvars)})")
        self.name = name
        self.lhs = lhs
        self.rhs = rhs
        self.tag = tag
        self.guard = guard

    def __repr__(self) -> str:
        return (f"RewriteRule({self.name}: {E.emit_math(self.lhs)} -> "
                f"{E.emit_math(self.rhs)})")

    def apply(self, e: E.Expr) -> Optional[E.Expr]:
        """Rewrite at the root, or None if the left side does not match."""
        binding: dict[str, E.Expr] = {}
        if not match(self.lhs, e, binding):
            return None
        return substitute(self.rhs, binding)


def metavars(pattern: E.Expr) -> frozenset[str]:
    """Names of the metavariables (variable nodes) in a pattern."""
    return frozenset(node.text for _, node in E.walk(pattern) if node.kind == "var")


def match(pattern: E.Expr, e: E.Expr, binding: dict[str, E.Expr]) -> bool:
    """Match `e` against `pattern`, extending `binding` in place.

    On failure the binding may contain partial entries; callers pass a
    fresh dict per attempt.
    """
    if pattern.kind == "var":
        bound = binding.get(pattern.text)
        if bound is None:
            binding[pattern.text] = e
            return True
        return bound == e
    if pattern.kind == "const":
        return e.kind == "const" and E.const_fraction(e) == E.const_fraction(pattern)
    if pattern.kind == "named":
        return e.kind == "named" and e.text == pattern.text
    if e.kind != pattern.kind:
        return False
    if pattern.kind in ("op", "cmp", "bool") and e.op != pattern.op:
        return False
    if len(e.args) != len(pattern.args):
        return False
    return all(match(p, a, binding) for p, a in zip(pattern.args, e.args))


def substitute(pattern: E.Expr, binding: dict[str, E.Expr]) -> E.Expr:
    """Instantiate a pattern, replacing each metavariable by its binding."""
    if pattern.kind == "var":
        try:
            return binding[pattern.text]
        except KeyError:
            raise RuleError(f"unbound metavariable {pattern.text!r}") from None
    if pattern.kind in ("const", "named"):
        return pattern
    args = [substitute(a, binding) for a in pattern.args]
    if pattern.kind == "op":
        return E.op(pattern.op, *args)
    if pattern.kind == "cmp":
        return E.cmp(pattern.op, *args)
    if pattern.kind == "bool":
        return E.bool_op(pattern.op, *args)
    return E.if_(*args)


# ---------------------------------------------------------------------------
# Constant folding

#: Largest |exponent| folded for pow, keeping folded rationals small.
_FOLD_POW_LIMIT = 16

CONST_FOLD = "const-fold"


def _const_value(e: E.Expr) -> Optional[Fraction]:
    """Exact value of a constant or negated-constant node, else None."""
    if e.kind == "const":
        return E.const_fraction(e)
    if e.kind == "op" and e.op == "neg" and e.args[0].kind == "const":
        return -E.const_fraction(e.args[0])
    return None


def _decimal_text(q: Fraction) -> Optional[str]:
    """Finite-decimal spelling of q (denominator 2^a·5^b), else None."""
    den = q.denominator
    twos = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    fives = 0
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return None
    shift = max(twos, fives)
    scaled = abs(q.numerator) * (10 ** shift) // q.denominator
    digits = str(scaled)
    if shift == 0:
        text = digits
    elif len(digits) > shift:
        text = digits[:-shift] + "." + digits[-shift:]
    else:
        text = "0." + digits.rjust(shift, "0")
    text = text.rstrip("0").rstrip(".") if "." in text else text
    if not text or text == "":
        text = "0"
    return "-" + text if q < 0 else text


def fold_constants(e: E.Expr) -> Optional[E.Expr]:
    """Fold an all-constant operator node to a single exact constant.

    Returns None when the node is not foldable, the operation is not
    exact over rationals, the value is undefined (division by zero,
    0^negative), or the result has no finite decimal spelling (which
    would not re-parse as a single literal).
    """
    if e.kind != "op":
        return None
    vals = [_const_value(a) for a in e.args]
    if any(v is None for v in vals):
        return None
    op = e.op
    if op == "neg":
        out = -vals[0]
    elif op == "fabs":
        out = abs(vals[0])
    elif op == "+":
        out = vals[0] + vals[1]
    elif op == "-":
        out = vals[0] - vals[1]
    elif op == "*":
        out = vals[0] * vals[1]
    elif op == "/":
        if vals[1] == 0:
            return None
        out = vals[0] / vals[1]
    elif op == "pow":
        exp = vals[1]
        if exp.denominator != 1 or abs(exp.numerator) > _FOLD_POW_LIMIT:
            return None
        if vals[0] == 0 and exp < 0:
            return None
        out = vals[0] ** int(exp)
    else:
        return None
    text = _decimal_text(out)
    if text is None:
        return None
    folded = E.const(text)
    return None if folded == e else folded


# ---------------------------------------------------------------------------
# Whole-expression rewriting

def rewrites_at(e: E.Expr, path: tuple[int, ...], rules: list[RewriteRule],
                ) -> Iterator[tuple[str, E.Expr]]:
    """All single-step rewrites of `e` at one path: (rule name, result)."""
    node = E.get_at(e, path)
    for rule in rules:
        replacement = rule.apply(node)
        if replacement is not None and replacement != node:
            yield rule.name, E.replace_at(e, path, replacement)
    folded = fold_constants(node)
    if folded is not None:
        yield CONST_FOLD, E.replace_at(e, path, folded)


def all_rewrites(e: E.Expr, rules: Optional[list[RewriteRule]] = None,
                 ) -> list[tuple[str, tuple[int, ...], E.Expr]]:
    """Every single-step rewrite of `e`: (rule name, path, result).

    Results structurally equal to the input are dropped; distinct rules
    producing the same result are all reported (derivations differ).
    """
    if rules is None:
        rules = rule_db()
    out = []
    for path, _ in E.walk(e):
        for name, result in rewrites_at(e, path, rules):
            if result != e:
                out.append((name, path, result))
    return out


# ---------------------------------------------------------------------------
# Catalog

_DB: Optional[list[RewriteRule]] = None
_DB_BY_NAME: Optional[dict[str, RewriteRule]] = None


def _r(name: str, lhs: str, rhs: str, tag: str = EXACT,
       guard: Optional[str] = None) -> RewriteRule:
    return RewriteRule(name, parse_math(lhs), parse_math(rhs), tag, guard)


def _series(name: str, lhs: str, body: str, guard_var: str = "t") -> RewriteRule:
    """Guarded series rule: lhs -> if fabs(t) <= 2^-26 then body else lhs."""
    bound = E.emit_math(E.const_from_float(SERIES_BOUND))
    rhs = f"if fabs({guard_var}) <= {bound} then {body} else {lhs}"
    return _r(name, lhs, rhs, GUARDED, guard=f"|{guard_var}| <= 2^-26")


def _build_db() -> list[RewriteRule]:
    rules = [
        # --- commutativity / associativity / distributivity
        _r("add-commute", "a + b", "b + a"),
        _r("mul-commute", "a * b", "b * a"),
        _r("add-assoc-left", "a + (b + c)", "(a + b) + c"),
        _r("add-assoc-right", "(a + b) + c", "a + (b + c)"),
        _r("mul-assoc-left", "a * (b * c)", "(a * b) * c"),
        _r("mul-assoc-right", "(a * b) * c", "a * (b * c)"),
        _r("sub-assoc-right", "(a + b) - c", "a + (b - c)"),
        _r("sub-assoc-left", "a + (b - c)", "(a + b) - c"),
        _r("sub-chain", "(a - b) - c", "a - (b + c)"),
        _r("unchain-sub", "a - (b + c)", "(a - b) - c"),
        _r("distribute", "a * (b + c)", "a * b + a * c"),
        _r("factor", "a * b + a * c", "a * (b + c)"),
        _r("distribute-sub", "a * (b - c)", "a * b - a * c"),
        _r("factor-sub", "a * b - a * c", "a * (b - c)"),
        _r("sub-as-neg-add", "a - b", "a + (-b)"),
        _r("neg-add-as-sub", "a + (-b)", "a - b"),
        _r("neg-neg", "-(-a)", "a"),
        _r("neg-sub-flip", "-(a - b)", "b - a"),
        _r("div-chain", "(a / b) / c", "a / (b * c)"),
        _r("frac-split", "(a + b) / c", "a / c + b / c"),
        _r("frac-join", "a / c + b / c", "(a + b) / c"),
        _r("frac-split-sub", "(a - b) / c", "a / c - b / c"),
        _r("frac-join-sub", "a / c - b / c", "(a - b) / c"),
        # --- identity elements
        _r("mul-one", "a * 1", "a"),
        _r("one-mul", "1 * a", "a"),
        _r("add-zero", "a + 0", "a"),
        _r("zero-add", "0 + a", "a"),
        _r("sub-zero", "a - 0", "a"),
        _r("zero-sub", "0 - a", "-a"),
        _r("div-one", "a / 1", "a"),
        # --- squares, square roots, hypot
        _r("diff-of-squares", "a*a - b*b", "(a - b) * (a + b)"),
        _r("undo-diff-of-squares", "(a - b) * (a + b)", "a*a - b*b"),
        _r("square-to-pow", "a * a", "a ^ 2"),
        _r("pow-to-square", "a ^ 2", "a * a"),
        _r("pow-half-to-sqrt", "a ^ 0.5", "sqrt(a)"),
        RewriteRule("pow-third-to-cbrt",
                    E.op("pow", E.var("a"), E.const(Fraction(1, 3))),
                    E.op("cbrt", E.var("a"))),
        _r("sqrt-of-square", "sqrt(a * a)", "fabs(a)"),
        _r("fabs-square", "fabs(a) * fabs(a)", "a * a"),
        _r("fabs-of-square", "fabs(a * a)", "a * a"),
        _r("hypot-intro", "sqrt(a*a + b*b)", "hypot(a, b)"),
        _r("hypot-elim", "hypot(a, b)", "sqrt(a*a + b*b)"),
        _r("hypot-intro-one-left", "sqrt(1 + a*a)", "hypot(1, a)"),
        _r("hypot-intro-one-right", "sqrt(a*a + 1)", "hypot(a, 1)"),
        _r("hypot-commute", "hypot(a, b)", "hypot(b, a)"),
        _r("one-as-square", "1", "1 * 1"),
        _r("hypot-shoulder", "hypot(1, a) - 1", "(a * a) / (hypot(1, a) + 1)"),
        _r("hypot-shoulder-sym", "hypot(a, 1) - 1", "(a * a) / (hypot(a, 1) + 1)"),
        # --- conjugate rationalizations
        _r("rationalize-sqrt-diff", "sqrt(a) - sqrt(b)", "(a - b) / (sqrt(a) + sqrt(b))"),
        _r("rationalize-sqrt-minus-one", "sqrt(a) - 1", "(a - 1) / (sqrt(a) + 1)"),
        _r("rationalize-one-minus-sqrt", "1 - sqrt(a)", "(1 - a) / (1 + sqrt(a))"),
        # --- log / exp
        _r("log1p-intro", "log(1 + t)", "log1p(t)"),
        _r("log1p-intro-comm", "log(t + 1)", "log1p(t)"),
        _r("log1p-elim", "log1p(t)", "log(1 + t)"),
        _r("log-as-log1p", "log(t)", "log1p(t - 1)"),
        _r("expm1-intro", "exp(t) - 1", "expm1(t)"),
        _r("expm1-elim", "expm1(t)", "exp(t) - 1"),
        _r("exp-of-sum", "exp(a + b)", "exp(a) * exp(b)"),
        _r("exp-product", "exp(a) * exp(b)", "exp(a + b)"),
        _r("exp-of-neg", "exp(-t)", "1 / exp(t)"),
        _r("exp-recip", "1 / exp(t)", "exp(-t)"),
        _r("log-of-product", "log(a * b)", "log(a) + log(b)"),
        _r("log-of-quotient", "log(a / b)", "log(a) - log(b)"),
        _r("sinh-to-exp", "sinh(a)", "(exp(a) - exp(-a)) / 2"),
        _r("cosh-to-exp", "cosh(a)", "(exp(a) + exp(-a)) / 2"),
        _r("tanh-as-ratio", "tanh(a)", "sinh(a) / cosh(a)"),
        # --- fraction renormalizations
        _r("div-renorm", "a / (1 + a)", "1 - 1 / (1 + a)"),
        _r("div-renorm-rev", "1 - 1 / (1 + a)", "a / (1 + a)"),
        # --- fused multiply-add
        _r("fma-intro", "a*b + c", "fma(a, b, c)"),
        _r("fma-intro-right", "c + a*b", "fma(a, b, c)"),
        _r("fma-elim", "fma(a, b, c)", "a*b + c"),
        _r("fma-sub", "a*b - c", "fma(a, b, -c)"),
        # --- guarded low-order series
        _series("log1p-series", "log1p(t)", "t - (t*t)/2"),
        _series("log-one-plus-series", "log(1 + t)", "t - (t*t)/2"),
        _series("expm1-series", "expm1(t)", "t + (t*t)/2"),
        _series("exp-minus-one-series", "exp(t) - 1", "t + (t*t)/2"),
        _series("sin-series", "sin(t)", "t - (t*t*t)/6"),
        _series("cos-series", "cos(t)", "1 - (t*t)/2"),
        _series("sinh-series", "sinh(t)", "t + (t*t*t)/6"),
        _series("tan-series", "tan(t)", "t + (t*t*t)/3"),
        _series("atan-series", "atan(t)", "t - (t*t*t)/3"),
        _series("asin-series", "asin(t)", "t + (t*t*t)/6"),
    ]
    names = [r.name for r in rules]
    if len(names) != len(set(names)):
        raise RuleError("duplicate rule names in catalog")
    return rules


def rule_db() -> list[RewriteRule]:
    """The built-in rule catalog (immutable after first construction)."""
    global _DB, _DB_BY_NAME
    if _DB is None:
        _DB = _build_db()
        _DB_BY_NAME = {r.name: r for r in _DB}
    return list(_DB)


def rule_by_name(name: str) -> Optional[RewriteRule]:
    rule_db()
    assert _DB_BY_NAME is not None
    return _DB_BY_NAME.get(name)


def rule_table() -> str:
    """The catalog as a human-readable markdown table."""
    lines = [
        "| rule | rewrites | into | soundness | guard |",
        "|------|----------|------|-----------|-------|",
    ]
    for r in rule_db():
        lines.append(
            f"| {r.name} | `{E.emit_math(r.lhs)}` | `{E.emit_math(r.rhs)}` "
            f"| {r.tag} | {r.guard or ''} |")
    return "\n".join(lines)
