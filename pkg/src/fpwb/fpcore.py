"""FPCore-subset reader and writer.

Supported: a single (FPCore (vars...) props... body) form whose body uses the
package operator table, if-expressions, comparisons, and/or, numeric literals
(decimal, scientific, or p/q rational), and the PI/E/INFINITY constants.
Variable ranges come from a :pre precondition built from and-ed comparisons
of a variable against a literal; missing bounds default to the full binary64
range.  Sample size and seed round-trip through the :fpwb-points and
:fpwb-seed properties (foreign FPCore tools ignore unknown properties).

Anything outside the subset (while/let/tensor/cast/!/digits, n-ary
comparisons, non-literal bounds) raises UnsupportedConstructError.
"""

from __future__ import annotations

import math
from fractions import Fraction

from . import expr as E

# FPCore spells some operators differently from nothing: the table is 1:1
# except unary minus, which FPCore writes as (- x).
_FPCORE_TO_OP = {name: name for name in E.MATH_OPS}
_EXCLUDED = ("while", "while*", "let", "let*", "for", "for*", "tensor", "tensor*",
             "cast", "array", "dim", "size", "ref", "!", "digits")


class FPCoreError(ValueError):
    """Malformed FPCore input."""


class UnsupportedConstructError(FPCoreError):
    """Valid FPCore, but outside the supported subset."""

    def __init__(self, construct: str):
        self.construct = construct
        super().__init__(f"FPCore construct {construct!r} is outside the supported subset")


# ---------------------------------------------------------------------------
# S-expression reader


def _tokenize(text: str) -> list[str]:
    toks: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            toks.append(c)
            i += 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            if j >= n:
                raise FPCoreError("unterminated string literal")
            toks.append(text[i:j + 1])
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in ' \t\r\n();"':
                j += 1
            toks.append(text[i:j])
            i = j
    return toks


def _read(toks: list[str], i: int):
    if i >= len(toks):
        raise FPCoreError("unexpected end of input")
    t = toks[i]
    if t == "(":
        items = []
        i += 1
        while i < len(toks) and toks[i] != ")":
            item, i = _read(toks, i)
            items.append(item)
        if i >= len(toks):
            raise FPCoreError("missing ')'")
        return items, i + 1
    if t == ")":
        raise FPCoreError("unexpected ')'")
    return t, i + 1


def _is_number(tok: str) -> bool:
    try:
        Fraction(tok)
        return True
    except (ValueError, ZeroDivisionError):
        return False


# ---------------------------------------------------------------------------
# Body conversion


def _body_to_expr(form) -> E.Expr:
    if isinstance(form, str):
        if form.startswith('"'):
            raise UnsupportedConstructError("string in value position")
        if _is_number(form):
            if form.startswith("-"):
                return E.neg(E.const(form[1:]))
            if form.startswith("+"):
                return E.const(form[1:])
            return E.const(form)
        if form in E.NAMED_CONSTS:
            return E.named(form)
        if form in ("TRUE", "FALSE", "NAN"):
            raise UnsupportedConstructError(form)
        return E.var(form)
    if not form:
        raise FPCoreError("empty form in body")
    head = form[0]
    if not isinstance(head, str):
        raise FPCoreError("operator position must hold a symbol")
    args = form[1:]
    if head in _EXCLUDED:
        raise UnsupportedConstructError(head)
    if head == "if":
        if len(args) != 3:
            raise FPCoreError("if takes 3 arguments")
        cond = _cond_to_expr(args[0])
        return E.if_(cond, _body_to_expr(args[1]), _body_to_expr(args[2]))
    if head in E.BOOL_OPS or head in E.CMP_OPS:
        raise FPCoreError(f"{head} is only allowed inside an if-condition")
    if head == "-" and len(args) == 1:
        return E.neg(_body_to_expr(args[0]))
    if head in ("+", "*") and len(args) > 2:
        # Left-fold FPCore n-ary arithmetic into binary nodes.
        acc = _body_to_expr(args[0])
        for a in args[1:]:
            acc = E.op(head, acc, _body_to_expr(a))
        return acc
    if head in _FPCORE_TO_OP:
        want = E.op_arity(head)
        if len(args) != want:
            raise FPCoreError(f"{head} takes {want} argument(s), got {len(args)}")
        return E.op(head, *[_body_to_expr(a) for a in args])
    raise UnsupportedConstructError(head)


def _cond_to_expr(form) -> E.Expr:
    if isinstance(form, str):
        raise FPCoreError("if-condition must be a comparison")
    head = form[0] if form else None
    if head in E.BOOL_OPS:
        parts = [_cond_to_expr(a) for a in form[1:]]
        if len(parts) == 1:
            return parts[0]
        return E.bool_op(head, *parts)
    if head in E.CMP_OPS:
        if len(form) != 3:
            raise UnsupportedConstructError(f"n-ary comparison {head}")
        return E.cmp(head, _body_to_expr(form[1]), _body_to_expr(form[2]))
    raise UnsupportedConstructError(str(head))


# ---------------------------------------------------------------------------
# Precondition -> ranges


def _literal_value(form) -> float | None:
    if isinstance(form, str) and _is_number(form):
        try:
            return float(Fraction(form))
        except OverflowError:
            return math.inf  # literals are unsigned here; "-" wraps below
    if isinstance(form, list) and len(form) == 2 and form[0] == "-":
        v = _literal_value(form[1])
        return None if v is None else -v
    return None


def _collect_bounds(form, bounds: dict[str, list[float]], var_names: set[str]) -> None:
    if not isinstance(form, list) or not form:
        raise UnsupportedConstructError("non-comparison precondition")
    head = form[0]
    if head == "and":
        for sub in form[1:]:
            _collect_bounds(sub, bounds, var_names)
        return
    if head in ("<", "<=", ">", ">="):
        if len(form) != 3:
            raise UnsupportedConstructError(f"n-ary comparison {head}")
        a, b = form[1], form[2]
        if head in (">", ">="):
            a, b = b, a  # normalize to a <= b
        av, bv = _literal_value(a), _literal_value(b)
        if av is not None and isinstance(b, str) and b in var_names:
            bounds.setdefault(b, [-E.MAX_DOUBLE, E.MAX_DOUBLE])[0] = av
            return
        if bv is not None and isinstance(a, str) and a in var_names:
            bounds.setdefault(a, [-E.MAX_DOUBLE, E.MAX_DOUBLE])[1] = bv
            return
        raise UnsupportedConstructError("precondition comparison not of the form var vs literal")
    raise UnsupportedConstructError(f"precondition operator {head}")


# ---------------------------------------------------------------------------
# Public API


def parse_fpcore(text: str) -> E.Spec:
    """Parse a single FPCore form into a Spec.

    Ranges default to the full binary64 range where the precondition leaves
    a bound open; sample size defaults to 256 and seed to 42 unless the
    :fpwb-points / :fpwb-seed properties say otherwise.
    """
    toks = _tokenize(text)
    if not toks:
        raise FPCoreError("empty input")
    form, end = _read(toks, 0)
    if end != len(toks):
        raise FPCoreError("trailing content after the FPCore form")
    if not isinstance(form, list) or not form or form[0] != "FPCore":
        raise FPCoreError("input is not an (FPCore ...) form")
    rest = form[1:]
    if rest and isinstance(rest[0], str):
        rest = rest[1:]  # optional symbolic name before the argument list
    if not rest or not isinstance(rest[0], list):
        raise FPCoreError("FPCore argument list missing")
    arg_list = rest[0]
    for a in arg_list:
        if not isinstance(a, str) or _is_number(a):
            raise UnsupportedConstructError("non-symbol argument (dimensions/annotations)")
    var_names = list(arg_list)
    rest = rest[1:]

    props: dict[str, object] = {}
    while len(rest) >= 2 and isinstance(rest[0], str) and rest[0].startswith(":"):
        props[rest[0]] = rest[1]
        rest = rest[2:]
    if len(rest) != 1:
        raise FPCoreError("FPCore form must end with exactly one body expression")

    body = _body_to_expr(rest[0])
    fv = E.free_vars(body)
    if not fv <= set(var_names):
        raise FPCoreError(f"body uses unbound variable(s) {sorted(fv - set(var_names))}")

    bounds: dict[str, list[float]] = {}
    if ":pre" in props:
        _collect_bounds(props[":pre"], bounds, set(var_names))

    variables = []
    for name in var_names:
        if name not in fv:
            continue  # range entries are only kept for variables the body uses
        lo, hi = bounds.get(name, [-E.MAX_DOUBLE, E.MAX_DOUBLE])
        variables.append((name, lo, hi))

    n = 256
    seed = 42
    if ":fpwb-points" in props:
        try:
            n = int(str(props[":fpwb-points"]))
        except ValueError as exc:
            raise FPCoreError("bad :fpwb-points value") from exc
    if ":fpwb-seed" in props:
        try:
            seed = int(str(props[":fpwb-seed"]))
        except ValueError as exc:
            raise FPCoreError("bad :fpwb-seed value") from exc
    return E.Spec(body, variables, sample_size=n, seed=seed)


def _expr_to_form(e: E.Expr) -> str:
    if e.kind == "var":
        return e.text
    if e.kind == "const":
        return e.text
    if e.kind == "named":
        return e.text
    if e.kind == "if":
        c, t, o = e.args
        return f"(if {_expr_to_form(c)} {_expr_to_form(t)} {_expr_to_form(o)})"
    if e.kind in ("cmp", "bool"):
        inner = " ".join(_expr_to_form(a) for a in e.args)
        return f"({e.op} {inner})"
    if e.op == "neg":
        return f"(- {_expr_to_form(e.args[0])})"
    inner = " ".join(_expr_to_form(a) for a in e.args)
    return f"({e.op} {inner})"


def _float_literal(x: float) -> str:
    # repr round-trips binary64 exactly through Fraction -> float.
    return repr(x)


def emit_fpcore(e: E.Expr, s: E.Spec) -> str:
    """Emit a Spec as FPCore; parse_fpcore(emit_fpcore(e, s)) reproduces
    (e, s) exactly. e must be s.expression (kept as an argument so the
    signature mirrors the rest of the emitters)."""
    if e != s.expression:
        raise FPCoreError("expression does not match the spec")
    names = [n for n, _, _ in s.variables]
    clauses = []
    for name, lo, hi in s.variables:
        clauses.append(f"(<= {_float_literal(lo)} {name})")
        clauses.append(f"(<= {name} {_float_literal(hi)})")
    parts = [f"(FPCore ({' '.join(names)})"]
    if clauses:
        pre = clauses[0] if len(clauses) == 1 else "(and " + " ".join(clauses) + ")"
        parts.append(f" :pre {pre}")
    parts.append(f" :fpwb-points {s.sample_size}")
    parts.append(f" :fpwb-seed {s.seed}")
    parts.append(f" {_expr_to_form(e)})")
    return "".join(parts)
