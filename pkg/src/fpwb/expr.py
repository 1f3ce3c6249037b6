"""Expression AST and problem specs.

Expr is an immutable tree over variables, exact constants, named constants,
math operators, comparisons, and/or conjunctions, and if-branches.  Constants
are stored exactly as written (decimal or rational literal text) and are only
converted to a binary value per evaluation precision, never pre-rounded.

Structural equality and hashing are precomputed at construction so beam
search can dedupe candidates cheaply.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction
from typing import Iterator

# Operator tables. Arity is enforced at construction.
UNARY_OPS = (
    "neg", "sqrt", "cbrt", "fabs", "exp", "expm1", "log", "log1p",
    "sin", "cos", "tan", "asin", "acos", "atan",
    "sinh", "cosh", "tanh", "asinh", "acosh", "atanh",
)
BINARY_OPS = ("+", "-", "*", "/", "pow", "hypot", "atan2")
TERNARY_OPS = ("fma",)
MATH_OPS = UNARY_OPS + BINARY_OPS + TERNARY_OPS

#: Function-call spellings accepted by the parser (infix ops excluded).
CALLABLE_OPS = tuple(op for op in MATH_OPS if op not in ("+", "-", "*", "/", "neg")) + ("pow",)

CMP_OPS = ("<", "<=", ">", ">=", "==")
BOOL_OPS = ("and", "or")

NAMED_CONSTS = ("PI", "E", "INFINITY")

MAX_DOUBLE = 1.7976931348623157e308

_ARITY = {op: 1 for op in UNARY_OPS}
_ARITY.update({op: 2 for op in BINARY_OPS})
_ARITY.update({op: 3 for op in TERNARY_OPS})


def op_arity(op: str) -> int:
    return _ARITY[op]


class ExprError(ValueError):
    """Malformed expression construction or use."""


class Expr:
    """One AST node. kind is one of var|const|named|op|cmp|bool|if.

    op holds the operator/comparator symbol for op/cmp/bool kinds; text holds
    the variable name, constant literal, or named-constant name; args holds
    child Expr nodes (for "if": condition, then, else).
    """

    __slots__ = ("kind", "op", "args", "text", "_hash", "_size")

    def __init__(self, kind: str, op: str | None = None,
                 args: tuple["Expr", ...] = (), text: str | None = None):
        self.kind = kind
        self.op = op
        self.args = args
        self.text = text
        h = hash((kind, op, text, tuple(a._hash for a in args)))
        self._hash = h
        self._size = 1 + sum(a._size for a in args)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        if self._hash != other._hash:
            return False
        return (self.kind == other.kind and self.op == other.op
                and self.text == other.text and self.args == other.args)

    def __repr__(self) -> str:
        return f"Expr[{emit_math(self)}]"

    @property
    def size(self) -> int:
        """Node count, used for beam tie-breaking."""
        return self._size

    def is_value(self) -> bool:
        """True for nodes that evaluate to a number (not a condition)."""
        return self.kind in ("var", "const", "named", "op", "if")


# ---------------------------------------------------------------------------
# Constructors


def var(name: str) -> Expr:
    if not name or not name[0].isalpha() and name[0] != "_":
        raise ExprError(f"bad variable name {name!r}")
    return Expr("var", text=name)


def const(text) -> Expr:
    """Exact numeric literal. Accepts int, Fraction, or literal text
    (decimal, scientific, or p/q rational)."""
    if isinstance(text, int):
        text = str(text)
    elif isinstance(text, Fraction):
        text = f"{text.numerator}/{text.denominator}" if text.denominator != 1 else str(text.numerator)
    try:
        Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ExprError(f"bad numeric literal {text!r}") from exc
    if text.startswith("-"):
        # Signs live on neg nodes so rules see a single constant shape.
        return neg(const(text[1:]))
    return Expr("const", text=text)


def const_from_float(x: float) -> Expr:
    """Const node carrying the exact value of a finite float64.

    Every finite binary64 is a dyadic rational and therefore has a finite
    decimal expansion; the text is that expansion in scientific form with
    trailing zeros stripped, so the node survives parse(emit(.)) verbatim
    (a p/q spelling would re-parse as a division node instead).  Digit
    handling is manual because Decimal.normalize() rounds at the ambient
    context precision.
    """
    if x != x or x in (float("inf"), float("-inf")):
        raise ExprError(f"no exact literal for {x!r}")
    if x == 0.0:
        return Expr("const", text="0")
    from decimal import Decimal

    sign, digits, exp = Decimal(x).as_tuple()  # exact conversion
    while len(digits) > 1 and digits[-1] == 0:
        digits = digits[:-1]
        exp += 1
    mant = str(digits[0])
    if len(digits) > 1:
        mant += "." + "".join(str(d) for d in digits[1:])
    e10 = exp + len(digits) - 1
    text = mant if e10 == 0 else f"{mant}e{e10}"
    node = const(text) if sign == 0 else neg(const(text))
    return node


def named(name: str) -> Expr:
    if name not in NAMED_CONSTS:
        raise ExprError(f"unknown named constant {name!r}")
    return Expr("named", text=name)


def op(name: str, *args: Expr) -> Expr:
    if name not in _ARITY:
        raise ExprError(f"unknown operator {name!r}")
    if len(args) != _ARITY[name]:
        raise ExprError(f"operator {name!r} takes {_ARITY[name]} argument(s), got {len(args)}")
    for a in args:
        if not a.is_value():
            raise ExprError(f"operator {name!r} applied to a non-value expression")
    return Expr("op", op=name, args=tuple(args))


def neg(a: Expr) -> Expr:
    return op("neg", a)


def cmp(sym: str, left: Expr, right: Expr) -> Expr:
    if sym not in CMP_OPS:
        raise ExprError(f"unknown comparator {sym!r}")
    if not (left.is_value() and right.is_value()):
        raise ExprError("comparison over non-value expressions")
    return Expr("cmp", op=sym, args=(left, right))


def bool_op(sym: str, *args: Expr) -> Expr:
    if sym not in BOOL_OPS:
        raise ExprError(f"unknown boolean operator {sym!r}")
    if len(args) < 2:
        raise ExprError(f"{sym!r} needs at least two operands")
    for a in args:
        if a.kind not in ("cmp", "bool"):
            raise ExprError("if-conditions may only combine comparisons")
    return Expr("bool", op=sym, args=tuple(args))


def if_(cond: Expr, then: Expr, orelse: Expr) -> Expr:
    if cond.kind not in ("cmp", "bool"):
        raise ExprError("if-condition must be a comparison or and/or of comparisons")
    if not (then.is_value() and orelse.is_value()):
        raise ExprError("if-branches must be value expressions")
    return Expr("if", args=(cond, then, orelse))


# ---------------------------------------------------------------------------
# Structure


def free_vars(e: Expr) -> set[str]:
    if e.kind == "var":
        return {e.text}
    out: set[str] = set()
    for a in e.args:
        out |= free_vars(a)
    return out


def const_fraction(e: Expr) -> Fraction:
    """Exact rational value of a const node."""
    if e.kind != "const":
        raise ExprError("not a constant")
    return Fraction(e.text)


def walk(e: Expr, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Expr]]:
    """Preorder traversal yielding (path, node)."""
    yield path, e
    for i, a in enumerate(e.args):
        yield from walk(a, path + (i,))


def get_at(e: Expr, path: tuple[int, ...]) -> Expr:
    for i in path:
        e = e.args[i]
    return e


def replace_at(e: Expr, path: tuple[int, ...], new: Expr) -> Expr:
    if not path:
        return new
    i = path[0]
    child = replace_at(e.args[i], path[1:], new)
    args = e.args[:i] + (child,) + e.args[i + 1:]
    return Expr(e.kind, op=e.op, args=args, text=e.text)


# ---------------------------------------------------------------------------
# Display

# Precedence levels for emit/parse agreement. Higher binds tighter.
_PREC_OR = 4
_PREC_AND = 5
_PREC_CMP = 10
_PREC_ADD = 20
_PREC_MUL = 30
_PREC_POW = 40
_PREC_NEG = 50
_PREC_ATOM = 60


def _emit(e: Expr) -> tuple[str, int]:
    """Returns (text, precedence of the outermost construct)."""
    if e.kind == "var":
        return e.text, _PREC_ATOM
    if e.kind == "const":
        return e.text, _PREC_ATOM
    if e.kind == "named":
        return e.text, _PREC_ATOM
    if e.kind == "if":
        c, _ = _emit(e.args[0])
        t = _emit_branch(e.args[1])
        o = _emit_branch(e.args[2])
        return f"if {c} then {t} else {o}", 1
    if e.kind == "bool":
        prec = _PREC_AND if e.op == "and" else _PREC_OR
        parts = [_paren(a, prec, strict=False) for a in e.args]
        return f" {e.op} ".join(parts), prec
    if e.kind == "cmp":
        l = _paren(e.args[0], _PREC_CMP, strict=False)
        r = _paren(e.args[1], _PREC_CMP, strict=False)
        return f"{l} {e.op} {r}", _PREC_CMP
    if e.op == "neg":
        body = _paren(e.args[0], _PREC_NEG, strict=True)
        return f"-{body}", _PREC_NEG
    if e.op in ("+", "-"):
        l = _paren(e.args[0], _PREC_ADD, strict=False)
        r = _paren(e.args[1], _PREC_ADD, strict=True)
        return f"{l} {e.op} {r}", _PREC_ADD
    if e.op in ("*", "/"):
        l = _paren(e.args[0], _PREC_MUL, strict=False)
        r = _paren(e.args[1], _PREC_MUL, strict=True)
        return f"{l} {e.op} {r}", _PREC_MUL
    if e.op == "pow":
        # Right-associative: left operand needs parens at equal precedence.
        l = _paren(e.args[0], _PREC_POW, strict=True)
        r = _paren(e.args[1], _PREC_POW, strict=False)
        return f"{l} ^ {r}", _PREC_POW
    # Remaining operators use call syntax.
    inner = ", ".join(_emit(a)[0] for a in e.args)
    return f"{e.op}({inner})", _PREC_ATOM


def _emit_branch(e: Expr) -> str:
    text, prec = _emit(e)
    if e.kind == "if":
        return f"({text})"
    return text


def _paren(e: Expr, parent_prec: int, strict: bool) -> str:
    text, prec = _emit(e)
    if prec < parent_prec or (strict and prec == parent_prec):
        return f"({text})"
    return text


def emit_math(e: Expr) -> str:
    """Natural math syntax; parse_math(emit_math(e)) == e."""
    return _emit(e)[0]


_LATEX_FUNCS = {
    "sqrt": lambda a: f"\\sqrt{{{a[0]}}}",
    "cbrt": lambda a: f"\\sqrt[3]{{{a[0]}}}",
    "fabs": lambda a: f"\\left|{a[0]}\\right|",
    "exp": lambda a: f"e^{{{a[0]}}}",
    "pow": lambda a: None,  # handled inline
}

_LATEX_NAMES = {"PI": "\\pi", "E": "e", "INFINITY": "\\infty"}
_LATEX_CMP = {"<": "<", "<=": "\\le", ">": ">", ">=": "\\ge", "==": "="}


def _emit_latex(e: Expr) -> tuple[str, int]:
    if e.kind == "var":
        return e.text, _PREC_ATOM
    if e.kind == "const":
        return e.text, _PREC_ATOM
    if e.kind == "named":
        return _LATEX_NAMES[e.text], _PREC_ATOM
    if e.kind == "if":
        c, _ = _emit_latex(e.args[0])
        t, _ = _emit_latex(e.args[1])
        o, _ = _emit_latex(e.args[2])
        return (f"\\begin{{cases}} {t} & \\text{{if }} {c} \\\\ {o} & \\text{{otherwise}} \\end{{cases}}", 1)
    if e.kind == "bool":
        sym = "\\land" if e.op == "and" else "\\lor"
        prec = _PREC_AND if e.op == "and" else _PREC_OR
        return f" {sym} ".join(_latex_paren(a, prec) for a in e.args), prec
    if e.kind == "cmp":
        l, _ = _emit_latex(e.args[0])
        r, _ = _emit_latex(e.args[1])
        return f"{l} {_LATEX_CMP[e.op]} {r}", _PREC_CMP
    if e.op == "neg":
        return f"-{_latex_paren(e.args[0], _PREC_NEG, strict=True)}", _PREC_NEG
    if e.op in ("+", "-"):
        l = _latex_paren(e.args[0], _PREC_ADD)
        r = _latex_paren(e.args[1], _PREC_ADD, strict=True)
        return f"{l} {e.op} {r}", _PREC_ADD
    if e.op == "*":
        l = _latex_paren(e.args[0], _PREC_MUL)
        r = _latex_paren(e.args[1], _PREC_MUL, strict=True)
        return f"{l} \\cdot {r}", _PREC_MUL
    if e.op == "/":
        l, _ = _emit_latex(e.args[0])
        r, _ = _emit_latex(e.args[1])
        return f"\\frac{{{l}}}{{{r}}}", _PREC_ATOM
    if e.op == "pow":
        l = _latex_paren(e.args[0], _PREC_POW, strict=True)
        r, _ = _emit_latex(e.args[1])
        return f"{l}^{{{r}}}", _PREC_POW
    if e.op in _LATEX_FUNCS and _LATEX_FUNCS[e.op](["x"] * len(e.args)) is not None:
        parts = [_emit_latex(a)[0] for a in e.args]
        return _LATEX_FUNCS[e.op](parts), _PREC_ATOM
    parts = ", ".join(_emit_latex(a)[0] for a in e.args)
    return f"\\mathrm{{{e.op}}}\\left({parts}\\right)", _PREC_ATOM


def _latex_paren(e: Expr, parent_prec: int, strict: bool = False) -> str:
    text, prec = _emit_latex(e)
    if prec < parent_prec or (strict and prec == parent_prec):
        return f"\\left({text}\\right)"
    return text


def emit_latex(e: Expr) -> str:
    """LaTeX rendering of the expression (plain string)."""
    return _emit_latex(e)[0]


# ---------------------------------------------------------------------------
# Spec


class SpecError(ValueError):
    """Malformed problem spec."""


class Spec:
    """Problem statement: target expression plus per-variable input ranges,
    sample size, and seed. Identity (all four) is a stable cache key."""

    __slots__ = ("expression", "variables", "sample_size", "seed", "_key")

    def __init__(self, expression: Expr, variables: list[tuple[str, float, float]],
                 sample_size: int = 256, seed: int = 42):
        fv = free_vars(expression)
        names = [v[0] for v in variables]
        if len(set(names)) != len(names):
            raise SpecError("duplicate variable range")
        if set(names) != fv:
            missing = fv - set(names)
            extra = set(names) - fv
            detail = []
            if missing:
                detail.append(f"missing ranges for {sorted(missing)}")
            if extra:
                detail.append(f"ranges for unused {sorted(extra)}")
            raise SpecError("; ".join(detail))
        for name, lo, hi in variables:
            if not (isinstance(lo, float) and isinstance(hi, float)):
                raise SpecError(f"range bounds for {name} must be binary64")
            if lo != lo or hi != hi:
                raise SpecError(f"NaN bound for {name}")
            if abs(lo) > MAX_DOUBLE or abs(hi) > MAX_DOUBLE:
                raise SpecError(f"range for {name} exceeds the binary64 range")
            if not lo < hi:
                raise SpecError(f"range for {name} needs lo < hi")
        if not (isinstance(sample_size, int) and sample_size > 0):
            raise SpecError("sample size must be a positive integer")
        if not isinstance(seed, int):
            raise SpecError("seed must be an integer")
        self.expression = expression
        self.variables = [(n, float(lo), float(hi)) for n, lo, hi in variables]
        self.sample_size = sample_size
        self.seed = seed & 0xFFFF_FFFF_FFFF_FFFF
        self._key = self._compute_key()

    def _compute_key(self) -> str:
        import struct as _struct
        h = hashlib.sha256()
        h.update(emit_math(self.expression).encode())
        for name, lo, hi in self.variables:
            h.update(b"\0" + name.encode())
            h.update(_struct.pack("<dd", lo, hi))
        h.update(_struct.pack("<qQ", self.sample_size, self.seed))
        return h.hexdigest()

    @property
    def key(self) -> str:
        """Stable content hash: expression + ranges + size + seed."""
        return self._key

    def with_ranges(self, variables: list[tuple[str, float, float]]) -> "Spec":
        return Spec(self.expression, variables, self.sample_size, self.seed)

    def range_of(self, name: str) -> tuple[float, float]:
        for n, lo, hi in self.variables:
            if n == name:
                return lo, hi
        raise SpecError(f"no range for {name}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Spec):
            return NotImplemented
        return self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        rngs = ", ".join(f"{n} in [{lo!r}, {hi!r}]" for n, lo, hi in self.variables)
        return f"Spec[{emit_math(self.expression)}; {rngs}; n={self.sample_size}; seed={self.seed}]"
