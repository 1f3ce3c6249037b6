"""Natural math-syntax parser.

Grammar (EBNF, loosest binding first):

    input     := expr EOF
    expr      := ifexpr | orchain
    ifexpr    := "if" cond "then" expr "else" expr
    cond      := orchain                      -- must be a comparison/and/or
    orchain   := andchain ("or" andchain)*
    andchain  := cmp ("and" cmp)*
    cmp       := sum (("<"|"<="|">"|">="|"==") sum)?
    sum       := product (("+"|"-") product)*
    product   := unary (("*"|"/") unary)*
    unary     := "-" unary | power
    power     := atom ("^" power)?            -- right-associative
    atom      := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Unary minus binds tighter than "^", so -x^2 parses as (-x)^2.  Comparisons
and and/or are only legal inside an if-condition; the parser accepts them
structurally and rejects them by position, so error messages can say what
was wrong.  NUMBER literals keep their exact text.
"""

from __future__ import annotations

import re

from . import expr as E

KEYWORDS = ("if", "then", "else", "and", "or")

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|==|[<>+\-*/^(),])
""", re.VERBOSE)


class ParseError(ValueError):
    """Syntax or arity error with a byte offset and expected-token set."""

    def __init__(self, message: str, text: str, pos: int, expected: tuple[str, ...] = ()):
        self.message = message
        self.offset = len(text[:pos].encode("utf-8"))
        self.expected = tuple(expected)
        detail = f"{message} at byte {self.offset}"
        if expected:
            detail += " (expected " + ", ".join(expected) + ")"
        super().__init__(detail)


class UnknownFunctionError(ParseError):
    """Call to a name outside the supported operator table."""

    def __init__(self, name: str, text: str, pos: int):
        table = ", ".join(sorted(set(E.CALLABLE_OPS)))
        super().__init__(f"unknown function {name!r}; supported: {table}", text, pos)
        self.function = name


class _Tok:
    __slots__ = ("kind", "value", "pos")

    def __init__(self, kind: str, value: str, pos: int):
        self.kind = kind
        self.value = value
        self.pos = pos


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos,
                             ("number", "identifier", "operator"))
        if m.lastgroup != "ws":
            value = m.group()
            if m.lastgroup == "num":
                kind = "num"
            elif m.lastgroup == "name":
                kind = value if value in KEYWORDS else "name"
            else:
                kind = value
            toks.append(_Tok(kind, value, pos))
        pos = m.end()
    toks.append(_Tok("eof", "", n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str) -> _Tok:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"unexpected {t.value!r}" if t.kind != "eof" else "unexpected end of input",
                             self.text, t.pos, (kind,))
        return self.next()

    # -- grammar -----------------------------------------------------------

    def parse_input(self) -> E.Expr:
        e = self.parse_expr()
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(f"unexpected {t.value!r} after expression", self.text, t.pos,
                             ("end of input", "operator"))
        if not e.is_value():
            raise ParseError("comparison is only allowed inside an if-condition",
                             self.text, 0, ("value expression",))
        return e

    def parse_expr(self) -> E.Expr:
        if self.peek().kind == "if":
            return self.parse_if()
        return self.parse_orchain()

    def parse_if(self) -> E.Expr:
        self.expect("if")
        cond_tok = self.peek()
        cond = self.parse_orchain()
        if cond.kind not in ("cmp", "bool"):
            raise ParseError("if-condition must be a comparison or and/or of comparisons",
                             self.text, cond_tok.pos, ("comparison",))
        self.expect("then")
        then = self.parse_expr()
        if not then.is_value():
            raise ParseError("then-branch must be a value expression", self.text, cond_tok.pos)
        self.expect("else")
        orelse = self.parse_expr()
        if not orelse.is_value():
            raise ParseError("else-branch must be a value expression", self.text, cond_tok.pos)
        return E.if_(cond, then, orelse)

    def parse_orchain(self) -> E.Expr:
        parts = [self.parse_andchain()]
        positions = []
        while self.peek().kind == "or":
            positions.append(self.peek().pos)
            self.next()
            parts.append(self.parse_andchain())
        if len(parts) == 1:
            return parts[0]
        self._require_conditions(parts, positions[0])
        return E.bool_op("or", *parts)

    def parse_andchain(self) -> E.Expr:
        parts = [self.parse_cmp()]
        positions = []
        while self.peek().kind == "and":
            positions.append(self.peek().pos)
            self.next()
            parts.append(self.parse_cmp())
        if len(parts) == 1:
            return parts[0]
        self._require_conditions(parts, positions[0])
        return E.bool_op("and", *parts)

    def _require_conditions(self, parts: list[E.Expr], pos: int) -> None:
        for p in parts:
            if p.kind not in ("cmp", "bool"):
                raise ParseError("and/or operands must be comparisons", self.text, pos,
                                 ("comparison",))

    def parse_cmp(self) -> E.Expr:
        left = self.parse_sum()
        t = self.peek()
        if t.kind in E.CMP_OPS:
            if not left.is_value():
                raise ParseError("left side of comparison must be a value", self.text, t.pos)
            self.next()
            right = self.parse_sum()
            if not right.is_value():
                raise ParseError("right side of comparison must be a value", self.text, t.pos)
            nxt = self.peek()
            if nxt.kind in E.CMP_OPS:
                raise ParseError("chained comparisons are not supported", self.text, nxt.pos,
                                 ("and", "or", "then", "end of input"))
            return E.cmp(t.kind, left, right)
        return left

    def parse_sum(self) -> E.Expr:
        left = self.parse_product()
        while self.peek().kind in ("+", "-"):
            t = self.next()
            right = self.parse_product()
            left = self._mk_op(t, t.kind, left, right)
        return left

    def parse_product(self) -> E.Expr:
        left = self.parse_power()
        while self.peek().kind in ("*", "/"):
            t = self.next()
            right = self.parse_power()
            left = self._mk_op(t, t.kind, left, right)
        return left

    def parse_power(self) -> E.Expr:
        # Unary minus binds tighter than "^": -x^2 is (-x)^2.
        base = self.parse_base()
        if self.peek().kind == "^":
            t = self.next()
            exponent = self.parse_power()  # right-associative; handles 2 ^ -3
            return self._mk_op(t, "pow", base, exponent)
        return base

    def parse_base(self) -> E.Expr:
        if self.peek().kind == "-":
            t = self.next()
            body = self.parse_base()
            return self._mk_op(t, "neg", body)
        return self.parse_atom()

    def parse_atom(self) -> E.Expr:
        t = self.peek()
        if t.kind == "num":
            self.next()
            return E.const(t.value)
        if t.kind == "name":
            self.next()
            if self.peek().kind == "(":
                return self.parse_call(t)
            if t.value in E.NAMED_CONSTS:
                return E.named(t.value)
            return E.var(t.value)
        if t.kind == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if t.kind == "if":
            return self.parse_if()
        raise ParseError(f"unexpected {t.value!r}" if t.kind != "eof" else "unexpected end of input",
                         self.text, t.pos, ("number", "identifier", "'('", "'-'", "'if'"))

    def parse_call(self, name_tok: _Tok) -> E.Expr:
        name = name_tok.value
        if name not in E.CALLABLE_OPS:
            raise UnknownFunctionError(name, self.text, name_tok.pos)
        self.expect("(")
        args: list[E.Expr] = []
        if self.peek().kind != ")":
            args.append(self.parse_expr())
            while self.peek().kind == ",":
                self.next()
                args.append(self.parse_expr())
        self.expect(")")
        want = E.op_arity(name)
        if len(args) != want:
            raise ParseError(f"{name} takes {want} argument(s), got {len(args)}",
                             self.text, name_tok.pos)
        for a in args:
            if not a.is_value():
                raise ParseError(f"argument of {name} must be a value expression",
                                 self.text, name_tok.pos)
        return E.op(name, *args)

    def _mk_op(self, tok: _Tok, name: str, *args: E.Expr) -> E.Expr:
        for a in args:
            if not a.is_value():
                raise ParseError("comparison is only allowed inside an if-condition",
                                 self.text, tok.pos, ("value expression",))
        return E.op(name, *args)


def parse_math(text: str) -> E.Expr:
    """Parse natural math syntax into an Expr.

    Raises ParseError (with byte offset and expected-token set) on syntax
    errors, UnknownFunctionError for calls outside the operator table.
    """
    if not isinstance(text, str):
        raise ParseError("input must be a string", "", 0)
    return _Parser(text).parse_input()
