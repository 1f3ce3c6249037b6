"""Certified evaluation of the exact real-number semantics of expressions.

Every expression node is evaluated as an enclosure ``[lo, hi]`` of its true
real value, computed with outward directed rounding (MPFR round-down for the
lower endpoint, round-up for the upper) at a working precision drawn from an
escalating ladder.  A result is reported only once both enclosure endpoints
round to the *same* binary64 value, which certifies the correctly rounded
result regardless of how ill-conditioned the expression is.  When the
enclosure instead proves the point lies outside an operator's domain the
point is reported invalid, and when the ladder is exhausted without a
certificate the point is reported unsamplable.

Values are extended reals: an exact pole such as ``log(0)`` evaluates to a
definite signed infinity, as does a true value beyond the binary64 range.
Domain choices for edge cases (``0/0``, ``pow(0, 0)``, ``atan2(0, 0)``, ...)
are documented on the individual interval routines below.

The evaluator is deliberately conservative: whenever an enclosure cannot
exclude a domain boundary, a pole, or an undefined form such as ``0 * inf``
it declines to answer at the current precision and escalates instead of
guessing.  Points that stay undecidable at the highest precision are
surfaced as unsamplable rather than silently mis-evaluated.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr, mpq

from .expr import Expr
from .kernels import compile_program, eval_program
from .ordinals import bits as _bits_fn
from .ordinals import float_to_bits

__all__ = [
    "PRECISION_LADDER",
    "ExactValue",
    "InvalidPointError",
    "UnsamplablePointError",
    "eval_exact",
    "eval_exact_batch",
    "eval_float64",
    "eval_float64_batch",
    "error_at",
    "record_exact_tree",
    "counters_snapshot",
    "reset_counters",
]

#: Working precisions tried in order until the enclosure certifies.
PRECISION_LADDER = (80, 160, 320, 640, 1280, 2560, 5120, 10240, 16384)

_EMIN = gmpy2.get_emin_min()
_EMAX = gmpy2.get_emax_max()

# Rounds any mpfr to binary64, including gradual underflow and the IEEE
# round-to-nearest overflow rule.
_B64 = gmpy2.context(precision=53, emin=-1073, emax=1024,
                     subnormalize=True, round=gmpy2.RoundToNearest)


def _round64(v: mpfr) -> float:
    return float(_B64.plus(v))


_CTX_CACHE: dict[int, tuple[gmpy2.context, gmpy2.context]] = {}


def _contexts(prec: int) -> tuple[gmpy2.context, gmpy2.context]:
    got = _CTX_CACHE.get(prec)
    if got is None:
        cd = gmpy2.context(precision=prec, round=gmpy2.RoundDown,
                           emin=_EMIN, emax=_EMAX)
        cu = gmpy2.context(precision=prec, round=gmpy2.RoundUp,
                           emin=_EMIN, emax=_EMAX)
        got = _CTX_CACHE[prec] = (cd, cu)
    return got


# ---------------------------------------------------------------------------
# Evaluation counters (observability; exercised by the caching tests).

_COUNTER_LOCK = threading.Lock()
_COUNTERS = {"exact_point_evals": 0, "escalations": 0, "float_batch_evals": 0}


def _bump(name: str, amount: int = 1) -> None:
    with _COUNTER_LOCK:
        _COUNTERS[name] += amount


def counters_snapshot() -> dict[str, int]:
    with _COUNTER_LOCK:
        return dict(_COUNTERS)


def reset_counters() -> None:
    with _COUNTER_LOCK:
        for k in _COUNTERS:
            _COUNTERS[k] = 0


# ---------------------------------------------------------------------------
# Result values


class InvalidPointError(ValueError):
    """The expression has no defined value at the point (domain error)."""


class UnsamplablePointError(ValueError):
    """The value could not be certified at the highest working precision."""


class ExactValue:
    """Certified exact value of an expression at a point.

    kind is one of:
      - "finite":      true value rounds to the carried finite binary64
      - "pinf"/"ninf": true value is +/- infinity or beyond binary64 range
      - "invalid":     domain error, no defined value
      - "unsamplable": undecidable within the precision ladder
    """

    __slots__ = ("kind", "value")

    def __init__(self, kind: str, value: float):
        self.kind = kind
        self.value = value

    @staticmethod
    def finite(value: float) -> "ExactValue":
        return ExactValue("finite", value)

    @property
    def is_number(self) -> bool:
        return self.kind in ("finite", "pinf", "ninf")

    @property
    def float64(self) -> float:
        """Correctly rounded binary64 (infinite for pinf/ninf)."""
        if not self.is_number:
            raise ValueError(f"no numeric value for kind {self.kind!r}")
        return self.value

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExactValue):
            return NotImplemented
        if self.kind != other.kind:
            return False
        if self.kind != "finite":
            return True
        return float_to_bits(self.value) == float_to_bits(other.value)

    def __hash__(self) -> int:
        return hash((self.kind, float_to_bits(self.value) if self.kind == "finite" else 0))

    def __repr__(self) -> str:
        if self.kind == "finite":
            return f"ExactValue({self.value!r})"
        return f"ExactValue<{self.kind}>"


PINF = ExactValue("pinf", math.inf)
NINF = ExactValue("ninf", -math.inf)
INVALID_VALUE = ExactValue("invalid", math.nan)
UNSAMPLABLE_VALUE = ExactValue("unsamplable", math.nan)


# ---------------------------------------------------------------------------
# Interval evaluator at one precision
#
# Node results are tagged tuples:
#   ("ival", lo, hi)  enclosure of a value node (lo <= hi, never NaN)
#   ("bool", b)       certain condition truth
#   _UNKNOWN          condition truth undecided at this precision
#   _INVALID          certainly a domain error
#   _INDET            undecidable at this precision; escalate

_INVALID = ("invalid",)
_INDET = ("indet",)
_UNKNOWN = ("unknown",)


def _isnan(x) -> bool:
    return gmpy2.is_nan(x)


def _floor_int(x: mpfr) -> int:
    # int(mpfr) truncates toward zero exactly; gmpy2.floor would round its
    # result in the (53-bit) default context and lose low-order digits of
    # huge quotients.
    t = int(x)
    return t if (x >= 0 or x == t) else t - 1


def _ceil_int(x: mpfr) -> int:
    t = int(x)
    return t if (x <= 0 or x == t) else t + 1


class _Enclosure:
    """One evaluation pass over the tree at a fixed working precision."""

    __slots__ = ("prec", "cd", "cu", "env", "record")

    def __init__(self, prec: int, env: dict[str, mpfr], record=None):
        self.prec = prec
        self.cd, self.cu = _contexts(prec)
        self.env = env
        self.record = record

    # -- helpers ----------------------------------------------------------

    def _ival(self, lo, hi):
        if _isnan(lo) or _isnan(hi):
            return _INDET
        if lo > hi:  # defensive: a rounding-direction bug would land here
            lo, hi = hi, lo
        return ("ival", lo, hi)

    def _const_interval(self, text: str):
        key = (text, self.prec)
        got = _CONST_CACHE.get(key)
        if got is None:
            fr = Fraction(text)
            q = mpq(fr.numerator, fr.denominator)
            with gmpy2.context(precision=self.prec, round=gmpy2.RoundDown,
                               emin=_EMIN, emax=_EMAX):
                lo = mpfr(q)
            with gmpy2.context(precision=self.prec, round=gmpy2.RoundUp,
                               emin=_EMIN, emax=_EMAX):
                hi = mpfr(q)
            got = _CONST_CACHE[key] = (lo, hi)
        return ("ival", got[0], got[1])

    # -- tree walk ---------------------------------------------------------

    def eval(self, e: Expr, path: tuple[int, ...] = ()):
        kind = e.kind
        if kind == "var":
            x = self.env[e.text]
            out = ("ival", x, x)
        elif kind == "const":
            out = self._const_interval(e.text)
        elif kind == "named":
            if e.text == "PI":
                out = ("ival", self.cd.const_pi(), self.cu.const_pi())
            elif e.text == "E":
                out = ("ival", self.cd.exp(mpfr(1)), self.cu.exp(mpfr(1)))
            else:  # INFINITY
                inf = mpfr("inf")
                out = ("ival", inf, inf)
        elif kind == "op":
            kids = [self.eval(a, path + (i,)) for i, a in enumerate(e.args)]
            out = self._combine(e.op, kids)
        elif kind == "cmp":
            left = self.eval(e.args[0], path + (0,))
            right = self.eval(e.args[1], path + (1,))
            out = self._compare(e.op, left, right)
        elif kind == "bool":
            kids = [self.eval(a, path + (i,)) for i, a in enumerate(e.args)]
            out = self._kleene(e.op, kids)
        else:  # if
            out = self._if(e, path)
        if self.record is not None:
            self.record[path] = out
        return out

    def _combine(self, op: str, kids):
        for k in kids:
            if k is _INVALID:
                return _INVALID
        for k in kids:
            if k is _INDET:
                return _INDET
        ivals = [(k[1], k[2]) for k in kids]
        return _OP_TABLE[op](self, *ivals)

    def _compare(self, op: str, left, right):
        if left is _INVALID or right is _INVALID:
            return _INVALID
        if left is _INDET or right is _INDET:
            return _INDET
        a, b = left[1], left[2]
        c, d = right[1], right[2]
        if op == "<":
            if b < c:
                return ("bool", True)
            if a >= d:
                return ("bool", False)
        elif op == "<=":
            if b <= c:
                return ("bool", True)
            if a > d:
                return ("bool", False)
        elif op == ">":
            if a > d:
                return ("bool", True)
            if b <= c:
                return ("bool", False)
        elif op == ">=":
            if a >= d:
                return ("bool", True)
            if b < c:
                return ("bool", False)
        else:  # ==
            if a == b and c == d and a == c:
                return ("bool", True)
            if b < c or d < a:
                return ("bool", False)
        return _UNKNOWN

    def _kleene(self, op: str, kids):
        for k in kids:
            if k is _INVALID:
                return _INVALID
        for k in kids:
            if k is _INDET:
                return _INDET
        truths = [k[1] if isinstance(k, tuple) and k[0] == "bool" else None
                  for k in kids]
        if op == "and":
            if any(t is False for t in truths):
                return ("bool", False)
            if all(t is True for t in truths):
                return ("bool", True)
        else:
            if any(t is True for t in truths):
                return ("bool", True)
            if all(t is False for t in truths):
                return ("bool", False)
        return _UNKNOWN

    def _if(self, e: Expr, path):
        cond = self.eval(e.args[0], path + (0,))
        if self.record is not None:
            # Recording mode evaluates both branches so every node of the
            # tree gets an entry, mirroring per-node error attribution.
            then = self.eval(e.args[1], path + (1,))
            orelse = self.eval(e.args[2], path + (2,))
            if cond is _INVALID:
                return _INVALID
            if cond is _INDET:
                return _INDET
            if cond is not _UNKNOWN:
                return then if cond[1] else orelse
            return self._hull(then, orelse)
        if cond is _INVALID:
            return _INVALID
        if cond is _INDET:
            return _INDET
        if cond is not _UNKNOWN:
            # Certain branch: the untaken side is never evaluated, so a
            # guarded expression may be partial outside its guard.
            taken = e.args[1] if cond[1] else e.args[2]
            return self.eval(taken, path + (1 if cond[1] else 2,))
        then = self.eval(e.args[1], path + (1,))
        orelse = self.eval(e.args[2], path + (2,))
        return self._hull(then, orelse)

    @staticmethod
    def _hull(then, orelse):
        # Condition truth unknown: the true value is in one of the branches,
        # so their union is a sound enclosure; it certifies only when both
        # branches round identically.  A problematic branch forces
        # escalation because the branch taken cannot be ruled out.
        if then is _INVALID or orelse is _INVALID:
            return _INDET
        if then is _INDET or orelse is _INDET:
            return _INDET
        return ("ival", min(then[1], orelse[1]), max(then[2], orelse[2]))

    # -- interval operator library -----------------------------------------

    def _op_neg(self, a):
        return self._ival(-a[1], -a[0])

    def _op_add(self, a, b):
        return self._ival(self.cd.add(a[0], b[0]), self.cu.add(a[1], b[1]))

    def _op_sub(self, a, b):
        return self._ival(self.cd.sub(a[0], b[1]), self.cu.sub(a[1], b[0]))

    def _op_mul(self, a, b):
        lo = None
        hi = None
        for x in a:
            for y in b:
                d = self.cd.mul(x, y)
                u = self.cu.mul(x, y)
                if _isnan(d) or _isnan(u):
                    # 0 * inf corner: a product of an exact zero with an
                    # overflowed or genuinely infinite factor cannot be
                    # decided; escalate.
                    return _INDET
                lo = d if lo is None or d < lo else lo
                hi = u if hi is None or u > hi else hi
        return self._ival(lo, hi)

    def _op_div(self, a, b):
        blo, bhi = b
        if blo <= 0 <= bhi:
            if blo == 0 and bhi == 0:
                # Certain division by exact zero: a pole (x/0) or the
                # undefined form 0/0 -- invalid either way.
                return _INVALID
            return _INDET
        lo = None
        hi = None
        for x in a:
            for y in b:
                d = self.cd.div(x, y)
                u = self.cu.div(x, y)
                if _isnan(d) or _isnan(u):  # inf/inf corner
                    return _INDET
                lo = d if lo is None or d < lo else lo
                hi = u if hi is None or u > hi else hi
        return self._ival(lo, hi)

    def _corners(self, fn_name: str, a, b):
        """Extrema over box corners, for per-coordinate monotone operators."""
        fd = getattr(self.cd, fn_name)
        fu = getattr(self.cu, fn_name)
        lo = None
        hi = None
        for x in a:
            for y in b:
                d = fd(x, y)
                u = fu(x, y)
                if _isnan(d) or _isnan(u):
                    return _INDET
                lo = d if lo is None or d < lo else lo
                hi = u if hi is None or u > hi else hi
        return self._ival(lo, hi)

    @staticmethod
    def _excludes_integers(lo, hi) -> bool:
        """True when [lo, hi] certainly contains no integer."""
        if not (gmpy2.is_finite(lo) and gmpy2.is_finite(hi)):
            return False
        fl = _floor_int(lo)
        return fl == _floor_int(hi) and lo != fl

    def _op_pow(self, a, b):
        alo, ahi = a
        blo, bhi = b
        exp_point_int = (blo == bhi and gmpy2.is_finite(blo)
                         and blo.is_integer())
        if alo > 0:
            # Strictly positive base: monotone in each coordinate, so the
            # extrema sit on box corners.
            return self._corners("pow", a, b)
        if ahi < 0:
            if exp_point_int:
                cands_d = [self.cd.pow(alo, blo), self.cd.pow(ahi, blo)]
                cands_u = [self.cu.pow(alo, blo), self.cu.pow(ahi, blo)]
                if any(_isnan(v) for v in cands_d + cands_u):
                    return _INDET
                return self._ival(min(cands_d), max(cands_u))
            if self._excludes_integers(blo, bhi):
                # Negative base with a certainly non-integer exponent has
                # no real value.
                return _INVALID
            return _INDET
        if alo == 0 and ahi == 0:
            # Base is exactly zero.
            if blo == 0 and bhi == 0:
                one = mpfr(1)
                return ("ival", one, one)  # 0^0 = 1
            if blo > 0:
                zero = mpfr(0)
                return ("ival", zero, zero)
            if bhi < 0:
                if exp_point_int:
                    if int(blo) % 2 == 1:
                        # 0^(negative odd): one-sided limits disagree in
                        # sign, so no definite pole value exists.
                        return _INVALID
                    inf = mpfr("inf")
                    return ("ival", inf, inf)
                if self._excludes_integers(blo, bhi):
                    inf = mpfr("inf")
                    return ("ival", inf, inf)  # 0^(negative non-integer)
                return _INDET
            return _INDET  # exponent straddles zero
        # Base interval touches or straddles zero without being exactly it.
        if exp_point_int:
            n = int(blo)
            if n == 0:
                one = mpfr(1)
                return ("ival", one, one)
            if n > 0:
                cands_d = [self.cd.pow(alo, blo), self.cd.pow(ahi, blo), mpfr(0)]
                cands_u = [self.cu.pow(alo, blo), self.cu.pow(ahi, blo), mpfr(0)]
                if any(_isnan(v) for v in cands_d + cands_u):
                    return _INDET
                return self._ival(min(cands_d), max(cands_u))
            return _INDET  # negative exponent with a possible zero base
        if alo == 0 and blo > 0:
            # Non-negative base, certainly positive exponent: corners are
            # sound because pow is continuous there with pow(0, e) = 0.
            return self._corners("pow", a, b)
        return _INDET

    def _mono_inc(self, fn_name: str, a):
        fd = getattr(self.cd, fn_name)
        fu = getattr(self.cu, fn_name)
        return self._ival(fd(a[0]), fu(a[1]))

    def _op_sqrt(self, a):
        if a[1] < 0:
            return _INVALID
        if a[0] < 0:
            return _INDET
        return self._mono_inc("sqrt", a)

    def _op_log(self, a):
        if a[1] < 0:
            return _INVALID
        if a[0] < 0:
            return _INDET
        # log(exact 0) is the definite pole -inf; MPFR returns it directly.
        return self._mono_inc("log", a)

    def _op_log1p(self, a):
        if a[1] < -1:
            return _INVALID
        if a[0] < -1:
            return _INDET
        return self._mono_inc("log1p", a)

    def _op_acosh(self, a):
        if a[1] < 1:
            return _INVALID
        if a[0] < 1:
            return _INDET
        return self._mono_inc("acosh", a)

    def _op_asin(self, a):
        if a[1] < -1 or a[0] > 1:
            return _INVALID
        if a[0] < -1 or a[1] > 1:
            return _INDET
        return self._mono_inc("asin", a)

    def _op_acos(self, a):
        if a[1] < -1 or a[0] > 1:
            return _INVALID
        if a[0] < -1 or a[1] > 1:
            return _INDET
        return self._ival(self.cd.acos(a[1]), self.cu.acos(a[0]))

    def _op_atanh(self, a):
        if a[1] < -1 or a[0] > 1:
            return _INVALID
        if a[0] < -1 or a[1] > 1:
            return _INDET
        # atanh(+-1) is a definite signed pole.
        return self._mono_inc("atanh", a)

    def _op_fabs(self, a):
        alo, ahi = a
        if alo >= 0:
            return ("ival", alo, ahi)
        if ahi <= 0:
            return ("ival", -ahi, -alo)
        return ("ival", mpfr(0), max(-alo, ahi))

    def _op_cosh(self, a):
        alo, ahi = a
        if alo >= 0:
            return self._mono_inc("cosh", a)
        if ahi <= 0:
            return self._ival(self.cd.cosh(ahi), self.cu.cosh(alo))
        hi = max(self.cu.cosh(alo), self.cu.cosh(ahi))
        return self._ival(mpfr(1), hi)

    def _half_pi_multiples(self, alo, ahi):
        """Integer m with m*(pi/2) possibly inside [alo, ahi], or None if
        the interval is too wide to enumerate them."""
        hp_d = self.cd.div(self.cd.const_pi(), mpfr(2))
        hp_u = self.cu.div(self.cu.const_pi(), mpfr(2))
        q_lo = self.cd.div(alo, hp_u if alo >= 0 else hp_d)
        q_hi = self.cu.div(ahi, hp_d if ahi >= 0 else hp_u)
        m_min = _floor_int(q_lo)
        m_max = _ceil_int(q_hi)
        if m_max - m_min > 7:
            return None
        out = []
        for m in range(m_min, m_max + 1):
            # m enters the products as an exact integer: converting it to
            # mpfr first would round it once |m| exceeds 2^prec.
            prods = (self.cd.mul(m, hp_d), self.cd.mul(m, hp_u),
                     self.cu.mul(m, hp_d), self.cu.mul(m, hp_u))
            if not (max(prods) < alo or min(prods) > ahi):
                out.append(m)
        return out

    def _sin_cos(self, fn_name: str, a):
        alo, ahi = a
        if not (gmpy2.is_finite(alo) and gmpy2.is_finite(ahi)):
            if alo == ahi:
                return _INVALID  # sin/cos of a definite infinity
            return _INDET
        width = self.cu.sub(ahi, alo)
        if width > 8:  # more than a full period: the whole range is hit
            return self._ival(mpfr(-1), mpfr(1))
        ms = self._half_pi_multiples(alo, ahi)
        if ms is None:
            return self._ival(mpfr(-1), mpfr(1))
        # Extrema of sin sit at odd multiples of pi/2, of cos at even ones.
        at_max = at_min = False
        for m in ms:
            r = m % 4
            if fn_name == "sin":
                if r == 1:
                    at_max = True
                elif r == 3:
                    at_min = True
            else:
                if r == 0:
                    at_max = True
                elif r == 2:
                    at_min = True
        fd = getattr(self.cd, fn_name)
        fu = getattr(self.cu, fn_name)
        lo = mpfr(-1) if at_min else min(fd(alo), fd(ahi))
        hi = mpfr(1) if at_max else max(fu(alo), fu(ahi))
        return self._ival(lo, hi)

    def _op_sin(self, a):
        return self._sin_cos("sin", a)

    def _op_cos(self, a):
        return self._sin_cos("cos", a)

    def _op_tan(self, a):
        alo, ahi = a
        if not (gmpy2.is_finite(alo) and gmpy2.is_finite(ahi)):
            if alo == ahi:
                return _INVALID
            return _INDET
        width = self.cu.sub(ahi, alo)
        if width > 8:
            return _INDET  # spans poles for sure
        ms = self._half_pi_multiples(alo, ahi)
        if ms is None:
            return _INDET
        if any(m % 2 == 1 for m in ms):
            return _INDET  # a pole may lie inside; escalate until excluded
        return self._mono_inc("tan", a)

    def _op_atan2(self, y, x):
        ylo, yhi = y
        xlo, xhi = x
        if ylo == 0 and yhi == 0 and xlo == 0 and xhi == 0:
            return _INVALID  # atan2(0, 0) has no defined direction
        if ylo <= 0 <= yhi and xlo <= 0 <= xhi:
            # The origin cannot be excluded; refuse to guess.
            return _INDET
        if ylo >= 0 or yhi <= 0:
            # One closed half-plane minus the origin: extrema on corners.
            return self._corners("atan2", y, x)
        if xlo > 0:
            return self._corners("atan2", y, x)
        # y straddles zero with x certainly negative: the branch cut lies
        # inside, so only the trivial bound holds.
        pi_u = self.cu.const_pi()
        return self._ival(-pi_u, pi_u)

    def _op_hypot(self, a, b):
        fa = self._op_fabs(a)
        fb = self._op_fabs(b)
        return self._ival(self.cd.hypot(fa[1], fb[1]),
                          self.cu.hypot(fa[2], fb[2]))

    def _op_fma(self, a, b, c):
        prod = self._op_mul(a, b)
        if prod is _INDET or prod is _INVALID:
            return prod
        return self._op_add((prod[1], prod[2]), c)


_CONST_CACHE: dict[tuple[str, int], tuple[mpfr, mpfr]] = {}

_OP_TABLE = {
    "neg": _Enclosure._op_neg,
    "+": _Enclosure._op_add,
    "-": _Enclosure._op_sub,
    "*": _Enclosure._op_mul,
    "/": _Enclosure._op_div,
    "pow": _Enclosure._op_pow,
    "sqrt": _Enclosure._op_sqrt,
    "cbrt": lambda self, a: self._mono_inc("cbrt", a),
    "fabs": _Enclosure._op_fabs,
    "exp": lambda self, a: self._mono_inc("exp", a),
    "expm1": lambda self, a: self._mono_inc("expm1", a),
    "log": _Enclosure._op_log,
    "log1p": _Enclosure._op_log1p,
    "sin": _Enclosure._op_sin,
    "cos": _Enclosure._op_cos,
    "tan": _Enclosure._op_tan,
    "asin": _Enclosure._op_asin,
    "acos": _Enclosure._op_acos,
    "atan": lambda self, a: self._mono_inc("atan", a),
    "sinh": lambda self, a: self._mono_inc("sinh", a),
    "cosh": _Enclosure._op_cosh,
    "tanh": lambda self, a: self._mono_inc("tanh", a),
    "asinh": lambda self, a: self._mono_inc("asinh", a),
    "acosh": _Enclosure._op_acosh,
    "atanh": _Enclosure._op_atanh,
    "hypot": _Enclosure._op_hypot,
    "atan2": _Enclosure._op_atan2,
    "fma": _Enclosure._op_fma,
}


# ---------------------------------------------------------------------------
# Certification across the ladder


def _certify(lo: mpfr, hi: mpfr) -> ExactValue | None:
    """ExactValue when both endpoints round to one binary64, else None."""
    f_lo = _round64(lo)
    f_hi = _round64(hi)
    if f_lo != f_hi or f_lo != f_lo:
        return None
    if float_to_bits(f_lo) != float_to_bits(f_hi):
        f = 0.0  # enclosure [-0.0, +0.0]: both zeros, sign undetermined
    else:
        f = f_lo
    if f == math.inf:
        return PINF
    if f == -math.inf:
        return NINF
    return ExactValue.finite(f)


def _env_for(point: dict[str, float]) -> dict[str, mpfr]:
    return {name: mpfr(v) for name, v in point.items()}


def eval_exact(e: Expr, point: dict[str, float]) -> ExactValue:
    """Certified exact value of e at a binary64 point (see module doc)."""
    _bump("exact_point_evals")
    env = _env_for(point)
    for i, prec in enumerate(PRECISION_LADDER):
        if i:
            _bump("escalations")
        out = _Enclosure(prec, env).eval(e)
        if out is _INVALID:
            return INVALID_VALUE
        if out is _INDET or out is _UNKNOWN:
            continue
        got = _certify(out[1], out[2])
        if got is not None:
            return got
    return UNSAMPLABLE_VALUE


def eval_exact_batch(e: Expr, var_order: list[str], points) -> list[ExactValue]:
    """eval_exact over columns of a (n_vars, n_points) float64 matrix."""
    n = points.shape[1] if points.ndim == 2 else 0
    out = []
    for j in range(n):
        point = {name: float(points[i, j]) for i, name in enumerate(var_order)}
        out.append(eval_exact(e, point))
    return out


def record_exact_tree(e: Expr, point: dict[str, float]) -> dict[tuple[int, ...], object]:
    """Certified values for every node of the tree at one point.

    Returns a map from preorder path to either an ExactValue (value nodes)
    or a bool (comparison and and/or nodes).  Both branches of every
    if-expression are evaluated so each node gets an entry.  Nodes that
    stay undecided at the top precision are reported as unsamplable
    (values) or None (conditions).
    """
    _bump("exact_point_evals")
    env = _env_for(point)
    record: dict[tuple[int, ...], object] = {}
    for i, prec in enumerate(PRECISION_LADDER):
        if i:
            _bump("escalations")
        record.clear()
        _Enclosure(prec, env, record=record).eval(e)
        resolved: dict[tuple[int, ...], object] = {}
        done = True
        for path, tag in record.items():
            if tag is _INVALID:
                resolved[path] = INVALID_VALUE
            elif tag is _INDET:
                resolved[path] = UNSAMPLABLE_VALUE
                done = False
            elif tag is _UNKNOWN:
                resolved[path] = None
                done = False
            elif tag[0] == "bool":
                resolved[path] = tag[1]
            else:
                got = _certify(tag[1], tag[2])
                if got is None:
                    resolved[path] = UNSAMPLABLE_VALUE
                    done = False
                else:
                    resolved[path] = got
        if done:
            return resolved
    return resolved


# ---------------------------------------------------------------------------
# binary64 semantics and pointwise error


def eval_float64_batch(e: Expr, var_order: list[str], points) -> "object":
    """Plain binary64 evaluation over columns of a (n_vars, n) matrix."""
    _bump("float_batch_evals")
    prog = compile_program(e, var_order)
    return eval_program(prog, points)


def eval_float64(e: Expr, point: dict[str, float]) -> float:
    import numpy as np

    names = sorted(point)
    mat = np.array([[point[n]] for n in names], dtype=np.float64)
    if not names:
        mat = np.empty((0, 1), dtype=np.float64)
    return float(eval_float64_batch(e, names, mat)[0])


def error_at(e: Expr, point: dict[str, float]) -> float:
    """Rounding error, in bits, of the binary64 evaluation of e at the
    point, measured against e's own certified exact value.

    Raises InvalidPointError / UnsamplablePointError when the exact value
    does not exist or cannot be certified.
    """
    exact = eval_exact(e, point)
    if exact.kind == "invalid":
        raise InvalidPointError(f"no defined value at {point!r}")
    if exact.kind == "unsamplable":
        raise UnsamplablePointError(f"value not certifiable at {point!r}")
    return _bits_fn(exact.float64, eval_float64(e, point))
