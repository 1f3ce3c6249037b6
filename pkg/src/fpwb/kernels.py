"""Batch float64 evaluation and ordinal/ulps/bits kernels.

Expressions compile to a register program (one instruction per AST node,
postorder) interpreted over whole sample batches.  Two interchangeable
backends execute the same program semantics: a numba @njit interpreter and a
pure-numpy fallback, selected once at import by the FPWB_DISABLE_NUMBA
environment variable (any non-empty value other than "0" disables the JIT).

Backend equivalence caveat: both produce IEEE binary64 results, but numpy's
vectorized transcendentals and libm's scalar ones can differ by 1 ulp on some
inputs, so cross-backend bit-identity is only guaranteed for the arithmetic
subset (+ - * / neg sqrt fabs comparisons select).  Within one backend,
results are deterministic.

fma is emulated with the Dekker/Knuth double-double product-and-sum in both
backends (Python 3.10 has no math.fma and numpy has no fma ufunc), falling
back to a*b+c when the split would overflow; the emulation is the package's
definition of float64 fma and is identical across backends by construction.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .expr import Expr, MATH_OPS, op_arity

_env = os.environ.get("FPWB_DISABLE_NUMBA", "").strip()
NUMBA_DISABLED = _env not in ("", "0")

try:
    if NUMBA_DISABLED:
        raise ImportError("disabled by FPWB_DISABLE_NUMBA")
    from numba import njit  # type: ignore

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via subprocess in tests
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # no-op decorator fallback
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Opcodes

OP_LOAD_VAR = 0
OP_LOAD_CONST = 1
_MATH_BASE = 2
_OPCODE = {name: _MATH_BASE + i for i, name in enumerate(MATH_OPS)}
_N = _MATH_BASE + len(MATH_OPS)
OP_LT, OP_LE, OP_GT, OP_GE, OP_EQ = _N, _N + 1, _N + 2, _N + 3, _N + 4
OP_AND, OP_OR, OP_SELECT = _N + 5, _N + 6, _N + 7
_CMP_CODE = {"<": OP_LT, "<=": OP_LE, ">": OP_GT, ">=": OP_GE, "==": OP_EQ}

# Individual opcode constants for the numba dispatch chain.
OP_ADD = _OPCODE["+"]
OP_SUB = _OPCODE["-"]
OP_MUL = _OPCODE["*"]
OP_DIV = _OPCODE["/"]
OP_NEG = _OPCODE["neg"]
OP_SQRT = _OPCODE["sqrt"]
OP_CBRT = _OPCODE["cbrt"]
OP_FABS = _OPCODE["fabs"]
OP_EXP = _OPCODE["exp"]
OP_EXPM1 = _OPCODE["expm1"]
OP_LOG = _OPCODE["log"]
OP_LOG1P = _OPCODE["log1p"]
OP_POW = _OPCODE["pow"]
OP_HYPOT = _OPCODE["hypot"]
OP_FMA = _OPCODE["fma"]
OP_SIN = _OPCODE["sin"]
OP_COS = _OPCODE["cos"]
OP_TAN = _OPCODE["tan"]
OP_ASIN = _OPCODE["asin"]
OP_ACOS = _OPCODE["acos"]
OP_ATAN = _OPCODE["atan"]
OP_ATAN2 = _OPCODE["atan2"]
OP_SINH = _OPCODE["sinh"]
OP_COSH = _OPCODE["cosh"]
OP_TANH = _OPCODE["tanh"]
OP_ASINH = _OPCODE["asinh"]
OP_ACOSH = _OPCODE["acosh"]
OP_ATANH = _OPCODE["atanh"]


class Program:
    """Compiled form of an Expr: one instruction per node, postorder, each
    writing its own register (register index == instruction index)."""

    __slots__ = ("ops", "a", "b", "c", "consts", "n_regs", "var_order")

    def __init__(self, ops, a, b, c, consts, var_order):
        self.ops = ops
        self.a = a
        self.b = b
        self.c = c
        self.consts = consts
        self.n_regs = len(ops)
        self.var_order = tuple(var_order)


def _const_value(e: Expr) -> float:
    if e.kind == "const":
        from fractions import Fraction
        try:
            return float(Fraction(e.text))  # correctly rounded to binary64
        except OverflowError:
            # Beyond binary64 range the correctly rounded value is +/-inf
            # (the literal is validated non-negative; signs live on neg
            # nodes), so saturate instead of crashing.
            return math.inf
    if e.text == "PI":
        return math.pi
    if e.text == "E":
        return math.e
    return math.inf  # INFINITY


def compile_program(e: Expr, var_order: list[str] | tuple[str, ...]) -> Program:
    """Flatten an Expr into a register program. var_order fixes the row
    layout of the input matrix."""
    slot = {name: i for i, name in enumerate(var_order)}
    ops: list[int] = []
    aa: list[int] = []
    bb: list[int] = []
    cc: list[int] = []
    consts: list[float] = []

    def emit(o: int, a: int = -1, b: int = -1, c: int = -1) -> int:
        ops.append(o)
        aa.append(a)
        bb.append(b)
        cc.append(c)
        return len(ops) - 1

    def go(n: Expr) -> int:
        if n.kind == "var":
            return emit(OP_LOAD_VAR, slot[n.text])
        if n.kind in ("const", "named"):
            consts.append(_const_value(n))
            return emit(OP_LOAD_CONST, len(consts) - 1)
        if n.kind == "cmp":
            l = go(n.args[0])
            r = go(n.args[1])
            return emit(_CMP_CODE[n.op], l, r)
        if n.kind == "bool":
            code = OP_AND if n.op == "and" else OP_OR
            reg = go(n.args[0])
            for child in n.args[1:]:
                reg = emit(code, reg, go(child))
            return reg
        if n.kind == "if":
            cnd = go(n.args[0])
            thn = go(n.args[1])
            els = go(n.args[2])
            return emit(OP_SELECT, cnd, thn, els)
        regs = [go(child) for child in n.args]
        code = _OPCODE[n.op]
        if len(regs) == 1:
            return emit(code, regs[0])
        if len(regs) == 2:
            return emit(code, regs[0], regs[1])
        return emit(code, regs[0], regs[1], regs[2])

    go(e)
    return Program(
        np.asarray(ops, dtype=np.int32),
        np.asarray(aa, dtype=np.int32),
        np.asarray(bb, dtype=np.int32),
        np.asarray(cc, dtype=np.int32),
        np.asarray(consts, dtype=np.float64),
        var_order,
    )


# ---------------------------------------------------------------------------
# fma emulation (identical in both backends)

_SPLITTER = 134217729.0  # 2^27 + 1
_SPLIT_LIMIT = 6.696928794914171e299  # above this the Dekker split overflows


@njit(cache=True, error_model="numpy", inline="always")
def _fma64(x: float, y: float, z: float) -> float:
    ax = abs(x)
    ay = abs(y)
    if ax > _SPLIT_LIMIT or ay > _SPLIT_LIMIT or not (ax == ax and ay == ay and z == z) \
            or ax == math.inf or ay == math.inf or abs(z) == math.inf:
        return x * y + z
    p = x * y
    if abs(p) == math.inf:
        return p + z
    xs = x * _SPLITTER
    x_hi = xs - (xs - x)
    x_lo = x - x_hi
    ys = y * _SPLITTER
    y_hi = ys - (ys - y)
    y_lo = y - y_hi
    p_err = ((x_hi * y_hi - p) + x_hi * y_lo + x_lo * y_hi) + x_lo * y_lo
    s = p + z
    bb = s - p
    s_err = (p - (s - bb)) + (z - bb)
    return s + (p_err + s_err)


def _fma64_py(x: float, y: float, z: float) -> float:
    # Same algorithm as _fma64, for the numpy backend (vectorized below).
    return _fma64.py_func(x, y, z) if HAVE_NUMBA else _fma64(x, y, z)


def _fma_numpy(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    ay = np.abs(y)
    simple = (ax > _SPLIT_LIMIT) | (ay > _SPLIT_LIMIT) | ~np.isfinite(x) | ~np.isfinite(y) | ~np.isfinite(z)
    p = x * y
    simple |= ~np.isfinite(p)
    xs = x * _SPLITTER
    x_hi = xs - (xs - x)
    x_lo = x - x_hi
    ys = y * _SPLITTER
    y_hi = ys - (ys - y)
    y_lo = y - y_hi
    p_err = ((x_hi * y_hi - p) + x_hi * y_lo + x_lo * y_hi) + x_lo * y_lo
    s = p + z
    bb = s - p
    s_err = (p - (s - bb)) + (z - bb)
    exact = s + (p_err + s_err)
    return np.where(simple, p + z, exact)


# ---------------------------------------------------------------------------
# numba interpreter


@njit(cache=True, error_model="numpy")
def _run_numba(ops, aa, bb, cc, consts, varvals, regs):  # pragma: no cover - jitted
    n_instr = ops.shape[0]
    npts = regs.shape[1]
    for k in range(n_instr):
        o = ops[k]
        a = aa[k]
        b = bb[k]
        c = cc[k]
        if o == OP_LOAD_VAR:
            for i in range(npts):
                regs[k, i] = varvals[a, i]
        elif o == OP_LOAD_CONST:
            v = consts[a]
            for i in range(npts):
                regs[k, i] = v
        elif o == OP_ADD:
            for i in range(npts):
                regs[k, i] = regs[a, i] + regs[b, i]
        elif o == OP_SUB:
            for i in range(npts):
                regs[k, i] = regs[a, i] - regs[b, i]
        elif o == OP_MUL:
            for i in range(npts):
                regs[k, i] = regs[a, i] * regs[b, i]
        elif o == OP_DIV:
            for i in range(npts):
                regs[k, i] = regs[a, i] / regs[b, i]
        elif o == OP_NEG:
            for i in range(npts):
                regs[k, i] = -regs[a, i]
        elif o == OP_SQRT:
            for i in range(npts):
                regs[k, i] = math.sqrt(regs[a, i]) if regs[a, i] >= 0.0 else math.nan
        elif o == OP_CBRT:
            for i in range(npts):
                regs[k, i] = np.cbrt(regs[a, i])
        elif o == OP_FABS:
            for i in range(npts):
                regs[k, i] = abs(regs[a, i])
        elif o == OP_EXP:
            for i in range(npts):
                regs[k, i] = math.exp(regs[a, i])
        elif o == OP_EXPM1:
            for i in range(npts):
                regs[k, i] = math.expm1(regs[a, i])
        elif o == OP_LOG:
            for i in range(npts):
                regs[k, i] = math.log(regs[a, i])
        elif o == OP_LOG1P:
            for i in range(npts):
                regs[k, i] = math.log1p(regs[a, i])
        elif o == OP_POW:
            for i in range(npts):
                regs[k, i] = regs[a, i] ** regs[b, i]
        elif o == OP_HYPOT:
            for i in range(npts):
                regs[k, i] = math.hypot(regs[a, i], regs[b, i])
        elif o == OP_FMA:
            for i in range(npts):
                regs[k, i] = _fma64(regs[a, i], regs[b, i], regs[c, i])
        elif o == OP_SIN:
            for i in range(npts):
                regs[k, i] = math.sin(regs[a, i])
        elif o == OP_COS:
            for i in range(npts):
                regs[k, i] = math.cos(regs[a, i])
        elif o == OP_TAN:
            for i in range(npts):
                regs[k, i] = math.tan(regs[a, i])
        elif o == OP_ASIN:
            for i in range(npts):
                regs[k, i] = math.asin(regs[a, i]) if abs(regs[a, i]) <= 1.0 else math.nan
        elif o == OP_ACOS:
            for i in range(npts):
                regs[k, i] = math.acos(regs[a, i]) if abs(regs[a, i]) <= 1.0 else math.nan
        elif o == OP_ATAN:
            for i in range(npts):
                regs[k, i] = math.atan(regs[a, i])
        elif o == OP_ATAN2:
            for i in range(npts):
                regs[k, i] = math.atan2(regs[a, i], regs[b, i])
        elif o == OP_SINH:
            for i in range(npts):
                regs[k, i] = math.sinh(regs[a, i])
        elif o == OP_COSH:
            for i in range(npts):
                regs[k, i] = math.cosh(regs[a, i])
        elif o == OP_TANH:
            for i in range(npts):
                regs[k, i] = math.tanh(regs[a, i])
        elif o == OP_ASINH:
            for i in range(npts):
                regs[k, i] = math.asinh(regs[a, i])
        elif o == OP_ACOSH:
            for i in range(npts):
                regs[k, i] = math.acosh(regs[a, i]) if regs[a, i] >= 1.0 else math.nan
        elif o == OP_ATANH:
            for i in range(npts):
                x = regs[a, i]
                if x > -1.0 and x < 1.0:
                    regs[k, i] = math.atanh(x)
                elif x == -1.0:
                    regs[k, i] = -math.inf
                elif x == 1.0:
                    regs[k, i] = math.inf
                else:
                    regs[k, i] = math.nan
        elif o == OP_LT:
            for i in range(npts):
                regs[k, i] = 1.0 if regs[a, i] < regs[b, i] else 0.0
        elif o == OP_LE:
            for i in range(npts):
                regs[k, i] = 1.0 if regs[a, i] <= regs[b, i] else 0.0
        elif o == OP_GT:
            for i in range(npts):
                regs[k, i] = 1.0 if regs[a, i] > regs[b, i] else 0.0
        elif o == OP_GE:
            for i in range(npts):
                regs[k, i] = 1.0 if regs[a, i] >= regs[b, i] else 0.0
        elif o == OP_EQ:
            for i in range(npts):
                regs[k, i] = 1.0 if regs[a, i] == regs[b, i] else 0.0
        elif o == OP_AND:
            for i in range(npts):
                regs[k, i] = 1.0 if (regs[a, i] != 0.0 and regs[b, i] != 0.0) else 0.0
        elif o == OP_OR:
            for i in range(npts):
                regs[k, i] = 1.0 if (regs[a, i] != 0.0 or regs[b, i] != 0.0) else 0.0
        elif o == OP_SELECT:
            for i in range(npts):
                regs[k, i] = regs[b, i] if regs[a, i] != 0.0 else regs[c, i]


# Domain-error NaN notes: math.sqrt/asin/acos/acosh/atanh raise under numba's
# numpy error model only for some builds, so the guards above make the NaN
# explicit and keep both backends on the same convention as numpy's ufuncs.


# ---------------------------------------------------------------------------
# numpy interpreter


def _run_numpy(ops, aa, bb, cc, consts, varvals, regs):
    npts = regs.shape[1]
    with np.errstate(all="ignore"):
        for k in range(ops.shape[0]):
            o = int(ops[k])
            a = int(aa[k])
            b = int(bb[k])
            c = int(cc[k])
            if o == OP_LOAD_VAR:
                regs[k] = varvals[a]
            elif o == OP_LOAD_CONST:
                regs[k] = consts[a]
            elif o == OP_ADD:
                np.add(regs[a], regs[b], out=regs[k])
            elif o == OP_SUB:
                np.subtract(regs[a], regs[b], out=regs[k])
            elif o == OP_MUL:
                np.multiply(regs[a], regs[b], out=regs[k])
            elif o == OP_DIV:
                np.divide(regs[a], regs[b], out=regs[k])
            elif o == OP_NEG:
                np.negative(regs[a], out=regs[k])
            elif o == OP_SQRT:
                np.sqrt(regs[a], out=regs[k])
            elif o == OP_CBRT:
                np.cbrt(regs[a], out=regs[k])
            elif o == OP_FABS:
                np.abs(regs[a], out=regs[k])
            elif o == OP_EXP:
                np.exp(regs[a], out=regs[k])
            elif o == OP_EXPM1:
                np.expm1(regs[a], out=regs[k])
            elif o == OP_LOG:
                np.log(regs[a], out=regs[k])
            elif o == OP_LOG1P:
                np.log1p(regs[a], out=regs[k])
            elif o == OP_POW:
                np.power(regs[a], regs[b], out=regs[k])
            elif o == OP_HYPOT:
                np.hypot(regs[a], regs[b], out=regs[k])
            elif o == OP_FMA:
                regs[k] = _fma_numpy(regs[a], regs[b], regs[c])
            elif o == OP_SIN:
                np.sin(regs[a], out=regs[k])
            elif o == OP_COS:
                np.cos(regs[a], out=regs[k])
            elif o == OP_TAN:
                np.tan(regs[a], out=regs[k])
            elif o == OP_ASIN:
                np.arcsin(regs[a], out=regs[k])
            elif o == OP_ACOS:
                np.arccos(regs[a], out=regs[k])
            elif o == OP_ATAN:
                np.arctan(regs[a], out=regs[k])
            elif o == OP_ATAN2:
                np.arctan2(regs[a], regs[b], out=regs[k])
            elif o == OP_SINH:
                np.sinh(regs[a], out=regs[k])
            elif o == OP_COSH:
                np.cosh(regs[a], out=regs[k])
            elif o == OP_TANH:
                np.tanh(regs[a], out=regs[k])
            elif o == OP_ASINH:
                np.arcsinh(regs[a], out=regs[k])
            elif o == OP_ACOSH:
                np.arccosh(regs[a], out=regs[k])
            elif o == OP_ATANH:
                np.arctanh(regs[a], out=regs[k])
            elif o == OP_LT:
                regs[k] = (regs[a] < regs[b]).astype(np.float64)
            elif o == OP_LE:
                regs[k] = (regs[a] <= regs[b]).astype(np.float64)
            elif o == OP_GT:
                regs[k] = (regs[a] > regs[b]).astype(np.float64)
            elif o == OP_GE:
                regs[k] = (regs[a] >= regs[b]).astype(np.float64)
            elif o == OP_EQ:
                regs[k] = (regs[a] == regs[b]).astype(np.float64)
            elif o == OP_AND:
                regs[k] = ((regs[a] != 0.0) & (regs[b] != 0.0)).astype(np.float64)
            elif o == OP_OR:
                regs[k] = ((regs[a] != 0.0) | (regs[b] != 0.0)).astype(np.float64)
            elif o == OP_SELECT:
                regs[k] = np.where(regs[a] != 0.0, regs[b], regs[c])
            _ = npts
    return regs


def eval_program(prog: Program, varvals: np.ndarray) -> np.ndarray:
    """Run a compiled program over a (n_vars, n_points) float64 matrix and
    return the root's row (a fresh (n_points,) array)."""
    varvals = np.ascontiguousarray(varvals, dtype=np.float64)
    if varvals.ndim != 2:
        raise ValueError("varvals must be 2-D (n_vars, n_points)")
    npts = varvals.shape[1]
    regs = np.empty((prog.n_regs, npts), dtype=np.float64)
    if HAVE_NUMBA:
        _run_numba(prog.ops, prog.a, prog.b, prog.c, prog.consts, varvals, regs)
    else:
        _run_numpy(prog.ops, prog.a, prog.b, prog.c, prog.consts, varvals, regs)
    return regs[-1].copy()


_APPLY_CACHE: dict[str, Program] = {}


def apply_op_float64(opname: str, args: list[np.ndarray]) -> np.ndarray:
    """Apply one math operator elementwise through the same interpreter used
    for whole programs (keeps local-error float ops and full evaluations on
    one code path)."""
    prog = _APPLY_CACHE.get(opname)
    if prog is None:
        from . import expr as E
        names = [f"a{i}" for i in range(op_arity(opname))]
        prog = compile_program(E.op(opname, *[E.var(n) for n in names]), names)
        _APPLY_CACHE[opname] = prog
    mat = np.vstack([np.asarray(a, dtype=np.float64) for a in args])
    return eval_program(prog, mat)


# ---------------------------------------------------------------------------
# Ordinal / ulps / bits kernels

_ABS_MASK_I64 = np.int64(0x7FFFFFFFFFFFFFFF)


def to_ordinal_batch(x: np.ndarray) -> np.ndarray:
    """Vectorized signed ordinals; NaNs map to INT64_MIN sentinels (callers
    mask NaN separately)."""
    b = np.asarray(x, dtype=np.float64).view(np.int64)
    return np.where(b < 0, -(b & _ABS_MASK_I64), b)


def ulps_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized ulps distance as uint64 (exact: the widest possible gap,
    ord(+inf)-ord(-inf), still fits in 64 bits). NaN rules applied."""
    oa = to_ordinal_batch(a)
    ob = to_ordinal_batch(b)
    hi = np.maximum(oa, ob).astype(np.uint64)
    lo = np.minimum(oa, ob).astype(np.uint64)
    d = hi - lo  # exact modular arithmetic: true difference is in [0, 2^64)
    a_nan = np.isnan(np.asarray(a, dtype=np.float64))
    b_nan = np.isnan(np.asarray(b, dtype=np.float64))
    d = np.where(a_nan & b_nan, np.uint64(0), d)
    # One-sided NaN is 2^64, which does not fit uint64; bits_batch special-
    # cases it, and here it saturates to the max representable distance.
    d = np.where(a_nan ^ b_nan, np.uint64(0xFFFFFFFFFFFFFFFF), d)
    return d


def bits_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized bits(a, b) = log2(1 + ulps) clamped to [0, 64], with the
    one-sided-NaN case pinned to exactly 64."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    u = ulps_batch(a, b).astype(np.float64)
    out = np.log2(1.0 + u)
    np.minimum(out, 64.0, out=out)
    one_nan = np.isnan(a) ^ np.isnan(b)
    out = np.where(one_nan, 64.0, out)
    return out


def warmup() -> None:
    """Trigger JIT compilation of the interpreter so timed paths never pay
    for it. No-op beyond the first call (numba caches to disk too)."""
    from . import expr as E
    e = E.if_(E.cmp("<", E.var("x"), E.const("1")),
              E.op("fma", E.var("x"), E.var("x"), E.const("1")),
              E.op("hypot", E.var("x"), E.op("sqrt", E.var("x"))))
    prog = compile_program(e, ["x"])
    pts = np.array([[0.5, 2.0]])
    eval_program(prog, pts)
    bits_batch(np.array([1.0]), np.array([1.5]))
