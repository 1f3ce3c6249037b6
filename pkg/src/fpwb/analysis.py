"""Rounding-error measurement over samples, whole-expression and per-node.

The error of an expression at a point is the distance, in bits, between its
plain binary64 evaluation and its own certified exact value rounded to
binary64: ``bits(a, b) = log2(1 + ulps(a, b))``, where ulps counts the
representable doubles strictly between a and b (ordinal distance).  0 bits
means correctly rounded; 64 bits is the scale's ceiling and is also assigned
when the point has no usable exact value (domain error or uncertifiable) or
when exactly one side is NaN.

Per-node ("local") error isolates the contribution of a single operator: the
node is re-evaluated in binary64 on its *exactly computed* child values
rounded to binary64, and compared against the node's own exact value.  A
node with small local error merely inherits whatever damage its children
did; a node with large local error is where digits are actually lost.
Condition nodes get a 0-or-64 slot error: 0 when binary64 evaluation picks
the same truth value as the exact semantics, 64 when it flips.
"""

from __future__ import annotations

import threading

import numpy as np

from . import oracle
from .expr import Expr, Spec, emit_math, walk
from .kernels import apply_op_float64
from .ordinals import MAX_BITS, bits as bits_of, float_to_bits
from .sampler import Sample

__all__ = [
    "ErrorReport",
    "LocalNodeReport",
    "analyze",
    "local_error_at",
    "local_error_aggregate",
    "counters_snapshot",
    "reset_counters",
]

_COUNTER_LOCK = threading.Lock()
_COUNTERS = {"reports_built": 0, "local_trees_built": 0}


def counters_snapshot() -> dict[str, int]:
    with _COUNTER_LOCK:
        return dict(_COUNTERS)


def reset_counters() -> None:
    with _COUNTER_LOCK:
        for k in _COUNTERS:
            _COUNTERS[k] = 0


def _bump(name: str) -> None:
    with _COUNTER_LOCK:
        _COUNTERS[name] += 1


class ErrorReport:
    """Pointwise, average, and worst-case error of one expression over a
    sample, measured against that expression's own exact semantics."""

    __slots__ = ("expression", "spec_key", "errors", "avg_bits", "max_bits",
                 "n_points", "n_invalid", "n_unsamplable", "worst_index",
                 "worst_point")

    def __init__(self, expression: Expr, spec_key: str, errors: np.ndarray,
                 n_invalid: int, n_unsamplable: int,
                 worst_point: dict[str, float] | None = None):
        self.expression = expression
        self.spec_key = spec_key
        self.errors = errors
        self.n_points = int(errors.size)
        self.avg_bits = float(errors.mean()) if errors.size else 0.0
        self.max_bits = float(errors.max()) if errors.size else 0.0
        self.worst_index = int(errors.argmax()) if errors.size else None
        self.worst_point = worst_point
        self.n_invalid = n_invalid
        self.n_unsamplable = n_unsamplable

    def to_json(self) -> dict:
        return {
            "expression": emit_math(self.expression),
            "spec_key": self.spec_key,
            "avg_bits": self.avg_bits,
            "max_bits": self.max_bits,
            "worst_index": self.worst_index,
            "worst_point": self.worst_point,
            "n_points": self.n_points,
            "n_invalid": self.n_invalid,
            "n_unsamplable": self.n_unsamplable,
            "errors_bits": [float(v) for v in self.errors],
        }


def _exact_values_for(expression: Expr, sample: Sample,
                      reuse_spec_exacts: Expr | None) -> tuple[list, int, int]:
    """Certified exact values of the expression at the sample points.

    When the expression is the one the sample was drawn for, the values
    recorded during sampling are reused so no exact evaluation reruns.
    """
    if reuse_spec_exacts is not None and expression == reuse_spec_exacts:
        exacts = sample.exacts
    else:
        exacts = [oracle.eval_exact(expression, sample.point(j))
                  for j in range(len(sample))]
    n_invalid = sum(1 for ev in exacts if ev.kind == "invalid")
    n_unsamplable = sum(1 for ev in exacts if ev.kind == "unsamplable")
    return exacts, n_invalid, n_unsamplable


def analyze(expression: Expr, spec: Spec, sample: Sample) -> ErrorReport:
    """ErrorReport for the expression over the sample's points.

    Points where the expression itself has no certified exact value are
    charged the full 64 bits: a rewrite that narrows the domain must pay
    for the points it abandons.
    """
    _bump("reports_built")
    exacts, n_invalid, n_unsamplable = _exact_values_for(
        expression, sample, spec.expression)
    floats = oracle.eval_float64_batch(expression, sample.var_order,
                                       sample.points)
    errors = np.empty(len(sample), dtype=np.float64)
    for j, ev in enumerate(exacts):
        if not ev.is_number:
            errors[j] = MAX_BITS
        else:
            errors[j] = bits_of(ev.float64, float(floats[j]))
    worst = sample.point(int(errors.argmax())) if errors.size else None
    return ErrorReport(expression, spec.key, errors, n_invalid, n_unsamplable,
                       worst_point=worst)


# ---------------------------------------------------------------------------
# Per-node local error


class LocalNodeReport:
    """Local error of one node at one point (or aggregated over a sample)."""

    __slots__ = ("path", "label", "kind", "local_bits", "exact", "children")

    def __init__(self, path: tuple[int, ...], label: str, kind: str,
                 local_bits: float, exact: object,
                 children: list["LocalNodeReport"]):
        self.path = path
        self.label = label
        self.kind = kind
        self.local_bits = local_bits
        self.exact = exact
        self.children = children

    def to_json(self) -> dict:
        if isinstance(self.exact, oracle.ExactValue):
            exact_json = {"kind": self.exact.kind,
                          "value_hex": f"{float_to_bits(self.exact.value):016x}"
                          if self.exact.is_number else None}
        elif isinstance(self.exact, bool):
            exact_json = {"kind": "bool", "truth": self.exact}
        else:
            exact_json = None
        return {
            "path": list(self.path),
            "label": self.label,
            "kind": self.kind,
            "local_bits": self.local_bits,
            "exact": exact_json,
            "children": [c.to_json() for c in self.children],
        }

    def flatten(self) -> list["LocalNodeReport"]:
        out = [self]
        for c in self.children:
            out.extend(c.flatten())
        return out


def _node_label(e: Expr) -> str:
    if e.kind in ("var", "const", "named"):
        return e.text
    if e.kind == "if":
        return "if"
    return e.op


class InvalidPointError(oracle.InvalidPointError):
    """Some node of the tree has no defined exact value at the point."""


def _rounded(ev: oracle.ExactValue) -> float:
    return ev.float64  # finite double or +-inf


def _cond_truth_float64(e: Expr, record: dict, path: tuple[int, ...]) -> bool:
    """Truth of a condition node under binary64 semantics, with each
    comparison applied to its children's rounded exact values."""
    if e.kind == "cmp":
        left = _rounded(record[path + (0,)][0])
        right = _rounded(record[path + (1,)][0])
        op = e.op
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        if op == ">=":
            return left >= right
        return left == right
    truths = [_cond_truth_float64(a, record, path + (i,))
              for i, a in enumerate(e.args)]
    if e.op == "and":
        return all(truths)
    return any(truths)


def local_error_at(expression: Expr, point: dict[str, float]) -> LocalNodeReport:
    """Per-node local error tree at one point (see module doc).

    Raises InvalidPointError when any node of the tree (including branches
    an if-condition does not take) has no defined exact value there, and
    UnsamplablePointError when certification fails at the top precision.
    """
    _bump("local_trees_built")
    raw = oracle.record_exact_tree(expression, point)
    record: dict[tuple[int, ...], tuple] = {}
    for path, entry in raw.items():
        if isinstance(entry, oracle.ExactValue):
            if entry.kind == "invalid":
                raise InvalidPointError(
                    f"node at path {path} has no defined value at {point!r}")
            if entry.kind == "unsamplable":
                raise oracle.UnsamplablePointError(
                    f"node at path {path} not certifiable at {point!r}")
            record[path] = (entry,)
        else:
            if entry is None:
                raise oracle.UnsamplablePointError(
                    f"condition at path {path} not certifiable at {point!r}")
            record[path] = (entry,)

    def build(e: Expr, path: tuple[int, ...]) -> LocalNodeReport:
        children = [build(a, path + (i,)) for i, a in enumerate(e.args)]
        entry = record[path][0]
        if e.kind in ("var", "const", "named"):
            local = 0.0
        elif e.kind in ("cmp", "bool"):
            exact_truth = entry
            float_truth = _cond_truth_float64(e, record, path)
            local = 0.0 if exact_truth == float_truth else MAX_BITS
        elif e.kind == "if":
            exact_truth = record[path + (0,)][0]
            float_truth = _cond_truth_float64(e.args[0], record, path + (0,))
            picked = record[path + (1 if float_truth else 2,)][0]
            local = bits_of(entry.float64, _rounded(picked))
        else:
            args64 = [_rounded(record[path + (i,)][0])
                      for i in range(len(e.args))]
            redone = apply_op_float64(e.op, args64)
            local = bits_of(entry.float64, redone)
        return LocalNodeReport(path, _node_label(e), e.kind, local,
                               entry, children)

    return build(expression, ())


def local_error_aggregate(expression: Expr, sample: Sample,
                          skip_bad_points: bool = True) -> dict:
    """Aggregate local error over a sample: per-node mean/max local bits and
    how often each node is the point's dominant error source.

    Points where some node is invalid or uncertifiable are skipped (counted)
    when skip_bad_points is set; otherwise they raise as in local_error_at.
    """
    paths = [path for path, _ in walk(expression)]
    labels = {path: _node_label(node) for path, node in walk(expression)}
    sums = {path: 0.0 for path in paths}
    maxes = {path: 0.0 for path in paths}
    dominant = {path: 0 for path in paths}
    per_point: list[dict] = []
    n_used = 0
    n_skipped = 0
    for j in range(len(sample)):
        point = sample.point(j)
        try:
            tree = local_error_at(expression, point)
        except (oracle.InvalidPointError, oracle.UnsamplablePointError):
            if not skip_bad_points:
                raise
            n_skipped += 1
            per_point.append({"point_index": j, "skipped": True})
            continue
        n_used += 1
        flat = tree.flatten()
        best_path = None
        best_bits = -1.0
        entry = {"point_index": j, "skipped": False, "local_bits": {}}
        for node in flat:
            sums[node.path] += node.local_bits
            if node.local_bits > maxes[node.path]:
                maxes[node.path] = node.local_bits
            entry["local_bits"][",".join(map(str, node.path))] = node.local_bits
            if node.local_bits > best_bits:
                best_bits = node.local_bits
                best_path = node.path
        if best_path is not None and best_bits > 0.0:
            dominant[best_path] += 1
        per_point.append(entry)
    nodes = []
    for path in paths:
        nodes.append({
            "path": list(path),
            "label": labels[path],
            "mean_bits": (sums[path] / n_used) if n_used else 0.0,
            "max_bits": maxes[path],
            "dominant_count": dominant[path],
        })
    return {
        "expression": emit_math(expression),
        "n_points_used": n_used,
        "n_points_skipped": n_skipped,
        "nodes": nodes,
        "per_point": per_point,
    }
