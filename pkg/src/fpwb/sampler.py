"""Reproducible sampling of valid input points for a problem spec.

Points are drawn uniformly over the *ordinal* range of each variable: every
representable binary64 in ``[lo, hi]`` is equally likely, which covers the
full dynamic range of wide intervals instead of clustering near the large
magnitudes the way real-uniform sampling does.

The generator is splitmix64, implemented here in exact integer arithmetic so
a (spec, seed) pair reproduces the identical sample on every platform and
backend.  Candidate points where the spec expression has no certified value
(domain errors, or undecidable at the top working precision) are discarded;
drawing stops once the requested count is reached or an oversampling budget
of 25x is exhausted.
"""

from __future__ import annotations

import threading

import numpy as np

from . import oracle
from .expr import Spec
from .ordinals import float_to_bits, bits_to_float, to_ordinal, from_ordinal

__all__ = [
    "Sample",
    "EmptySampleError",
    "sample_spec",
    "OVERSAMPLE_FACTOR",
    "counters_snapshot",
    "reset_counters",
]

#: Draw budget: give up after this many candidate points per requested point.
OVERSAMPLE_FACTOR = 25

_MASK64 = (1 << 64) - 1

_COUNTER_LOCK = threading.Lock()
_COUNTERS = {"samples_built": 0, "points_drawn": 0}


def counters_snapshot() -> dict[str, int]:
    with _COUNTER_LOCK:
        return dict(_COUNTERS)


def reset_counters() -> None:
    with _COUNTER_LOCK:
        for k in _COUNTERS:
            _COUNTERS[k] = 0


class EmptySampleError(ValueError):
    """No valid points were found within the drawing budget."""


class _SplitMix64:
    """splitmix64: tiny, seedable, and identical everywhere."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, span: int) -> int:
        """Uniform integer in [0, span) by rejection (no modulo bias)."""
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % span


class Sample:
    """A drawn set of valid points plus the spec expression's certified
    exact values at them (computed once, during validity filtering)."""

    __slots__ = ("spec_key", "var_order", "points", "exacts", "seed",
                 "requested", "drawn", "rejected_invalid",
                 "rejected_unsamplable", "warning")

    def __init__(self, spec_key: str, var_order: list[str], points: np.ndarray,
                 exacts: list[oracle.ExactValue], seed: int, requested: int,
                 drawn: int, rejected_invalid: int, rejected_unsamplable: int,
                 warning: str | None = None):
        self.spec_key = spec_key
        self.var_order = var_order
        self.points = points
        self.exacts = exacts
        self.seed = seed
        self.requested = requested
        self.drawn = drawn
        self.rejected_invalid = rejected_invalid
        self.rejected_unsamplable = rejected_unsamplable
        self.warning = warning

    def __len__(self) -> int:
        return self.points.shape[1]

    def point(self, j: int) -> dict[str, float]:
        return {name: float(self.points[i, j])
                for i, name in enumerate(self.var_order)}

    def to_json(self) -> dict:
        """Bit-exact wire form: doubles travel as hex bit patterns."""
        return {
            "spec_key": self.spec_key,
            "var_order": list(self.var_order),
            "points_hex": [[f"{float_to_bits(float(v)):016x}" for v in row]
                           for row in self.points],
            "exacts": [{"kind": ev.kind,
                        "value_hex": f"{float_to_bits(ev.value):016x}"
                        if ev.is_number else None}
                       for ev in self.exacts],
            "seed": self.seed,
            "requested": self.requested,
            "drawn": self.drawn,
            "rejected_invalid": self.rejected_invalid,
            "rejected_unsamplable": self.rejected_unsamplable,
            "warning": self.warning,
        }

    @staticmethod
    def from_json(data: dict) -> "Sample":
        rows = data["points_hex"]
        n = len(rows[0]) if rows else 0
        points = np.array([[bits_to_float(int(h, 16)) for h in row]
                           for row in rows], dtype=np.float64)
        points = points.reshape(len(rows), n)
        exacts = []
        for entry in data["exacts"]:
            kind = entry["kind"]
            if kind == "finite":
                exacts.append(oracle.ExactValue.finite(
                    bits_to_float(int(entry["value_hex"], 16))))
            elif kind == "pinf":
                exacts.append(oracle.PINF)
            elif kind == "ninf":
                exacts.append(oracle.NINF)
            elif kind == "invalid":
                exacts.append(oracle.INVALID_VALUE)
            else:
                exacts.append(oracle.UNSAMPLABLE_VALUE)
        return Sample(data["spec_key"], list(data["var_order"]), points,
                      exacts, data["seed"], data["requested"], data["drawn"],
                      data["rejected_invalid"], data["rejected_unsamplable"],
                      data.get("warning"))


def sample_spec(spec: Spec) -> Sample:
    """Draw spec.sample_size valid points for the spec (see module doc).

    Raises EmptySampleError when the budget produces no valid point at all;
    returns a short sample with a warning when it produces some but fewer
    than requested.
    """
    with _COUNTER_LOCK:
        _COUNTERS["samples_built"] += 1
    rng = _SplitMix64(spec.seed)
    var_order = [name for name, _, _ in spec.variables]
    spans = []
    for name, lo, hi in spec.variables:
        olo = to_ordinal(lo)
        ohi = to_ordinal(hi)
        spans.append((olo, ohi - olo + 1))
    n = spec.sample_size
    budget = n * OVERSAMPLE_FACTOR
    cols: list[list[float]] = []
    exacts: list[oracle.ExactValue] = []
    drawn = 0
    rejected_invalid = 0
    rejected_unsamplable = 0
    while len(cols) < n and drawn < budget:
        drawn += 1
        point_vals = [from_ordinal(olo + rng.below(span))
                      for olo, span in spans]
        point = dict(zip(var_order, point_vals))
        ev = oracle.eval_exact(spec.expression, point)
        if ev.kind == "invalid":
            rejected_invalid += 1
            continue
        if ev.kind == "unsamplable":
            rejected_unsamplable += 1
            continue
        cols.append(point_vals)
        exacts.append(ev)
    with _COUNTER_LOCK:
        _COUNTERS["points_drawn"] += drawn
    if not cols:
        raise EmptySampleError(
            f"no valid points in {drawn} draws over the given ranges")
    warning = None
    if len(cols) < n:
        warning = (f"only {len(cols)} of {n} requested points were valid "
                   f"within the {OVERSAMPLE_FACTOR}x drawing budget")
    points = np.array(cols, dtype=np.float64).T.copy()
    points = points.reshape(len(var_order), len(cols))
    return Sample(spec.key, var_order, points, exacts, spec.seed, n,
                  drawn, rejected_invalid, rejected_unsamplable, warning)
