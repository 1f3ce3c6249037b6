"""Candidate generation: beam-search rewriting, derivations, regime splits.

suggest() explores single-step rewrites breadth-first under a beam: every
catalog rule is tried at every node of every frontier expression, results
are scored by average accuracy on the current sample, and the best
`beam_width` survive to the next round.  Scoring inside the search reuses
the start expression's certified values as the target (every catalog
identity preserves the exactly-rounded value wherever it is defined, and
guard branches only differ below one half ulp), so the hot loop is pure
float64 evaluation; the finalists are then re-analyzed with their own
certified semantics before anything is returned.

infer_regimes() assigns candidates to segments of the sample (sorted by
the split variable's ordinal) with a dynamic program, charging a penalty
per split, and emits a nested if-expression whose thresholds sit at
ordinal midpoints between adjacent sample points.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import analysis, expr as E, kernels, oracle, ordinals, rules as R
from .parser import parse_math

DEFAULT_K = 5
DEFAULT_BEAM_WIDTH = 16
DEFAULT_DEPTH = 4
DEFAULT_BUDGET_SECONDS = 20.0
DEFAULT_SPLIT_PENALTY = 1.0  # bits·points charged per branch split

PROVENANCE_USER = "user-entered"
PROVENANCE_GENERATED = "generated"
PROVENANCE_COMBINED = "combined"


class DivergenceError(ValueError):
    """Replaying a derivation failed; carries the first bad step index."""

    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"derivation diverges at step {index}: {reason}")


class DegenerateRegimesError(ValueError):
    """Regime inference over candidates that are all the same expression."""


class SuggestTimeout(Exception):
    """Search exceeded its wall-clock budget; carries partial results."""

    def __init__(self, partial: list["Candidate"], budget_seconds: float):
        self.partial = partial
        self.budget_seconds = budget_seconds
        super().__init__(
            f"suggestion search exceeded {budget_seconds:g}s; "
            f"{len(partial)} partial result(s) available")


@dataclass(frozen=True)
class Step:
    """One derivation step: `rule` applied at `path` turned before into after.

    A step whose before and after are the same expression is an annotation
    (used by regime inference to name segment assignments); its rule field
    is free text and it leaves the expression unchanged on replay.
    """
    rule: str
    path: tuple[int, ...]
    before: E.Expr
    after: E.Expr

    def to_json(self) -> dict:
        return {
            "rule": self.rule,
            "path": list(self.path),
            "before": E.emit_math(self.before),
            "after": E.emit_math(self.after),
        }

    @staticmethod
    def from_json(d: dict) -> "Step":
        return Step(rule=d["rule"], path=tuple(d["path"]),
                    before=parse_math(d["before"]), after=parse_math(d["after"]))


@dataclass(frozen=True)
class Derivation:
    """Ordered rewrite steps from a start expression to a result."""
    steps: tuple[Step, ...] = ()

    def extend(self, step: Step) -> "Derivation":
        return Derivation(self.steps + (step,))

    def __len__(self) -> int:
        return len(self.steps)

    def to_json(self) -> list:
        return [s.to_json() for s in self.steps]

    @staticmethod
    def from_json(items: list) -> "Derivation":
        return Derivation(tuple(Step.from_json(d) for d in items))


def replay(derivation: Derivation, start: E.Expr) -> E.Expr:
    """Re-run every step from `start`, verifying each one.

    Raises DivergenceError naming the first step whose before-expression,
    rule application, or after-expression fails to reproduce.
    """
    cur = start
    for i, step in enumerate(derivation.steps):
        if step.before != cur:
            raise DivergenceError(i, "before-expression does not match")
        if step.rule == R.CONST_FOLD:
            try:
                node = E.get_at(cur, step.path)
            except IndexError:
                raise DivergenceError(i, "path does not exist") from None
            folded = R.fold_constants(node)
            if folded is None:
                raise DivergenceError(i, "constant folding does not apply")
            result = E.replace_at(cur, step.path, folded)
        else:
            rule = R.rule_by_name(step.rule)
            if rule is not None:
                try:
                    node = E.get_at(cur, step.path)
                except IndexError:
                    raise DivergenceError(i, "path does not exist") from None
                replacement = rule.apply(node)
                if replacement is None:
                    raise DivergenceError(i, f"rule {step.rule!r} does not match")
                result = E.replace_at(cur, step.path, replacement)
            elif step.after == step.before:
                result = cur  # annotation step
            else:
                raise DivergenceError(i, f"unknown rule {step.rule!r}")
        if result != step.after:
            raise DivergenceError(i, "after-expression does not match")
        cur = result
    return cur


@dataclass
class Candidate:
    """One rewriting under consideration, with its current error report."""
    expression: E.Expr
    provenance: str
    derivation: Derivation = field(default_factory=Derivation)
    report: Optional[analysis.ErrorReport] = None
    id: Optional[int] = None
    visible: bool = True
    duplicate_of: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "expression": E.emit_math(self.expression),
            "provenance": self.provenance,
            "derivation": self.derivation.to_json(),
            "report": self.report.to_json() if self.report is not None else None,
            "visible": self.visible,
            "duplicate_of": self.duplicate_of,
        }


# ---------------------------------------------------------------------------
# Beam search

def _expr_size(e: E.Expr) -> int:
    return sum(1 for _ in E.walk(e))


def _target_vector(spec, sample, start: E.Expr) -> tuple[np.ndarray, np.ndarray]:
    """Per-point search targets: the start's exactly-rounded values.

    Returns (targets, bad): bad marks points where the start has no
    certified numeric value (those are charged the maximum error for every
    search candidate, since the catalog preserves definedness).
    """
    if start == spec.expression:
        exacts = sample.exacts
    else:
        exacts = oracle.eval_exact_batch(start, sample.var_order, sample.points)
    n = len(exacts)
    targets = np.zeros(n, dtype=np.float64)
    bad = np.zeros(n, dtype=bool)
    for j, ev in enumerate(exacts):
        if ev.is_number:
            targets[j] = ev.float64
        else:
            bad[j] = True
            targets[j] = np.nan
    return targets, bad


def _score_against(targets: np.ndarray, bad: np.ndarray, sample,
                   e: E.Expr) -> float:
    floats = oracle.eval_float64_batch(e, sample.var_order, sample.points)
    bits = kernels.bits_batch(floats, targets)
    if bad.any():
        bits = np.where(bad, ordinals.MAX_BITS, bits)
    return float(bits.mean())


def suggest(spec, sample, start: E.Expr, k: int = DEFAULT_K,
            beam_width: int = DEFAULT_BEAM_WIDTH, depth: int = DEFAULT_DEPTH,
            budget_seconds: float = DEFAULT_BUDGET_SECONDS,
            rules: Optional[list[R.RewriteRule]] = None) -> list[Candidate]:
    """Beam-search rewrites of `start`, returning up to k scored Candidates.

    The returned list is sorted by average bits of error (ties: smaller
    tree, then spelling), never contains a candidate worse than `start`,
    and carries a full derivation and a fresh ErrorReport per candidate.
    Raises SuggestTimeout (carrying whatever finished) when the budget is
    exceeded.
    """
    if rules is None:
        rules = R.rule_db()
    deadline = time.monotonic() + budget_seconds
    targets, bad = _target_vector(spec, sample, start)

    # seen: expr -> (heuristic score, size, spelling, derivation)
    start_entry = (_score_against(targets, bad, sample, start),
                   _expr_size(start), E.emit_math(start), Derivation())
    seen: dict[E.Expr, tuple[float, int, str, Derivation]] = {start: start_entry}
    frontier: list[E.Expr] = [start]
    timed_out = False

    for _ in range(depth):
        grew = False
        for e in frontier:
            if time.monotonic() > deadline:
                timed_out = True
                break
            deriv = seen[e][3]
            for rule_name, path, result in R.all_rewrites(e, rules):
                if result in seen:
                    continue
                step = Step(rule=rule_name, path=path, before=e, after=result)
                entry = (_score_against(targets, bad, sample, result),
                         _expr_size(result), E.emit_math(result),
                         deriv.extend(step))
                seen[result] = entry
                grew = True
        if timed_out or not grew:
            break
        ranked = sorted(seen, key=lambda x: seen[x][:3])
        frontier = ranked[:beam_width]

    # Finalists get their own certified analysis (the heuristic target is
    # only exact for identity chains); re-rank by the true average.
    ranked = sorted(seen, key=lambda x: seen[x][:3])
    finalists = ranked[:max(2 * k, k + 3)]
    if start not in finalists:
        finalists.append(start)

    scored: list[Candidate] = []
    start_avg: Optional[float] = None
    for e in finalists:
        report = analysis.analyze(e, spec, sample)
        if e == start:
            start_avg = report.avg_bits
        scored.append(Candidate(expression=e, provenance=PROVENANCE_GENERATED,
                                derivation=seen[e][3], report=report))
    assert start_avg is not None
    keep = [c for c in scored
            if c.report is not None and c.report.avg_bits <= start_avg]
    keep.sort(key=lambda c: (c.report.avg_bits, _expr_size(c.expression),
                             E.emit_math(c.expression)))
    out = keep[:k]
    if timed_out:
        raise SuggestTimeout(out, budget_seconds)
    return out


# ---------------------------------------------------------------------------
# Regime inference

def _group_sorted_points(ords: np.ndarray) -> list[np.ndarray]:
    """Indices of sample points, sorted by ordinal, grouped by equal value.

    Points with the same float value cannot be separated by any threshold,
    so the dynamic program assigns them as a unit.
    """
    order = np.argsort(ords, kind="stable")
    groups: list[list[int]] = []
    prev = None
    for idx in order:
        o = ords[idx]
        if prev is None or o != prev:
            groups.append([idx])
            prev = o
        else:
            groups[-1].append(idx)
    return [np.asarray(g, dtype=np.intp) for g in groups]


def infer_regimes(candidates: Sequence[Candidate], sample, var: str,
                  max_branches: int = 2, lam: float = DEFAULT_SPLIT_PENALTY,
                  spec=None) -> Candidate:
    """Combine candidates into one branched expression over `var`.

    Chooses at most `max_branches` contiguous segments of the sample
    (sorted by ord(var)) minimizing total bits of error plus `lam` per
    split, then emits nested if-expressions with thresholds at ordinal
    midpoints between the segment-boundary sample points.  When no split
    beats the best single candidate, that candidate is returned unchanged.
    If `spec` is given the combined candidate carries a fresh ErrorReport.
    """
    if not candidates:
        raise ValueError("no candidates to combine")
    if max_branches < 1:
        raise ValueError("max_branches must be at least 1")
    if len(candidates) == 1:
        return candidates[0]
    if all(c.expression == candidates[0].expression for c in candidates[1:]):
        raise DegenerateRegimesError(
            "all candidates are the same expression; nothing to combine")
    if var not in sample.var_order:
        raise ValueError(f"unknown split variable {var!r}")
    for c in candidates:
        if c.report is None or c.report.errors.shape[0] != sample.points.shape[1]:
            raise ValueError(
                "every candidate needs an error report for the current sample")

    xi = sample.points[sample.var_order.index(var)]
    ords = kernels.to_ordinal_batch(xi)
    groups = _group_sorted_points(ords)
    n_groups = len(groups)
    n_cands = len(candidates)
    # cost[c][g]: summed bits of candidate c over group g.
    cost = np.empty((n_cands, n_groups), dtype=np.float64)
    for ci, c in enumerate(candidates):
        errs = c.report.errors
        for gi, g in enumerate(groups):
            cost[ci, gi] = float(errs[g].sum())

    max_splits = min(max_branches - 1, n_groups - 1)
    INF = float("inf")
    # dp[c][s]: best total cost covering groups 0..g with candidate c
    # active and s splits used; parent[g][c][s] backtracks.
    dp = np.full((n_cands, max_splits + 1), INF)
    dp[:, 0] = cost[:, 0]
    parent: list[np.ndarray] = [np.full((n_cands, max_splits + 1, 2), -1,
                                        dtype=np.int64)]
    for g in range(1, n_groups):
        ndp = np.full_like(dp, INF)
        par = np.full((n_cands, max_splits + 1, 2), -1, dtype=np.int64)
        best_prev = dp.min(axis=0)          # best over candidates, per splits
        best_prev_arg = dp.argmin(axis=0)
        for c in range(n_cands):
            for s in range(max_splits + 1):
                stay = dp[c, s]
                best, who = stay, (c, s)
                if s > 0:
                    switch = best_prev[s - 1] + lam
                    cp = int(best_prev_arg[s - 1])
                    if cp == c:  # best previous is ourselves: not a switch
                        masked = dp[:, s - 1].copy()
                        masked[c] = INF
                        cp = int(masked.argmin())
                        switch = masked[cp] + lam
                    if switch < best:
                        best, who = switch, (cp, s - 1)
                if best < INF:
                    ndp[c, s] = best + cost[c, g]
                    par[c, s] = who
        dp = ndp
        parent.append(par)

    flat = int(dp.argmin())
    c_end, s_end = divmod(flat, max_splits + 1)
    # Backtrack the assignment per group.
    assign = [0] * n_groups
    c_cur, s_cur = c_end, s_end
    for g in range(n_groups - 1, -1, -1):
        assign[g] = c_cur
        if g:
            c_cur, s_cur = (int(v) for v in parent[g][c_cur, s_cur])

    if all(a == assign[0] for a in assign):
        return candidates[assign[0]]  # dominance: no branch emitted

    # Segments and ordinal-midpoint thresholds.
    segments: list[tuple[int, int, int]] = []  # (first group, last group, cand)
    first = 0
    for g in range(1, n_groups):
        if assign[g] != assign[g - 1]:
            segments.append((first, g - 1, assign[g - 1]))
            first = g
    segments.append((first, n_groups - 1, assign[-1]))

    thresholds: list[float] = []
    for seg_i in range(len(segments) - 1):
        _, last_g, _ = segments[seg_i]
        lo_ord = int(ords[groups[last_g][-1]])
        hi_ord = int(ords[groups[last_g + 1][0]])
        mid = lo_ord + (hi_ord - lo_ord) // 2
        thresholds.append(ordinals.from_ordinal(mid))

    var_node = E.var(var)
    combined = candidates[segments[-1][2]].expression
    for seg_i in range(len(segments) - 2, -1, -1):
        t_node = E.const_from_float(thresholds[seg_i])
        cond = E.cmp("<=", var_node, t_node)
        combined = E.if_(cond, candidates[segments[seg_i][2]].expression, combined)

    steps = []
    for seg_i, (first_g, last_g, ci) in enumerate(segments):
        lo_txt = "range start" if seg_i == 0 else \
            E.emit_math(E.const_from_float(thresholds[seg_i - 1]))
        hi_txt = "range end" if seg_i == len(segments) - 1 else \
            E.emit_math(E.const_from_float(thresholds[seg_i]))
        label = (f"segment {seg_i + 1}: {lo_txt} < {var} <= {hi_txt} uses "
                 f"{E.emit_math(candidates[ci].expression)}")
        steps.append(Step(rule=label, path=(), before=combined, after=combined))

    report = analysis.analyze(combined, spec, sample) if spec is not None else None
    return Candidate(expression=combined, provenance=PROVENANCE_COMBINED,
                     derivation=Derivation(tuple(steps)), report=report)
