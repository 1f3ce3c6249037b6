"""Workbench sessions: spec + cached samples + the candidate table + jobs.

A session owns the current Spec, an ordered table of Candidates with
monotonically increasing ids, and a registry of background suggestion
jobs.  All mutations run under one writer lock; suggestion jobs never
touch the table themselves — their results are appended by the poll
handler, under the same lock.

Caching has two layers, both observable through oracle/sampler counters:
samples are cached by spec-key in a module-level LRU shared across
sessions (capacity 32, so range zoom-and-revert is instant), and analysis
reports are cached per session by (expression, spec-key), so re-analyzing
an unchanged candidate performs no new exact evaluations.
"""

from __future__ import annotations

import json
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from . import analysis, expr as E, sampler
from .parser import parse_math
from .rewriter import (Candidate, Derivation, SuggestTimeout,
                       PROVENANCE_USER, suggest)

SNAPSHOT_VERSION = 1

JOB_RUNNING = "running"
JOB_DONE = "done"
JOB_TIMEOUT = "timeout"
JOB_ERROR = "error"
JOB_CANCELLED = "cancelled"


class SessionError(ValueError):
    """Session-level failure with a stable machine code."""

    code = "invalid_range"

    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class UnboundVariableError(SessionError):
    code = "unbound_variable"


class InvalidRangeError(SessionError):
    code = "invalid_range"


class NotFoundError(SessionError):
    code = "job_not_found"


# ---------------------------------------------------------------------------
# Shared sample cache (LRU across sessions)

SAMPLE_CACHE_CAPACITY = 32

_SAMPLE_CACHE: "OrderedDict[str, sampler.Sample]" = OrderedDict()
_SAMPLE_CACHE_LOCK = threading.Lock()


def get_or_build_sample(spec: E.Spec) -> sampler.Sample:
    """Sample for a spec, from the cross-session LRU cache when present."""
    with _SAMPLE_CACHE_LOCK:
        hit = _SAMPLE_CACHE.get(spec.key)
        if hit is not None:
            _SAMPLE_CACHE.move_to_end(spec.key)
            return hit
    built = sampler.sample_spec(spec)
    with _SAMPLE_CACHE_LOCK:
        _SAMPLE_CACHE[spec.key] = built
        _SAMPLE_CACHE.move_to_end(spec.key)
        while len(_SAMPLE_CACHE) > SAMPLE_CACHE_CAPACITY:
            _SAMPLE_CACHE.popitem(last=False)
    return built


def clear_sample_cache() -> None:
    with _SAMPLE_CACHE_LOCK:
        _SAMPLE_CACHE.clear()


# ---------------------------------------------------------------------------
# Background job plumbing

#: Bounded worker pool shared by all sessions; suggestion search is pure
#: with respect to session state, so two concurrent jobs are safe.
_EXECUTOR = ThreadPoolExecutor(max_workers=2, thread_name_prefix="fpwb-suggest")


class _Job:
    __slots__ = ("id", "status", "future", "start_id", "results", "error_code",
                 "error_message", "appended_ids", "cancelled")

    def __init__(self, job_id: str, start_id: int):
        self.id = job_id
        self.status = JOB_RUNNING
        self.future = None
        self.start_id = start_id
        self.results: Optional[list[Candidate]] = None
        self.error_code: Optional[str] = None
        self.error_message: Optional[str] = None
        self.appended_ids: Optional[list[int]] = None
        self.cancelled = False


class Session:
    """One user's workbench: current spec, candidate table, pending jobs."""

    def __init__(self, spec: E.Spec, session_id: str = "session-1"):
        self.id = session_id
        self._lock = threading.RLock()
        self.spec = spec
        self._sample = get_or_build_sample(spec)
        self.candidates: list[Candidate] = []
        self._next_candidate_id = 1
        self._next_job_number = 1
        self._jobs: dict[str, _Job] = {}
        # (expression, spec-key) -> ErrorReport; never evicted within a
        # session so a range revert re-uses every prior analysis.
        self._report_cache: dict[tuple[E.Expr, str], analysis.ErrorReport] = {}
        self.add_candidate(spec.expression, PROVENANCE_USER)

    # -- analysis caching ---------------------------------------------------

    def _analyze_cached(self, e: E.Expr) -> analysis.ErrorReport:
        key = (e, self.spec.key)
        hit = self._report_cache.get(key)
        if hit is not None:
            return hit
        report = analysis.analyze(e, self.spec, self._sample)
        self._report_cache[key] = report
        return report

    # -- candidate table ----------------------------------------------------

    def add_candidate(self, e: E.Expr, provenance: str = PROVENANCE_USER,
                      derivation: Optional[Derivation] = None,
                      report: Optional[analysis.ErrorReport] = None) -> Candidate:
        """Append a candidate, analyzed immediately on the cached sample.

        A candidate whose expression already appears in the table gets a
        fresh id and a duplicate_of pointer to the first occurrence.
        """
        unbound = E.free_vars(e) - {name for name, _, _ in self.spec.variables}
        if unbound:
            raise UnboundVariableError(
                f"unbound variable(s): {', '.join(sorted(unbound))}")
        with self._lock:
            if report is not None and report.spec_key == self.spec.key:
                self._report_cache.setdefault((e, self.spec.key), report)
            cand = Candidate(
                expression=e,
                provenance=provenance,
                derivation=derivation if derivation is not None else Derivation(),
                report=self._analyze_cached(e),
                id=self._next_candidate_id,
                visible=True,
                duplicate_of=next((c.id for c in self.candidates
                                   if c.expression == e), None),
            )
            self._next_candidate_id += 1
            self.candidates.append(cand)
            return cand

    def get_candidate(self, candidate_id: int) -> Candidate:
        with self._lock:
            for c in self.candidates:
                if c.id == candidate_id:
                    return c
        raise NotFoundError(f"no candidate with id {candidate_id}")

    def hide_candidate(self, candidate_id: int) -> Candidate:
        with self._lock:
            cand = self.get_candidate(candidate_id)
            cand.visible = False
            return cand

    def show_candidate(self, candidate_id: int) -> Candidate:
        """Un-hide; a candidate whose report went stale while hidden is
        re-analyzed now (lazily, not at range-change time)."""
        with self._lock:
            cand = self.get_candidate(candidate_id)
            cand.visible = True
            if cand.report is None or cand.report.spec_key != self.spec.key:
                cand.report = self._analyze_cached(cand.expression)
            return cand

    # -- spec / range changes -------------------------------------------------

    def set_range(self, ranges: dict[str, tuple[float, float]]) -> E.Spec:
        """Replace variable ranges; resample and re-analyze visible candidates.

        Unknown variables or malformed bounds raise InvalidRangeError; a
        range with no valid points raises sampler.EmptySampleError.  The
        table is untouched on any failure.  Setting the identical ranges
        is a no-op beyond cache lookups.
        """
        with self._lock:
            known = {name for name, _, _ in self.spec.variables}
            unknown = set(ranges) - known
            if unknown:
                raise InvalidRangeError(
                    f"no such variable(s): {', '.join(sorted(unknown))}")
            new_vars = []
            for name, lo, hi in self.spec.variables:
                if name in ranges:
                    lo, hi = ranges[name]
                new_vars.append((name, lo, hi))
            try:
                new_spec = self.spec.with_ranges(new_vars)
            except E.SpecError as exc:
                raise InvalidRangeError(str(exc)) from exc
            if new_spec.key == self.spec.key:
                return self.spec
            new_sample = get_or_build_sample(new_spec)  # may raise EmptySampleError
            self.spec = new_spec
            self._sample = new_sample
            for cand in self.candidates:
                if cand.visible:
                    cand.report = self._analyze_cached(cand.expression)
            return new_spec

    # -- suggestion jobs ------------------------------------------------------

    def run_suggest(self, start_candidate_id: int, k: int = 5,
                    budget_seconds: float = 20.0) -> str:
        """Start a background suggestion job from a table candidate."""
        with self._lock:
            start = self.get_candidate(start_candidate_id)
            job = _Job(f"job-{self._next_job_number}", start_candidate_id)
            self._next_job_number += 1
            self._jobs[job.id] = job
            spec, sample = self.spec, self._sample
        job.future = _EXECUTOR.submit(
            self._suggest_worker, job, spec, sample, start.expression, k,
            budget_seconds)
        return job.id

    @staticmethod
    def _suggest_worker(job: _Job, spec: E.Spec, sample: sampler.Sample,
                        start: E.Expr, k: int, budget_seconds: float) -> None:
        try:
            results = suggest(spec, sample, start, k=k,
                              budget_seconds=budget_seconds)
            job.results = results
            job.status = JOB_DONE
        except SuggestTimeout as exc:
            job.results = exc.partial
            job.status = JOB_TIMEOUT
            job.error_code = "timeout"
            job.error_message = str(exc)
        except Exception as exc:  # surfaced through poll, never raised here
            job.status = JOB_ERROR
            job.error_code = "unsupported_construct"
            job.error_message = str(exc)

    def poll_job(self, job_id: str) -> dict:
        """Job status; on first poll after completion the results are
        appended to the table (under the writer lock)."""
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise NotFoundError(f"no job with id {job_id}")
            if job.cancelled:
                return {"job_id": job.id, "status": JOB_CANCELLED}
            if job.future is not None and job.future.done() and \
                    job.status == JOB_RUNNING and job.results is None and \
                    job.error_code is None:
                # Worker raised before setting status (should not happen;
                # _suggest_worker catches everything) — surface honestly.
                job.status = JOB_ERROR
                job.error_code = "unsupported_construct"
                job.error_message = "suggestion worker failed"
            if job.status == JOB_RUNNING:
                return {"job_id": job.id, "status": JOB_RUNNING}
            out: dict = {"job_id": job.id, "status": job.status}
            if job.error_code is not None:
                out["error"] = {"code": job.error_code,
                                "message": job.error_message}
            if job.status in (JOB_DONE, JOB_TIMEOUT):
                if job.appended_ids is None:
                    appended = []
                    for cand in job.results or []:
                        added = self.add_candidate(
                            cand.expression, cand.provenance,
                            derivation=cand.derivation, report=cand.report)
                        appended.append(added.id)
                    job.appended_ids = appended
                out["candidate_ids"] = list(job.appended_ids)
            return out

    def cancel_job(self, job_id: str) -> dict:
        """Cancel a job: results are discarded and never reach the table."""
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise NotFoundError(f"no job with id {job_id}")
            if job.appended_ids is None and job.status != JOB_ERROR:
                job.cancelled = True
                job.status = JOB_CANCELLED
                if job.future is not None:
                    job.future.cancel()
            return {"job_id": job.id, "status": job.status}

    # -- snapshots -------------------------------------------------------------

    def snapshot_json(self) -> dict:
        """Versioned JSON snapshot of spec + table (jobs are transient)."""
        with self._lock:
            return {
                "version": SNAPSHOT_VERSION,
                "session_id": self.id,
                "spec": {
                    "expression": E.emit_math(self.spec.expression),
                    "variables": [[n, sampler_hex(lo), sampler_hex(hi)]
                                  for n, lo, hi in self.spec.variables],
                    "sample_size": self.spec.sample_size,
                    "seed": self.spec.seed,
                },
                "next_candidate_id": self._next_candidate_id,
                "candidates": [c.to_json() for c in self.candidates],
            }

    def save_snapshot(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.snapshot_json(), f, indent=2)

    @staticmethod
    def load_snapshot(path: str, session_id: Optional[str] = None) -> "Session":
        """Rebuild a session from a snapshot file.

        Expressions, ids, provenance, derivations, and visibility are
        restored exactly; reports are re-analyzed (through the caches) so
        they are guaranteed to match the restored spec.
        """
        with open(path, "r", encoding="utf-8") as f:
            snap = json.load(f)
        if snap.get("version") != SNAPSHOT_VERSION:
            raise SessionError(
                f"unsupported snapshot version {snap.get('version')!r}")
        spec = E.Spec(
            parse_math(snap["spec"]["expression"]),
            [(n, sampler_unhex(lo), sampler_unhex(hi))
             for n, lo, hi in snap["spec"]["variables"]],
            sample_size=snap["spec"]["sample_size"],
            seed=snap["spec"]["seed"],
        )
        sess = Session(spec, session_id or snap.get("session_id", "session-1"))
        sess.candidates.clear()
        sess._next_candidate_id = 1
        for c in snap["candidates"]:
            cand = sess.add_candidate(
                parse_math(c["expression"]), c["provenance"],
                derivation=Derivation.from_json(c.get("derivation", [])))
            cand.visible = bool(c.get("visible", True))
            forced_id = int(c["id"])
            cand.id = forced_id
            sess._next_candidate_id = max(sess._next_candidate_id, forced_id + 1)
            cand.duplicate_of = c.get("duplicate_of")
        sess._next_candidate_id = max(sess._next_candidate_id,
                                      int(snap.get("next_candidate_id", 1)))
        return sess


def sampler_hex(x: float) -> str:
    """Bit-exact wire spelling of a binary64 (16 hex digits)."""
    from .ordinals import float_to_bits
    return f"{float_to_bits(x):016x}"


def sampler_unhex(h: str) -> float:
    from .ordinals import bits_to_float
    return bits_to_float(int(h, 16))
