"""HTTP+JSON API over sessions, analysis, local error, suggestions, and
expression translation.

Wire encoding: every binary64 value is transmitted as its IEEE bit pattern,
16 lowercase hex digits (field name suffixed ``_hex`` when a readable
decimal sibling is also present).  Requests accept either the hex spelling
or a plain JSON number for float fields; hex is the bit-exact path.

Every failed request carries exactly one error object:
``{"error": {"code": <stable machine code>, "message": str, "span": ?}}``.
"""

from __future__ import annotations

import os
import threading
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import analysis, expr as E, fpcore, oracle, sampler, session as SS
from .ordinals import bits_to_float, float_to_bits
from .parser import ParseError, UnknownFunctionError, parse_math
from .rewriter import Candidate

__all__ = ["create_app", "ApiException", "DEFAULT_SAMPLE_SIZE",
           "default_seed", "wire_float", "read_float"]

DEFAULT_SAMPLE_SIZE = 256
_FALLBACK_SEED = 42


def default_seed() -> int:
    """Default sampling seed; the FPWB_SEED environment variable pins it."""
    raw = os.environ.get("FPWB_SEED")
    if raw is None:
        return _FALLBACK_SEED
    try:
        return int(raw, 0)
    except ValueError:
        return _FALLBACK_SEED


class ApiException(Exception):
    """Error with a stable machine code, rendered as the single ApiError
    object of a failed response."""

    def __init__(self, code: str, message: str, status: int = 400,
                 span: Optional[list] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status
        self.span = span

    def body(self) -> dict:
        err: dict = {"code": self.code, "message": self.message}
        if self.span is not None:
            err["span"] = self.span
        return {"error": err}


# ---------------------------------------------------------------------------
# Wire encoding helpers

def wire_float(x: float) -> str:
    return f"{float_to_bits(float(x)):016x}"


def read_float(v, what: str) -> float:
    """Accept a JSON number or a 16-hex-digit bit pattern (optional 0x)."""
    if isinstance(v, bool):
        raise ApiException("invalid_range", f"{what} must be a number")
    if isinstance(v, (int, float)):
        try:
            return float(v)
        except OverflowError:
            raise ApiException("invalid_range",
                               f"{what} is too large for binary64") from None
    if isinstance(v, str):
        text = v[2:] if v.startswith(("0x", "0X")) else v
        if len(text) == 16:
            try:
                return bits_to_float(int(text, 16))
            except ValueError:
                pass
        raise ApiException(
            "invalid_range",
            f"{what} must be a number or 16 hex digits, got {v!r}")
    raise ApiException("invalid_range", f"{what} must be a number")


def _report_wire(report: analysis.ErrorReport) -> dict:
    worst = None
    if report.worst_point is not None:
        worst = {name: {"value": v, "hex": wire_float(v)}
                 for name, v in report.worst_point.items()}
    return {
        "expression": E.emit_math(report.expression),
        "spec_key": report.spec_key,
        "avg_bits": report.avg_bits,
        "avg_bits_hex": wire_float(report.avg_bits),
        "max_bits": report.max_bits,
        "max_bits_hex": wire_float(report.max_bits),
        "worst_index": report.worst_index,
        "worst_point": worst,
        "n_points": report.n_points,
        "n_invalid": report.n_invalid,
        "n_unsamplable": report.n_unsamplable,
        "errors_bits_hex": [wire_float(v) for v in report.errors],
    }


def _candidate_wire(c: Candidate) -> dict:
    return {
        "id": c.id,
        "expression": E.emit_math(c.expression),
        "latex": E.emit_latex(c.expression),
        "provenance": c.provenance,
        "derivation": c.derivation.to_json(),
        "visible": c.visible,
        "duplicate_of": c.duplicate_of,
        "report": _report_wire(c.report) if c.report is not None else None,
    }


def _spec_wire(spec: E.Spec) -> dict:
    return {
        "expression": E.emit_math(spec.expression),
        "latex": E.emit_latex(spec.expression),
        "variables": [{"name": n,
                       "lo": lo, "lo_hex": wire_float(lo),
                       "hi": hi, "hi_hex": wire_float(hi)}
                      for n, lo, hi in spec.variables],
        "sample_size": spec.sample_size,
        "seed": spec.seed,
        "spec_key": spec.key,
    }


def _local_tree_wire(node: analysis.LocalNodeReport) -> dict:
    out = node.to_json()

    def add_hex(d: dict) -> None:
        d["local_bits_hex"] = wire_float(d["local_bits"])
        for child in d["children"]:
            add_hex(child)

    add_hex(out)
    return out


def _table_wire(sess: SS.Session) -> dict:
    return {
        "session_id": sess.id,
        "spec": _spec_wire(sess.spec),
        "candidates": [_candidate_wire(c) for c in sess.candidates],
    }


# ---------------------------------------------------------------------------
# Request parsing

def _parse_expression_field(body: dict) -> E.Expr:
    """Expression from a 'math' (alias 'mathjson') or 'fpcore' field."""
    sources = [k for k in ("math", "mathjson", "fpcore") if body.get(k)]
    if len(sources) != 1:
        raise ApiException(
            "parse_error",
            "provide exactly one of 'math' (alias 'mathjson') or 'fpcore'")
    text = body[sources[0]]
    if not isinstance(text, str):
        raise ApiException("parse_error", f"{sources[0]} must be a string")
    if sources[0] == "fpcore":
        return _parse_fpcore_text(text).expression
    return _parse_math_text(text)


def _parse_math_text(text: str) -> E.Expr:
    try:
        return parse_math(text)
    except UnknownFunctionError as exc:
        raise ApiException("unsupported_construct", str(exc),
                           span=_span_of(exc)) from exc
    except ParseError as exc:
        raise ApiException("parse_error", str(exc),
                           span=_span_of(exc)) from exc


def _parse_fpcore_text(text: str) -> E.Spec:
    try:
        return fpcore.parse_fpcore(text)
    except fpcore.UnsupportedConstructError as exc:
        raise ApiException("unsupported_construct", str(exc)) from exc
    except fpcore.FPCoreError as exc:
        raise ApiException("parse_error", str(exc)) from exc


def _span_of(exc) -> Optional[list]:
    pos = getattr(exc, "offset", None)
    if isinstance(pos, int):
        return [pos, pos + 1]
    return None


def _read_ranges(body_ranges, what: str = "ranges") -> dict[str, tuple[float, float]]:
    if not isinstance(body_ranges, dict) or not body_ranges:
        raise ApiException("invalid_range", f"{what} must be a non-empty object")
    out = {}
    for name, pair in body_ranges.items():
        if isinstance(pair, dict):
            pair = [pair.get("lo"), pair.get("hi")]
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ApiException(
                "invalid_range", f"range for {name!r} must be [lo, hi]")
        out[name] = (read_float(pair[0], f"{name} lower bound"),
                     read_float(pair[1], f"{name} upper bound"))
    return out


def _read_point(body_point) -> dict[str, float]:
    if not isinstance(body_point, dict) or not body_point:
        raise ApiException("invalid_range", "point must be a non-empty object")
    return {name: read_float(v, f"point value for {name!r}")
            for name, v in body_point.items()}


# ---------------------------------------------------------------------------
# Application state

class _State:
    """All live sessions plus the global job index."""

    def __init__(self):
        self.lock = threading.Lock()
        self.sessions: dict[str, SS.Session] = {}
        self.jobs: dict[str, tuple[SS.Session, str]] = {}
        self._next_session = 1
        self._next_job = 1

    def new_session(self, spec: E.Spec) -> SS.Session:
        with self.lock:
            sid = f"s{self._next_session}"
            self._next_session += 1
        sess = SS.Session(spec, sid)
        with self.lock:
            self.sessions[sid] = sess
        return sess

    def session(self, sid: str) -> SS.Session:
        with self.lock:
            sess = self.sessions.get(sid)
        if sess is None:
            raise ApiException("job_not_found", f"no session {sid!r}",
                               status=404)
        return sess

    def register_job(self, sess: SS.Session, local_id: str) -> str:
        with self.lock:
            jid = f"j{self._next_job}"
            self._next_job += 1
            self.jobs[jid] = (sess, local_id)
        return jid

    def job(self, jid: str) -> tuple[SS.Session, str]:
        with self.lock:
            pair = self.jobs.get(jid)
        if pair is None:
            raise ApiException("job_not_found", f"no job {jid!r}", status=404)
        return pair


def _to_api_exception(exc: Exception) -> ApiException:
    """Map core-library failures onto the stable wire codes."""
    if isinstance(exc, ApiException):
        return exc
    if isinstance(exc, SS.UnboundVariableError):
        return ApiException("unbound_variable", str(exc))
    if isinstance(exc, SS.NotFoundError):
        return ApiException("job_not_found", str(exc), status=404)
    if isinstance(exc, (SS.InvalidRangeError, E.SpecError)):
        return ApiException("invalid_range", str(exc))
    if isinstance(exc, sampler.EmptySampleError):
        return ApiException("empty_sample", str(exc), status=422)
    if isinstance(exc, (analysis.InvalidPointError, oracle.InvalidPointError,
                        oracle.UnsamplablePointError)):
        return ApiException("invalid_range", str(exc), status=422)
    if isinstance(exc, UnknownFunctionError):
        return ApiException("unsupported_construct", str(exc),
                            span=_span_of(exc))
    if isinstance(exc, ParseError):
        return ApiException("parse_error", str(exc), span=_span_of(exc))
    if isinstance(exc, fpcore.UnsupportedConstructError):
        return ApiException("unsupported_construct", str(exc))
    if isinstance(exc, fpcore.FPCoreError):
        return ApiException("parse_error", str(exc))
    # Last-resort bucket so the wire contract (one ApiError, stable code)
    # holds even for unanticipated failures.
    return ApiException("unsupported_construct", str(exc) or repr(exc),
                        status=500)


# ---------------------------------------------------------------------------
# FastAPI application

def create_app(cors_origins: Optional[list[str]] = None):
    """Build the FastAPI app; separate from serving so tests can drive it
    in-process."""
    app = FastAPI(title="fpwb", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins if cors_origins is not None else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    state = _State()
    app.state.fpwb = state

    @app.exception_handler(ApiException)
    async def _api_error(_req: Request, exc: ApiException):
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.exception_handler(Exception)
    async def _any_error(_req: Request, exc: Exception):
        mapped = _to_api_exception(exc)
        return JSONResponse(status_code=mapped.status, content=mapped.body())

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content=ApiException("parse_error", str(exc.errors()[0]["msg"])
                                 if exc.errors() else "malformed request").body())

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(_req: Request, exc: StarletteHTTPException):
        code = "job_not_found" if exc.status_code == 404 else "parse_error"
        return JSONResponse(
            status_code=exc.status_code,
            content=ApiException(code, str(exc.detail)).body())

    async def _json_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise ApiException("parse_error", "request body is not JSON") \
                from None
        if not isinstance(body, dict):
            raise ApiException("parse_error", "request body must be an object")
        return body

    def _run(fn, *args, **kwargs):
        """Run core work, translating library errors to wire errors."""
        try:
            return fn(*args, **kwargs)
        except ApiException:
            raise
        except Exception as exc:
            raise _to_api_exception(exc) from exc

    # -- sessions ------------------------------------------------------------

    @app.post("/api/sessions")
    async def create_session(request: Request):
        body = await _json_body(request)
        if body.get("fpcore"):
            base = _parse_fpcore_text(body["fpcore"])
            expression = base.expression
            variables = list(base.variables)
            n = base.sample_size
            seed = base.seed
        else:
            expression = _parse_expression_field(body)
            variables = None
            n = DEFAULT_SAMPLE_SIZE
            seed = default_seed()
        if body.get("ranges") is not None or variables is None:
            ranges = _read_ranges(body.get("ranges"))
            names = sorted(E.free_vars(expression))
            missing = [v for v in names if v not in ranges]
            if missing:
                raise ApiException(
                    "invalid_range",
                    f"missing range(s) for: {', '.join(missing)}")
            extra = sorted(set(ranges) - set(names))
            if extra:
                raise ApiException(
                    "invalid_range",
                    f"range(s) for unknown variable(s): {', '.join(extra)}")
            variables = [(v, ranges[v][0], ranges[v][1]) for v in names]
        if "n" in body:
            n = body["n"]
        if "seed" in body:
            seed = body["seed"]
        if not isinstance(n, int) or isinstance(n, bool) or n <= 0:
            raise ApiException("invalid_range", "n must be a positive integer")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ApiException("invalid_range", "seed must be an integer")
        spec = _run(E.Spec, expression, variables, sample_size=n, seed=seed)
        sess = _run(state.new_session, spec)
        return {"session_id": sess.id, "table": _table_wire(sess)}

    @app.get("/api/sessions/{sid}/table")
    def get_table(sid: str):
        return {"table": _table_wire(state.session(sid))}

    @app.post("/api/sessions/{sid}/candidates")
    async def add_candidate(sid: str, request: Request):
        sess = state.session(sid)
        body = await _json_body(request)
        expression = _parse_expression_field(body)
        cand = _run(sess.add_candidate, expression)
        return {"candidate": _candidate_wire(cand)}

    @app.post("/api/sessions/{sid}/range")
    async def set_range(sid: str, request: Request):
        sess = state.session(sid)
        body = await _json_body(request)
        ranges = _read_ranges(body.get("ranges"))
        _run(sess.set_range, ranges)
        return {"table": _table_wire(sess)}

    @app.get("/api/sessions/{sid}/candidates/{cid}/errors")
    def candidate_errors(sid: str, cid: int):
        sess = state.session(sid)
        cand = _run(sess.get_candidate, cid)
        if cand.report is None or cand.report.spec_key != sess.spec.key:
            _run(sess.show_candidate, cid)
            cand = _run(sess.get_candidate, cid)
        return _report_wire(cand.report)

    @app.post("/api/sessions/{sid}/candidates/{cid}/localerror")
    async def candidate_local_error(sid: str, cid: int, request: Request):
        sess = state.session(sid)
        cand = _run(sess.get_candidate, cid)
        body = await _json_body(request)
        point = _read_point(body.get("point"))
        missing = E.free_vars(cand.expression) - set(point)
        if missing:
            raise ApiException(
                "unbound_variable",
                f"point is missing value(s) for: {', '.join(sorted(missing))}")
        tree = _run(analysis.local_error_at, cand.expression, point)
        return {
            "expression": E.emit_math(cand.expression),
            "point": {k: {"value": v, "hex": wire_float(v)}
                      for k, v in point.items()},
            "tree": _local_tree_wire(tree),
        }

    # -- suggestion jobs -------------------------------------------------------

    @app.post("/api/sessions/{sid}/suggest")
    async def start_suggest(sid: str, request: Request):
        sess = state.session(sid)
        body = await _json_body(request)
        start_cid = body.get("start_cid")
        if not isinstance(start_cid, int) or isinstance(start_cid, bool):
            raise ApiException("job_not_found",
                               "start_cid must be a candidate id", status=400)
        kwargs = {}
        if "k" in body:
            k = body["k"]
            if not isinstance(k, int) or isinstance(k, bool) or k < 1:
                raise ApiException("invalid_range",
                                   "k must be a positive integer")
            kwargs["k"] = k
        if "budget_seconds" in body:
            kwargs["budget_seconds"] = read_float(
                body["budget_seconds"], "budget_seconds")
        local = _run(sess.run_suggest, start_cid, **kwargs)
        jid = state.register_job(sess, local)
        return {"job_id": jid}

    @app.get("/api/jobs/{jid}")
    def poll_job(jid: str):
        sess, local = state.job(jid)
        status = _run(sess.poll_job, local)
        out: dict = {"job_id": jid, "status": status["status"]}
        if "error" in status:
            out["error"] = status["error"]
        if "candidate_ids" in status:
            out["candidate_ids"] = status["candidate_ids"]
            out["results"] = [
                _candidate_wire(sess.get_candidate(cid))
                for cid in status["candidate_ids"]]
        return out

    @app.post("/api/jobs/{jid}/cancel")
    def cancel_job(jid: str):
        sess, local = state.job(jid)
        status = _run(sess.cancel_job, local)
        return {"job_id": jid, "status": status["status"]}

    # -- translation -------------------------------------------------------------

    @app.post("/api/translate")
    async def translate(request: Request):
        body = await _json_body(request)
        direction = body.get("direction")
        text = body.get("text")
        if not isinstance(text, str):
            raise ApiException("parse_error", "text must be a string")
        out = translate_text(direction, text,
                             ranges=body.get("ranges"),
                             n=body.get("n"), seed=body.get("seed"))
        return {"text": out}

    return app


_DIRECTIONS = ("math->fpcore", "fpcore->math", "math->latex",
               "fpcore->latex", "math->math")


def translate_text(direction, text: str, ranges=None, n=None, seed=None) -> str:
    """Shared translation core for the HTTP endpoint and the CLI."""
    if direction not in _DIRECTIONS:
        raise ApiException(
            "parse_error",
            f"direction must be one of {', '.join(_DIRECTIONS)}")
    src, dst = direction.split("->")
    if src == "math":
        expression = _parse_math_text(text)
        spec = None
    else:
        spec = _parse_fpcore_text(text)
        expression = spec.expression
    if dst == "math":
        return E.emit_math(expression)
    if dst == "latex":
        return E.emit_latex(expression)
    # dst == "fpcore": need a full spec for the precondition clause.
    if spec is None:
        rng = _read_ranges(ranges) if ranges else {}
        variables = []
        for name in sorted(E.free_vars(expression)):
            lo, hi = rng.get(name, (-E.MAX_DOUBLE, E.MAX_DOUBLE))
            variables.append((name, lo, hi))
        try:
            spec = E.Spec(expression, variables,
                          sample_size=n if isinstance(n, int) and n > 0
                          else DEFAULT_SAMPLE_SIZE,
                          seed=seed if isinstance(seed, int) else default_seed())
        except E.SpecError as exc:
            raise ApiException("invalid_range", str(exc)) from exc
    return fpcore.emit_fpcore(spec.expression, spec)
