"""Command-line access to the same core paths the HTTP API serves.

Subcommands: analyze, suggest, localerror, translate, serve.  JSON output
is byte-identical to the corresponding API response bodies (same wire
encoding, same separators), so the two surfaces share golden files.

Exit codes: 0 success (including a suggestion run that hit its time budget
and returned partial results), 2 usage/input error, 1 internal error.
"""

from __future__ import annotations

import json
import sys

import click

from . import analysis, expr as E, fpcore, session as SS
from .ordinals import float_to_bits
from .parser import parse_math
from .rewriter import SuggestTimeout, suggest as run_suggest
from .server import (ApiException, DEFAULT_SAMPLE_SIZE, _candidate_wire,
                     _report_wire, _to_api_exception, default_seed,
                     read_float, translate_text)

_JSON_SEPARATORS = (",", ":")  # match the API's response serialization


def _fail(exc: Exception) -> "SystemExit":
    """Print one error line (stable machine code first) and exit.

    Input/usage failures exit 2; internal failures exit 1 — mirroring the
    API's 4xx/5xx split.
    """
    mapped = exc if isinstance(exc, ApiException) else _to_api_exception(exc)
    click.echo(f"error: {mapped.code}: {mapped.message}", err=True)
    return SystemExit(2 if mapped.status < 500 else 1)


def _parse_bound(text: str, what: str) -> float:
    text = text.strip()
    if text.lower().startswith("0x"):
        return read_float(text, what)
    try:
        return float(text)
    except ValueError:
        raise ApiException(
            "invalid_range",
            f"{what} must be a decimal (scientific notation accepted) "
            f"or 0x-prefixed hex bit pattern, got {text!r}") from None


def _parse_range_flags(range_flags: tuple[str, ...]) -> dict[str, tuple[float, float]]:
    out: dict[str, tuple[float, float]] = {}
    for item in range_flags:
        name, sep, bounds = item.partition("=")
        lo_text, sep2, hi_text = bounds.partition(":")
        if not sep or not sep2 or not name:
            raise ApiException(
                "invalid_range",
                f"--range must look like name=LO:HI, got {item!r}")
        out[name.strip()] = (_parse_bound(lo_text, f"{name} lower bound"),
                             _parse_bound(hi_text, f"{name} upper bound"))
    return out


def _spec_from_inputs(expr_text, fpcore_path, range_flags, points, seed) -> E.Spec:
    """Build the Spec from exactly one input source plus range/points/seed
    flags (flags override what an FPCore file carries)."""
    if (expr_text is None) == (fpcore_path is None):
        raise ApiException(
            "parse_error", "provide exactly one of --expr or --fpcore FILE")
    ranges = _parse_range_flags(range_flags)
    if fpcore_path is not None:
        try:
            with open(fpcore_path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as exc:
            raise ApiException("parse_error", f"cannot read {fpcore_path}: {exc}")
        base = fpcore.parse_fpcore(text)
        expression = base.expression
        variables = [(n, *ranges[n]) if n in ranges else (n, lo, hi)
                     for n, lo, hi in base.variables]
        unknown = set(ranges) - {n for n, _, _ in base.variables}
        if unknown:
            raise ApiException(
                "invalid_range",
                f"range(s) for unknown variable(s): {', '.join(sorted(unknown))}")
        n = points if points is not None else base.sample_size
        s = seed if seed is not None else base.seed
    else:
        expression = parse_math(expr_text)
        names = sorted(E.free_vars(expression))
        missing = [v for v in names if v not in ranges]
        if missing:
            raise ApiException(
                "invalid_range", f"missing range(s) for: {', '.join(missing)}")
        unknown = set(ranges) - set(names)
        if unknown:
            raise ApiException(
                "invalid_range",
                f"range(s) for unknown variable(s): {', '.join(sorted(unknown))}")
        variables = [(v, ranges[v][0], ranges[v][1]) for v in names]
        n = points if points is not None else DEFAULT_SAMPLE_SIZE
        s = seed if seed is not None else default_seed()
    return E.Spec(expression, variables, sample_size=n, seed=s)


def _echo_json(obj) -> None:
    click.echo(json.dumps(obj, separators=_JSON_SEPARATORS))


def _hex(x: float) -> str:
    return f"{float_to_bits(float(x)):016x}"


# ---------------------------------------------------------------------------


@click.group()
@click.version_option(package_name="fpwb", prog_name="fpwb")
def main() -> None:
    """Floating-point rounding-error workbench."""


_input_options = [
    click.option("--expr", "expr_text", default=None,
                 help="Expression in natural math syntax."),
    click.option("--fpcore", "fpcore_path", default=None,
                 type=click.Path(), help="Read the input from an FPCore file."),
    click.option("--range", "range_flags", multiple=True, metavar="NAME=LO:HI",
                 help="Variable range; scientific notation and 0x-prefixed "
                      "bit patterns accepted. Repeatable."),
    click.option("--points", type=int, default=None,
                 help=f"Sample size (default {DEFAULT_SAMPLE_SIZE})."),
    click.option("--seed", type=int, default=None,
                 help="Sampling seed (default: FPWB_SEED or 42)."),
]


def _with_input_options(fn):
    for opt in reversed(_input_options):
        fn = opt(fn)
    return fn


@main.command()
@_with_input_options
@click.option("--format", "fmt", type=click.Choice(["table", "json", "csv"]),
              default="table", show_default=True)
def analyze(expr_text, fpcore_path, range_flags, points, seed, fmt):
    """Measure rounding error of an expression over sampled inputs."""
    try:
        spec = _spec_from_inputs(expr_text, fpcore_path, range_flags, points, seed)
        sample = SS.get_or_build_sample(spec)
        report = analysis.analyze(spec.expression, spec, sample)
    except Exception as exc:
        raise _fail(exc) from None
    if fmt == "json":
        _echo_json(_report_wire(report))
        return
    if fmt == "csv":
        names = sample.var_order
        header = ["index"]
        for n in names:
            header += [n, f"{n}_hex"]
        header += ["error_bits", "error_bits_hex"]
        click.echo(",".join(header))
        for j in range(report.n_points):
            row = [str(j)]
            for vi in range(len(names)):
                v = float(sample.points[vi, j])
                row += [repr(v), _hex(v)]
            b = float(report.errors[j])
            row += [repr(b), _hex(b)]
            click.echo(",".join(row))
        return
    click.echo(f"expression      {E.emit_math(report.expression)}")
    for n, lo, hi in spec.variables:
        click.echo(f"range           {n} in [{lo!r}, {hi!r}]")
    click.echo(f"points          {report.n_points}   (seed {spec.seed})")
    click.echo(f"average bits    {report.avg_bits:.6f}")
    click.echo(f"max bits        {report.max_bits:.6f}")
    if report.n_invalid:
        click.echo(f"invalid points  {report.n_invalid}")
    if report.n_unsamplable:
        click.echo(f"uncertified     {report.n_unsamplable}")


@main.command()
@_with_input_options
@click.option("--k", type=int, default=5, show_default=True,
              help="How many rewritings to return.")
@click.option("--budget", "budget_seconds", type=float, default=20.0,
              show_default=True, help="Search time budget in seconds.")
@click.option("--format", "fmt", type=click.Choice(["table", "json", "csv"]),
              default="json", show_default=True)
def suggest(expr_text, fpcore_path, range_flags, points, seed, k,
            budget_seconds, fmt):
    """Search for more accurate rewritings; prints them with derivations."""
    timed_out = False
    try:
        spec = _spec_from_inputs(expr_text, fpcore_path, range_flags, points, seed)
        if k < 1:
            raise ApiException("invalid_range", "--k must be at least 1")
        sample = SS.get_or_build_sample(spec)
        try:
            results = run_suggest(spec, sample, spec.expression, k=k,
                                  budget_seconds=budget_seconds)
        except SuggestTimeout as exc:
            results = exc.partial
            timed_out = True
            click.echo(
                f"warning: timeout: search budget of {budget_seconds:g}s "
                f"exceeded; showing {len(results)} partial result(s)", err=True)
    except Exception as exc:
        raise _fail(exc) from None
    if fmt == "json":
        _echo_json({
            "timed_out": timed_out,
            "candidates": [_candidate_wire(c) for c in results],
        })
    elif fmt == "csv":
        click.echo("rank,avg_bits,avg_bits_hex,max_bits,max_bits_hex,"
                   "derivation_steps,expression")
        for i, c in enumerate(results, 1):
            click.echo(",".join([
                str(i), repr(c.report.avg_bits), _hex(c.report.avg_bits),
                repr(c.report.max_bits), _hex(c.report.max_bits),
                str(len(c.derivation)),
                json.dumps(E.emit_math(c.expression)),
            ]))
    else:
        for i, c in enumerate(results, 1):
            click.echo(f"#{i}  avg {c.report.avg_bits:10.6f}  "
                       f"max {c.report.max_bits:10.6f}  "
                       f"{E.emit_math(c.expression)}")
            for step in c.derivation.steps:
                at = "/".join(map(str, step.path)) or "root"
                click.echo(f"      - {step.rule} @ {at}")


@main.command("localerror")
@click.option("--expr", "expr_text", default=None,
              help="Expression in natural math syntax.")
@click.option("--fpcore", "fpcore_path", default=None, type=click.Path(),
              help="Read the input from an FPCore file.")
@click.option("--point", "point_flags", multiple=True, metavar="NAME=VALUE",
              required=True, help="Input value; repeatable, one per variable.")
@click.option("--format", "fmt", type=click.Choice(["table", "json", "csv"]),
              default="table", show_default=True)
def localerror(expr_text, fpcore_path, point_flags, fmt):
    """Per-operator error contributions at one input point."""
    try:
        if (expr_text is None) == (fpcore_path is None):
            raise ApiException(
                "parse_error", "provide exactly one of --expr or --fpcore FILE")
        if fpcore_path is not None:
            with open(fpcore_path, "r", encoding="utf-8") as f:
                expression = fpcore.parse_fpcore(f.read()).expression
        else:
            expression = parse_math(expr_text)
        point: dict[str, float] = {}
        for item in point_flags:
            name, sep, value = item.partition("=")
            if not sep or not name:
                raise ApiException(
                    "invalid_range",
                    f"--point must look like name=VALUE, got {item!r}")
            point[name.strip()] = _parse_bound(value, f"point value for {name}")
        missing = E.free_vars(expression) - set(point)
        if missing:
            raise ApiException(
                "unbound_variable",
                f"point is missing value(s) for: {', '.join(sorted(missing))}")
        tree = analysis.local_error_at(expression, point)
    except Exception as exc:
        raise _fail(exc) from None
    if fmt == "json":
        _echo_json({
            "expression": E.emit_math(expression),
            "point": {n: {"value": v, "hex": _hex(v)}
                      for n, v in point.items()},
            "tree": tree.to_json(),
        })
        return
    flat = tree.flatten()
    if fmt == "csv":
        click.echo("path,label,kind,local_bits,local_bits_hex,exact_hex")
        for node in flat:
            exact_hex = ""
            if hasattr(node.exact, "is_number") and node.exact.is_number:
                exact_hex = _hex(node.exact.float64)
            click.echo(",".join([
                "/".join(map(str, node.path)) or "root",
                json.dumps(node.label), node.kind,
                repr(node.local_bits), _hex(node.local_bits), exact_hex,
            ]))
        return
    click.echo(f"expression   {E.emit_math(expression)}")
    click.echo("point        " + ", ".join(f"{n} = {v!r}"
                                           for n, v in point.items()))
    click.echo(f"{'node':<24} {'kind':<6} {'local bits':>12}")
    for node in flat:
        depth = len(node.path)
        label = "  " * depth + node.label
        click.echo(f"{label:<24} {node.kind:<6} {node.local_bits:>12.6f}")


@main.command()
@click.option("--direction", required=True, metavar="SRC->DST",
              help="Source and target syntax: math->fpcore, fpcore->math, "
                   "math->latex, fpcore->latex, or math->math. A ':' may "
                   "stand in for '->' to avoid shell quoting.")
@click.option("--text", "text", default=None,
              help="Input text (reads stdin when omitted).")
@click.option("--range", "range_flags", multiple=True, metavar="NAME=LO:HI",
              help="Ranges for the FPCore precondition when the target "
                   "is fpcore (default: the full binary64 range).")
@click.option("--points", type=int, default=None)
@click.option("--seed", type=int, default=None)
def translate(direction, text, range_flags, points, seed):
    """Convert between natural math syntax, FPCore, and LaTeX."""
    try:
        if text is None:
            text = sys.stdin.read()
        ranges = None
        if range_flags:
            ranges = {n: list(pair) for n, pair
                      in _parse_range_flags(range_flags).items()}
        normalized = direction.replace(":", "->") if "->" not in direction \
            else direction
        click.echo(translate_text(normalized, text, ranges=ranges,
                                  n=points, seed=seed))
    except Exception as exc:
        raise _fail(exc) from None


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8002, show_default=True)
@click.option("--cors-origin", "cors_origins", multiple=True,
              help="Allowed CORS origin (repeatable; default: any).")
def serve(host, port, cors_origins):
    """Run the HTTP API server."""
    import uvicorn

    from .server import create_app

    app = create_app(list(cors_origins) if cors_origins else None)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
