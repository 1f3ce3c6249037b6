"""fpwb — a workbench for diagnosing, repairing, and tuning floating-point
rounding error.

Core surface:

- :mod:`fpwb.expr` — expression AST, Spec, emitters (math / LaTeX).
- :mod:`fpwb.parser` / :mod:`fpwb.fpcore` — natural math syntax and the
  FPCore subset.
- :mod:`fpwb.ordinals` — binary64 ordinals, ulps, and the bits error scale.
- :mod:`fpwb.oracle` — certified exact evaluation (escalating-precision
  interval arithmetic) and batched binary64 evaluation.
- :mod:`fpwb.sampler` — deterministic range samplers.
- :mod:`fpwb.analysis` — whole-expression and per-node error measurement.
- :mod:`fpwb.rules` / :mod:`fpwb.rewriter` — the rewrite catalog, beam
  search (`suggest`), derivation replay, and regime inference.
- :mod:`fpwb.session` — the workbench session: candidate table, cached
  samples and reports, background suggestion jobs, snapshots.
- :mod:`fpwb.server` / :mod:`fpwb.cli` — HTTP+JSON API and command line.
"""

from .analysis import (ErrorReport, LocalNodeReport, analyze,
                       local_error_aggregate, local_error_at)
from .expr import Expr, ExprError, Spec, SpecError, emit_latex, emit_math, free_vars
from .fpcore import FPCoreError, UnsupportedConstructError, emit_fpcore, parse_fpcore
from .oracle import (ExactValue, InvalidPointError, UnsamplablePointError,
                     error_at, eval_exact, eval_float64)
from .ordinals import bits, from_ordinal, to_ordinal, ulps
from .parser import ParseError, UnknownFunctionError, parse_math
from .rewriter import (Candidate, DegenerateRegimesError, Derivation,
                       DivergenceError, Step, SuggestTimeout, infer_regimes,
                       replay, suggest)
from .rules import RewriteRule, RuleError, all_rewrites, fold_constants, rule_by_name, rule_db
from .sampler import EmptySampleError, Sample, sample_spec
from .session import (InvalidRangeError, NotFoundError, Session, SessionError,
                      UnboundVariableError, get_or_build_sample)

__version__ = "0.1.0"

__all__ = [
    "Candidate", "DegenerateRegimesError", "Derivation", "DivergenceError",
    "EmptySampleError", "ErrorReport", "ExactValue", "Expr", "ExprError",
    "FPCoreError", "InvalidPointError", "InvalidRangeError",
    "LocalNodeReport", "NotFoundError", "ParseError", "RewriteRule",
    "RuleError", "Sample", "Session", "SessionError", "Spec", "SpecError",
    "Step", "SuggestTimeout", "UnboundVariableError", "UnknownFunctionError",
    "UnsamplablePointError", "UnsupportedConstructError", "all_rewrites",
    "analyze", "bits", "emit_fpcore", "emit_latex", "emit_math",
    "error_at", "eval_exact", "eval_float64", "fold_constants", "free_vars",
    "from_ordinal", "get_or_build_sample", "infer_regimes",
    "local_error_aggregate", "local_error_at", "parse_fpcore", "parse_math",
    "replay", "rule_by_name", "rule_db", "sample_spec", "suggest",
    "to_ordinal", "ulps", "__version__",
]
