"""totcheck: a size-change totality checker and lazy evaluator for a small
language with inductive data and coinductive records."""

from .surface import (
    DesugarError,
    ParseError,
    SourceError,
    desugar,
    format_program,
    parse_program,
    parse_term,
)
from .typesys import (
    CoverageError,
    HigherOrderError,
    TypeError,
    check_exhaustiveness,
    check_full_application,
    infer_types,
    validate_type_decls,
)
from .games import annotate_program, assign_priorities, build_type_graph, game_dot
from .sct import Weight, coherent, collapse_depth, collapse_weight, reduce, term_leq
from .callgraph import (
    Call,
    ResourceError,
    analyze_group,
    check_loop,
    collapsed_compose,
    compose,
    extract_calls,
    transitive_closure,
)
from .eval import Defs, Fuel, force_depth, whnf
from .cli import analyze_source, main

__version__ = "0.1.0"

__all__ = [
    "Call",
    "CoverageError",
    "Defs",
    "DesugarError",
    "Fuel",
    "HigherOrderError",
    "ParseError",
    "ResourceError",
    "SourceError",
    "TypeError",
    "Weight",
    "analyze_group",
    "analyze_source",
    "annotate_program",
    "assign_priorities",
    "build_type_graph",
    "check_exhaustiveness",
    "check_full_application",
    "check_loop",
    "coherent",
    "collapse_depth",
    "collapse_weight",
    "collapsed_compose",
    "compose",
    "desugar",
    "extract_calls",
    "force_depth",
    "format_program",
    "game_dot",
    "infer_types",
    "main",
    "parse_program",
    "parse_term",
    "reduce",
    "term_leq",
    "transitive_closure",
    "validate_type_decls",
    "whnf",
]
