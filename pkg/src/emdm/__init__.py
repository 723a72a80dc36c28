"""Schema compiler and runtime engine for mathematical data model schemas.

Parse a schema (sets, typed functions, first-order constraints, inference
rules), compile it to a relational model with surrogate keys, enforce every
constraint incrementally on writes under three-valued NULL semantics, run
ancestor-closure queries by semi-naive fixpoint, and serve it all over a
small JSON API.
"""

from .compiler import (
    CompiledSchema, CompileResult, compile_schema, dependency_scope,
    lint_meta_axioms, schema_stats,
)
from .datalog import (
    ClosurePair, GenerationEntry, evaluate_program, seeded_closure,
    sort_closure_pairs, transitive_closure,
)
from .engine import (
    CheckReport, Delete, EvalContext, Insert, Update, Violation, check_all,
    check_write, compare_dates, compute_derived, detect_cycle, eval_formula,
)
from .model import SchemaDoc, count_elements
from .parser import (
    Diagnostic, ParseResult, SchemaError, load_schema, parse_formula,
    parse_schema, render_schema,
)
from .store import (
    Database, apply, bulk_import, format_person_label, list_filtered,
    load_snapshot, save_snapshot,
)

__version__ = "0.1.0"

__all__ = [
    "CheckReport", "ClosurePair", "CompileResult", "CompiledSchema",
    "Database", "Delete", "Diagnostic", "EvalContext", "GenerationEntry",
    "Insert", "ParseResult", "SchemaDoc", "SchemaError", "Update",
    "Violation", "apply", "bulk_import", "check_all", "check_write",
    "compare_dates", "compile_schema", "compute_derived", "count_elements",
    "dependency_scope", "detect_cycle", "eval_formula", "evaluate_program",
    "format_person_label", "lint_meta_axioms", "list_filtered",
    "load_schema", "load_snapshot", "parse_formula", "parse_schema",
    "render_schema", "save_snapshot", "schema_stats", "seeded_closure",
    "sort_closure_pairs", "transitive_closure",
]
