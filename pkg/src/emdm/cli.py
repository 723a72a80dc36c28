"""Operator command line: validate schemas, manage stores, run queries,
start the service.

Exit status: 0 success, 1 diagnostics or violations reported, 2 usage or
configuration errors.  `--clock-year` pins CurrentYear() so outputs are
reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from typing import Optional

from .compiler import CompiledSchema, compile_schema
from .datalog import format_generation, seeded_closure, transitive_closure
from .engine import EvalContext, check_all
from .model import count_elements
from .parser import parse_schema
from .store import (
    Database, bulk_import, format_person_label, load_snapshot, save_snapshot,
)

USAGE_EXIT = 2
PROBLEM_EXIT = 1


def corpus_path() -> str:
    """Path of the bundled Genealogies schema."""
    return str(resources.files("emdm").joinpath("corpus/genealogies.emdm"))


def _read_schema(path: Optional[str]):
    path = path or corpus_path()
    try:
        with open(path, encoding="utf-8") as fh:
            return path, fh.read()
    except OSError as exc:
        print(f"cannot read schema: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _load_compiled(path: Optional[str]) -> tuple[CompiledSchema, list]:
    _, text = _read_schema(path)
    parsed = parse_schema(text)
    if not parsed.ok:
        for d in parsed.diagnostics:
            print(d, file=sys.stderr)
        raise SystemExit(PROBLEM_EXIT)
    result = compile_schema(parsed.doc)
    if not result.ok:
        for d in result.diagnostics:
            print(d, file=sys.stderr)
        raise SystemExit(PROBLEM_EXIT)
    return result.schema, parsed.diagnostics + result.diagnostics


def _ctx(args) -> EvalContext:
    if args.clock_year is not None:
        return EvalContext(args.clock_year)
    return EvalContext.now()


def _open_store(args, cs: CompiledSchema) -> Database:
    if not args.store:
        print("--store PATH is required for this command", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)
    try:
        return load_snapshot(args.store, cs)
    except Exception as exc:
        print(f"cannot load store: {exc}", file=sys.stderr)
        raise SystemExit(PROBLEM_EXIT)


def _emit(args, payload: dict, text_lines: list[str]):
    if args.format == "json":
        print(json.dumps(payload, ensure_ascii=False, indent=2))
    else:
        for line in text_lines:
            print(line)


# -- subcommands -------------------------------------------------------------


def cmd_check(args) -> int:
    _, text = _read_schema(args.schema_file or args.schema)
    parsed = parse_schema(text)
    for d in parsed.diagnostics:
        print(d, file=sys.stderr)
    if not parsed.ok:
        return PROBLEM_EXIT
    functions, constraints, rules = count_elements(parsed.doc)
    _emit(args,
          {"functions": functions, "constraints": constraints, "rules": rules,
           "sets": len(parsed.doc.sets),
           "warnings": len(parsed.diagnostics)},
          [f"{functions} functions, {constraints} constraints, {rules} rules"])
    return 0


def cmd_compile(args) -> int:
    cs, diagnostics = _load_compiled(args.schema_file or args.schema)
    for d in diagnostics:
        print(d, file=sys.stderr)
    s = cs.stats
    _emit(args,
          {"tables": s.tables, "foreignKeys": s.foreign_keys,
           "uniqueKeys": s.unique_keys, "functions": s.functions,
           "explicitConstraints": s.explicit_constraints,
           "compiledConstraints": s.compiled_constraints,
           "datalogRules": s.datalog_rules},
          [f"{s.tables} tables, {s.foreign_keys} foreign keys, "
           f"{s.unique_keys} unique keys, {s.explicit_constraints} constraints "
           f"({s.compiled_constraints} compiled), {s.datalog_rules} rules"])
    return 0


def cmd_init(args) -> int:
    cs, _ = _load_compiled(args.schema)
    if not args.store:
        print("--store PATH is required", file=sys.stderr)
        return USAGE_EXIT
    db = Database(cs)
    save_snapshot(db, args.store)
    print(f"initialized empty store at {args.store}")
    return 0


def cmd_import(args) -> int:
    cs, _ = _load_compiled(args.schema)
    db = _open_store(args, cs)
    ctx = _ctx(args)
    any_rejected = False
    for spec in args.files:
        if "=" not in spec:
            print(f"expected TABLE=FILE, got {spec!r}", file=sys.stderr)
            return USAGE_EXIT
        table, path = spec.split("=", 1)
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"cannot read {path}: {exc}", file=sys.stderr)
            return USAGE_EXIT
        try:
            db, reports = bulk_import(db, table, text, cs, ctx, mode=args.mode)
        except Exception as exc:
            print(f"{table}: import failed: {exc}", file=sys.stderr)
            return PROBLEM_EXIT
        accepted = sum(1 for r in reports if r.accepted)
        rejected = [r for r in reports if not r.accepted]
        print(f"{table}: {accepted} row(s) imported, {len(rejected)} rejected")
        for r in rejected[:20]:
            print(f"  row {r.line} (x={r.x}): {r.message}", file=sys.stderr)
        if rejected:
            any_rejected = True
            if args.mode == "strict":
                return PROBLEM_EXIT
    save_snapshot(db, args.store)
    return PROBLEM_EXIT if any_rejected else 0


def cmd_validate(args) -> int:
    cs, _ = _load_compiled(args.schema)
    db = _open_store(args, cs)
    report = check_all(db, cs, _ctx(args))
    if report.accepted:
        print("store is valid: all axioms hold")
        return 0
    print(f"{len(report.violations)} violation(s)")
    for v in report.violations:
        print(f"  {v.message}")
    return PROBLEM_EXIT


def cmd_closure(args) -> int:
    cs, _ = _load_compiled(args.schema)
    db = _open_store(args, cs)
    persons = db.rows("PERSONS")
    if args.seed is None and args.seed_id is None:
        pairs = transitive_closure(db)
        if args.format == "json":
            print(json.dumps({
                "count": len(pairs),
                "pairs": [[p.ancestor, p.descendant] for p in pairs],
            }))
        else:
            print(f"{len(pairs)} PAIR(S) FOUND")
            for p in pairs:
                print(f"{format_person_label(persons[p.ancestor])}\t"
                      f"{format_person_label(persons[p.descendant])}")
        return 0
    seed = args.seed_id
    if seed is None:
        matches = [x for x, row in persons.items()
                   if args.seed.casefold() in format_person_label(row).casefold()]
        if not matches:
            print(f"no person matches {args.seed!r}", file=sys.stderr)
            return PROBLEM_EXIT
        if len(matches) > 1:
            print(f"{len(matches)} persons match {args.seed!r}; "
                  "use --seed-id", file=sys.stderr)
            for x in matches[:10]:
                print(f"  {x}: {format_person_label(persons[x])}",
                      file=sys.stderr)
            return PROBLEM_EXIT
        seed = matches[0]
    if seed not in persons:
        print(f"no person with x={seed}", file=sys.stderr)
        return PROBLEM_EXIT
    entries = seeded_closure(db, seed)
    if args.format == "json":
        print(json.dumps({
            "seed": seed,
            "count": len(entries),
            "entries": [{"x": e.person, "generation": e.generation,
                         "label": e.label} for e in entries],
        }))
    else:
        print(f"{len(entries)} PERSON(S) IN CLOSURE OF "
              f"{format_person_label(persons[seed])}")
        for e in entries:
            print(f"{format_generation(e.generation, e.label)}\t"
                  f"{format_person_label(persons[e.person])}")
    return 0


def cmd_serve(args) -> int:
    from .service import ServeConfig, serve
    cs, _ = _load_compiled(args.schema)
    db = _open_store(args, cs)
    config = ServeConfig(host=args.host, port=args.port,
                         clock_year=args.clock_year, store_path=args.store,
                         static_dir=args.static)
    try:
        server = serve(db, cs, config)
    except Exception as exc:
        print(f"cannot start service: {exc}", file=sys.stderr)
        return PROBLEM_EXIT
    print(f"serving on http://{config.host}:{config.port}/ "
          f"(clock {config.clock_year or 'system'})")
    try:
        server._thread.join()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emdm",
        description="Schema compiler and data engine for mathematical "
                    "data models")
    parser.add_argument("--schema", metavar="PATH",
                        help="schema file (default: bundled Genealogies)")
    parser.add_argument("--store", metavar="PATH", help="snapshot file")
    parser.add_argument("--clock-year", type=int, metavar="N",
                        help="pin CurrentYear() for reproducible output")
    parser.add_argument("--format", choices=("text", "json"), default="text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse a schema and print its counts")
    p.add_argument("schema_file", nargs="?", help="schema path")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("compile", help="compile and print relational stats")
    p.add_argument("schema_file", nargs="?")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("init", help="create an empty store snapshot")
    p.set_defaults(fn=cmd_init)

    p = sub.add_parser("import", help="bulk-load CSV files into the store")
    p.add_argument("files", nargs="+", metavar="TABLE=FILE")
    p.add_argument("--mode", choices=("strict", "report"), default="strict")
    p.set_defaults(fn=cmd_import)

    p = sub.add_parser("validate", help="recheck every axiom over the store")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("closure", help="ancestor/descendant queries")
    p.add_argument("--seed", metavar="LABEL",
                   help="person label (substring, must be unique)")
    p.add_argument("--seed-id", type=int, metavar="X", help="person id")
    p.set_defaults(fn=cmd_closure)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--static", metavar="DIR",
                   help="also serve a built web client from this directory")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
