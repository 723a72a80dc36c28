"""JSON-over-HTTP facade for the engine.

Endpoints (all under /api): schema metadata, per-set registries with
substring filters, row CRUD with constraint verdicts (422 carries the
engine's violations verbatim, 409 guards referenced deletes), candidate
pickers that only offer values the engine would accept, per-set active
axioms, person detail pages, and the two closure queries.  Mutations are
funnelled through a single writer lock; closure queries run on a copied
snapshot so they never block writers.
"""

from __future__ import annotations

import json
import re
import threading
import time
import urllib.parse
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from .compiler import CompiledSchema
from .datalog import format_generation, seeded_closure, transitive_closure
from .engine import (
    Delete, EvalContext, Insert, NotFound, Update, UnknownField, UnknownTable,
    check_write, compute_derived,
)
from .store import (
    Database, Listing, apply, format_person_label, list_filtered, row_label,
    save_snapshot,
)


@dataclass
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8750
    clock_year: Optional[int] = None     # None: wall clock
    store_path: Optional[str] = None     # persist snapshot after each write
    static_dir: Optional[str] = None     # serve a built web client, if any


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, violations=()):
        self.status = status
        self.code = code
        self.message = message
        self.violations = list(violations)
        super().__init__(message)


def _violation_payload(violations):
    return [{"constraintId": v.constraint_id,
             "witnesses": [{"table": t, "x": x} for t, x in v.witnesses],
             "message": v.message}
            for v in violations]


class Api:
    """Transport-independent request handling; the HTTP layer is thin."""

    def __init__(self, db: Database, cs: CompiledSchema, config: ServeConfig):
        self.db = db
        self.cs = cs
        self.config = config
        self.write_lock = threading.Lock()

    def ctx(self) -> EvalContext:
        if self.config.clock_year is not None:
            return EvalContext(self.config.clock_year)
        return EvalContext.now()

    # -- helpers -------------------------------------------------------------

    def _table(self, name: str) -> str:
        for t in self.cs.tables:
            if t.lower() == name.lower():
                return t
        raise ApiError(404, "UnknownTable", f"unknown set {name!r}")

    def _row_payload(self, table: str, row: dict, ctx: EvalContext) -> dict:
        out = dict(row)
        derived = compute_derived(self.db, self.cs, table, row["x"], ctx)
        for name, value in derived.items():
            out[name] = list(value) if isinstance(value, tuple) else value
        out["label"] = row_label(self.db, table, row)
        refs = {}
        for col, target in self.cs.tables[table].foreign_keys:
            ref = row.get(col)
            if ref is not None:
                target_row = self.db.rows(target).get(ref)
                if target_row is not None:
                    refs[col] = row_label(self.db, target, target_row)
        out["refLabels"] = refs
        return out

    def _listing_payload(self, table: str, listing: Listing,
                         ctx: EvalContext) -> dict:
        return {
            "rows": [self._row_payload(table, r, ctx) for r in listing.rows],
            "total": listing.total,
            "matched": listing.matched,
            "clockYear": ctx.clock_year,
        }

    # -- endpoints -----------------------------------------------------------

    @staticmethod
    def _column_type(col) -> str:
        from .model import EnumChars, UnicodeText
        if col.is_ref:
            return "ref"
        if isinstance(col.storage, EnumChars):
            return "enum"
        if isinstance(col.storage, UnicodeText):
            return "text"
        return "int"

    def get_schema(self) -> dict:
        stats = self.cs.stats
        return {
            "sets": [
                {
                    "name": t.name,
                    "columns": [
                        {
                            "name": c.name,
                            "nullable": c.nullable,
                            "kind": "ref" if c.is_ref else "value",
                            "type": self._column_type(c),
                            "target": c.storage.set_name if c.is_ref else None,
                            "enum": list(c.storage.values)
                            if hasattr(c.storage, "values") else None,
                        }
                        for c in t.columns
                    ],
                }
                for t in self.cs.tables.values()
            ],
            "stats": {
                "tables": stats.tables,
                "foreignKeys": stats.foreign_keys,
                "uniqueKeys": stats.unique_keys,
                "functions": stats.functions,
                "explicitConstraints": stats.explicit_constraints,
                "datalogRules": stats.datalog_rules,
            },
        }

    def list_set(self, table: str, filter_text: str, offset: int,
                 limit: Optional[int]) -> dict:
        table = self._table(table)
        ctx = self.ctx()
        with self.write_lock:
            listing = list_filtered(self.db, table, filter_text, offset, limit)
            return self._listing_payload(table, listing, ctx)

    def get_row(self, table: str, x: int) -> dict:
        table = self._table(table)
        row = self.db.rows(table).get(x)
        if row is None:
            raise ApiError(404, "NotFound", f"{table} has no row x={x}")
        return self._row_payload(table, row, self.ctx())

    def create_row(self, table: str, values: dict) -> dict:
        table = self._table(table)
        values = dict(values)
        values.pop("x", None)  # surrogate is read-only over the wire
        with self.write_lock:
            _, report = self._apply(Insert(table, values))
            new_x = max(self.db.rows(table))
            return self._row_payload(table, self.db.rows(table)[new_x], self.ctx())

    def update_row(self, table: str, x: int, values: dict) -> dict:
        table = self._table(table)
        values = dict(values)
        values.pop("x", None)
        with self.write_lock:
            self._require_row(table, x)
            self._apply(Update(table, x, values))
            return self._row_payload(table, self.db.rows(table)[x], self.ctx())

    def delete_row(self, table: str, x: int) -> dict:
        table = self._table(table)
        with self.write_lock:
            self._require_row(table, x)
            _, report = self._apply(Delete(table, x), delete=True)
            return {"deleted": x}

    def _require_row(self, table: str, x: int):
        if x not in self.db.rows(table):
            raise ApiError(404, "NotFound", f"{table} has no row x={x}")

    def _apply(self, op, delete: bool = False):
        try:
            db, report = apply(self.db, op, self.cs, self.ctx())
        except (UnknownField, UnknownTable) as exc:
            raise ApiError(422, "UnknownField", str(exc))
        except NotFound as exc:
            raise ApiError(404, "NotFound", str(exc))
        if not report.accepted:
            referenced = delete and any(
                v.constraint_id.startswith("fk:") for v in report.violations)
            raise ApiError(409 if referenced else 422,
                           "ConstraintViolation",
                           "the write violates active axioms",
                           report.violations)
        if self.config.store_path:
            save_snapshot(self.db, self.config.store_path)
        return db, report

    def candidates(self, table: str, fieldname: str, draft: dict,
                   filter_text: str = "") -> dict:
        """Rows whose selection for the ref field cannot definitely violate
        any axiom, given the rest of the draft (missing fields stay NULL and
        evaluate as Unknown)."""
        table = self._table(table)
        column = self.cs.tables[table].column(fieldname)
        if column is None or not column.is_ref:
            raise ApiError(404, "UnknownField",
                           f"{fieldname!r} is not a reference field of {table}")
        target = column.storage.set_name
        ctx = self.ctx()
        draft = dict(draft)
        draft_x = draft.pop("x", None)
        with self.write_lock:
            listing = list_filtered(self.db, target, filter_text)
            keep, labels = [], []
            for row, label in zip(listing.rows, listing.labels):
                values = dict(draft)
                values[fieldname] = row["x"]
                if draft_x is None:
                    op = Insert(table, values)
                else:
                    op = Update(table, int(draft_x), values)
                try:
                    report = check_write(self.db, op, self.cs, ctx,
                                         totality=False)
                except (UnknownField, NotFound, UnknownTable) as exc:
                    raise ApiError(422, "BadDraft", str(exc))
                if report.accepted:
                    keep.append(row)
                    labels.append(label)
            return {
                "field": fieldname,
                "target": target,
                "rows": [{"x": r["x"], "label": lab}
                         for r, lab in zip(keep, labels)],
                "matched": len(keep),
            }

    def active_axioms(self, table: str) -> dict:
        table = self._table(table)
        texts = [cc.display_text for cc in self.cs.constraints
                 if table in cc.tables]
        return {"set": table, "axioms": texts}

    def person_detail(self, x: int) -> dict:
        ctx = self.ctx()
        with self.write_lock:
            person = self.db.rows("PERSONS").get(x)
            if person is None:
                raise ApiError(404, "NotFound", f"PERSONS has no row x={x}")
            marriages = [self._row_payload("MARRIAGES", r, ctx)
                         for r in self.db.rows("MARRIAGES").values()
                         if r["Husband"] == x or r["Wife"] == x]
            children = [self._row_payload("PERSONS", r, ctx)
                        for r in self.db.rows("PERSONS").values()
                        if r.get("Mother") == x or r.get("Father") == x]
            reigns = [self._row_payload("REIGNS", r, ctx)
                      for r in self.db.rows("REIGNS").values()
                      if r["Ruler"] == x]
            return {
                "person": self._row_payload("PERSONS", person, ctx),
                "marriages": marriages,
                "children": children,
                "reigns": reigns,
            }

    def closure_all(self) -> dict:
        with self.write_lock:
            snapshot = self.db.clone()
        started = time.perf_counter()
        pairs = transitive_closure(snapshot)
        elapsed = round((time.perf_counter() - started) * 1000, 3)
        persons = snapshot.rows("PERSONS")
        return {
            "count": len(pairs),
            "elapsedMs": elapsed,
            "pairs": [
                {"ancestor": {"x": p.ancestor,
                              "label": format_person_label(persons[p.ancestor])},
                 "descendant": {"x": p.descendant,
                                "label": format_person_label(persons[p.descendant])}}
                for p in pairs
            ],
        }

    def closure_seed(self, x: int) -> dict:
        with self.write_lock:
            snapshot = self.db.clone()
        persons = snapshot.rows("PERSONS")
        if x not in persons:
            raise ApiError(404, "NotFound", f"PERSONS has no row x={x}")
        started = time.perf_counter()
        entries = seeded_closure(snapshot, x)
        elapsed = round((time.perf_counter() - started) * 1000, 3)
        return {
            "seed": {"x": x, "label": format_person_label(persons[x])},
            "count": len(entries),
            "elapsedMs": elapsed,
            "entries": [
                {"x": e.person,
                 "generation": e.generation,
                 "label": e.label,
                 "display": format_generation(e.generation, e.label),
                 "person": format_person_label(persons[e.person])}
                for e in entries
            ],
        }


# ---------------------------------------------------------------------------
# HTTP layer


_ROUTES = [
    ("GET", re.compile(r"^/api/schema$"), "schema"),
    ("GET", re.compile(r"^/api/queries/transitive-closure$"), "closure_all"),
    ("GET", re.compile(r"^/api/queries/closure/(?P<x>\d+)$"), "closure_seed"),
    ("GET", re.compile(r"^/api/persons/(?P<x>\d+)/detail$"), "person_detail"),
    ("GET", re.compile(r"^/api/(?P<set>[A-Za-z]+)/candidates$"), "candidates"),
    ("GET", re.compile(r"^/api/(?P<set>[A-Za-z]+)/axioms$"), "axioms"),
    ("GET", re.compile(r"^/api/(?P<set>[A-Za-z]+)/(?P<x>\d+)$"), "get_row"),
    ("GET", re.compile(r"^/api/(?P<set>[A-Za-z]+)$"), "list"),
    ("POST", re.compile(r"^/api/(?P<set>[A-Za-z]+)$"), "create"),
    ("PUT", re.compile(r"^/api/(?P<set>[A-Za-z]+)/(?P<x>\d+)$"), "update"),
    ("DELETE", re.compile(r"^/api/(?P<set>[A-Za-z]+)/(?P<x>\d+)$"), "delete"),
]


class _Handler(BaseHTTPRequestHandler):
    api: Api = None  # set by serve()
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload: dict):
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods",
                         "GET, POST, PUT, DELETE, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()
        self.wfile.write(body)

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if not length:
            return {}
        raw = self.rfile.read(length)
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ApiError(422, "BadJson", f"request body is not JSON: {exc}")
        if not isinstance(doc, dict):
            raise ApiError(422, "BadJson", "request body must be an object")
        return doc

    def do_OPTIONS(self):
        self._send(200, {})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    def do_DELETE(self):
        self._dispatch("DELETE")

    def _dispatch(self, method: str):
        parsed = urllib.parse.urlparse(self.path)
        query = urllib.parse.parse_qs(parsed.query)

        def q(name, default=None):
            return query.get(name, [default])[0]

        try:
            for m, pattern, action in _ROUTES:
                if m != method:
                    continue
                match = pattern.match(parsed.path)
                if not match:
                    continue
                api = self.api
                groups = match.groupdict()
                if action == "schema":
                    return self._send(200, api.get_schema())
                if action == "closure_all":
                    return self._send(200, api.closure_all())
                if action == "closure_seed":
                    return self._send(200, api.closure_seed(int(groups["x"])))
                if action == "person_detail":
                    return self._send(200, api.person_detail(int(groups["x"])))
                if action == "candidates":
                    draft_raw = q("draft", "{}")
                    try:
                        draft = json.loads(draft_raw)
                    except json.JSONDecodeError:
                        raise ApiError(422, "BadJson", "draft must be JSON")
                    return self._send(200, api.candidates(
                        groups["set"], q("field", ""), draft, q("filter", "")))
                if action == "axioms":
                    return self._send(200, api.active_axioms(groups["set"]))
                if action == "get_row":
                    return self._send(200, api.get_row(groups["set"],
                                                       int(groups["x"])))
                if action == "list":
                    limit = q("limit")
                    return self._send(200, api.list_set(
                        groups["set"], q("filter", "") or "",
                        int(q("offset", "0") or 0),
                        int(limit) if limit else None))
                if action == "create":
                    return self._send(201, api.create_row(groups["set"],
                                                          self._body()))
                if action == "update":
                    return self._send(200, api.update_row(
                        groups["set"], int(groups["x"]), self._body()))
                if action == "delete":
                    return self._send(200, api.delete_row(groups["set"],
                                                          int(groups["x"])))
            if self.api.config.static_dir and method == "GET":
                if self._serve_static(parsed.path):
                    return
            raise ApiError(404, "NoRoute", f"no route for {method} {parsed.path}")
        except ApiError as exc:
            self._send(exc.status, {
                "error": exc.code,
                "message": exc.message,
                "violations": _violation_payload(exc.violations),
            })
        except Exception as exc:  # noqa: BLE001 - surface as 500, never hang
            self._send(500, {"error": "Internal", "message": str(exc),
                             "violations": []})

    def _serve_static(self, path: str) -> bool:
        import os
        root = os.path.abspath(self.api.config.static_dir)
        rel = path.lstrip("/") or "index.html"
        full = os.path.abspath(os.path.join(root, rel))
        if not full.startswith(root) or not os.path.isfile(full):
            if path in ("/", "/index.html"):
                return False
            full = os.path.join(root, "index.html")
            if not os.path.isfile(full):
                return False
        ctype = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript",
            ".css": "text/css",
            ".svg": "image/svg+xml",
            ".json": "application/json",
        }.get(os.path.splitext(full)[1], "application/octet-stream")
        with open(full, "rb") as fh:
            body = fh.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        return True


def serve(db: Database, cs: CompiledSchema, config: ServeConfig
          ) -> ThreadingHTTPServer:
    """Start the service; returns the running server (caller owns shutdown)."""
    api = Api(db, cs, config)
    handler = type("BoundHandler", (_Handler,), {"api": api})
    try:
        server = ThreadingHTTPServer((config.host, config.port), handler)
    except OSError as exc:
        raise ApiError(500, "BindError",
                       f"cannot bind {config.host}:{config.port}: {exc}")
    server.api = api
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    server._thread = thread
    thread.start()
    return server
