"""Embedded relational store: adjudicated writes, snapshots, bulk import.

A Database is a per-table ordered map from surrogate id to row dict (the
row carries its own "x").  All mutation goes through `apply`, which consults
the constraint engine and either commits atomically or leaves the state
untouched.  Snapshots are deterministic JSON documents keyed by the schema
digest; imports are CSV with a header row, empty fields as NULL, and
references by surrogate integer.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional

from .compiler import CompiledSchema, TableDef
from .engine import (
    CheckReport, EvalContext, Insert, Update, UnknownTable, WriteOp,
    check_all, check_write, derived_evaluators,
)
from .model import IntRange, NaturalBits, SetRef


class StoreError(Exception):
    pass


class DigestMismatch(StoreError):
    pass


class CorruptSnapshot(StoreError):
    pass


class FormatError(StoreError):
    pass


class Database:
    """In-memory relational state for one compiled schema."""

    def __init__(self, cs: CompiledSchema):
        self.cs = cs
        self._tables: dict[str, dict[int, dict]] = {t: {} for t in cs.tables}
        self._next_ids: dict[str, int] = {t: 1 for t in cs.tables}

    # engine-facing protocol
    def rows(self, table: str) -> dict[int, dict]:
        try:
            return self._tables[table]
        except KeyError:
            raise UnknownTable(f"unknown table {table!r}") from None

    def peek_next_id(self, table: str) -> int:
        return self._next_ids[table]

    def table_names(self) -> list[str]:
        return list(self._tables)

    def insert_unchecked(self, table: str, values: dict) -> int:
        """Insert bypassing all checks; staging primitive for imports and
        snapshot loads.  Surrogates never regress within a session."""
        tdef = self.cs.tables[table]
        x = values.get("x")
        if x is None:
            x = self._next_ids[table]
        row = {"x": x}
        for c in tdef.columns:
            row[c.name] = values.get(c.name)
        self.rows(table)[x] = row
        self._next_ids[table] = max(self._next_ids[table], x + 1)
        return x

    def delete_unchecked(self, table: str, x: int) -> None:
        self.rows(table).pop(x, None)

    def clone(self) -> "Database":
        out = Database(self.cs)
        out._tables = {t: {x: dict(r) for x, r in rows.items()}
                       for t, rows in self._tables.items()}
        out._next_ids = dict(self._next_ids)
        return out

    def state(self):
        """Deep snapshot of the stored values, for equality comparisons."""
        return {t: {x: dict(r) for x, r in rows.items()}
                for t, rows in self._tables.items()}

    def __eq__(self, other):
        return (isinstance(other, Database)
                and self.cs.digest == other.cs.digest
                and self.state() == other.state())


def apply(db: Database, w: WriteOp, cs: CompiledSchema,
          ctx: EvalContext) -> tuple[Database, CheckReport]:
    """Commit the write if the engine accepts it; atomic either way."""
    report = check_write(db, w, cs, ctx)
    if not report.accepted:
        return db, report
    if isinstance(w, Insert):
        db.insert_unchecked(w.table, dict(w.values))
    elif isinstance(w, Update):
        row = db.rows(w.table)[w.x]
        for name, value in w.assignments.items():
            row[name] = value
    else:
        db.delete_unchecked(w.table, w.x)
    return db, report


# ---------------------------------------------------------------------------
# Bulk import


@dataclass
class RowReport:
    line: int                 # 1-based data row number (header excluded)
    x: Optional[int]
    accepted: bool
    message: str = ""


def _parse_cell(tdef: TableDef, column: str, text: str):
    if text == "":
        return None
    if column == "x":
        return int(text)
    col = tdef.column(column)
    if isinstance(col.storage, (NaturalBits, IntRange, SetRef)):
        try:
            return int(text)
        except ValueError:
            raise FormatError(f"column {column!r} expects an integer, got {text!r}")
    return text


def bulk_import(db: Database, table: str, text: str, cs: CompiledSchema,
                ctx: EvalContext, mode: str = "strict"
                ) -> tuple[Database, list[RowReport]]:
    """Load CSV rows with deferred reference checking: all rows are staged,
    then the whole state is rechecked once, so files need no topological
    order.  strict mode aborts (state unchanged) on the first rejection;
    report mode drops rejected rows and keeps going.
    """
    if mode not in ("strict", "report"):
        raise ValueError("mode must be 'strict' or 'report'")
    tdef = cs.tables.get(table)
    if tdef is None:
        raise UnknownTable(f"unknown table {table!r}")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty import file")
    header = [h.strip() for h in header]
    known = {"x"} | {c.name for c in tdef.columns}
    bad = [h for h in header if h not in known]
    if bad:
        raise FormatError(f"unknown column(s) {bad} for table {table!r}")
    if "x" not in header:
        raise FormatError("import files must carry the surrogate x column")

    reports: list[RowReport] = []
    staged: list[tuple[int, dict]] = []   # (line, values)
    seen_x: set[int] = set(db.rows(table))
    for line, cells in enumerate(reader, start=1):
        if not cells or all(c == "" for c in cells):
            continue
        if len(cells) != len(header):
            if mode == "strict":
                raise FormatError(f"row {line}: expected {len(header)} fields, "
                                  f"got {len(cells)}")
            reports.append(RowReport(line, None, False, "wrong field count"))
            continue
        try:
            values = {h: _parse_cell(tdef, h, c.strip())
                      for h, c in zip(header, cells)}
        except FormatError as exc:
            if mode == "strict":
                raise
            reports.append(RowReport(line, None, False, str(exc)))
            continue
        x = values.get("x")
        if x is None or x in seen_x:
            msg = "missing surrogate" if x is None else f"duplicate surrogate {x}"
            if mode == "strict":
                raise FormatError(f"row {line}: {msg}")
            reports.append(RowReport(line, x, False, msg))
            continue
        seen_x.add(x)
        staged.append((line, values))

    work = db.clone()
    line_by_x: dict[int, int] = {}
    for line, values in staged:
        x = work.insert_unchecked(table, values)
        line_by_x[x] = line

    dropped: dict[int, str] = {}
    while True:
        report = check_all(work, cs, ctx)
        if report.accepted:
            break
        culprit = _latest_import_witness(report.violations, table, line_by_x,
                                         dropped)
        if mode == "strict":
            x = culprit[0] if culprit else None
            reports.append(RowReport(line_by_x.get(x, 0), x, False,
                                     report.violations[0].message))
            return db, reports
        if culprit is None:
            # violations implicate only pre-existing rows; refuse the lot
            for line, values in staged:
                if values["x"] not in dropped:
                    reports.append(RowReport(line, values["x"], False,
                                             report.violations[0].message))
            return db, reports
        work.delete_unchecked(table, culprit[0])
        dropped[culprit[0]] = culprit[1]

    for line, values in staged:
        x = values["x"]
        if x in dropped:
            reports.append(RowReport(line, x, False, dropped[x]))
        else:
            reports.append(RowReport(line, x, True))
    reports.sort(key=lambda r: r.line)
    db._tables = work._tables
    db._next_ids = work._next_ids
    return db, reports


def _latest_import_witness(violations, table: str, line_by_x: dict[int, int],
                           dropped: dict) -> Optional[tuple[int, str]]:
    """Pick the latest-in-file imported row implicated by the first violation
    that names one; dropping it reproduces sequential-apply outcomes on
    ordered files."""
    for v in violations:
        involved = [x for t, x in v.witnesses
                    if t == table and x in line_by_x and x not in dropped]
        if involved:
            worst = max(involved, key=lambda x: line_by_x[x])
            return worst, v.message
    return None


# ---------------------------------------------------------------------------
# Snapshots


SNAPSHOT_VERSION = 1


def save_snapshot(db: Database, path: str) -> None:
    doc = {
        "version": SNAPSHOT_VERSION,
        "schemaDigest": db.cs.digest,
        "nextIds": {t: db._next_ids[t] for t in sorted(db._next_ids)},
        "tables": {
            t: [db._tables[t][x] for x in sorted(db._tables[t])]
            for t in sorted(db._tables)
        },
    }
    payload = json.dumps(doc, ensure_ascii=False, indent=1, sort_keys=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(payload + "\n")


def load_snapshot(path: str, cs: CompiledSchema) -> Database:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptSnapshot(f"cannot read snapshot {path}: {exc}") from exc
    if not isinstance(doc, dict) or "tables" not in doc or "schemaDigest" not in doc:
        raise CorruptSnapshot(f"{path} is not a snapshot document")
    if doc["schemaDigest"] != cs.digest:
        raise DigestMismatch(
            f"snapshot was produced for schema {doc['schemaDigest'][:12]}..., "
            f"current schema is {cs.digest[:12]}...")
    db = Database(cs)
    for t, rows in doc["tables"].items():
        if t not in cs.tables:
            raise CorruptSnapshot(f"snapshot table {t!r} is not in the schema")
        for row in rows:
            db.insert_unchecked(t, row)
    for t, nid in doc.get("nextIds", {}).items():
        if t in db._next_ids:
            db._next_ids[t] = max(db._next_ids[t], int(nid))
    return db


# ---------------------------------------------------------------------------
# Display labels and filtered listings


def format_person_label(row: dict) -> str:
    """Name, Sex and, when known, birth/passed-away years."""
    parts = f"{row['Name']}, {row['Sex']}"
    born, passed = row.get("BirthYear"), row.get("PassedAwayYear")
    if born is not None and passed is not None:
        return f"{parts} (b. {born}, p. {passed})"
    if born is not None:
        return f"{parts} (b. {born})"
    if passed is not None:
        return f"{parts} (p. {passed})"
    return parts


_MONTHS = ["January", "February", "March", "April", "May", "June", "July",
           "August", "September", "October", "November", "December"]


def format_reign_date(year, month, day) -> str:
    if year is None:
        return "present"
    if month is None:
        return str(year)
    name = _MONTHS[month - 1]
    if day is None:
        return f"{name} {year}"
    return f"{day} {name} {year}"


def _casefold_key(text: str) -> str:
    return text.casefold()


def _year_key(year: Optional[int]) -> tuple[int, int]:
    return (1, 0) if year is None else (0, year)


def row_label(db: Database, table: str, row: dict) -> str:
    if table == "PERSONS":
        return format_person_label(row)
    if table == "COUNTRIES":
        return row["Country"]
    if table == "TITLES":
        return row["Title"]
    if table == "MARRIAGES":
        persons = db.rows("PERSONS")
        h = persons.get(row["Husband"])
        w = persons.get(row["Wife"])
        hl = format_person_label(h) if h else f"#{row['Husband']}"
        wl = format_person_label(w) if w else f"#{row['Wife']}"
        return f"{hl} & {wl}"
    if table == "REIGNS":
        persons = db.rows("PERSONS")
        countries = db.rows("COUNTRIES")
        ruler = persons.get(row["Ruler"])
        country = countries.get(row["Country"])
        rl = format_person_label(ruler) if ruler else f"#{row['Ruler']}"
        cl = country["Country"] if country else f"#{row['Country']}"
        start = format_reign_date(row["FromYear"], row["FromMonth"], row["FromDay"])
        end = format_reign_date(row["ToYear"], row["ToMonth"], row["ToDay"])
        return f"{rl} — {cl} ({start} – {end})"
    # generic fallback: first text column, else the id
    for key, value in row.items():
        if key != "x" and isinstance(value, str):
            return value
    return f"{table}[{row['x']}]"


def _sort_key(db: Database, table: str, row: dict):
    if table == "PERSONS":
        return (_casefold_key(row["Name"]), _year_key(row.get("BirthYear")),
                row["x"])
    if table == "MARRIAGES":
        persons = db.rows("PERSONS")
        h = persons.get(row["Husband"])
        w = persons.get(row["Wife"])
        return (_casefold_key(format_person_label(h)) if h else "",
                _year_key(row.get("MarriageYear")),
                _casefold_key(format_person_label(w)) if w else "",
                row["x"])
    if table == "REIGNS":
        countries = db.rows("COUNTRIES")
        c = countries.get(row["Country"])
        evaluators = derived_evaluators(db.cs, "REIGNS")
        from_date = evaluators["FromDate"](row, db, _SORT_CTX)
        return (_casefold_key(c["Country"]) if c else "", from_date, row["x"])
    return (_casefold_key(row_label(db, table, row)), row["x"])


_SORT_CTX = EvalContext(9999)  # sorting only needs a stable fill for open ends


@dataclass
class Listing:
    rows: list[dict]
    labels: list[str]
    total: int           # rows in the table
    matched: int         # rows matching the filter


def list_filtered(db: Database, table: str, filter_text: str = "",
                  offset: int = 0, limit: Optional[int] = None) -> Listing:
    """Case-insensitive substring filter over display labels, in each
    table's registry order; NULL years sort after known ones."""
    rows_map = db.rows(table)
    decorated = sorted(((row, _sort_key(db, table, row))
                        for row in rows_map.values()), key=lambda p: p[1])
    ordered = [row for row, _ in decorated]
    labels = [row_label(db, table, row) for row in ordered]
    if filter_text:
        needle = filter_text.casefold()
        keep = [i for i, lab in enumerate(labels) if needle in lab.casefold()]
        ordered = [ordered[i] for i in keep]
        labels = [labels[i] for i in keep]
    matched = len(ordered)
    if limit is not None:
        ordered = ordered[offset:offset + limit]
        labels = labels[offset:offset + limit]
    elif offset:
        ordered = ordered[offset:]
        labels = labels[offset:]
    return Listing(ordered, labels, total=len(rows_map), matched=matched)
