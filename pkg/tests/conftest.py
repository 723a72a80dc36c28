from __future__ import annotations

import pytest

from emdm.cli import corpus_path
from emdm.compiler import compile_schema
from emdm.engine import EvalContext, Insert
from emdm.model import Acyclic, Existence, Injective
from emdm.parser import parse_schema
from emdm.store import Database, apply

CLOCK = 2026


@pytest.fixture(scope="session")
def corpus_text() -> str:
    with open(corpus_path(), encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="session")
def corpus_doc(corpus_text):
    result = parse_schema(corpus_text)
    assert result.ok, [str(d) for d in result.errors]
    return result.doc


@pytest.fixture(scope="session")
def cs(corpus_doc):
    result = compile_schema(corpus_doc)
    assert result.ok, [str(d) for d in result.diagnostics]
    return result.schema


@pytest.fixture()
def ctx() -> EvalContext:
    return EvalContext(CLOCK)


def constraint_id(doc, body_type, **fields) -> str:
    """Find a constraint id by its declaration shape (for the unnamed ones)."""
    for c in doc.constraints:
        if not isinstance(c.body, body_type):
            continue
        if all(getattr(c.body, k) == v for k, v in fields.items()):
            return c.id
    raise LookupError((body_type, fields))


@pytest.fixture(scope="session")
def ids(corpus_doc) -> dict[str, str]:
    """Logical names for the corpus's unnamed constraints."""
    return {
        "ParentsAcyclic": constraint_id(corpus_doc, Acyclic,
                                        functions=("Mother", "Father")),
        "CurrentCountryAcyclic": constraint_id(corpus_doc, Acyclic,
                                               functions=("CurrentCountry",)),
        "MotherName": constraint_id(corpus_doc, Injective,
                                    paths=("Mother", "Name")),
        "FatherName": constraint_id(corpus_doc, Injective,
                                    paths=("Father", "Name")),
        "HWMarriageYear": constraint_id(
            corpus_doc, Injective, paths=("Husband", "Wife", "MarriageYear")),
        "HWDivorceYear": constraint_id(
            corpus_doc, Injective, paths=("Husband", "Wife", "DivorceYear")),
        "RulerCountryFromDate": constraint_id(
            corpus_doc, Injective, paths=("Ruler", "Country", "FromDate")),
        "RulerCountryToDate": constraint_id(
            corpus_doc, Injective, paths=("Ruler", "Country", "ToDate")),
        "FromDayMonth": constraint_id(corpus_doc, Existence,
                                      if_known="FromDay"),
        "ToDayMonth": constraint_id(corpus_doc, Existence, if_known="ToDay"),
        "ToMonthYear": constraint_id(corpus_doc, Existence,
                                     if_known="ToMonth"),
    }


def must(db, cs, ctx, op):
    """Apply a write that the scenario requires to be accepted."""
    _, report = apply(db, op, cs, ctx)
    assert report.accepted, [v.message for v in report.violations]
    return max(db.rows(op.table)) if isinstance(op, Insert) else None


@pytest.fixture()
def family_db(cs, ctx):
    """Eve, Adam, their sons Cain and Abel, and Cain's son Enoch."""
    db = Database(cs)
    for values in [
        {"Name": "Eve", "Sex": "F"},
        {"Name": "Adam", "Sex": "M"},
        {"Name": "Cain", "Sex": "M", "Mother": 1, "Father": 2},
        {"Name": "Abel", "Sex": "M", "Mother": 1, "Father": 2},
        {"Name": "Enoch", "Sex": "M", "Father": 3},
    ]:
        must(db, cs, ctx, Insert("PERSONS", values))
    return db
