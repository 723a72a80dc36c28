from __future__ import annotations

import pytest

from emdm.model import (
    EnumChars, IntRange, NaturalBits, SchemaDoc, UnicodeText, count_elements,
)
from emdm.parser import parse_schema

FIG1_SUBSCHEMA = """\
SET PERSONS
x : PERSONS <-> NAT(16)
Name : PERSONS -> UNICODE(128)
Sex : PERSONS -> {"F", "M", "N"}
Mother : PERSONS -> PERSONS | NULLS
Father : PERSONS -> PERSONS | NULLS
BirthYear : PERSONS -> [-6000, CurrentYear()] | NULLS
PassedAwayYear : PERSONS -> [-6000, CurrentYear()] | NULLS
Age := isNull(PassedAwayYear(x), CurrentYear()) - BirthYear(x)
CONSTRAINT AgeCap : forall x in PERSONS: Sex(x) <> "N" => 0 <= Age(x) <= 140
ACYCLIC Mother, Father
CONSTRAINT MotherIsFemale : forall x in PERSONS: Sex(Mother(x)) = "F"
CONSTRAINT FatherIsMale : forall x in PERSONS: Sex(Father(x)) = "M"
CONSTRAINT NeutralHasNoParents : forall x in PERSONS: Sex(x) = "N" => Mother(x) in NULLS and Father(x) in NULLS
CONSTRAINT MotherGap : forall x in PERSONS: 5 <= BirthYear(x) - BirthYear(Mother(x)) <= 75 and BirthYear(x) <= PassedAwayYear(Mother(x))
CONSTRAINT FatherGap : forall x in PERSONS: 9 <= BirthYear(x) - BirthYear(Father(x)) <= 100 and BirthYear(x) <= PassedAwayYear(Father(x)) + 1
"""


def test_corpus_counts(corpus_doc):
    assert count_elements(corpus_doc) == (26, 33, 12)


def test_empty_document_counts():
    assert count_elements(SchemaDoc()) == (0, 0, 0)


def test_persons_subschema_counts():
    # hand count: x, Name, Sex, Mother, Father, BirthYear, PassedAwayYear
    # plus the derived Age make 8 functions; 7 explicit constraints; no rules
    doc = parse_schema(FIG1_SUBSCHEMA).doc
    assert doc is not None
    assert count_elements(doc) == (8, 7, 0)


def test_names_preserved_verbatim(corpus_doc):
    names = {f.name for f in corpus_doc.functions}
    assert {"Name", "Sex", "Mother", "Father", "BirthYear", "PassedAwayYear",
            "Husband", "Wife", "MarriageYear", "DivorceYear", "Country",
            "CurrentCountry", "Title", "Ruler", "FromYear", "ToYear",
            "FromMonth", "ToMonth", "FromDay", "ToDay", "x"} == names
    assert {d.name for d in corpus_doc.derived} == {"Age", "FromDate", "ToDate"}


def test_two_parses_structurally_equal(corpus_text):
    a = parse_schema(corpus_text).doc
    b = parse_schema(corpus_text).doc
    assert a == b
    assert a is not b


def test_value_domain_invariants():
    with pytest.raises(ValueError):
        NaturalBits(0)
    with pytest.raises(ValueError):
        IntRange(10, 5)
    with pytest.raises(ValueError):
        UnicodeText(0)
    with pytest.raises(ValueError):
        EnumChars(("F", "F"))
    with pytest.raises(ValueError):
        EnumChars(("FM",))


def test_value_domain_membership():
    assert NaturalBits(16).contains(65535, 2026)
    assert not NaturalBits(16).contains(65536, 2026)
    assert not NaturalBits(16).contains(-1, 2026)
    from emdm.model import CURRENT_YEAR
    rng = IntRange(-6000, CURRENT_YEAR)
    assert rng.contains(2026, 2026)
    assert not rng.contains(2027, 2026)
    assert rng.contains(-6000, 2026)
    assert EnumChars(("F", "M", "N")).contains("F", 2026)
    assert not EnumChars(("F", "M", "N")).contains("X", 2026)
    assert UnicodeText(4).contains("Grig", 2026)
    assert not UnicodeText(4).contains("Grigo", 2026)


def test_key_function_may_not_be_nullable():
    bad = "SET A\nk : A <-> NAT(8) | NULLS\n"
    result = parse_schema(bad)
    assert not result.ok
    assert any(d.code == "ResolveError" for d in result.errors)


def test_domains_of_disambiguates_homonyms(corpus_doc):
    assert sorted(corpus_doc.domains_of("Country")) == ["COUNTRIES", "REIGNS"]
    assert sorted(corpus_doc.domains_of("Title")) == ["REIGNS", "TITLES"]
    assert corpus_doc.domains_of("Age") == ["PERSONS"]
