from __future__ import annotations

from hypothesis import given, settings, strategies as st

from emdm.model import And, Compare, Exists, Forall, SchemaDoc, count_elements
from emdm.parser import (
    load_schema, parse_formula, parse_schema, render_formula, render_schema,
)


def test_duplicate_enum_value_rejected():
    result = parse_schema('SET PERSONS\nSex : PERSONS -> {"F", "M", "M"}\n')
    assert not result.ok
    assert any(d.code == "ResolveError" and "duplicate enum" in d.message
               for d in result.errors)


def test_corpus_parses_clean(corpus_text):
    result = parse_schema(corpus_text)
    assert result.ok
    assert not result.errors
    assert len(result.doc.sets) == 5
    assert count_elements(result.doc) == (26, 33, 12)


def test_acyclic_declaration(corpus_doc):
    from emdm.model import Acyclic
    bodies = [c.body for c in corpus_doc.constraints
              if isinstance(c.body, Acyclic)]
    assert Acyclic(("Mother", "Father"), "PERSONS") in bodies
    assert Acyclic(("CurrentCountry",), "COUNTRIES") in bodies


def test_parse_formula_marriage_year(corpus_doc):
    ast, diags = parse_formula(
        "forall x in MARRIAGES: MarriageYear(x) <= DivorceYear(x)", corpus_doc)
    assert ast is not None
    assert isinstance(ast, Forall)
    assert isinstance(ast.body, Compare)
    assert ast.body.op == "<="


def test_parse_formula_unbound_variable(corpus_doc):
    ast, diags = parse_formula("forall x in PERSONS: Sex(y) = 'F'", corpus_doc)
    assert ast is None
    assert any(d.code == "UnboundVarError" for d in diags)


def test_parse_formula_two_variable_roundtrip(corpus_doc):
    text = "forall x, y in REIGNS: x <> y => Ruler(x) <> Ruler(y)"
    ast, _ = parse_formula(text, corpus_doc)
    assert ast is not None
    again, _ = parse_formula(render_formula(ast), corpus_doc)
    assert again == ast


def test_chained_comparison_desugars(corpus_doc):
    ast, _ = parse_formula("forall x in PERSONS: 0 <= Age(x) <= 140",
                           corpus_doc)
    assert isinstance(ast.body, And)
    assert isinstance(ast.body.lhs, Compare) and ast.body.lhs.op == "<="
    assert isinstance(ast.body.rhs, Compare) and ast.body.rhs.op == "<="
    # the middle operand appears on both sides
    assert ast.body.lhs.rhs == ast.body.rhs.lhs


def test_nested_exists(corpus_doc):
    ast, _ = parse_formula(
        "forall x in REIGNS: exists z in MARRIAGES: Husband(z) = Ruler(x)",
        corpus_doc)
    assert isinstance(ast, Forall)
    assert isinstance(ast.body, Exists)


def test_render_empty_doc():
    assert render_schema(SchemaDoc()) == ""


def test_render_single_set_with_key():
    doc = load_schema("SET TITLES\nTitle : TITLES <-> UNICODE(32)\n")
    assert render_schema(doc) == "SET TITLES\nTitle : TITLES <-> UNICODE(32)\n"


def test_corpus_roundtrip(corpus_doc):
    rendered = render_schema(corpus_doc)
    again = parse_schema(rendered)
    assert again.ok, [str(d) for d in again.errors]
    assert again.doc == corpus_doc


def test_error_spans_inside_source():
    text = "SET PERSONS\nName ; PERSONS -> UNICODE(10)\n"
    result = parse_schema(text)
    assert not result.ok
    lines = text.splitlines()
    for d in result.errors:
        assert 1 <= d.span.line <= len(lines)
        assert 1 <= d.span.column <= len(lines[d.span.line - 1]) + 1


def test_no_partial_output():
    result = parse_schema("SET PERSONS\nbroken ~ line\n")
    assert result.doc is None
    assert result.errors


def test_unknown_set_reference():
    result = parse_schema("SET A\nf : A -> B\n")
    assert not result.ok
    assert any(d.code == "ResolveError" for d in result.errors)


def test_keyword_collision_rejected():
    result = parse_schema("SET CONSTRAINT\n")
    assert not result.ok


def test_unterminated_string():
    result = parse_schema('SET A\nf : A -> {"F\n')
    assert not result.ok
    assert any(d.code == "LexError" for d in result.errors)


def test_arity_error_on_two_argument_apply(corpus_doc):
    ast, diags = parse_formula("forall x in PERSONS: Sex(x, x) = 'F'",
                               corpus_doc)
    assert ast is None
    assert any(d.code == "ArityError" for d in diags)


def test_type_mismatch_rejected(corpus_doc):
    ast, diags = parse_formula("forall x in PERSONS: Name(x) < 5", corpus_doc)
    assert ast is None
    ast, diags = parse_formula(
        "forall x in REIGNS: FromDate(x) >= FromYear(x)", corpus_doc)
    assert ast is None  # composite date vs scalar


def test_datalog_range_restriction():
    text = ("SET PERSONS\nx : PERSONS <-> NAT(8)\n"
            "Mother : PERSONS -> PERSONS | NULLS\n"
            "P(A, B) <- PERSONS(x=B, Mother=A)\n"
            "Q(A, B) <- PERSONS(x=B)\n")
    result = parse_schema(text)
    assert not result.ok
    assert any(d.code == "UnboundVarError" for d in result.errors)


# --- round-trip property over generated documents ---------------------------

_name = st.sampled_from(["ALPHA", "BETA", "GAMMA", "DELTA"])
_func = st.sampled_from(["f1", "f2", "g1", "g2", "h1"])


@st.composite
def _docs(draw) -> str:
    sets = draw(st.lists(_name, min_size=1, max_size=3, unique=True))
    lines = [f"SET {s}" for s in sets]
    declared: list[tuple[str, str, bool]] = []  # (set, func, is_int)
    used: set[tuple[str, str]] = set()
    for _ in range(draw(st.integers(0, 5))):
        s = draw(st.sampled_from(sets))
        f = draw(_func)
        if (s, f) in used:
            continue
        used.add((s, f))
        kind = draw(st.integers(0, 3))
        nullable = draw(st.booleans())
        suffix = " | NULLS" if nullable else ""
        if kind == 0:
            lines.append(f"{f} : {s} -> NAT({draw(st.integers(1, 32))}){suffix}")
            declared.append((s, f, True))
        elif kind == 1:
            lo = draw(st.integers(-500, 0))
            hi = draw(st.integers(1, 500))
            lines.append(f"{f} : {s} -> [{lo}, {hi}]{suffix}")
            declared.append((s, f, True))
        elif kind == 2:
            lines.append(f"{f} : {s} -> UNICODE({draw(st.integers(1, 64))}){suffix}")
            declared.append((s, f, False))
        else:
            target = draw(st.sampled_from(sets))
            lines.append(f"{f} : {s} -> {target}{suffix}")
            declared.append((s, f, False))
    int_funcs = [(s, f) for s, f, is_int in declared if is_int]
    if int_funcs and draw(st.booleans()):
        s, f = draw(st.sampled_from(int_funcs))
        lo = draw(st.integers(0, 10))
        lines.append(f"CONSTRAINT Cap : forall v in {s}: {f}(v) <= {lo} + 5")
    return "\n".join(lines) + "\n"


@given(_docs())
@settings(max_examples=60, deadline=None)
def test_roundtrip_property(text):
    result = parse_schema(text)
    if not result.ok:  # generator may produce unresolvable combinations
        return
    rendered = render_schema(result.doc)
    again = parse_schema(rendered)
    assert again.ok, [str(d) for d in again.errors]
    assert again.doc == result.doc
