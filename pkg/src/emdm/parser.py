"""Parser, resolver and pretty-printer for the textual schema language.

The concrete syntax is line-oriented: an item starts at column 1 and
continuation lines are indented.  ``#`` starts a comment.  Declaration
keywords are upper-case (SET, INJECTIVE, ACYCLIC, EXISTENCE, CONSTRAINT,
ALWAYS); formula connectives are lower-case (forall, exists, and, or, not,
in).  ``->`` maps, ``<->`` declares a key, ``| NULLS`` marks a nullable
codomain, ``:=`` introduces a derived function, ``|-`` the existence bar,
``<-`` a Datalog rule.

``parse_schema`` returns either a fully resolved document or error
diagnostics, never both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .model import (
    CURRENT_YEAR, Acyclic, And, Apply, Arith, Atom, Compare, CompositeDateRef,
    ConstraintDecl, CurrentYearExpr, DatalogRule, DerivedFunction, EnumChars,
    Exists, Existence, Forall, Formula, FormulaExpr, FunctionDecl, Implies,
    InNulls, InSet, Injective, IntLit, IntRange, IntTerm, IsNullCoalesce,
    NaturalBits, Not, NotInNulls, Or, SchemaDoc, SetDecl, SetRef, SourceSpan,
    StrLit, StrTerm, UnicodeText, Var, VarTerm, source_digest,
)

DECL_KEYWORDS = {"SET", "INJECTIVE", "ACYCLIC", "EXISTENCE", "CONSTRAINT",
                 "ALWAYS", "NULLS", "NAT", "UNICODE"}
FORMULA_KEYWORDS = {"forall", "exists", "in", "not", "and", "or",
                    "isNull", "CurrentYear"}
KEYWORDS = DECL_KEYWORDS | FORMULA_KEYWORDS

_SYMBOLS = [":=", "<->", "->", "<-", "<=", ">=", "<>", "=>", "|-",
            "|", ":", "*", ",", "(", ")", "{", "}", "[", "]",
            "=", "<", ">", "+", "-"]


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "Error" | "Warning"
    code: str      # LexError, SyntaxError, ResolveError, ArityError, UnboundVarError, ...
    span: SourceSpan
    message: str

    def __str__(self):
        return (f"{self.severity.lower()}[{self.code}] "
                f"{self.span.line}:{self.span.column}: {self.message}")


@dataclass
class ParseResult:
    doc: Optional[SchemaDoc]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.doc is not None

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "Error"]


class SchemaError(Exception):
    """Raised by load_schema when the text does not parse cleanly."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics[:5]))


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT, INT, STRING, OP, EOF
    value: str
    line: int
    col: int
    start: int
    end: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.col, max(self.end - self.start, 1))


class _LexFail(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


def _lex(text: str) -> tuple[list[_Token], list[Diagnostic]]:
    tokens: list[_Token] = []
    diags: list[Diagnostic] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start, sline, scol = i, line, col
        if ch in "\"'":
            quote = ch
            i += 1
            buf = []
            while i < n and text[i] not in (quote, "\n"):
                if text[i] == "\\" and i + 1 < n and text[i + 1] in (quote, "\\"):
                    buf.append(text[i + 1])
                    i += 2
                else:
                    buf.append(text[i])
                    i += 1
            if i >= n or text[i] == "\n":
                diags.append(Diagnostic("Error", "LexError",
                                        SourceSpan(sline, scol, i - start),
                                        "unterminated string literal"))
                col += i - start
                continue
            i += 1
            tokens.append(_Token("STRING", "".join(buf), sline, scol, start, i))
            col += i - start
            continue
        if ch.isdigit():
            while i < n and text[i].isdigit():
                i += 1
            tokens.append(_Token("INT", text[start:i], sline, scol, start, i))
            col += i - start
            continue
        if ch.isalpha() or ch == "_":
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            tokens.append(_Token("IDENT", text[start:i], sline, scol, start, i))
            col += i - start
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                i += len(sym)
                tokens.append(_Token("OP", sym, sline, scol, start, i))
                col += len(sym)
                break
        else:
            diags.append(Diagnostic("Error", "LexError",
                                    SourceSpan(line, col, 1),
                                    f"unexpected character {ch!r}"))
            i += 1
            col += 1
    tokens.append(_Token("EOF", "", line, col, n, n))
    return tokens, diags


class _ParseFail(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


# Provisional (unresolved) item shapes -------------------------------------

@dataclass
class _RawDerived:
    name: str
    factors: list[FormulaExpr]
    span: SourceSpan


@dataclass
class _RawConstraint:
    kind: str                 # injective | acyclic | existence | formula
    names: list[str]
    ast: Optional[FormulaExpr]
    temporal: bool
    explicit_id: Optional[str]
    span: SourceSpan
    source_text: str


class _ItemParser:
    """Recursive-descent parser over one logical item's token window."""

    def __init__(self, tokens: list[_Token], lo: int, hi: int, text: str):
        self.toks = tokens
        self.pos = lo
        self.hi = hi
        self.text = text

    def _at_end(self) -> bool:
        return self.pos >= self.hi

    def cur(self) -> _Token:
        if self.pos < self.hi:
            return self.toks[self.pos]
        last = self.toks[self.hi - 1] if self.hi > 0 else self.toks[-1]
        return _Token("EOF", "", last.line, last.col, last.end, last.end)

    def advance(self) -> _Token:
        tok = self.cur()
        if self.pos < self.hi:
            self.pos += 1
        return tok

    def fail(self, message: str, code: str = "SyntaxError", tok: _Token = None):
        tok = tok or self.cur()
        raise _ParseFail(Diagnostic("Error", code, tok.span, message))

    def expect_op(self, value: str) -> _Token:
        tok = self.cur()
        if tok.kind != "OP" or tok.value != value:
            self.fail(f"expected {value!r}, found {tok.value or 'end of item'!r}")
        return self.advance()

    def expect_ident(self, what: str = "identifier") -> _Token:
        tok = self.cur()
        if tok.kind != "IDENT":
            self.fail(f"expected {what}, found {tok.value or 'end of item'!r}")
        return self.advance()

    def expect_int(self) -> int:
        tok = self.cur()
        if tok.kind != "INT":
            self.fail("expected integer")
        self.advance()
        return int(tok.value)

    def at_op(self, value: str) -> bool:
        t = self.cur()
        return t.kind == "OP" and t.value == value

    def at_ident(self, value: str) -> bool:
        t = self.cur()
        return t.kind == "IDENT" and t.value == value

    def decl_name(self, what: str) -> _Token:
        tok = self.expect_ident(what)
        if tok.value in KEYWORDS:
            self.fail(f"{tok.value!r} is a reserved keyword", tok=tok)
        return tok

    # -- items --------------------------------------------------------------

    def parse_item(self):
        tok = self.cur()
        if tok.kind == "IDENT" and tok.value == "SET":
            self.advance()
            name = self.decl_name("set name")
            self.end_of_item()
            return SetDecl(name.value, name.span)
        if tok.kind == "IDENT" and tok.value == "INJECTIVE":
            return self.parse_injective()
        if tok.kind == "IDENT" and tok.value == "ACYCLIC":
            return self.parse_acyclic()
        if tok.kind == "IDENT" and tok.value == "EXISTENCE":
            return self.parse_existence()
        if tok.kind == "IDENT" and tok.value in ("CONSTRAINT", "ALWAYS"):
            return self.parse_constraint()
        if tok.kind == "IDENT":
            nxt = self.toks[self.pos + 1] if self.pos + 1 < self.hi else None
            if nxt and nxt.kind == "OP" and nxt.value == ":":
                return self.parse_function()
            if nxt and nxt.kind == "OP" and nxt.value == ":=":
                return self.parse_derived()
            if nxt and nxt.kind == "OP" and nxt.value == "(":
                return self.parse_rule()
        self.fail(f"unexpected start of item {tok.value!r}")

    def end_of_item(self):
        if not self._at_end():
            self.fail(f"unexpected trailing token {self.cur().value!r}")

    def parse_function(self) -> FunctionDecl:
        name = self.decl_name("function name")
        self.expect_op(":")
        domain = self.expect_ident("domain set name")
        tok = self.cur()
        if self.at_op("<->"):
            is_key = True
        elif self.at_op("->"):
            is_key = False
        else:
            self.fail("expected '->' or '<->'")
        self.advance()
        codomain = self.parse_base_domain()
        nullable = False
        if self.at_op("|"):
            self.advance()
            bar = self.cur()
            if not self.at_ident("NULLS"):
                self.fail("expected NULLS after '|'")
            self.advance()
            nullable = True
        if is_key and nullable:
            raise _ParseFail(Diagnostic("Error", "ResolveError", tok.span,
                                        f"key function {name.value!r} may not be nullable"))
        self.end_of_item()
        return FunctionDecl(name.value, domain.value, codomain,
                            nullable=nullable, is_key=is_key, span=name.span)

    def parse_base_domain(self):
        tok = self.cur()
        if tok.kind == "IDENT" and tok.value == "NAT":
            self.advance()
            self.expect_op("(")
            bits = self.expect_int()
            self.expect_op(")")
            if bits < 1:
                self.fail("bit width must be >= 1", code="ResolveError", tok=tok)
            return NaturalBits(bits)
        if tok.kind == "IDENT" and tok.value == "UNICODE":
            self.advance()
            self.expect_op("(")
            max_len = self.expect_int()
            self.expect_op(")")
            if max_len < 1:
                self.fail("max length must be >= 1", code="ResolveError", tok=tok)
            return UnicodeText(max_len)
        if self.at_op("{"):
            self.advance()
            values = []
            while True:
                s = self.cur()
                if s.kind != "STRING":
                    self.fail("expected string literal in enum domain")
                if len(s.value) != 1:
                    self.fail("enum values must be single characters",
                              code="ResolveError", tok=s)
                if s.value in values:
                    self.fail(f"duplicate enum value {s.value!r}",
                              code="ResolveError", tok=s)
                values.append(s.value)
                self.advance()
                if self.at_op(","):
                    self.advance()
                    continue
                break
            self.expect_op("}")
            return EnumChars(tuple(values))
        if self.at_op("["):
            self.advance()
            lo = self.parse_bound()
            self.expect_op(",")
            hi = self.parse_bound()
            self.expect_op("]")
            if isinstance(lo, int) and isinstance(hi, int) and lo > hi:
                self.fail("empty integer range", code="ResolveError", tok=tok)
            return IntRange(lo, hi)
        if tok.kind == "IDENT":
            self.advance()
            return SetRef(tok.value)
        self.fail("expected a codomain")

    def parse_bound(self):
        if self.at_op("-"):
            self.advance()
            return -self.expect_int()
        if self.at_ident("CurrentYear"):
            self.advance()
            self.expect_op("(")
            self.expect_op(")")
            return CURRENT_YEAR
        return self.expect_int()

    def parse_injective(self) -> _RawConstraint:
        start = self.advance()
        names = [self.expect_ident("function name").value]
        while self.at_op("*"):
            self.advance()
            names.append(self.expect_ident("function name").value)
        if len(names) < 2:
            self.fail("INJECTIVE needs a product of at least two functions", tok=start)
        self.end_of_item()
        return _RawConstraint("injective", names, None, False, None,
                              start.span, self.item_text(start))

    def parse_acyclic(self) -> _RawConstraint:
        start = self.advance()
        names = [self.expect_ident("function name").value]
        while self.at_op(","):
            self.advance()
            names.append(self.expect_ident("function name").value)
        self.end_of_item()
        return _RawConstraint("acyclic", names, None, False, None,
                              start.span, self.item_text(start))

    def parse_existence(self) -> _RawConstraint:
        start = self.advance()
        if_known = self.expect_ident("function name").value
        self.expect_op("|-")
        then_known = self.expect_ident("function name").value
        self.end_of_item()
        return _RawConstraint("existence", [if_known, then_known], None, False,
                              None, start.span, self.item_text(start))

    def parse_constraint(self) -> _RawConstraint:
        start = self.cur()
        temporal = False
        if self.at_ident("ALWAYS"):
            temporal = True
            self.advance()
        if not self.at_ident("CONSTRAINT"):
            self.fail("expected CONSTRAINT")
        self.advance()
        explicit_id = None
        if self.cur().kind == "IDENT" and not self.at_op(":"):
            explicit_id = self.decl_name("constraint name").value
        self.expect_op(":")
        ast = self.parse_formula()
        self.end_of_item()
        return _RawConstraint("formula", [], ast, temporal, explicit_id,
                              start.span, self.item_text(start))

    def parse_derived(self) -> _RawDerived:
        name = self.decl_name("derived function name")
        self.expect_op(":=")
        factors = [self.parse_arith()]
        while self.at_op("*"):
            self.advance()
            factors.append(self.parse_arith())
        if len(factors) == 2 or len(factors) > 3:
            self.fail("a derived function has one factor, or three for a "
                      "composite date", code="ArityError", tok=name)
        self.end_of_item()
        return _RawDerived(name.value, factors, name.span)

    def parse_rule(self) -> DatalogRule:
        head = self.decl_name("predicate name")
        self.expect_op("(")
        args = [self.expect_ident("head variable").value]
        while self.at_op(","):
            self.advance()
            args.append(self.expect_ident("head variable").value)
        self.expect_op(")")
        self.expect_op("<-")
        body = [self.parse_atom()]
        while self.at_op(","):
            self.advance()
            body.append(self.parse_atom())
        self.end_of_item()
        return DatalogRule(head.value, tuple(args), tuple(body), head.span)

    def parse_atom(self) -> Atom:
        name = self.expect_ident("predicate name")
        self.expect_op("(")
        bindings = []
        while True:
            tok = self.cur()
            field_name = None
            if (tok.kind == "IDENT"
                    and self.pos + 1 < self.hi
                    and self.toks[self.pos + 1].kind == "OP"
                    and self.toks[self.pos + 1].value == "="):
                field_name = tok.value
                self.advance()
                self.advance()
            term = self.parse_term()
            bindings.append((field_name, term))
            if self.at_op(","):
                self.advance()
                continue
            break
        self.expect_op(")")
        return Atom(name.value, tuple(bindings))

    def parse_term(self):
        tok = self.cur()
        if tok.kind == "IDENT":
            self.advance()
            return VarTerm(tok.value)
        if tok.kind == "INT":
            self.advance()
            return IntTerm(int(tok.value))
        if tok.kind == "STRING":
            self.advance()
            return StrTerm(tok.value)
        if tok.kind == "OP" and tok.value == "-":
            self.advance()
            return IntTerm(-self.expect_int())
        self.fail("expected a term")

    def item_text(self, start_tok: _Token) -> str:
        end = self.toks[self.pos - 1].end if self.pos > 0 else start_tok.end
        return " ".join(self.text[start_tok.start:end].split())

    # -- formulas -----------------------------------------------------------

    def parse_formula(self) -> FormulaExpr:
        if self.at_ident("forall") or self.at_ident("exists"):
            kind = self.advance().value
            names = [self.decl_name("bound variable").value]
            while self.at_op(","):
                self.advance()
                names.append(self.decl_name("bound variable").value)
            if not self.at_ident("in"):
                self.fail("expected 'in'")
            self.advance()
            set_name = self.expect_ident("set name").value
            self.expect_op(":")
            body = self.parse_formula()
            cls = Forall if kind == "forall" else Exists
            return cls(tuple(names), set_name, body)
        return self.parse_implication()

    def parse_implication(self) -> FormulaExpr:
        lhs = self.parse_or()
        if self.at_op("=>"):
            self.advance()
            return Implies(lhs, self.parse_implication())
        return lhs

    def parse_or(self) -> FormulaExpr:
        node = self.parse_and()
        while self.at_ident("or"):
            self.advance()
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> FormulaExpr:
        node = self.parse_not()
        while self.at_ident("and"):
            self.advance()
            node = And(node, self.parse_not())
        return node

    def parse_not(self) -> FormulaExpr:
        if self.at_ident("not"):
            self.advance()
            return Not(self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> FormulaExpr:
        node = self.parse_arith()
        # membership forms
        if self.at_ident("in") or (self.at_ident("not")
                                   and self.pos + 1 < self.hi
                                   and self.toks[self.pos + 1].value == "in"):
            negated = False
            if self.at_ident("not"):
                negated = True
                self.advance()
            self.advance()  # in
            if self.at_ident("NULLS"):
                self.advance()
                return NotInNulls(node) if negated else InNulls(node)
            if negated:
                self.fail("'not in' is only supported with NULLS")
            self.expect_op("{")
            values = []
            while True:
                tok = self.cur()
                if tok.kind == "INT":
                    values.append(int(tok.value))
                    self.advance()
                elif tok.kind == "OP" and tok.value == "-":
                    self.advance()
                    values.append(-self.expect_int())
                elif tok.kind == "STRING":
                    values.append(tok.value)
                    self.advance()
                else:
                    self.fail("expected literal in set membership")
                if self.at_op(","):
                    self.advance()
                    continue
                break
            self.expect_op("}")
            return InSet(node, tuple(values))
        comparisons = []
        while self.cur().kind == "OP" and self.cur().value in ("=", "<>", "<", "<=", ">", ">="):
            op = self.advance().value
            rhs = self.parse_arith()
            comparisons.append((op, rhs))
        if not comparisons:
            return node
        parts = []
        lhs = node
        for op, rhs in comparisons:
            parts.append(Compare(op, lhs, rhs))
            lhs = rhs
        out = parts[0]
        for part in parts[1:]:  # chained a < b < c desugars to a conjunction
            out = And(out, part)
        return out

    def parse_arith(self) -> FormulaExpr:
        node = self.parse_primary()
        while self.cur().kind == "OP" and self.cur().value in ("+", "-"):
            op = self.advance().value
            node = Arith(op, node, self.parse_primary())
        return node

    def parse_primary(self) -> FormulaExpr:
        tok = self.cur()
        if tok.kind == "INT":
            self.advance()
            return IntLit(int(tok.value))
        if tok.kind == "OP" and tok.value == "-":
            self.advance()
            return IntLit(-self.expect_int())
        if tok.kind == "STRING":
            self.advance()
            return StrLit(tok.value)
        if tok.kind == "OP" and tok.value == "(":
            self.advance()
            inner = self.parse_formula()
            self.expect_op(")")
            return inner
        if tok.kind == "IDENT":
            if tok.value == "isNull":
                self.advance()
                self.expect_op("(")
                expr = self.parse_arith()
                self.expect_op(",")
                fallback = self.parse_arith()
                self.expect_op(")")
                return IsNullCoalesce(expr, fallback)
            if tok.value == "CurrentYear":
                self.advance()
                self.expect_op("(")
                self.expect_op(")")
                return CurrentYearExpr()
            self.advance()
            if self.at_op("("):
                self.advance()
                arg = self.parse_arith()
                if self.at_op(","):
                    self.fail("functions take exactly one argument",
                              code="ArityError", tok=tok)
                self.expect_op(")")
                return Apply(tok.value, arg)
            if tok.value in KEYWORDS:
                self.fail(f"unexpected keyword {tok.value!r}", tok=tok)
            return Var(tok.value)
        self.fail(f"unexpected token {tok.value or 'end of item'!r}")


# ---------------------------------------------------------------------------
# Resolution and type checking


@dataclass(frozen=True)
class _Type:
    kind: str               # int, text, char, str, ref, date
    target: Optional[str] = None  # set name for refs

    def compatible(self, other: "_Type") -> bool:
        a, b = self.kind, other.kind
        if a == b == "ref":
            return self.target == other.target
        scalar = {"int"}, {"text", "char", "str"}
        for group in scalar:
            if a in group and b in group:
                return True
        return a == b


_ORDERED_KINDS = {"int", "date"}


class _Resolver:
    def __init__(self, diags: list[Diagnostic]):
        self.diags = diags

    def error(self, code: str, span: SourceSpan, message: str):
        self.diags.append(Diagnostic("Error", code, span, message))

    def resolve(self, items: list) -> Optional[SchemaDoc]:
        sets: list[SetDecl] = []
        functions: list[FunctionDecl] = []
        raw_derived: list[_RawDerived] = []
        raw_constraints: list[_RawConstraint] = []
        rules: list[DatalogRule] = []
        for item in items:
            if isinstance(item, SetDecl):
                if any(s.name == item.name for s in sets):
                    self.error("ResolveError", item.span,
                               f"duplicate set {item.name!r}")
                else:
                    sets.append(item)
            elif isinstance(item, FunctionDecl):
                functions.append(item)
            elif isinstance(item, _RawDerived):
                raw_derived.append(item)
            elif isinstance(item, _RawConstraint):
                raw_constraints.append(item)
            elif isinstance(item, DatalogRule):
                rules.append(item)
        set_names = {s.name for s in sets}

        kept_functions: list[FunctionDecl] = []
        seen: set[tuple[str, str]] = set()
        for f in functions:
            if f.domain not in set_names:
                self.error("ResolveError", f.span,
                           f"unknown set {f.domain!r} in declaration of {f.name!r}")
                continue
            if isinstance(f.codomain, SetRef) and f.codomain.set_name not in set_names:
                self.error("ResolveError", f.span,
                           f"unknown set {f.codomain.set_name!r} referenced by {f.name!r}")
                continue
            if (f.domain, f.name) in seen:
                self.error("ResolveError", f.span,
                           f"duplicate function {f.name!r} on {f.domain!r}")
                continue
            seen.add((f.domain, f.name))
            kept_functions.append(f)

        # a provisional doc for name lookups while resolving bodies
        base = SchemaDoc(tuple(sets), tuple(kept_functions))

        derived: list[DerivedFunction] = []
        for rd in raw_derived:
            d = self.resolve_derived(rd, base, derived)
            if d is not None:
                derived.append(d)

        doc = SchemaDoc(tuple(sets), tuple(kept_functions), tuple(derived))

        constraints: list[ConstraintDecl] = []
        for index, rc in enumerate(raw_constraints):
            cid = rc.explicit_id or f"C{index + 1}"
            if any(c.id == cid for c in constraints):
                self.error("ResolveError", rc.span, f"duplicate constraint id {cid!r}")
                continue
            body = self.resolve_constraint(rc, doc)
            if body is not None:
                constraints.append(ConstraintDecl(cid, body, rc.source_text, rc.span))

        kept_rules = self.resolve_rules(rules, doc)
        return SchemaDoc(tuple(sets), tuple(kept_functions), tuple(derived),
                         tuple(constraints), tuple(kept_rules))

    # -- derived ------------------------------------------------------------

    def _infer_domain(self, names: list[str], doc: SchemaDoc,
                      span: SourceSpan, what: str) -> Optional[str]:
        candidates = None
        for name in names:
            domains = set(doc.domains_of(name))
            if not domains:
                self.error("ResolveError", span,
                           f"unknown function {name!r} in {what}")
                return None
            candidates = domains if candidates is None else candidates & domains
        if not candidates:
            self.error("ResolveError", span,
                       f"functions of {what} do not share a domain")
            return None
        if len(candidates) > 1:
            self.error("ResolveError", span,
                       f"ambiguous domain for {what}: {sorted(candidates)}")
            return None
        return next(iter(candidates))

    def resolve_derived(self, rd: _RawDerived, base: SchemaDoc,
                        resolved: list[DerivedFunction]) -> Optional[DerivedFunction]:
        names = []
        for factor in rd.factors:
            names += [n.func for n in _walk(factor) if isinstance(n, Apply)]
        if not names:
            self.error("ResolveError", rd.span,
                       f"derived function {rd.name!r} applies no declared function")
            return None
        doc = SchemaDoc(base.sets, base.functions, tuple(resolved))
        domain = self._infer_domain(names, doc,
                                    rd.span, f"derived function {rd.name!r}")
        if domain is None:
            return None
        if doc.function(domain, rd.name) or doc.derived_fn(domain, rd.name):
            self.error("ResolveError", rd.span,
                       f"duplicate declaration of {rd.name!r} on {domain!r}")
            return None
        checker = _TypeChecker(doc, self)
        out_factors = []
        for factor in rd.factors:
            typed = checker.check(factor, {"x": domain}, rd.span)
            if typed is None:
                return None
            node, ty = typed
            if ty.kind != "int":
                self.error("ResolveError", rd.span,
                           f"derived factor of {rd.name!r} must be integer-valued")
                return None
            out_factors.append(node)
        return DerivedFunction(rd.name, domain, tuple(out_factors), rd.span)

    # -- constraints ----------------------------------------------------------

    def resolve_constraint(self, rc: _RawConstraint, doc: SchemaDoc):
        if rc.kind == "injective":
            domain = self._infer_domain(rc.names, doc, rc.span, "INJECTIVE product")
            if domain is None:
                return None
            return Injective(tuple(rc.names), domain)
        if rc.kind == "acyclic":
            domain = self._infer_domain(rc.names, doc, rc.span, "ACYCLIC product")
            if domain is None:
                return None
            for name in rc.names:
                f = doc.function(domain, name)
                if f is None or not isinstance(f.codomain, SetRef) \
                        or f.codomain.set_name != domain:
                    self.error("ResolveError", rc.span,
                               f"ACYCLIC requires self-maps; {name!r} does not map "
                               f"{domain!r} to itself")
                    return None
            return Acyclic(tuple(rc.names), domain)
        if rc.kind == "existence":
            domain = self._infer_domain(rc.names, doc, rc.span, "EXISTENCE pair")
            if domain is None:
                return None
            return Existence(rc.names[0], rc.names[1], domain)
        checker = _TypeChecker(doc, self)
        typed = checker.check(rc.ast, {}, rc.span)
        if typed is None:
            return None
        node, ty = typed
        if ty.kind != "bool":
            self.error("ResolveError", rc.span, "constraint body is not a proposition")
            return None
        return Formula(node, temporal=rc.temporal)

    # -- rules ----------------------------------------------------------------

    def resolve_rules(self, rules: list[DatalogRule], doc: SchemaDoc) -> list[DatalogRule]:
        head_arity: dict[str, int] = {}
        for rule in rules:
            if rule.head_name in doc.set_names:
                self.error("ResolveError", rule.span,
                           f"rule head {rule.head_name!r} collides with a set")
                continue
            arity = head_arity.setdefault(rule.head_name, len(rule.head_args))
            if arity != len(rule.head_args):
                self.error("ArityError", rule.span,
                           f"inconsistent arity for {rule.head_name!r}")
        kept = []
        for rule in rules:
            if rule.head_name not in head_arity:
                continue
            ok = True
            body_vars: set[str] = set()
            for atom in rule.body:
                if atom.predicate in doc.set_names:
                    columns = {"x"} | set(doc.functions_by_domain[atom.predicate])
                    for position, (fname, term) in enumerate(atom.bindings):
                        if fname is None and position > 0:
                            self.error("ResolveError", rule.span,
                                       "base-set atoms allow one positional term "
                                       "(the surrogate); use field=term")
                            ok = False
                        if fname is not None and fname not in columns:
                            self.error("ResolveError", rule.span,
                                       f"unknown field {fname!r} on {atom.predicate!r}")
                            ok = False
                elif atom.predicate in head_arity:
                    if any(fname is not None for fname, _ in atom.bindings):
                        self.error("ResolveError", rule.span,
                                   f"derived atom {atom.predicate!r} takes only "
                                   "positional terms")
                        ok = False
                    if len(atom.bindings) != head_arity[atom.predicate]:
                        self.error("ArityError", rule.span,
                                   f"atom {atom.predicate!r} expects "
                                   f"{head_arity[atom.predicate]} terms")
                        ok = False
                else:
                    self.error("ResolveError", rule.span,
                               f"unknown predicate {atom.predicate!r}")
                    ok = False
                body_vars |= {t.name for _, t in atom.bindings if isinstance(t, VarTerm)}
            for head_var in rule.head_args:
                if head_var not in body_vars:
                    self.error("UnboundVarError", rule.span,
                               f"head variable {head_var!r} does not occur in the body")
                    ok = False
            if ok:
                kept.append(rule)
        return kept


def _walk(node):
    from .model import iter_formula
    return iter_formula(node)


class _TypeChecker:
    """Checks closedness and operand compatibility, and rewrites Apply nodes
    that reference composite derived functions into CompositeDateRef."""

    def __init__(self, doc: SchemaDoc, resolver: _Resolver):
        self.doc = doc
        self.resolver = resolver
        self.failed = False

    def check(self, node: FormulaExpr, env: dict[str, str], span: SourceSpan):
        self.failed = False
        self.span = span
        out = self._prop(node, dict(env))
        if self.failed:
            return None
        return out

    def error(self, code: str, message: str):
        if not self.failed:
            self.resolver.error(code, self.span, message)
        self.failed = True

    def _prop(self, node, env) -> tuple[FormulaExpr, _Type]:
        bool_t = _Type("bool")
        if isinstance(node, (Forall, Exists)):
            if node.set_name not in self.doc.set_names:
                self.error("ResolveError", f"unknown set {node.set_name!r}")
                return node, bool_t
            inner = dict(env)
            for v in node.vars:
                inner[v] = node.set_name
            body, ty = self._prop(node.body, inner)
            if ty.kind != "bool":
                self.error("ResolveError", "quantifier body is not a proposition")
            return type(node)(node.vars, node.set_name, body), bool_t
        if isinstance(node, Implies):
            lhs, lt = self._prop(node.lhs, env)
            rhs, rt = self._prop(node.rhs, env)
            if lt.kind != "bool" or rt.kind != "bool":
                self.error("ResolveError", "'=>' operands must be propositions")
            return Implies(lhs, rhs), bool_t
        if isinstance(node, (And, Or)):
            lhs, lt = self._prop(node.lhs, env)
            rhs, rt = self._prop(node.rhs, env)
            if lt.kind != "bool" or rt.kind != "bool":
                self.error("ResolveError", "logical operands must be propositions")
            return type(node)(lhs, rhs), bool_t
        if isinstance(node, Not):
            inner, ty = self._prop(node.operand, env)
            if ty.kind != "bool":
                self.error("ResolveError", "'not' operand must be a proposition")
            return Not(inner), bool_t
        if isinstance(node, Compare):
            lhs, lt = self._expr(node.lhs, env)
            rhs, rt = self._expr(node.rhs, env)
            if not lt.compatible(rt):
                self.error("ResolveError",
                           f"cannot compare {lt.kind} with {rt.kind}")
            elif node.op not in ("=", "<>") and lt.kind not in _ORDERED_KINDS \
                    and rt.kind not in _ORDERED_KINDS:
                self.error("ResolveError",
                           f"operator {node.op!r} needs ordered operands")
            return Compare(node.op, lhs, rhs), bool_t
        if isinstance(node, InNulls):
            inner, _ = self._expr(node.expr, env)
            return InNulls(inner), bool_t
        if isinstance(node, NotInNulls):
            inner, _ = self._expr(node.expr, env)
            return NotInNulls(inner), bool_t
        if isinstance(node, InSet):
            inner, ty = self._expr(node.expr, env)
            want = int if ty.kind == "int" else str
            if ty.kind in ("int", "char", "text", "str"):
                if not all(isinstance(v, want) for v in node.values):
                    self.error("ResolveError", "membership literals have the wrong type")
            else:
                self.error("ResolveError", "membership needs a scalar expression")
            return InSet(inner, node.values), bool_t
        # bare expression where a proposition is expected
        node2, ty = self._expr(node, env)
        return node2, ty

    def _expr(self, node, env) -> tuple[FormulaExpr, _Type]:
        if isinstance(node, IntLit):
            return node, _Type("int")
        if isinstance(node, StrLit):
            return node, _Type("str")
        if isinstance(node, CurrentYearExpr):
            return node, _Type("int")
        if isinstance(node, Var):
            if node.name not in env:
                self.error("UnboundVarError", f"unbound variable {node.name!r}")
                return node, _Type("ref", None)
            return node, _Type("ref", env[node.name])
        if isinstance(node, Arith):
            lhs, lt = self._expr(node.lhs, env)
            rhs, rt = self._expr(node.rhs, env)
            if lt.kind != "int" or rt.kind != "int":
                self.error("ResolveError", "arithmetic needs integer operands")
            return Arith(node.op, lhs, rhs), _Type("int")
        if isinstance(node, IsNullCoalesce):
            expr, et = self._expr(node.expr, env)
            fb, ft = self._expr(node.fallback, env)
            if not et.compatible(ft):
                self.error("ResolveError", "isNull branches have different types")
            return IsNullCoalesce(expr, fb), et
        if isinstance(node, (Forall, Exists, Implies, And, Or, Not, Compare,
                             InNulls, NotInNulls, InSet)):
            self.error("ResolveError", "proposition used where a value is expected")
            return node, _Type("int")
        if isinstance(node, CompositeDateRef):
            arg, at = self._expr(node.arg, env)
            return CompositeDateRef(node.name, arg), _Type("date")
        if isinstance(node, Apply):
            arg, at = self._expr(node.arg, env)
            if at.kind != "ref" or at.target is None:
                self.error("ResolveError",
                           f"{node.func!r} applied to a non-row value")
                return node, _Type("int")
            domain = at.target
            f = self.doc.function(domain, node.func)
            if f is not None:
                return Apply(node.func, arg), self._codomain_type(f)
            d = self.doc.derived_fn(domain, node.func)
            if d is not None:
                if d.is_composite:
                    return CompositeDateRef(node.func, arg), _Type("date")
                return Apply(node.func, arg), _Type("int")
            self.error("ResolveError",
                       f"unknown function {node.func!r} on set {domain!r}")
            return node, _Type("int")
        raise AssertionError(f"unhandled node {node!r}")

    @staticmethod
    def _codomain_type(f: FunctionDecl) -> _Type:
        cod = f.codomain
        if isinstance(cod, SetRef):
            return _Type("ref", cod.set_name)
        if isinstance(cod, (NaturalBits, IntRange)):
            return _Type("int")
        if isinstance(cod, UnicodeText):
            return _Type("text")
        return _Type("char")


# ---------------------------------------------------------------------------
# Public API


def parse_schema(text: str) -> ParseResult:
    """Parse and resolve a schema document.

    Returns a result whose ``doc`` is None iff any Error diagnostic was
    produced; warnings never block.
    """
    tokens, diags = _lex(text)
    items = []
    # split the token stream into items: a new item starts at column 1
    starts = [i for i, t in enumerate(tokens[:-1]) if t.col == 1]
    starts.append(len(tokens) - 1)  # EOF sentinels the last window
    for a, b in zip(starts, starts[1:]):
        parser = _ItemParser(tokens, a, b, text)
        try:
            items.append(parser.parse_item())
        except _ParseFail as fail:
            diags.append(fail.diag)
    resolver = _Resolver(diags)
    doc = resolver.resolve(items)
    if any(d.severity == "Error" for d in diags):
        return ParseResult(None, diags)
    doc = SchemaDoc(doc.sets, doc.functions, doc.derived, doc.constraints,
                    doc.rules, source_digest(render_schema(doc)))
    return ParseResult(doc, diags)


def load_schema(text: str) -> SchemaDoc:
    """parse_schema, raising SchemaError on any error diagnostic."""
    result = parse_schema(text)
    if not result.ok:
        raise SchemaError(result.errors)
    return result.doc


def parse_formula(text: str, context: SchemaDoc) -> tuple[Optional[FormulaExpr], list[Diagnostic]]:
    """Parse one closed formula against an already-resolved document."""
    tokens, diags = _lex(text)
    if any(d.severity == "Error" for d in diags):
        return None, diags
    parser = _ItemParser(tokens, 0, len(tokens) - 1, text)
    try:
        ast = parser.parse_formula()
        parser.end_of_item()
    except _ParseFail as fail:
        return None, diags + [fail.diag]
    resolver = _Resolver(diags)
    checker = _TypeChecker(context, resolver)
    typed = checker.check(ast, {}, SourceSpan(1, 1, len(text)))
    if typed is None or any(d.severity == "Error" for d in diags):
        return None, diags
    node, ty = typed
    if ty.kind != "bool":
        diags.append(Diagnostic("Error", "ResolveError", SourceSpan(1, 1, len(text)),
                                "formula is not a proposition"))
        return None, diags
    return node, diags


# ---------------------------------------------------------------------------
# Rendering


def render_schema(doc: SchemaDoc) -> str:
    """Pretty-print a document so that parse_schema(render_schema(doc))
    is structurally equal to doc."""
    lines: list[str] = []
    for s in doc.sets:
        lines.append(f"SET {s.name}")
    for f in doc.functions:
        arrow = "<->" if f.is_key else "->"
        suffix = " | NULLS" if f.nullable else ""
        lines.append(f"{f.name} : {f.domain} {arrow} {_render_domain(f.codomain)}{suffix}")
    for d in doc.derived:
        factors = " * ".join(render_formula(x) for x in d.factors)
        lines.append(f"{d.name} := {factors}")
    for c in doc.constraints:
        body = c.body
        if isinstance(body, Injective):
            lines.append("INJECTIVE " + " * ".join(body.paths))
        elif isinstance(body, Acyclic):
            lines.append("ACYCLIC " + ", ".join(body.functions))
        elif isinstance(body, Existence):
            lines.append(f"EXISTENCE {body.if_known} |- {body.then_known}")
        else:
            prefix = "ALWAYS " if body.temporal else ""
            name = "" if c.id.startswith("C") and c.id[1:].isdigit() else f"{c.id} "
            lines.append(f"{prefix}CONSTRAINT {name}: {render_formula(body.ast)}")
    for r in doc.rules:
        atoms = ", ".join(_render_atom(a) for a in r.body)
        lines.append(f"{r.head_name}({', '.join(r.head_args)}) <- {atoms}")
    return "\n".join(lines) + ("\n" if lines else "")


def _render_domain(cod) -> str:
    if isinstance(cod, SetRef):
        return cod.set_name
    if isinstance(cod, NaturalBits):
        return f"NAT({cod.bits})"
    if isinstance(cod, UnicodeText):
        return f"UNICODE({cod.max_len})"
    if isinstance(cod, EnumChars):
        return "{" + ", ".join(_quote(v) for v in cod.values) + "}"
    lo = "CurrentYear()" if cod.lo is CURRENT_YEAR else str(cod.lo)
    hi = "CurrentYear()" if cod.hi is CURRENT_YEAR else str(cod.hi)
    return f"[{lo}, {hi}]"


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _render_atom(atom: Atom) -> str:
    parts = []
    for field_name, term in atom.bindings:
        if isinstance(term, VarTerm):
            txt = term.name
        elif isinstance(term, IntTerm):
            txt = str(term.value)
        else:
            txt = _quote(term.value)
        parts.append(f"{field_name}={txt}" if field_name else txt)
    return f"{atom.predicate}({', '.join(parts)})"


_PREC = {
    Forall: 0, Exists: 0, Implies: 1, Or: 2, And: 3, Not: 4,
    Compare: 5, InNulls: 5, NotInNulls: 5, InSet: 5, Arith: 6,
}


def render_formula(node: FormulaExpr) -> str:
    return _render(node, 0)


def _render(node: FormulaExpr, parent_prec: int) -> str:
    prec = _PREC.get(type(node), 7)
    if isinstance(node, (Forall, Exists)):
        kw = "forall" if isinstance(node, Forall) else "exists"
        text = f"{kw} {', '.join(node.vars)} in {node.set_name}: {_render(node.body, 0)}"
    elif isinstance(node, Implies):
        text = f"{_render(node.lhs, prec + 1)} => {_render(node.rhs, prec)}"
    elif isinstance(node, Or):
        text = f"{_render(node.lhs, prec)} or {_render(node.rhs, prec + 1)}"
    elif isinstance(node, And):
        text = f"{_render(node.lhs, prec)} and {_render(node.rhs, prec + 1)}"
    elif isinstance(node, Not):
        text = f"not {_render(node.operand, prec)}"
    elif isinstance(node, Compare):
        text = f"{_render(node.lhs, 6)} {node.op} {_render(node.rhs, 6)}"
    elif isinstance(node, InNulls):
        text = f"{_render(node.expr, 6)} in NULLS"
    elif isinstance(node, NotInNulls):
        text = f"{_render(node.expr, 6)} not in NULLS"
    elif isinstance(node, InSet):
        lits = ", ".join(_quote(v) if isinstance(v, str) else str(v)
                         for v in node.values)
        text = f"{_render(node.expr, 6)} in {{{lits}}}"
    elif isinstance(node, Arith):
        text = f"{_render(node.lhs, prec)} {node.op} {_render(node.rhs, prec + 1)}"
    elif isinstance(node, Apply):
        text = f"{node.func}({_render(node.arg, 0)})"
    elif isinstance(node, CompositeDateRef):
        text = f"{node.name}({_render(node.arg, 0)})"
    elif isinstance(node, Var):
        text = node.name
    elif isinstance(node, IntLit):
        text = str(node.value)
    elif isinstance(node, StrLit):
        text = _quote(node.value)
    elif isinstance(node, IsNullCoalesce):
        text = f"isNull({_render(node.expr, 0)}, {_render(node.fallback, 0)})"
    elif isinstance(node, CurrentYearExpr):
        text = "CurrentYear()"
    else:
        raise AssertionError(f"unhandled node {node!r}")
    if prec < parent_prec:
        return f"({text})"
    return text
