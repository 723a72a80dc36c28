"""Object model for mathematical data model schemas.

A schema document is a flat, ordered collection of set declarations, typed
functions, derived functions, constraints, and inference rules.  Everything
here is immutable after construction and safe to share across threads.
Source spans are carried for diagnostics but excluded from structural
equality, so two parses of equivalent text compare equal.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union


@dataclass(frozen=True)
class SourceSpan:
    """1-based line/column position with a length in characters."""

    line: int = 1
    column: int = 1
    length: int = 0


#: Singleton marker used as a dynamic bound inside IntRange.
class _CurrentYearBound:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "CurrentYear()"


CURRENT_YEAR = _CurrentYearBound()

Bound = Union[int, _CurrentYearBound]


# ---------------------------------------------------------------------------
# Value domains


@dataclass(frozen=True)
class NaturalBits:
    """Unsigned integer domain of the given bit width."""

    bits: int

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bit width must be >= 1")

    def contains(self, value, clock_year: int) -> bool:
        return isinstance(value, int) and 0 <= value < (1 << self.bits)


@dataclass(frozen=True)
class IntRange:
    """Integer interval; either bound may be the dynamic CURRENT_YEAR marker."""

    lo: Bound
    hi: Bound

    def __post_init__(self):
        if isinstance(self.lo, int) and isinstance(self.hi, int) and self.lo > self.hi:
            raise ValueError("empty integer range")

    def contains(self, value, clock_year: int) -> bool:
        if not isinstance(value, int):
            return False
        lo = clock_year if isinstance(self.lo, _CurrentYearBound) else self.lo
        hi = clock_year if isinstance(self.hi, _CurrentYearBound) else self.hi
        return lo <= value <= hi


@dataclass(frozen=True)
class UnicodeText:
    """Unicode string domain capped at max_len characters."""

    max_len: int

    def __post_init__(self):
        if self.max_len < 1:
            raise ValueError("max length must be >= 1")

    def contains(self, value, clock_year: int) -> bool:
        return isinstance(value, str) and len(value) <= self.max_len


@dataclass(frozen=True)
class EnumChars:
    """Closed set of distinct single-character values."""

    values: tuple[str, ...]

    def __post_init__(self):
        if any(len(v) != 1 for v in self.values):
            raise ValueError("enum values must be single characters")
        if len(set(self.values)) != len(self.values):
            raise ValueError("enum values must be distinct")

    def contains(self, value, clock_year: int) -> bool:
        return value in self.values


ValueDomain = Union[NaturalBits, IntRange, UnicodeText, EnumChars]


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class SetDecl:
    name: str
    span: SourceSpan = field(default=SourceSpan(), compare=False)


@dataclass(frozen=True)
class SetRef:
    """Codomain referencing another declared set."""

    set_name: str


@dataclass(frozen=True)
class FunctionDecl:
    """A stored, typed function from a set to a value domain or another set.

    ``nullable`` is the "| NULLS" marker; ``is_key`` the "<->" bijection
    marker (which implies totality).
    """

    name: str
    domain: str
    codomain: Union[SetRef, NaturalBits, IntRange, UnicodeText, EnumChars]
    nullable: bool = False
    is_key: bool = False
    span: SourceSpan = field(default=SourceSpan(), compare=False)

    def __post_init__(self):
        if self.is_key and self.nullable:
            raise ValueError(f"key function {self.name} may not be nullable")


# ---------------------------------------------------------------------------
# Formula expressions

# Nodes form a closed variant tree; the parser guarantees every Var is bound
# by an enclosing quantifier before a node reaches a SchemaDoc.


@dataclass(frozen=True)
class Forall:
    vars: tuple[str, ...]
    set_name: str
    body: "FormulaExpr"


@dataclass(frozen=True)
class Exists:
    vars: tuple[str, ...]
    set_name: str
    body: "FormulaExpr"


@dataclass(frozen=True)
class Implies:
    lhs: "FormulaExpr"
    rhs: "FormulaExpr"


@dataclass(frozen=True)
class And:
    lhs: "FormulaExpr"
    rhs: "FormulaExpr"


@dataclass(frozen=True)
class Or:
    lhs: "FormulaExpr"
    rhs: "FormulaExpr"


@dataclass(frozen=True)
class Not:
    operand: "FormulaExpr"


COMPARE_OPS = ("=", "<>", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Compare:
    op: str
    lhs: "FormulaExpr"
    rhs: "FormulaExpr"

    def __post_init__(self):
        if self.op not in COMPARE_OPS:
            raise ValueError(f"bad comparison operator {self.op!r}")


@dataclass(frozen=True)
class Arith:
    op: str  # "+" or "-"
    lhs: "FormulaExpr"
    rhs: "FormulaExpr"

    def __post_init__(self):
        if self.op not in ("+", "-"):
            raise ValueError(f"bad arithmetic operator {self.op!r}")


@dataclass(frozen=True)
class Apply:
    """Application of a declared (or scalar derived) function; arity 1."""

    func: str
    arg: "FormulaExpr"


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class StrLit:
    value: str


@dataclass(frozen=True)
class IsNullCoalesce:
    expr: "FormulaExpr"
    fallback: "FormulaExpr"


@dataclass(frozen=True)
class InNulls:
    expr: "FormulaExpr"


@dataclass(frozen=True)
class NotInNulls:
    expr: "FormulaExpr"


@dataclass(frozen=True)
class InSet:
    expr: "FormulaExpr"
    values: tuple[Union[int, str], ...]


@dataclass(frozen=True)
class CurrentYearExpr:
    pass


@dataclass(frozen=True)
class CompositeDateRef:
    """Reference to a derived composite date (a year/month/day triple)."""

    name: str
    arg: "FormulaExpr"


FormulaExpr = Union[
    Forall, Exists, Implies, And, Or, Not, Compare, Arith, Apply, Var,
    IntLit, StrLit, IsNullCoalesce, InNulls, NotInNulls, InSet,
    CurrentYearExpr, CompositeDateRef,
]


@dataclass(frozen=True)
class DerivedFunction:
    """Computed attribute, never stored: a scalar expression or a date triple.

    The body is written over the implicit row variable ``x``; a composite
    date carries exactly three factors (year, month, day).
    """

    name: str
    domain: str
    factors: tuple[FormulaExpr, ...]  # length 1 (scalar) or 3 (composite date)
    span: SourceSpan = field(default=SourceSpan(), compare=False)

    @property
    def is_composite(self) -> bool:
        return len(self.factors) == 3


# ---------------------------------------------------------------------------
# Constraints


@dataclass(frozen=True)
class Injective:
    """Uniqueness over the tuple of the named function paths."""

    paths: tuple[str, ...]
    domain: str


@dataclass(frozen=True)
class Acyclic:
    """No directed cycle in the union of the self-map edge sets."""

    functions: tuple[str, ...]
    domain: str


@dataclass(frozen=True)
class Existence:
    """if_known(x) non-NULL forces then_known(x) non-NULL."""

    if_known: str
    then_known: str
    domain: str


@dataclass(frozen=True)
class Formula:
    ast: FormulaExpr
    temporal: bool = False  # the "always in every future state" quantifier


ConstraintBody = Union[Injective, Acyclic, Existence, Formula]


@dataclass(frozen=True)
class ConstraintDecl:
    id: str
    body: ConstraintBody
    source_text: str = field(default="", compare=False)
    span: SourceSpan = field(default=SourceSpan(), compare=False)


# ---------------------------------------------------------------------------
# Datalog rules


@dataclass(frozen=True)
class VarTerm:
    name: str


@dataclass(frozen=True)
class IntTerm:
    value: int


@dataclass(frozen=True)
class StrTerm:
    value: str


Term = Union[VarTerm, IntTerm, StrTerm]


@dataclass(frozen=True)
class Atom:
    """Body atom: a base set or derived predicate with positional and/or
    field=term bindings (field None means positional)."""

    predicate: str
    bindings: tuple[tuple[Optional[str], Term], ...]


@dataclass(frozen=True)
class DatalogRule:
    head_name: str
    head_args: tuple[str, ...]
    body: tuple[Atom, ...]
    span: SourceSpan = field(default=SourceSpan(), compare=False)


# ---------------------------------------------------------------------------
# Document


@dataclass(frozen=True)
class SchemaDoc:
    """A fully resolved schema document; all name references are valid."""

    sets: tuple[SetDecl, ...] = ()
    functions: tuple[FunctionDecl, ...] = ()
    derived: tuple[DerivedFunction, ...] = ()
    constraints: tuple[ConstraintDecl, ...] = ()
    rules: tuple[DatalogRule, ...] = ()
    source_digest: str = field(default="", compare=False)

    @cached_property
    def set_names(self) -> frozenset[str]:
        return frozenset(s.name for s in self.sets)

    @cached_property
    def functions_by_domain(self) -> dict[str, dict[str, FunctionDecl]]:
        out: dict[str, dict[str, FunctionDecl]] = {s.name: {} for s in self.sets}
        for f in self.functions:
            out.setdefault(f.domain, {})[f.name] = f
        return out

    @cached_property
    def derived_by_domain(self) -> dict[str, dict[str, DerivedFunction]]:
        out: dict[str, dict[str, DerivedFunction]] = {s.name: {} for s in self.sets}
        for d in self.derived:
            out.setdefault(d.domain, {})[d.name] = d
        return out

    def function(self, domain: str, name: str) -> Optional[FunctionDecl]:
        return self.functions_by_domain.get(domain, {}).get(name)

    def derived_fn(self, domain: str, name: str) -> Optional[DerivedFunction]:
        return self.derived_by_domain.get(domain, {}).get(name)

    def domains_of(self, func_name: str) -> list[str]:
        """All sets that declare a stored or derived function of this name."""
        out = [f.domain for f in self.functions if f.name == func_name]
        out += [d.domain for d in self.derived if d.name == func_name]
        return out


def source_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def count_elements(doc: SchemaDoc) -> tuple[int, int, int]:
    """(functions, explicit constraints, rules).

    Derived functions count as functions; implicit codomain/totality
    constraints are not counted.
    """
    return (
        len(doc.functions) + len(doc.derived),
        len(doc.constraints),
        len(doc.rules),
    )


def iter_formula(node: FormulaExpr):
    """Yield node and all descendants in preorder."""
    yield node
    children: tuple = ()
    if isinstance(node, (Forall, Exists)):
        children = (node.body,)
    elif isinstance(node, (Implies, And, Or, Compare, Arith)):
        children = (node.lhs, node.rhs)
    elif isinstance(node, Not):
        children = (node.operand,)
    elif isinstance(node, Apply):
        children = (node.arg,)
    elif isinstance(node, IsNullCoalesce):
        children = (node.expr, node.fallback)
    elif isinstance(node, (InNulls, NotInNulls, InSet)):
        children = (node.expr,)
    elif isinstance(node, CompositeDateRef):
        children = (node.arg,)
    for child in children:
        yield from iter_formula(child)
