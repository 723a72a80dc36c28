"""Compiles a resolved schema document to a relational model.

Every set becomes a table with a surrogate key column "x" (auto-added when
the schema does not declare one); set-valued functions become foreign keys
referencing surrogates; key functions and injective products become unique
keys.  Constraints are classified and annotated with the full set of
(table, column) pairs whose mutation can violate them, including columns
reached through composition and through derived functions, so the write
checker can trigger them from any direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .model import (
    Acyclic, Apply, Atom, CompositeDateRef, ConstraintDecl, DatalogRule,
    DerivedFunction, EnumChars, Exists, Existence, Forall, FormulaExpr,
    Injective, IntRange, NaturalBits, SchemaDoc, SetRef, SourceSpan,
    UnicodeText, Var, VarTerm, iter_formula,
)
from .parser import Diagnostic, _render_domain

AUTO_SURROGATE = NaturalBits(32)


@dataclass(frozen=True)
class ColumnDef:
    name: str
    storage: Union[NaturalBits, IntRange, UnicodeText, EnumChars, SetRef]
    nullable: bool

    @property
    def is_ref(self) -> bool:
        return isinstance(self.storage, SetRef)


@dataclass(frozen=True)
class TableDef:
    name: str
    surrogate_domain: NaturalBits
    columns: tuple[ColumnDef, ...]
    foreign_keys: tuple[tuple[str, str], ...]        # (column, target table)
    unique_keys: tuple[tuple[str, ...], ...]          # component names; may be derived

    def column(self, name: str) -> Optional[ColumnDef]:
        for col in self.columns:
            if col.name == name:
                return col
        return None


# Constraint kinds
UNIQUENESS = "Uniqueness"
ACYCLICITY = "Acyclicity"
EXISTENCE = "Existence"
ROW_LOCAL = "RowLocal"
CROSS_ROW = "CrossRow"
CROSS_TABLE = "CrossTable"
TEMPORAL = "Temporal"


@dataclass
class CompiledConstraint:
    id: str
    kind: str
    display_text: str
    reads_scope: frozenset[tuple[str, str]]
    table: str                                   # home table (outer quantifier / key table)
    key: tuple[str, ...] = ()                    # Uniqueness components
    functions: tuple[str, ...] = ()              # Acyclicity edge functions
    if_known: str = ""                           # Existence
    then_known: str = ""
    outer_vars: tuple[tuple[str, str], ...] = () # formula (var, table) prefix
    body: Optional[FormulaExpr] = None           # quantifier-free formula body
    temporal: bool = False
    symmetric: bool = False                      # two rows of one table
    ref_depth: int = 0                           # max ref hops read from a binding row
    exists_tables: frozenset[str] = frozenset()
    explicit: bool = True

    @property
    def tables(self) -> frozenset[str]:
        return frozenset(t for t, _ in self.reads_scope) | {self.table}


@dataclass(frozen=True)
class SchemaStats:
    tables: int
    foreign_keys: int
    unique_keys: int
    functions: int
    explicit_constraints: int
    compiled_constraints: int
    datalog_rules: int


@dataclass
class CompiledSchema:
    doc: SchemaDoc
    tables: dict[str, TableDef]
    constraints: list[CompiledConstraint]
    rules: tuple[DatalogRule, ...]
    digest: str
    _caches: dict = field(default_factory=dict, repr=False)

    @property
    def stats(self) -> SchemaStats:
        return SchemaStats(
            tables=len(self.tables),
            foreign_keys=sum(len(t.foreign_keys) for t in self.tables.values()),
            unique_keys=sum(len(t.unique_keys) for t in self.tables.values()),
            functions=len(self.doc.functions) + len(self.doc.derived),
            explicit_constraints=sum(1 for c in self.constraints if c.explicit),
            compiled_constraints=len(self.constraints),
            datalog_rules=len(self.rules),
        )

    def derived_for(self, table: str) -> dict[str, DerivedFunction]:
        return self.doc.derived_by_domain.get(table, {})

    def constraints_for(self, table: str) -> list[CompiledConstraint]:
        return [c for c in self.constraints
                if table in c.tables or any(t == table for t, _ in c.reads_scope)]


@dataclass
class CompileResult:
    schema: Optional[CompiledSchema]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.schema is not None


class CompileError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics[:5]))


def schema_stats(cs: CompiledSchema) -> SchemaStats:
    return cs.stats


# ---------------------------------------------------------------------------


def compile_schema(doc: SchemaDoc) -> CompileResult:
    diags: list[Diagnostic] = list(lint_meta_axioms(doc))
    errors: list[Diagnostic] = []

    def err(span: SourceSpan, message: str):
        errors.append(Diagnostic("Error", "CompileError", span, message))

    tables: dict[str, TableDef] = {}
    injectives_by_table: dict[str, list[tuple[str, ...]]] = {}
    for c in doc.constraints:
        if isinstance(c.body, Injective):
            injectives_by_table.setdefault(c.body.domain, []).append(c.body.paths)

    for s in doc.sets:
        funcs = [f for f in doc.functions if f.domain == s.name]
        surrogate = None
        columns: list[ColumnDef] = []
        foreign: list[tuple[str, str]] = []
        uniques: list[tuple[str, ...]] = []
        for f in funcs:
            if f.name == "x":
                if f.is_key and not isinstance(f.codomain, SetRef):
                    surrogate = f.codomain
                    continue
                err(f.span, f"{s.name}.x is reserved for the surrogate key")
                continue
            columns.append(ColumnDef(f.name, f.codomain, f.nullable))
            if isinstance(f.codomain, SetRef):
                foreign.append((f.name, f.codomain.set_name))
            if f.is_key:
                uniques.append((f.name,))
        if surrogate is None:
            surrogate = AUTO_SURROGATE
            diags.append(Diagnostic(
                "Warning", "MissingSurrogate", SourceSpan(),
                f"set {s.name!r} declares no surrogate key; "
                f"added x : {s.name} <-> NAT(32)"))
        if not isinstance(surrogate, NaturalBits):
            err(SourceSpan(), f"surrogate of {s.name!r} must be a NAT domain")
            surrogate = AUTO_SURROGATE
        all_uniques = [("x",)] + uniques + injectives_by_table.get(s.name, [])
        tables[s.name] = TableDef(s.name, surrogate, tuple(columns),
                                  tuple(foreign), tuple(all_uniques))

    constraints: list[CompiledConstraint] = []

    # implicit uniqueness: surrogate keys and natural keys
    for s in doc.sets:
        table = tables[s.name]
        xdecl = doc.function(s.name, "x")
        display = (f"x : {s.name} <-> {_render_domain(table.surrogate_domain)}"
                   if xdecl else
                   f"x : {s.name} <-> {_render_domain(table.surrogate_domain)} (auto)")
        constraints.append(CompiledConstraint(
            id=f"key:{s.name}.x", kind=UNIQUENESS, display_text=display,
            reads_scope=frozenset({(s.name, "x")}), table=s.name,
            key=("x",), explicit=False))
        for f in doc.functions:
            if f.domain == s.name and f.is_key and f.name != "x":
                text = (f"{f.name} : {f.domain} <-> {_render_domain(f.codomain)}")
                constraints.append(CompiledConstraint(
                    id=f"key:{s.name}.{f.name}", kind=UNIQUENESS,
                    display_text=text,
                    reads_scope=frozenset({(s.name, f.name)}), table=s.name,
                    key=(f.name,), explicit=False))

    for decl in doc.constraints:
        compiled = _compile_constraint(decl, doc, err)
        if compiled is not None:
            constraints.append(compiled)

    if errors:
        return CompileResult(None, diags + errors)
    cs = CompiledSchema(doc, tables, constraints, doc.rules, doc.source_digest)
    return CompileResult(cs, diags)


def _compile_constraint(decl: ConstraintDecl, doc: SchemaDoc, err):
    body = decl.body
    display = decl.source_text or decl.id
    if isinstance(body, Injective):
        scope = set()
        for path in body.paths:
            scope |= _expand_component(body.domain, path, doc)
        return CompiledConstraint(
            id=decl.id, kind=UNIQUENESS, display_text=display,
            reads_scope=frozenset(scope), table=body.domain, key=body.paths)
    if isinstance(body, Acyclic):
        for name in body.functions:
            f = doc.function(body.domain, name)
            if f is None or not isinstance(f.codomain, SetRef) \
                    or f.codomain.set_name != body.domain:
                err(decl.span, f"ACYCLIC {name!r} is not a self-map on {body.domain!r}")
                return None
        scope = {(body.domain, name) for name in body.functions}
        return CompiledConstraint(
            id=decl.id, kind=ACYCLICITY, display_text=display,
            reads_scope=frozenset(scope), table=body.domain,
            functions=body.functions)
    if isinstance(body, Existence):
        fa = doc.function(body.domain, body.if_known)
        fb = doc.function(body.domain, body.then_known)
        if fa is None or fb is None or fa.domain != fb.domain:
            err(decl.span, "EXISTENCE functions must share one domain")
            return None
        scope = {(body.domain, body.if_known), (body.domain, body.then_known)}
        return CompiledConstraint(
            id=decl.id, kind=EXISTENCE, display_text=display,
            reads_scope=frozenset(scope), table=body.domain,
            if_known=body.if_known, then_known=body.then_known)

    # formula constraint: strip the outer quantifier prefix
    outer: list[tuple[str, str]] = []
    node = body.ast
    while isinstance(node, Forall):
        for v in node.vars:
            outer.append((v, node.set_name))
        node = node.body
    if not outer:
        err(decl.span, "constraint formula must be universally quantified")
        return None
    scope = dependency_scope(decl, doc)
    scope_tables = {t for t, _ in scope} | {t for _, t in outer}
    symmetric = (len(outer) == 2 and outer[0][1] == outer[1][1])
    if body.temporal:
        kind = TEMPORAL
    elif symmetric and len(scope_tables) == 1:
        kind = CROSS_ROW
    elif len(scope_tables) > 1:
        kind = CROSS_TABLE
    elif _ref_depth(node) == 0 and len(outer) == 1:
        kind = ROW_LOCAL
    else:
        kind = CROSS_ROW
    exists_tables = frozenset(
        n.set_name for n in iter_formula(node) if isinstance(n, Exists))
    return CompiledConstraint(
        id=decl.id, kind=kind, display_text=display,
        reads_scope=frozenset(scope), table=outer[0][1],
        outer_vars=tuple(outer), body=node, temporal=body.temporal,
        symmetric=symmetric, ref_depth=_ref_depth(node),
        exists_tables=exists_tables)


def _expand_component(table: str, name: str, doc: SchemaDoc) -> set[tuple[str, str]]:
    """Scope of one key component: a stored column, or a derived function
    expanded to the stored columns it reads."""
    if doc.function(table, name) is not None:
        return {(table, name)}
    d = doc.derived_fn(table, name)
    if d is None:
        return set()
    out: set[tuple[str, str]] = set()
    for factor in d.factors:
        out |= _formula_scope(factor, {"x": table}, doc)
    return out


def dependency_scope(decl: ConstraintDecl, doc: SchemaDoc) -> set[tuple[str, str]]:
    """Every (table, column) whose value can influence the constraint,
    including columns reached through composition and derived functions."""
    body = decl.body
    if isinstance(body, Injective):
        out: set[tuple[str, str]] = set()
        for path in body.paths:
            out |= _expand_component(body.domain, path, doc)
        return out
    if isinstance(body, Acyclic):
        return {(body.domain, f) for f in body.functions}
    if isinstance(body, Existence):
        return {(body.domain, body.if_known), (body.domain, body.then_known)}
    return _formula_scope(body.ast, {}, doc)


def _formula_scope(node: FormulaExpr, env: dict[str, str], doc: SchemaDoc) -> set[tuple[str, str]]:
    out: set[tuple[str, str]] = set()

    def expr_set(n) -> Optional[str]:
        """Target set of a ref-valued expression, None for scalars."""
        if isinstance(n, Var):
            return env.get(n.name)
        if isinstance(n, Apply):
            s = expr_set(n.arg)
            if s is None:
                return None
            f = doc.function(s, n.func)
            if f is not None and isinstance(f.codomain, SetRef):
                return f.codomain.set_name
            return None
        return None

    def walk(n, local_env):
        nonlocal env
        saved = env
        env = local_env
        try:
            if isinstance(n, (Forall, Exists)):
                inner = dict(local_env)
                for v in n.vars:
                    inner[v] = n.set_name
                walk(n.body, inner)
                return
            if isinstance(n, Apply):
                s = expr_set(n.arg)
                if s is not None:
                    if doc.function(s, n.func) is not None:
                        out.add((s, n.func))
                    else:
                        d = doc.derived_fn(s, n.func)
                        if d is not None:
                            for factor in d.factors:
                                out.update(_formula_scope(factor, {"x": s}, doc))
                walk(n.arg, local_env)
                return
            if isinstance(n, CompositeDateRef):
                s = expr_set(n.arg)
                if s is not None:
                    d = doc.derived_fn(s, n.name)
                    if d is not None:
                        for factor in d.factors:
                            out.update(_formula_scope(factor, {"x": s}, doc))
                walk(n.arg, local_env)
                return
            for child in _children(n):
                walk(child, local_env)
        finally:
            env = saved

    walk(node, dict(env))
    return out


def _children(n):
    from .model import And, Arith, Compare, Implies, InNulls, InSet, \
        IsNullCoalesce, Not, NotInNulls, Or
    if isinstance(n, (Implies, And, Or, Compare, Arith)):
        return (n.lhs, n.rhs)
    if isinstance(n, Not):
        return (n.operand,)
    if isinstance(n, IsNullCoalesce):
        return (n.expr, n.fallback)
    if isinstance(n, (InNulls, NotInNulls, InSet)):
        return (n.expr,)
    return ()


def _ref_depth(node: FormulaExpr) -> int:
    """Maximum number of reference hops from a binding row to any column
    the formula reads: Sex(Mother(x)) reads one hop away, Mother(x) zero."""
    depth = 0
    for n in iter_formula(node):
        if isinstance(n, (Apply, CompositeDateRef)):
            depth = max(depth, _arg_distance(n.arg))
    return depth


def _arg_distance(n) -> int:
    if isinstance(n, Var):
        return 0
    if isinstance(n, (Apply, CompositeDateRef)):
        return _arg_distance(n.arg) + 1
    return 0


# ---------------------------------------------------------------------------
# Lints


def lint_meta_axioms(doc: SchemaDoc) -> list[Diagnostic]:
    """Warnings for surrogate-key, natural-key and redundancy rules."""
    out: list[Diagnostic] = []
    declared_surrogate = {f.domain for f in doc.functions if f.name == "x" and f.is_key}
    natural_keys = {f.domain for f in doc.functions if f.is_key and f.name != "x"}
    for f in doc.functions:
        if f.is_key and f.name != "x":
            out.append(Diagnostic(
                "Warning", "NaturalKeyDemoted", f.span,
                f"natural key {f.name!r} on {f.domain!r} is kept as a unique key; "
                "the surrogate x stays the primary key"))
        if isinstance(f.codomain, SetRef):
            target = f.codomain.set_name
            if target not in declared_surrogate and target in natural_keys:
                out.append(Diagnostic(
                    "Warning", "FkToNaturalKey", f.span,
                    f"{f.name!r} would reference the natural key of {target!r}; "
                    "it is bound to the auto-added surrogate instead"))
    seen: dict = {}
    for c in doc.constraints:
        key = c.body
        if key in seen:
            out.append(Diagnostic(
                "Warning", "DuplicateConstraint", c.span,
                f"constraint {c.id!r} duplicates {seen[key]!r}"))
        else:
            seen[key] = c.id
    out.extend(_lint_subsumed_rules(doc))
    return out


def _lint_subsumed_rules(doc: SchemaDoc) -> list[Diagnostic]:
    out = []
    base_sets = doc.set_names
    for j, later in enumerate(doc.rules):
        for i, earlier in enumerate(doc.rules[:j]):
            if earlier.head_name != later.head_name:
                continue
            if _subsumes(earlier, later, base_sets):
                out.append(Diagnostic(
                    "Warning", "SubsumedRule", later.span,
                    f"rule {j + 1} for {later.head_name!r} derives nothing beyond "
                    f"rule {i + 1}"))
                break
    return out


def _subsumes(a: DatalogRule, b: DatalogRule, base_sets: frozenset[str]) -> bool:
    """True when a variable substitution maps a's head to b's head and every
    atom of a's body onto an atom of b's body."""
    if len(a.head_args) != len(b.head_args):
        return False
    subst: dict[str, object] = {}

    def unify_term(ta, tb) -> bool:
        if isinstance(ta, VarTerm):
            if ta.name in subst:
                return subst[ta.name] == tb
            subst[ta.name] = tb
            return True
        return ta == tb

    for va, vb in zip(a.head_args, b.head_args):
        if not unify_term(VarTerm(va), VarTerm(vb)):
            return False

    def match(atoms_a: list[Atom]) -> bool:
        if not atoms_a:
            return True
        atom = atoms_a[0]
        for cand in b.body:
            if cand.predicate != atom.predicate:
                continue
            if len(cand.bindings) != len(atom.bindings):
                continue
            snapshot = dict(subst)
            ok = True
            for (fa, ta), (fb, tb) in zip(_norm(atom, base_sets),
                                          _norm(cand, base_sets)):
                if fa != fb or not unify_term(ta, tb):
                    ok = False
                    break
            if ok and match(atoms_a[1:]):
                return True
            subst.clear()
            subst.update(snapshot)
        return False

    return match(list(a.body))


def _norm(atom: Atom, base_sets: frozenset[str]):
    """Base-set atoms: map the positional surrogate to field "x" and sort by
    field so binding order does not defeat matching.  Derived atoms keep
    positional order."""
    if atom.predicate in base_sets:
        bindings = [("x" if f is None and i == 0 else f, t)
                    for i, (f, t) in enumerate(atom.bindings)]
        return sorted(bindings, key=lambda ft: ft[0] or "")
    return list(atom.bindings)
