"""Three-valued constraint evaluation and write adjudication.

Formulas evaluate under Kleene logic: a comparison or arithmetic node with a
NULL operand is Unknown, quantifiers aggregate three-valued, and only a
definitely-False constraint rejects a write — a record that could still
become valid when its NULLs are filled in is never turned away.  isNull /
"in NULLS" consume NULL explicitly and stay two-valued.

check_write adjudicates one tentative write by evaluating exactly the
constraints whose dependency scope intersects the touched columns, bound to
the touched rows plus every row that can reach them through references —
in both directions for two-row constraints.  check_all is the full-recheck
oracle the incremental path is property-tested against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .compiler import (
    ACYCLICITY, EXISTENCE, UNIQUENESS, CompiledConstraint, CompiledSchema,
    TableDef,
)
from .model import (
    And, Apply, Arith, Compare, CompositeDateRef, CurrentYearExpr, Exists,
    Forall, FormulaExpr, Implies, InNulls, InSet, IntLit, IsNullCoalesce,
    Not, NotInNulls, Or, SetRef, StrLit, Var,
)

# Three-valued truth: Python True / False, with None as Unknown.
TRUE = True
FALSE = False
UNKNOWN = None
Truth = Optional[bool]

LESS, EQUAL, GREATER = -1, 0, 1


class EngineError(Exception):
    pass


class UnknownTable(EngineError):
    pass


class UnknownField(EngineError):
    pass


class NotFound(EngineError):
    pass


class DomainError(EngineError):
    pass


class EvalError(EngineError):
    pass


@dataclass(frozen=True)
class EvalContext:
    """Injectable clock and safety limits; the clock is stable per check."""

    clock_year: int
    recursion_limit: int = 10_000

    @staticmethod
    def now(recursion_limit: int = 10_000) -> "EvalContext":
        import datetime
        return EvalContext(datetime.date.today().year, recursion_limit)


@dataclass(frozen=True)
class Insert:
    table: str
    values: dict

    def __hash__(self):  # pragma: no cover - convenience only
        return id(self)


@dataclass(frozen=True)
class Update:
    table: str
    x: int
    assignments: dict

    def __hash__(self):  # pragma: no cover
        return id(self)


@dataclass(frozen=True)
class Delete:
    table: str
    x: int


WriteOp = Union[Insert, Update, Delete]


@dataclass(frozen=True)
class Violation:
    constraint_id: str
    witnesses: tuple[tuple[str, int], ...]
    message: str


@dataclass(frozen=True)
class CheckReport:
    verdict: str  # "Accept" | "Reject"
    violations: tuple[Violation, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.verdict == "Accept"

    @staticmethod
    def accept() -> "CheckReport":
        return CheckReport("Accept")

    @staticmethod
    def reject(violations) -> "CheckReport":
        return CheckReport("Reject", tuple(violations))


ACCEPT = CheckReport.accept()


# ---------------------------------------------------------------------------
# Kleene helpers


def k_not(a: Truth) -> Truth:
    return None if a is None else (not a)


def k_and(a: Truth, b: Truth) -> Truth:
    if a is False or b is False:
        return False
    if a is True and b is True:
        return True
    return None


def k_or(a: Truth, b: Truth) -> Truth:
    if a is True or b is True:
        return True
    if a is False and b is False:
        return False
    return None


def compare_dates(a: tuple, b: tuple) -> int:
    """Lexicographic order on (year, month, day); negative years first."""
    if a == b:
        return EQUAL
    return LESS if a < b else GREATER


# ---------------------------------------------------------------------------
# Database view


class TentativeDb:
    """Read-only overlay of one table over a base database."""

    def __init__(self, base, table: str, override: dict):
        self._base = base
        self._table = table
        self._override = override

    def rows(self, table: str) -> dict:
        if table == self._table:
            return self._override
        return self._base.rows(table)


def overlay_insert(db, table: str, x: int, row: dict) -> TentativeDb:
    merged = dict(db.rows(table))
    merged[x] = row
    return TentativeDb(db, table, merged)


def overlay_delete(db, table: str, x: int) -> TentativeDb:
    merged = dict(db.rows(table))
    merged.pop(x, None)
    return TentativeDb(db, table, merged)


# ---------------------------------------------------------------------------
# Formula compilation (AST -> closures over (db, ctx, env))


class _Compiler:
    def __init__(self, cs: CompiledSchema):
        self.cs = cs
        self.doc = cs.doc

    def expr(self, node: FormulaExpr, types: dict[str, str]) -> Callable:
        doc = self.doc
        if isinstance(node, IntLit):
            v = node.value
            return lambda db, ctx, env: v
        if isinstance(node, StrLit):
            v = node.value
            return lambda db, ctx, env: v
        if isinstance(node, CurrentYearExpr):
            return lambda db, ctx, env: ctx.clock_year
        if isinstance(node, Var):
            name = node.name
            return lambda db, ctx, env: env[name]["x"]
        if isinstance(node, Arith):
            lf, rf = self.expr(node.lhs, types), self.expr(node.rhs, types)
            if node.op == "+":
                def add(db, ctx, env):
                    a = lf(db, ctx, env)
                    if a is None:
                        return None
                    b = rf(db, ctx, env)
                    return None if b is None else a + b
                return add

            def sub(db, ctx, env):
                a = lf(db, ctx, env)
                if a is None:
                    return None
                b = rf(db, ctx, env)
                return None if b is None else a - b
            return sub
        if isinstance(node, IsNullCoalesce):
            ef, ff = self.expr(node.expr, types), self.expr(node.fallback, types)

            def coalesce(db, ctx, env):
                v = ef(db, ctx, env)
                return ff(db, ctx, env) if v is None else v
            return coalesce
        if isinstance(node, Apply):
            return self._apply(node, types)
        if isinstance(node, CompositeDateRef):
            return self._composite(node, types)
        raise AssertionError(f"not an expression: {node!r}")

    def _row_fn(self, arg: FormulaExpr, types: dict[str, str]):
        """Closure yielding the row the argument denotes (or None), plus the
        set it belongs to."""
        if isinstance(arg, Var):
            name = arg.name
            return (lambda db, ctx, env: env[name]), types[name]
        # composed application: evaluate the inner ref then fetch the row
        inner_set = self._expr_set(arg, types)
        inner = self.expr(arg, types)

        def fetch(db, ctx, env):
            ref = inner(db, ctx, env)
            if ref is None:
                return None
            return db.rows(inner_set).get(ref)
        return fetch, inner_set

    def _expr_set(self, node: FormulaExpr, types: dict[str, str]) -> str:
        if isinstance(node, Var):
            return types[node.name]
        if isinstance(node, Apply):
            domain = self._expr_set(node.arg, types)
            f = self.doc.function(domain, node.func)
            assert f is not None and isinstance(f.codomain, SetRef)
            return f.codomain.set_name
        raise AssertionError(f"not a row-valued expression: {node!r}")

    def _apply(self, node: Apply, types: dict[str, str]) -> Callable:
        arg_set = self._expr_set(node.arg, types)
        row_fn, domain = self._row_fn(node.arg, types)
        name = node.func
        if self.doc.function(domain, name) is not None:
            def read(db, ctx, env):
                row = row_fn(db, ctx, env)
                return None if row is None else row[name]
            return read
        derived = self.doc.derived_fn(domain, name)
        assert derived is not None and not derived.is_composite
        factor = self.expr(derived.factors[0], {"x": domain})

        def compute(db, ctx, env):
            row = row_fn(db, ctx, env)
            if row is None:
                return None
            return factor(db, ctx, {"x": row})
        return compute

    def _composite(self, node: CompositeDateRef, types: dict[str, str]) -> Callable:
        row_fn, domain = self._row_fn(node.arg, types)
        derived = self.doc.derived_fn(domain, node.name)
        assert derived is not None and derived.is_composite
        fy, fm, fd = (self.expr(f, {"x": domain}) for f in derived.factors)

        def compute(db, ctx, env):
            row = row_fn(db, ctx, env)
            if row is None:
                return None
            inner = {"x": row}
            y = fy(db, ctx, inner)
            m = fm(db, ctx, inner)
            d = fd(db, ctx, inner)
            if y is None or m is None or d is None:
                return None
            return (y, m, d)
        return compute

    _OPS = {
        "=": lambda a, b: a == b,
        "<>": lambda a, b: a != b,
        "<": lambda a, b: a < b,
        "<=": lambda a, b: a <= b,
        ">": lambda a, b: a > b,
        ">=": lambda a, b: a >= b,
    }

    def prop(self, node: FormulaExpr, types: dict[str, str]) -> Callable:
        if isinstance(node, Compare):
            lf, rf = self.expr(node.lhs, types), self.expr(node.rhs, types)
            op = self._OPS[node.op]

            def cmp(db, ctx, env):
                a = lf(db, ctx, env)
                if a is None:
                    return None
                b = rf(db, ctx, env)
                if b is None:
                    return None
                return op(a, b)
            return cmp
        if isinstance(node, And):
            lf, rf = self.prop(node.lhs, types), self.prop(node.rhs, types)

            def conj(db, ctx, env):
                a = lf(db, ctx, env)
                if a is False:
                    return False
                b = rf(db, ctx, env)
                if b is False:
                    return False
                return True if (a is True and b is True) else None
            return conj
        if isinstance(node, Or):
            lf, rf = self.prop(node.lhs, types), self.prop(node.rhs, types)

            def disj(db, ctx, env):
                a = lf(db, ctx, env)
                if a is True:
                    return True
                b = rf(db, ctx, env)
                if b is True:
                    return True
                return False if (a is False and b is False) else None
            return disj
        if isinstance(node, Implies):
            lf, rf = self.prop(node.lhs, types), self.prop(node.rhs, types)

            def imp(db, ctx, env):
                a = lf(db, ctx, env)
                if a is False:
                    return True
                b = rf(db, ctx, env)
                if b is True:
                    return True
                if a is True and b is False:
                    return False
                return None
            return imp
        if isinstance(node, Not):
            inner = self.prop(node.operand, types)

            def neg(db, ctx, env):
                v = inner(db, ctx, env)
                return None if v is None else (not v)
            return neg
        if isinstance(node, InNulls):
            ef = self.expr(node.expr, types)
            return lambda db, ctx, env: ef(db, ctx, env) is None
        if isinstance(node, NotInNulls):
            ef = self.expr(node.expr, types)
            return lambda db, ctx, env: ef(db, ctx, env) is not None
        if isinstance(node, InSet):
            ef = self.expr(node.expr, types)
            values = set(node.values)

            def member(db, ctx, env):
                v = ef(db, ctx, env)
                return None if v is None else v in values
            return member
        if isinstance(node, (Forall, Exists)):
            inner_types = dict(types)
            for v in node.vars:
                inner_types[v] = node.set_name
            body = self.prop(node.body, inner_types)
            names = node.vars
            table = node.set_name
            existential = isinstance(node, Exists)

            def quantified(db, ctx, env):
                rows = db.rows(table)
                unknown = False
                for combo in itertools.product(rows.values(), repeat=len(names)):
                    for name, row in zip(names, combo):
                        env[name] = row
                    v = body(db, ctx, env)
                    if existential and v is True:
                        result = True
                        break
                    if not existential and v is False:
                        result = False
                        break
                    if v is None:
                        unknown = True
                else:
                    result = None if unknown else (existential is False)
                for name in names:
                    env.pop(name, None)
                return result
            return quantified
        raise AssertionError(f"not a proposition: {node!r}")


def _closures(cs: CompiledSchema) -> dict:
    cache = cs._caches.setdefault("closures", {})
    if "compiler" not in cache:
        cache["compiler"] = _Compiler(cs)
    return cache


def compiled_body(cs: CompiledSchema, cc: CompiledConstraint) -> Callable:
    """Quantifier-free body closure for a formula constraint."""
    cache = _closures(cs)
    fn = cache.get(cc.id)
    if fn is None:
        types = {v: t for v, t in cc.outer_vars}
        fn = cache["compiler"].prop(cc.body, types)
        cache[cc.id] = fn
    return fn


def compile_formula(cs: CompiledSchema, ast: FormulaExpr) -> Callable:
    """Compile a closed formula (with quantifiers) to fn(db, ctx) -> Truth."""
    comp = _closures(cs)["compiler"]
    fn = comp.prop(ast, {})
    return lambda db, ctx: fn(db, ctx, {})


def eval_formula(f: Callable, db, ctx: EvalContext) -> Truth:
    """Evaluate a compiled closed formula over the current state."""
    return f(db, ctx)


# ---------------------------------------------------------------------------
# Derived values


def derived_evaluators(cs: CompiledSchema, table: str) -> dict[str, Callable]:
    cache = cs._caches.setdefault("derived", {})
    out = cache.get(table)
    if out is None:
        comp = _closures(cs)["compiler"]
        out = {}
        for name, d in cs.derived_for(table).items():
            fns = [comp.expr(fx, {"x": table}) for fx in d.factors]
            if d.is_composite:
                def make(fns):
                    def compute(row, db, ctx):
                        vals = tuple(fn(db, ctx, {"x": row}) for fn in fns)
                        return None if any(v is None for v in vals) else vals
                    return compute
                out[name] = make(fns)
            else:
                def make_scalar(fn):
                    return lambda row, db, ctx: fn(db, ctx, {"x": row})
                out[name] = make_scalar(fns[0])
        cache[table] = out
    return out


def compute_derived(db, cs: CompiledSchema, table: str, x: int,
                    ctx: EvalContext) -> dict:
    """All derived values for one row; never persisted."""
    rows = db.rows(table)
    if x not in rows:
        raise NotFound(f"{table} has no row x={x}")
    row = rows[x]
    return {name: fn(row, db, ctx)
            for name, fn in derived_evaluators(cs, table).items()}


# ---------------------------------------------------------------------------
# Native checks


def detect_cycle(db, table: str, functions: tuple[str, ...], start: int,
                 ctx: EvalContext) -> Optional[list[int]]:
    """Directed cycle through `start` in the union of the self-map edge
    relations, on the given state.  Diamonds (shared parents) are not
    cycles.  Returns the cycle as a list of row ids, or None."""
    rows = db.rows(table)
    if start not in rows:
        return None
    parent: dict[int, int] = {}
    stack = [start]
    seen = {start}
    steps = 0
    while stack:
        current = stack.pop()
        row = rows.get(current)
        if row is None:
            continue
        for f in functions:
            steps += 1
            if steps > ctx.recursion_limit:
                raise EvalError(f"cycle walk exceeded {ctx.recursion_limit} steps")
            nxt = row[f]
            if nxt is None:
                continue
            if nxt == start:
                path = [start]
                node = current
                while node != start:
                    path.append(node)
                    node = parent[node]
                path.reverse()
                return path
            if nxt not in seen and nxt in rows:
                seen.add(nxt)
                parent[nxt] = current
                stack.append(nxt)
    return None


def find_any_cycle(db, table: str, functions: tuple[str, ...],
                   ctx: EvalContext) -> Optional[list[int]]:
    """Any directed cycle over the whole table (full-recheck path)."""
    rows = db.rows(table)
    color: dict[int, int] = {}
    steps = 0
    for root in rows:
        if color.get(root):
            continue
        stack = [(root, iter(functions))]
        color[root] = 1
        trail = [root]
        while stack:
            node, funcs = stack[-1]
            advanced = False
            for f in funcs:
                steps += 1
                if steps > ctx.recursion_limit:
                    raise EvalError(f"cycle walk exceeded {ctx.recursion_limit} steps")
                nxt = rows[node].get(f)
                if nxt is None or nxt not in rows:
                    continue
                if color.get(nxt) == 1:
                    return trail[trail.index(nxt):]
                if not color.get(nxt):
                    stack.append((nxt, iter(functions)))
                    color[nxt] = 1
                    trail.append(nxt)
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                stack.pop()
                trail.pop()
    return None


def _key_extractor(cs: CompiledSchema, table: str, key: tuple[str, ...]):
    """Row -> component tuple, None components meaning 'exempt'."""
    evaluators = derived_evaluators(cs, table)
    parts = []
    for name in key:
        if name in evaluators:
            parts.append(evaluators[name])
        else:
            parts.append(lambda row, db, ctx, name=name: row.get(name))
    def extract(row, db, ctx):
        return tuple(p(row, db, ctx) for p in parts)
    return extract


def check_unique(db, cs: CompiledSchema, table: str, key: tuple[str, ...],
                 candidate: dict, ctx: EvalContext,
                 exclude_x: Optional[int] = None) -> Optional[int]:
    """Conflicting row id for the candidate's key tuple, or None.  Tuples
    with any NULL component are exempt."""
    extract = _key_extractor(cs, table, key)
    tup = extract(candidate, db, ctx)
    if any(v is None for v in tup):
        return None
    for x, row in db.rows(table).items():
        if x == exclude_x or row is candidate:
            continue
        if extract(row, db, ctx) == tup:
            return x
    return None


# ---------------------------------------------------------------------------
# Violation construction


def _violation(cc: CompiledConstraint, witnesses, detail: str = "") -> Violation:
    parts = [f"{cc.id}: {cc.display_text}"]
    if detail:
        parts.append(detail)
    keys = ", ".join(f"{t}[{x}]" for t, x in witnesses)
    if keys:
        parts.append(f"witness: {keys}")
    return Violation(cc.id, tuple(witnesses), " — ".join(parts))


def _domain_violation(table: str, column: str, message: str,
                      x: int = -1) -> Violation:
    return Violation(f"domain:{table}.{column}", ((table, x),), message)


def _fk_violation(table: str, column: str, witnesses, message: str) -> Violation:
    return Violation(f"fk:{table}.{column}", tuple(witnesses), message)


# ---------------------------------------------------------------------------
# Two-variable candidate strategies


def _pair_strategy(cc: CompiledConstraint):
    """(kind, columns) pruning hint for a two-variable formula.

    "join": the antecedent requires f(x)=f(y) for each listed column, so only
    same-key pairs can violate.  "union": the consequent is a conjunction of
    f(x)<>f(y) disequalities, so a violating pair must agree on one of them.
    Exact because violation needs antecedent True / consequent False.
    """
    if not cc.symmetric or cc.body is None:
        return ("scan", ())
    va, vb = cc.outer_vars[0][0], cc.outer_vars[1][0]

    def both_vars(lhs, rhs):
        if (isinstance(lhs, Apply) and isinstance(rhs, Apply)
                and lhs.func == rhs.func
                and isinstance(lhs.arg, Var) and isinstance(rhs.arg, Var)
                and {lhs.arg.name, rhs.arg.name} == {va, vb}):
            return lhs.func
        return None

    body = cc.body
    if isinstance(body, Implies):
        ante, cons = body.lhs, body.rhs
        joins = []
        for part in _flatten(ante, And):
            if isinstance(part, Compare) and part.op == "=":
                f = both_vars(part.lhs, part.rhs)
                if f:
                    joins.append(f)
        if joins:
            return ("join", tuple(joins))
        unions = []
        conjuncts = list(_flatten(cons, And))
        for part in conjuncts:
            if isinstance(part, Compare) and part.op == "<>":
                f = both_vars(part.lhs, part.rhs)
                if f:
                    unions.append(f)
        if unions and len(unions) == len(conjuncts):
            return ("union", tuple(unions))
    return ("scan", ())


def _flatten(node, cls):
    if isinstance(node, cls):
        yield from _flatten(node.lhs, cls)
        yield from _flatten(node.rhs, cls)
    else:
        yield node


def _candidate_pairs(cc: CompiledConstraint, rows: dict, cs, db, ctx):
    """Ordered candidate pairs for a full two-variable evaluation."""
    cache = cs._caches.setdefault("pairstrategy", {})
    if cc.id not in cache:
        cache[cc.id] = _pair_strategy(cc)
    kind, cols = cache[cc.id]
    items = list(rows.items())
    if kind == "join":
        buckets: dict = {}
        for x, row in items:
            key = tuple(row.get(c) for c in cols)
            if any(v is None for v in key):
                continue
            buckets.setdefault(key, []).append((x, row))
        for group in buckets.values():
            for (xa, ra), (xb, rb) in itertools.permutations(group, 2):
                yield (xa, ra), (xb, rb)
        return
    if kind == "union":
        seen = set()
        for col in cols:
            buckets = {}
            for x, row in items:
                v = row.get(col)
                if v is None:
                    continue
                buckets.setdefault(v, []).append((x, row))
            for group in buckets.values():
                for (xa, ra), (xb, rb) in itertools.permutations(group, 2):
                    if (xa, xb) not in seen:
                        seen.add((xa, xb))
                        yield (xa, ra), (xb, rb)
        return
    for (xa, ra), (xb, rb) in itertools.permutations(items, 2):
        yield (xa, ra), (xb, rb)


# ---------------------------------------------------------------------------
# Constraint evaluation drivers


def _formula_violations(cc: CompiledConstraint, db, cs: CompiledSchema,
                        ctx: EvalContext,
                        restrict: Optional[dict[str, set[int]]] = None,
                        limit: int = 25) -> list[Violation]:
    """Bindings where the constraint body is definitely False.

    restrict maps table -> row ids; a binding qualifies when at least one
    bound row is in the restriction (partner rows scan the full table, in
    both orders).  None means evaluate everything.
    """
    body = compiled_body(cs, cc)
    env: dict = {}
    out: list[Violation] = []
    if len(cc.outer_vars) == 1:
        var, table = cc.outer_vars[0]
        rows = db.rows(table)
        if restrict is not None:
            ids = restrict.get(table, set())
            items = [(x, rows[x]) for x in ids if x in rows]
        else:
            items = rows.items()
        for x, row in items:
            env[var] = row
            if body(db, ctx, env) is False:
                out.append(_violation(cc, [(table, x)]))
                if len(out) >= limit:
                    break
        return out
    (va, ta), (vb, tb) = cc.outer_vars
    rows_a, rows_b = db.rows(ta), db.rows(tb)
    if restrict is None and ta == tb:
        for (xa, ra), (xb, rb) in _candidate_pairs(cc, rows_a, cs, db, ctx):
            env[va], env[vb] = ra, rb
            if body(db, ctx, env) is False:
                out.append(_violation(cc, [(ta, xa), (tb, xb)]))
                if len(out) >= limit:
                    break
        return out
    for xa, xb in _iter_binding_ids(cc.outer_vars, db, restrict):
        env[va], env[vb] = rows_a[xa], rows_b[xb]
        if body(db, ctx, env) is False:
            out.append(_violation(cc, [(ta, xa), (tb, xb)]))
            if len(out) >= limit:
                break
    return out


def _iter_binding_ids(outer_vars, db, restrict):
    """Yield id tuples for the outer variables.  With a restriction, a tuple
    qualifies when at least one component is restricted; the partners range
    over their whole table (both directions for same-table pairs)."""
    rowmaps = [db.rows(t) for _, t in outer_vars]
    if restrict is None:
        yield from itertools.product(*[list(rm) for rm in rowmaps])
        return
    seen: set[tuple] = set()
    for i, (_, t) in enumerate(outer_vars):
        ids = [x for x in restrict.get(t, ()) if x in rowmaps[i]]
        if not ids:
            continue
        pools = [ids if j == i else list(rm) for j, rm in enumerate(rowmaps)]
        for combo in itertools.product(*pools):
            if combo not in seen:
                seen.add(combo)
                yield combo


def _temporal_violations(cc: CompiledConstraint, pre_db, post_db, cs, ctx,
                         restrict: Optional[dict[str, set[int]]]) -> list[Violation]:
    """Write-time policy for an always-in-the-future constraint: for every
    binding whose antecedent held in the pre-state, the consequent must not
    become definitely false in the post-state."""
    if cc.body is None or not isinstance(cc.body, Implies):
        return []
    cache = cs._caches.setdefault("temporal", {})
    if cc.id not in cache:
        comp = _closures(cs)["compiler"]
        types = {v: t for v, t in cc.outer_vars}
        cache[cc.id] = (comp.prop(cc.body.lhs, types), comp.prop(cc.body.rhs, types))
    ante, cons = cache[cc.id]
    out = []
    env: dict = {}
    tables = [t for _, t in cc.outer_vars]
    for combo in _iter_binding_ids(cc.outer_vars, pre_db, restrict):
        pre_rows = [pre_db.rows(t).get(x) for x, t in zip(combo, tables)]
        if any(r is None for r in pre_rows):
            continue
        for (v, _), row in zip(cc.outer_vars, pre_rows):
            env[v] = row
        if ante(pre_db, ctx, env) is not True:
            continue
        post_rows = [post_db.rows(t).get(x) for x, t in zip(combo, tables)]
        if any(r is None for r in post_rows):
            continue
        for (v, _), row in zip(cc.outer_vars, post_rows):
            env[v] = row
        if cons(post_db, ctx, env) is False:
            out.append(_violation(
                cc, [(t, x) for x, t in zip(combo, tables)],
                "the obligation was already in force before this write"))
    return out


# ---------------------------------------------------------------------------
# Structural validation


def _validate_value(table: TableDef, col, value, ctx: EvalContext,
                    db, totality: bool = True) -> Optional[Violation]:
    if value is None:
        if col.nullable or not totality:
            return None
        return _domain_violation(
            table.name, col.name,
            f"{table.name}.{col.name} is total; NULLS not allowed")
    if col.is_ref:
        target = col.storage.set_name
        if not isinstance(value, int) or value not in db.rows(target):
            return _fk_violation(
                table.name, col.name, [(table.name, -1)],
                f"{table.name}.{col.name} references missing {target} x={value!r}")
        return None
    if not col.storage.contains(value, ctx.clock_year):
        return _domain_violation(
            table.name, col.name,
            f"value {value!r} outside the domain of {table.name}.{col.name}")
    return None


def _referencing_rows(db, cs: CompiledSchema, table: str, x: int):
    """(table, column, x) of every row holding a reference to table[x]."""
    out = []
    for tname, tdef in cs.tables.items():
        ref_cols = [c for c, target in tdef.foreign_keys if target == table]
        if not ref_cols:
            continue
        for rx, row in db.rows(tname).items():
            for col in ref_cols:
                if row.get(col) == x:
                    out.append((tname, col, rx))
    return out


def _affected_rows(db, cs: CompiledSchema, table: str, xs: set[int],
                   depth: int) -> dict[str, set[int]]:
    """Touched rows plus rows that reach them through up to `depth`
    reference hops (computed on the post-state)."""
    affected: dict[str, set[int]] = {table: set(xs)}
    frontier = [(table, x) for x in xs]
    for _ in range(depth):
        nxt = []
        for tname, tdef in cs.tables.items():
            by_target: dict[str, list[str]] = {}
            for col, target in tdef.foreign_keys:
                by_target.setdefault(target, []).append(col)
            wanted = {t for t, _ in frontier} & set(by_target)
            if not wanted:
                continue
            for rx, row in db.rows(tname).items():
                if rx in affected.get(tname, ()):
                    continue
                for ft, fx in frontier:
                    for col in by_target.get(ft, ()):
                        if row.get(col) == fx:
                            affected.setdefault(tname, set()).add(rx)
                            nxt.append((tname, rx))
                            break
                    else:
                        continue
                    break
        frontier = nxt
        if not frontier:
            break
    return affected


# ---------------------------------------------------------------------------
# check_write / check_all


def check_write(db, w: WriteOp, cs: CompiledSchema, ctx: EvalContext,
                totality: bool = True) -> CheckReport:
    """Adjudicate a tentative write; the database is never modified."""
    table = cs.tables.get(w.table)
    if table is None:
        raise UnknownTable(f"unknown table {w.table!r}")
    col_names = {c.name for c in table.columns}

    if isinstance(w, Insert):
        unknown = set(w.values) - col_names - {"x"}
        if unknown:
            raise UnknownField(f"unknown column(s) {sorted(unknown)} on {w.table}")
        new_x = w.values.get("x")
        if new_x is None:
            new_x = db.peek_next_id(w.table)
        row = {"x": new_x}
        for c in table.columns:
            row[c.name] = w.values.get(c.name)
        violations = []
        if not table.surrogate_domain.contains(new_x, ctx.clock_year):
            violations.append(_domain_violation(
                w.table, "x", f"surrogate {new_x!r} outside {w.table}'s id domain"))
        if new_x in db.rows(w.table):
            violations.append(_domain_violation(
                w.table, "x", f"surrogate {new_x} already used in {w.table}"))
        for c in table.columns:
            v = _validate_value(table, c, row[c.name], ctx, db, totality)
            if v:
                violations.append(v)
        if violations:
            return CheckReport.reject(violations)
        post = overlay_insert(db, w.table, new_x, row)
        return _check_constraints(db, post, w, cs, ctx, {new_x},
                                  set(col_names) | {"x"}, inserted_x=new_x)

    if isinstance(w, Update):
        rows = db.rows(w.table)
        if w.x not in rows:
            raise NotFound(f"{w.table} has no row x={w.x}")
        unknown = set(w.assignments) - col_names
        if "x" in w.assignments:
            raise UnknownField("the surrogate x is read-only")
        if unknown:
            raise UnknownField(f"unknown column(s) {sorted(unknown)} on {w.table}")
        row = dict(rows[w.x])
        violations = []
        for name, value in w.assignments.items():
            col = table.column(name)
            v = _validate_value(table, col, value, ctx, db, totality)
            if v:
                violations.append(v)
            row[name] = value
        if violations:
            return CheckReport.reject(violations)
        post = overlay_insert(db, w.table, w.x, row)
        return _check_constraints(db, post, w, cs, ctx, {w.x},
                                  set(w.assignments))

    if isinstance(w, Delete):
        rows = db.rows(w.table)
        if w.x not in rows:
            raise NotFound(f"{w.table} has no row x={w.x}")
        refs = _referencing_rows(db, cs, w.table, w.x)
        if refs:
            violations = [
                _fk_violation(t, col, [(t, rx), (w.table, w.x)],
                              f"{t}[{rx}].{col} references {w.table}[{w.x}]; "
                              "deletion would orphan it")
                for t, col, rx in refs[:25]]
            return CheckReport.reject(violations)
        post = overlay_delete(db, w.table, w.x)
        return _check_constraints(db, post, w, cs, ctx, {w.x},
                                  set(col_names) | {"x"}, deleted=True)

    raise DomainError(f"unsupported write {w!r}")


def _check_constraints(pre, post, w: WriteOp, cs: CompiledSchema,
                       ctx: EvalContext, xs: set[int], touched_cols: set[str],
                       inserted_x: Optional[int] = None,
                       deleted: bool = False) -> CheckReport:
    touched = {(w.table, c) for c in touched_cols}
    relevant = []
    max_depth = 0
    for cc in cs.constraints:
        if not (cc.reads_scope & touched):
            continue
        if deleted and cc.kind in (UNIQUENESS, ACYCLICITY, EXISTENCE):
            continue  # removing a row cannot violate these
        if deleted and cc.body is not None and w.table not in cc.exists_tables \
                and not cc.temporal:
            continue  # removing bindings cannot falsify a universal formula
        relevant.append(cc)
        if cc.body is not None:
            max_depth = max(max_depth, cc.ref_depth)
    if not relevant:
        return ACCEPT

    affected = _affected_rows(post, cs, w.table, xs if not deleted else set(),
                              max_depth)
    if deleted:
        # rows that referenced the deleted one no longer can (FK guard), but
        # existential witnesses may have vanished for any binding
        affected.setdefault(w.table, set())

    violations: list[Violation] = []
    for cc in relevant:
        if cc.kind == UNIQUENESS:
            for x in xs:
                row = post.rows(w.table).get(x)
                if row is None:
                    continue
                conflict = check_unique(post, cs, cc.table, cc.key, row, ctx,
                                        exclude_x=x)
                if conflict is not None:
                    violations.append(_violation(
                        cc, [(cc.table, x), (cc.table, conflict)],
                        "duplicate key value"))
        elif cc.kind == ACYCLICITY:
            for x in xs:
                cycle = detect_cycle(post, cc.table, cc.functions, x, ctx)
                if cycle:
                    violations.append(_violation(
                        cc, [(cc.table, n) for n in cycle], "directed cycle"))
        elif cc.kind == EXISTENCE:
            for x in xs:
                row = post.rows(w.table).get(x)
                if row is None:
                    continue
                if row.get(cc.if_known) is not None and row.get(cc.then_known) is None:
                    violations.append(_violation(
                        cc, [(cc.table, x)],
                        f"{cc.if_known} is known but {cc.then_known} is not"))
        elif cc.temporal:
            violations.extend(_temporal_violations(cc, pre, post, cs, ctx,
                                                   affected))
        else:
            restrict = None if (w.table in cc.exists_tables) else affected
            violations.extend(_formula_violations(cc, post, cs, ctx, restrict))
    if violations:
        return CheckReport.reject(violations)
    return ACCEPT


def check_all(db, cs: CompiledSchema, ctx: EvalContext,
              limit_per_constraint: int = 25) -> CheckReport:
    """Full recheck: referential integrity, domains, totality, and every
    constraint over all bindings.  The reference oracle for check_write."""
    violations: list[Violation] = []
    for tname, tdef in cs.tables.items():
        for x, row in db.rows(tname).items():
            if not tdef.surrogate_domain.contains(x, ctx.clock_year):
                violations.append(_domain_violation(
                    tname, "x", f"surrogate {x} outside {tname}'s id domain", x))
            for c in tdef.columns:
                value = row.get(c.name)
                if value is None:
                    if not c.nullable:
                        violations.append(_domain_violation(
                            tname, c.name,
                            f"{tname}[{x}].{c.name} is total; NULLS not allowed",
                            x))
                    continue
                if c.is_ref:
                    target = c.storage.set_name
                    if value not in db.rows(target):
                        violations.append(_fk_violation(
                            tname, c.name, [(tname, x)],
                            f"{tname}[{x}].{c.name} references missing "
                            f"{target} x={value!r}"))
                elif not c.storage.contains(value, ctx.clock_year):
                    violations.append(_domain_violation(
                        tname, c.name,
                        f"{tname}[{x}].{c.name} = {value!r} outside its domain",
                        x))

    for cc in cs.constraints:
        if cc.kind == UNIQUENESS:
            extract = _key_extractor(cs, cc.table, cc.key)
            seen: dict = {}
            found = 0
            for x, row in db.rows(cc.table).items():
                tup = extract(row, db, ctx)
                if any(v is None for v in tup):
                    continue
                if tup in seen:
                    violations.append(_violation(
                        cc, [(cc.table, seen[tup]), (cc.table, x)],
                        "duplicate key value"))
                    found += 1
                    if found >= limit_per_constraint:
                        break
                else:
                    seen[tup] = x
        elif cc.kind == ACYCLICITY:
            cycle = find_any_cycle(db, cc.table, cc.functions, ctx)
            if cycle:
                violations.append(_violation(
                    cc, [(cc.table, n) for n in cycle], "directed cycle"))
        elif cc.kind == EXISTENCE:
            for x, row in db.rows(cc.table).items():
                if row.get(cc.if_known) is not None \
                        and row.get(cc.then_known) is None:
                    violations.append(_violation(
                        cc, [(cc.table, x)],
                        f"{cc.if_known} is known but {cc.then_known} is not"))
        elif cc.temporal:
            continue  # future-state obligation; state formulas cannot be False
        else:
            violations.extend(_formula_violations(
                cc, db, cs, ctx, None, limit=limit_per_constraint))
    if violations:
        return CheckReport.reject(violations)
    return ACCEPT
