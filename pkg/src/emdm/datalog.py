"""Positive Datalog evaluation and genealogy closure queries.

evaluate_program runs any range-restricted, negation-free program by
semi-naive fixpoint: each round joins only the tuples derived in the
previous round, which the tests check against the naive fixpoint.  The
closure queries build on it: transitive_closure materialises all
(ancestor, descendant) pairs through Mother/Father edges, and
seeded_closure walks out from one person, tagging every relative with a
signed generation (ancestors negative, descendants positive, minimal hop
count under pedigree collapse).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .engine import NotFound
from .model import Atom, DatalogRule, VarTerm


@dataclass(frozen=True)
class ClosurePair:
    ancestor: int
    descendant: int


@dataclass(frozen=True)
class GenerationEntry:
    person: int
    generation: int
    label: str


_LABELS = {1: ("parent", "child"),
           2: ("grandparent", "grandchild"),
           3: ("great-grandparent", "great-grandchild")}


def generation_label(generation: int) -> str:
    if generation == 0:
        return "self"
    names = _LABELS.get(abs(generation))
    if names is None:
        return ""
    return names[0] if generation < 0 else names[1]


def format_generation(generation: int, label: str = None) -> str:
    """Display form: "0 (self)", "-1 (parent)", "+2 (grandchild)", "-4"."""
    if label is None:
        label = generation_label(generation)
    text = str(generation) if generation <= 0 else f"+{generation}"
    return f"{text} ({label})" if label else text


# ---------------------------------------------------------------------------
# Generic semi-naive evaluation


def evaluate_program(rules: list[DatalogRule], db) -> dict[str, set[tuple]]:
    """Least fixpoint of a positive program over the database's base tables.

    Derived relations are sets of tuples in head-argument order.  Base atoms
    match rows by field bindings (one positional term binds the surrogate);
    derived atoms match positionally.
    """
    derived: dict[str, set[tuple]] = {r.head_name: set() for r in rules}
    recursive = [r for r in rules
                 if any(a.predicate in derived for a in r.body)]
    base_rules = [r for r in rules if r not in recursive]

    total: dict[str, set[tuple]] = {name: set() for name in derived}
    delta: dict[str, set[tuple]] = {name: set() for name in derived}
    for rule in base_rules:
        for tup in _eval_rule(rule, db, total, None, None):
            delta[rule.head_name].add(tup)
    for name in derived:
        total[name] |= delta[name]

    while any(delta.values()):
        new_delta: dict[str, set[tuple]] = {name: set() for name in derived}
        for rule in recursive:
            derived_atoms = [i for i, a in enumerate(rule.body)
                             if a.predicate in derived]
            # semi-naive: one derived atom reads the delta, the rest the total
            for delta_pos in derived_atoms:
                if not delta[rule.body[delta_pos].predicate]:
                    continue
                for tup in _eval_rule(rule, db, total, delta, delta_pos):
                    if tup not in total[rule.head_name]:
                        new_delta[rule.head_name].add(tup)
        for name in derived:
            total[name] |= new_delta[name]
        delta = new_delta
    return total


def _eval_rule(rule: DatalogRule, db, total, delta, delta_pos):
    """All head tuples derivable with the given delta restriction."""
    out = []

    def join(index: int, env: dict):
        if index == len(rule.body):
            out.append(tuple(env[v] for v in rule.head_args))
            return
        atom = rule.body[index]
        if atom.predicate in total:
            rel = (delta[atom.predicate] if delta is not None and index == delta_pos
                   else total[atom.predicate])
            for tup in rel:
                bound = _bind_derived(atom, tup, env)
                if bound is not None:
                    join(index + 1, bound)
        else:
            for bound in _match_base(atom, db, env):
                join(index + 1, bound)

    join(0, {})
    return out


def _bind_derived(atom: Atom, tup: tuple, env: dict) -> Optional[dict]:
    new = dict(env)
    for (_, term), value in zip(atom.bindings, tup):
        if isinstance(term, VarTerm):
            if term.name in new:
                if new[term.name] != value:
                    return None
            else:
                new[term.name] = value
        elif term.value != value:
            return None
    return new


_MISSING = object()


def _match_base(atom: Atom, db, env: dict):
    """Rows of a base table matching the atom under env, yielding extended
    environments.  NULL fields never match."""
    rows = db.rows(atom.predicate)
    fields = []
    surrogate_term = None
    for position, (field, term) in enumerate(atom.bindings):
        name = field if field is not None else ("x" if position == 0 else None)
        if name == "x":
            surrogate_term = term
        else:
            fields.append((name, term))

    def term_value(term):
        if isinstance(term, VarTerm):
            return env.get(term.name, _MISSING)
        return term.value

    candidates = None
    if surrogate_term is not None:
        v = term_value(surrogate_term)
        if v is not _MISSING:
            row = rows.get(v)
            candidates = [row] if row is not None else []
    if candidates is None:
        candidates = rows.values()

    for row in candidates:
        new = dict(env)
        ok = True
        if surrogate_term is not None and isinstance(surrogate_term, VarTerm):
            name = surrogate_term.name
            if name in new and new[name] != row["x"]:
                continue
            new[name] = row["x"]
        for name, term in fields:
            value = row.get(name)
            if value is None:
                ok = False
                break
            bound = term_value(term)
            if bound is _MISSING:
                new[term.name] = value
            elif bound != value:
                ok = False
                break
        if ok:
            yield new


# ---------------------------------------------------------------------------
# Genealogy closures


def _closure_rules() -> list[DatalogRule]:
    """The four ancestor/descendant rules over PERSONS."""
    def base(parent):
        return DatalogRule(
            "TransClosure", ("Ancessor", "Descendant"),
            (Atom("PERSONS", (("x", VarTerm("Descendant")),
                              (parent, VarTerm("Ancessor")))),))

    def step(parent):
        return DatalogRule(
            "TransClosure", ("Ancessor", "Descendant"),
            (Atom("TransClosure", ((None, VarTerm("x")),
                                   (None, VarTerm("Descendant")))),
             Atom("PERSONS", ((None, VarTerm("x")),
                              (parent, VarTerm("Ancessor"))))))

    return [base("Father"), base("Mother"), step("Father"), step("Mother")]


def transitive_closure(db) -> list[ClosurePair]:
    """All (ancestor, descendant) pairs through Mother/Father edges, in
    registry order (ancestor name/birth year, descendant birth year/name)."""
    relation = evaluate_program(_closure_rules(), db)["TransClosure"]
    pairs = [ClosurePair(a, d) for a, d in relation]
    return sort_closure_pairs(pairs, db)


def sort_closure_pairs(pairs: list[ClosurePair], db) -> list[ClosurePair]:
    """Ascending ancestor name and birth year, then descendant birth year
    and name; NULL years after known ones; names compared case-insensitively
    (code-point order after case folding)."""
    persons = db.rows("PERSONS")

    def year_key(year):
        return (1, 0) if year is None else (0, year)

    def key(pair: ClosurePair):
        a, d = persons[pair.ancestor], persons[pair.descendant]
        return (a["Name"].casefold(), year_key(a.get("BirthYear")),
                year_key(d.get("BirthYear")), d["Name"].casefold(),
                pair.ancestor, pair.descendant)

    return sorted(pairs, key=key)


def _parent_edges(db):
    persons = db.rows("PERSONS")
    children: dict[int, list[int]] = {}
    for x, row in persons.items():
        for parent_col in ("Mother", "Father"):
            p = row.get(parent_col)
            if p is not None:
                children.setdefault(p, []).append(x)
    return persons, children


def seeded_closure(db, seed: int) -> list[GenerationEntry]:
    """The seed with generation 0 plus every ancestor (negative generations)
    and descendant (positive), generation being the minimal number of parent
    hops; sorted by generation, then birth year (NULLs last), then name."""
    persons, children = _parent_edges(db)
    if seed not in persons:
        raise NotFound(f"PERSONS has no row x={seed}")

    generations: dict[int, int] = {seed: 0}
    queue = deque([(seed, 0)])
    while queue:  # ancestors: minimal hops up, negated
        node, depth = queue.popleft()
        row = persons[node]
        for parent_col in ("Mother", "Father"):
            p = row.get(parent_col)
            if p is not None and p not in generations:
                generations[p] = -(depth + 1)
                queue.append((p, depth + 1))
    queue = deque([(seed, 0)])
    while queue:  # descendants: minimal hops down
        node, depth = queue.popleft()
        for child in children.get(node, ()):
            if child not in generations:
                generations[child] = depth + 1
                queue.append((child, depth + 1))

    def year_key(year):
        return (1, 0) if year is None else (0, year)

    entries = [GenerationEntry(x, g, generation_label(g))
               for x, g in generations.items()]
    entries.sort(key=lambda e: (e.generation,
                                year_key(persons[e.person].get("BirthYear")),
                                persons[e.person]["Name"].casefold(),
                                e.person))
    return entries
