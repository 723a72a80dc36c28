"""Random write generator for oracle-equivalence testing.

Produces a mix of plausible and invalid writes against the Genealogies
schema; the equivalence harness replays each one incrementally (check_write)
and against the full-recheck oracle (check_all on the unchecked post state)
and demands identical verdicts.
"""

from __future__ import annotations

import random

from emdm.engine import Delete, Insert, Update, check_all, check_write
from emdm.store import Database

YEARS = [None, 1890, 1900, 1905, 1920, 1922, 1950, 1952, 1980, 1982, 2000,
         2005, 2020]
MONTHS = [None, 1, 2, 4, 7, 12]
DAYS = [None, 1, 15, 28, 29, 30, 31]


def _maybe(rng, pool):
    return rng.choice(pool)


def _person_ref(rng, db, dangling_ok=True):
    rows = list(db.rows("PERSONS"))
    choices = [None, None]
    if rows:
        choices += rows * 3
    if dangling_ok:
        choices.append(99999)
    return rng.choice(choices)


def _ref(rng, db, table):
    rows = list(db.rows(table))
    choices = [None]
    if rows:
        choices += rows * 4
    choices.append(99999)
    return rng.choice(choices)


def _person_values(rng, db, serial):
    return {
        "Name": rng.choice([f"P{serial}", f"P{serial}", f"P{serial}",
                            f"P{rng.randrange(1, serial + 1)}"]),
        "Sex": rng.choice(["F", "M", "F", "M", "N"]),
        "Mother": _person_ref(rng, db),
        "Father": _person_ref(rng, db),
        "BirthYear": _maybe(rng, YEARS),
        "PassedAwayYear": _maybe(rng, YEARS),
    }


def _marriage_values(rng, db):
    return {
        "Husband": _person_ref(rng, db, dangling_ok=False) or 1,
        "Wife": _person_ref(rng, db, dangling_ok=False) or 1,
        "MarriageYear": _maybe(rng, YEARS),
        "DivorceYear": _maybe(rng, YEARS),
    }


def _country_values(rng, db, serial):
    return {
        "Country": rng.choice([f"C{serial}", f"C{rng.randrange(1, serial + 1)}"]),
        "CurrentCountry": _ref(rng, db, "COUNTRIES"),
    }


def _reign_values(rng, db):
    return {
        "Ruler": _person_ref(rng, db, dangling_ok=False) or 1,
        "Country": _ref(rng, db, "COUNTRIES") or 1,
        "Title": _ref(rng, db, "TITLES"),
        "FromYear": _maybe(rng, [y for y in YEARS if y is not None]),
        "ToYear": _maybe(rng, YEARS),
        "FromMonth": _maybe(rng, MONTHS),
        "ToMonth": _maybe(rng, MONTHS),
        "FromDay": _maybe(rng, DAYS),
        "ToDay": _maybe(rng, DAYS),
    }


def random_write(rng: random.Random, db: Database, serial: int):
    table = rng.choices(
        ["PERSONS", "MARRIAGES", "COUNTRIES", "TITLES", "REIGNS"],
        weights=[40, 18, 10, 6, 26])[0]
    rows = list(db.rows(table))
    kind = rng.choices(["insert", "update", "delete"],
                       weights=[60, 28, 12])[0]
    if kind != "insert" and not rows:
        kind = "insert"
    if kind == "insert":
        if table == "PERSONS":
            values = _person_values(rng, db, serial)
        elif table == "MARRIAGES":
            if not db.rows("PERSONS"):
                values = _person_values(rng, db, serial)
                table = "PERSONS"
            else:
                values = _marriage_values(rng, db)
        elif table == "COUNTRIES":
            values = _country_values(rng, db, serial)
        elif table == "TITLES":
            values = {"Title": rng.choice([f"T{serial}",
                                           f"T{rng.randrange(1, serial + 1)}"])}
        else:
            if not db.rows("PERSONS") or not db.rows("COUNTRIES"):
                values = _person_values(rng, db, serial)
                table = "PERSONS"
            else:
                values = _reign_values(rng, db)
        if rng.random() < 0.05 and "Name" in values:
            values.pop("Name")  # exercise totality rejection
        return Insert(table, values)
    x = rng.choice(rows)
    if kind == "delete":
        return Delete(table, x)
    if table == "PERSONS":
        pool = _person_values(rng, db, serial)
    elif table == "MARRIAGES":
        pool = _marriage_values(rng, db)
    elif table == "COUNTRIES":
        pool = _country_values(rng, db, serial)
    elif table == "TITLES":
        pool = {"Title": f"T{serial}"}
    else:
        pool = _reign_values(rng, db)
    fields = rng.sample(list(pool), k=rng.randrange(1, min(3, len(pool)) + 1))
    return Update(table, x, {f: pool[f] for f in fields})


def apply_unchecked(db: Database, w) -> None:
    if isinstance(w, Insert):
        db.insert_unchecked(w.table, dict(w.values))
    elif isinstance(w, Update):
        row = db.rows(w.table)[w.x]
        for name, value in w.assignments.items():
            row[name] = value
    else:
        db.delete_unchecked(w.table, w.x)


def run_equivalence_sequence(cs, ctx, seed: int, steps: int = 30,
                             max_rows: int = 100) -> tuple[int, int]:
    """One randomized sequence from empty; returns (writes, disagreements)."""
    rng = random.Random(seed)
    db = Database(cs)
    disagreements = 0
    performed = 0
    for serial in range(1, steps + 1):
        total_rows = sum(len(db.rows(t)) for t in db.table_names())
        if total_rows >= max_rows:
            break
        w = random_write(rng, db, serial)
        incremental = check_write(db, w, cs, ctx)
        shadow = db.clone()
        apply_unchecked(shadow, w)
        full = check_all(shadow, cs, ctx)
        performed += 1
        if incremental.accepted != full.accepted:
            disagreements += 1
            raise AssertionError(
                f"seed {seed} step {serial}: incremental "
                f"{incremental.verdict} vs oracle {full.verdict} for {w}; "
                f"inc={[v.message for v in incremental.violations][:3]} "
                f"full={[v.message for v in full.violations][:3]}")
        if incremental.accepted:
            apply_unchecked(db, w)
    return performed, disagreements
