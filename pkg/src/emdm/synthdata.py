"""Deterministic synthetic genealogy at configurable scale.

Builds a dataset that satisfies every axiom of the bundled Genealogies
schema: generational person lines (parents one generation up, lifespans
covering their children's births and marriages), one marriage per person
between non-siblings of the same generation, and per-country sequences of
non-overlapping reigns carved out of the rulers' lifetimes.  Parent couples
follow family lines with occasional crossovers, which keeps the ancestor
closure near real-genealogy density instead of exploding combinatorially.

The default sizes reproduce a five-table registry of 1800 persons, 588
marriages, 992 reigns, 120 countries and 47 titles.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field

PERSON_COLUMNS = ["x", "Name", "Sex", "Mother", "Father", "BirthYear",
                  "PassedAwayYear"]
MARRIAGE_COLUMNS = ["x", "Husband", "Wife", "MarriageYear", "DivorceYear"]
COUNTRY_COLUMNS = ["x", "Country", "CurrentCountry"]
TITLE_COLUMNS = ["x", "Title"]
REIGN_COLUMNS = ["x", "Ruler", "Country", "Title", "FromYear", "ToYear",
                 "FromMonth", "ToMonth", "FromDay", "ToDay"]

_FIRST = ["Adela", "Alexandra", "Anastasia", "Beatrice", "Camilla",
          "Charlotte", "Claudine", "Diana", "Eleanor", "Elisabeta",
          "Emma", "Ilona", "Ioana", "Katherine", "Margareta", "Maria",
          "Ruxandra", "Sophia", "Theodora", "Victoria",
          "Alexandru", "Basarab", "Carol", "Charles", "Constantin",
          "Dimitrie", "Edward", "Ferdinand", "George", "Grigore",
          "Henry", "Louis", "Mihai", "Nicolae", "Peter", "Radu",
          "Stefan", "Vlad", "Wilhelm", "William"]

_HOUSE = ["of Aldenfort", "of Branmoor", "Cantacuzino", "de Galgo",
          "of Greystone", "Hohenberg", "de Kis-Rhede", "Lancaster",
          "Mavrocordat", "of Normandy", "d'Orleans", "Rhedey",
          "Sturdza", "of Teck", "of Wessex", "Windsor"]

_TITLES = ["Archduchess", "Archduke", "Ban", "Baron", "Baroness", "Boyar",
           "Caesar", "Chancellor", "Consort", "Count", "Countess", "Despot",
           "Doge", "Duchess", "Duke", "Emperor", "Empress", "Governor",
           "Grand Duchess", "Grand Duke", "Grand Prince", "Hetman", "Kaiser",
           "Khan", "King", "Knyaz", "Lady", "Lord", "Margrave", "Marchioness",
           "Marquess", "Pharaoh", "Prince", "Princess", "Protector", "Queen",
           "Regent", "Satrap", "Shah", "Sovereign", "Stadtholder", "Sultan",
           "Tetrarch", "Tsar", "Tsarina", "Viscount", "Voivode"]

_PLACES = ["Arden", "Bavelia", "Brandia", "Carvia", "Dorland", "Elbion",
           "Falster", "Gallmark", "Hathia", "Istria", "Jorvia", "Kestland"]
_SUFFIX = ["", " Major", " Minor", " of the North", " of the South",
           " of the East", " of the West", " Uplands", " Lowlands", " March"]


@dataclass
class SynthData:
    persons: list[dict] = field(default_factory=list)
    marriages: list[dict] = field(default_factory=list)
    countries: list[dict] = field(default_factory=list)
    titles: list[dict] = field(default_factory=list)
    reigns: list[dict] = field(default_factory=list)

    def tables(self) -> dict[str, tuple[list[dict], list[str]]]:
        return {
            "COUNTRIES": (self.countries, COUNTRY_COLUMNS),
            "TITLES": (self.titles, TITLE_COLUMNS),
            "PERSONS": (self.persons, PERSON_COLUMNS),
            "MARRIAGES": (self.marriages, MARRIAGE_COLUMNS),
            "REIGNS": (self.reigns, REIGN_COLUMNS),
        }


def generate(persons: int = 1800, marriages: int = 588, reigns: int = 992,
             countries: int = 120, titles: int = 47, clock_year: int = 2026,
             seed: int = 7) -> SynthData:
    rng = random.Random(seed)
    data = SynthData()

    per_generation = 74
    generations = max(1, (persons - persons // 75) // per_generation)
    extras = persons - generations * per_generation
    base_year = clock_year - 28 * generations - 24

    for i in range(titles):
        name = _TITLES[i] if i < len(_TITLES) else f"Keeper {i - len(_TITLES) + 1}"
        data.titles.append({"x": i + 1, "Title": name})

    for i in range(countries):
        name = f"{_PLACES[i % len(_PLACES)]}{_SUFFIX[(i // len(_PLACES)) % len(_SUFFIX)]}"
        if i >= len(_PLACES) * len(_SUFFIX):
            name = f"{name} {i}"
        successor = rng.randrange(1, i + 1) if i and rng.random() < 0.3 else None
        data.countries.append({"x": i + 1, "Country": name,
                               "CurrentCountry": successor})

    # persons in family-line generations: person j of a generation is female
    # when j is even; couple c of the previous generation (its persons 2c and
    # 2c+1) parents children 2c and 2c+1, with occasional line crossovers
    grid: list[list[dict]] = []
    serial = 0
    couples_per_gen = per_generation // 2
    for g in range(generations):
        row: list[dict] = []
        for j in range(per_generation):
            serial += 1
            sex = "F" if j % 2 == 0 else "M"
            half = len(_FIRST) // 2  # feminine names first, masculine second
            first = _FIRST[(serial * 7) % half + (0 if sex == "F" else half)]
            birth = base_year + 28 * g + rng.randrange(0, 11)
            death = birth + rng.randrange(45, 86)
            alive = death > clock_year - 5
            person = {
                "x": serial,
                "Name": f"{first} "
                        f"{_HOUSE[(serial * 3) % len(_HOUSE)]} {serial:04d}",
                "Sex": sex,
                "Mother": None,
                "Father": None,
                "BirthYear": birth,
                "PassedAwayYear": None if alive else death,
            }
            if g > 0:
                c = j // 2
                if rng.random() < 0.05:
                    c = (c + rng.choice((-1, 1))) % couples_per_gen
                person["Mother"] = grid[g - 1][2 * c]["x"]
                person["Father"] = grid[g - 1][2 * c + 1]["x"]
            row.append(person)
            data.persons.append(person)
        grid.append(row)
    for i in range(extras):
        serial += 1
        data.persons.append({
            "x": serial,
            "Name": f"Chronicle Entry {serial:04d}",
            "Sex": "N" if i % 8 == 0 else ("F" if i % 2 == 0 else "M"),
            "Mother": None, "Father": None,
            "BirthYear": None, "PassedAwayYear": None,
        })

    # one marriage per person, same generation, different parent couples
    mid = 0
    g = 0
    barren = 0
    used: set[int] = set()
    while mid < marriages:
        progressed = False
        gen = grid[g % generations]
        g += 1
        females = [p for p in gen if p["Sex"] == "F" and p["x"] not in used]
        males = [p for p in gen if p["Sex"] == "M" and p["x"] not in used]
        pairs = 0
        for wife, husband in zip(females, males[3:] + males[:3]):
            if mid >= marriages or pairs >= 25:
                break
            if wife["Mother"] is not None \
                    and wife["Mother"] == husband["Mother"]:
                continue
            used.add(wife["x"])
            used.add(husband["x"])
            year = max(wife["BirthYear"], husband["BirthYear"]) \
                + rng.randrange(18, 26)
            divorce = None
            if rng.random() < 0.2:
                divorce = year + rng.randrange(1, 9)
            mid += 1
            pairs += 1
            progressed = True
            data.marriages.append({
                "x": mid, "Husband": husband["x"], "Wife": wife["x"],
                "MarriageYear": year, "DivorceYear": divorce,
            })
        barren = barren + 1 if not progressed else 0
        if barren >= generations:
            raise RuntimeError("not enough eligible couples for the "
                               "requested marriage count")

    # per-country sequences of non-overlapping reigns; a reign fits inside
    # its ruler's adult lifetime, and consecutive reigns of one country may
    # touch in the same year only with default-filled months (July 1 starts
    # after June 30 ends)
    rid = 0
    slots = [reigns // countries + (1 if c < reigns % countries else 0)
             for c in range(countries)]
    if max(slots) > generations:
        raise RuntimeError("too many reigns per country for the generation "
                           "count; raise persons or countries")
    for c, nslots in enumerate(slots):
        prev_end_year = None
        prev_end_explicit = False
        start_gen = c % max(1, generations - nslots + 1)
        for s in range(nslots):
            gen = grid[start_gen + s]
            ruler = gen[(c * 7 + s * 5) % per_generation]
            birth = ruler["BirthYear"]
            death = ruler["PassedAwayYear"]
            frm = birth + rng.randrange(20, 27)
            if prev_end_year is not None:
                floor_year = prev_end_year + (1 if prev_end_explicit else 0)
                frm = max(frm, floor_year)
            last_year = death if death is not None else clock_year
            if frm + 1 > last_year:
                raise RuntimeError("reign slot does not fit its ruler's life; "
                                   "the configured sizes are incoherent")
            rid += 1
            ongoing = death is None and s == nslots - 1 and rng.random() < 0.5
            to = None if ongoing \
                else min(frm + rng.randrange(1, 16), last_year)
            row = {
                "x": rid, "Ruler": ruler["x"], "Country": c + 1,
                "Title": rng.randrange(1, len(data.titles) + 1)
                if rng.random() < 0.8 else None,
                "FromYear": frm, "ToYear": to,
                "FromMonth": None, "ToMonth": None,
                "FromDay": None, "ToDay": None,
            }
            adjacent = prev_end_year is not None and frm == prev_end_year
            if not adjacent and rng.random() < 0.4:
                row["FromMonth"] = rng.randrange(1, 13)
                if rng.random() < 0.6:
                    row["FromDay"] = rng.randrange(1, _month_cap(row["FromMonth"]))
            if to is not None and to > frm and rng.random() < 0.4:
                row["ToMonth"] = rng.randrange(1, 13)
                if rng.random() < 0.6:
                    row["ToDay"] = rng.randrange(1, _month_cap(row["ToMonth"]))
            data.reigns.append(row)
            prev_end_year = to if to is not None else clock_year
            prev_end_explicit = row["ToMonth"] is not None
            if rng.random() < 0.5:
                prev_end_year += rng.randrange(1, 3)
                prev_end_explicit = False
    return data


def _month_cap(month: int) -> int:
    if month == 2:
        return 30       # exclusive bound: days 1..29
    if month in (4, 6, 9, 11):
        return 31       # days 1..30
    return 32


def to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else row[c]
                         for c in columns])
    return buf.getvalue()


def write_csvs(data: SynthData, directory) -> dict[str, str]:
    """Write one CSV per table; returns table name -> path."""
    import os
    out = {}
    for table, (rows, columns) in data.tables().items():
        path = os.path.join(str(directory), f"{table.lower()}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(to_csv(rows, columns))
        out[table] = path
    return out
