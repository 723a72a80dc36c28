// Person detail page: the record itself plus marriages, children, reigns.

import { api, PersonDetail, Row } from "../api";
import { el } from "../dom";
import { navigate } from "../shell";

export function detailView(x: number): HTMLElement {
  const host = el("section", { class: "detail" }, el("p", {}, "loading…"));
  void api.personDetail(x).then((doc) => {
    host.replaceChildren(...render(doc));
  });
  return host;
}

function field(name: string, value: unknown): HTMLElement {
  return el("div", { class: "kv" },
    el("dt", {}, name),
    el("dd", {}, value === null || value === undefined ? "—" : String(value)),
  );
}

function render(doc: PersonDetail): HTMLElement[] {
  const p = doc.person;
  return [
    el("p", {}, el("a", { href: "#/set/PERSONS" }, "← all records")),
    el("h2", {}, String(p["Name"])),
    el("dl", { class: "record" },
      field("Name", p["Name"]),
      field("Sex", p["Sex"]),
      field("Age (computed)", p["Age"]),
      field("Birth year", p["BirthYear"]),
      field("Passed away year", p["PassedAwayYear"]),
      field("Mother", p.refLabels["Mother"] ?? "∅"),
      field("Father", p.refLabels["Father"] ?? "∅"),
    ),
    section("Marriages", doc.marriages, (m) => [
      m.refLabels["Husband"] ?? "", m.refLabels["Wife"] ?? "",
      cell(m["MarriageYear"]), cell(m["DivorceYear"]),
    ], ["husband", "wife", "marriage year", "divorce year"]),
    section("Children", doc.children, (c) => [
      String(c["Name"]), String(c["Sex"]), cell(c["BirthYear"]), cell(c["Age"]),
      c["Mother"] === p.x ? "Mother" : "Father",
    ], ["name", "sex", "birth year", "age", "as"], (c) => navigate(`#/person/${c.x}`)),
    section("Reigns", doc.reigns, (r) => [
      r.refLabels["Country"] ?? "", r.refLabels["Title"] ?? "—",
      dateCell(r, "From"), dateCell(r, "To"),
    ], ["country", "title", "from", "to"]),
  ];
}

function cell(value: unknown): string {
  return value === null || value === undefined ? "—" : String(value);
}

function dateCell(row: Row, prefix: "From" | "To"): string {
  const year = row[`${prefix}Year`];
  if (year === null || year === undefined) return "present";
  const month = row[`${prefix}Month`];
  const day = row[`${prefix}Day`];
  const months = ["January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December"];
  if (month === null || month === undefined) return String(year);
  const name = months[Number(month) - 1];
  if (day === null || day === undefined) return `${name} ${year}`;
  return `${day} ${name} ${year}`;
}

function section(
  title: string,
  rows: Row[],
  toCells: (row: Row) => string[],
  headers: string[],
  onView?: (row: Row) => void,
): HTMLElement {
  if (!rows.length) {
    return el("section", {}, el("h3", {}, title), el("p", { class: "muted" }, "none"));
  }
  return el("section", {},
    el("h3", {}, title),
    el("table", { class: "grid" },
      el("thead", {}, el("tr", {},
        ...headers.map((h) => el("th", {}, h)),
        onView ? el("th", {}, "") : null)),
      el("tbody", {},
        ...rows.map((row) => el("tr", {},
          ...toCells(row).map((c) => el("td", {}, c)),
          onView
            ? el("td", {}, el("button", { onclick: () => onView(row) }, "view"))
            : null,
        )),
      ),
    ),
  );
}
