// Query pages: the full ancestor/descendant closure and the per-person
// seeded closure with signed generations.

import { api } from "../api";
import { debounce, SequencedLookup } from "../debounce";
import { el, replace } from "../dom";

export function closureAllView(): HTMLElement {
  const banner = el("p", { class: "banner", dataset: { role: "pair-banner" } });
  const host = el("div", { dataset: { role: "pairs" } },
    el("p", { class: "muted", dataset: { role: "progress" } },
      "computing the closure — this may take a while on a large registry…"));
  void api.closureAll().then((doc) => {
    banner.textContent = `${doc.count} pair(s) found · ${doc.elapsedMs} ms`;
    replace(host, el("table", { class: "grid" },
      el("thead", {}, el("tr", {}, el("th", {}, "ancestor"), el("th", {}, "descendant"))),
      el("tbody", {}, ...doc.pairs.map((p) => el("tr", {},
        el("td", {}, p.ancestor.label),
        el("td", {}, p.descendant.label),
      ))),
    ));
  });
  return el("section", {},
    el("h2", {}, "Persons transitive closure"),
    el("p", { class: "muted" }, "all (ancestor, descendant) pairs through mothers and fathers"),
    banner,
    host,
  );
}

export function closureSeedView(): HTMLElement {
  const filter = el("input", {
    type: "search",
    placeholder: "select desired person (seed)…",
    dataset: { role: "seed-filter" },
  });
  const select = el("select", { size: 8, dataset: { role: "seed-picker" } });
  const compute = el("button", { class: "primary", dataset: { role: "compute" } }, "compute ▸");
  const results = el("div", { dataset: { role: "seed-results" } });
  const note = el("p", { class: "muted" },
    "computing the closure may take a while on a large registry");
  const lookup = new SequencedLookup();

  // the picker narrows with every keystroke, exactly like the registry filter
  async function loadOptions(text: string): Promise<void> {
    await lookup.run(
      () => api.list("PERSONS", text, 0, 100),
      (listing) => {
        replace(select, ...listing.rows.map((row) =>
          el("option", { value: String(row.x) }, row.label)));
      },
    );
  }
  const reload = debounce((text: string) => void loadOptions(text), 120);
  filter.addEventListener("input", () => reload(filter.value));
  void loadOptions("");

  compute.addEventListener("click", () => {
    const x = Number(select.value);
    if (!x) return;
    replace(results, el("p", { class: "muted", dataset: { role: "progress" } },
      "computing…"));
    void api.closureSeed(x).then((doc) => {
      replace(results,
        el("p", { class: "banner", dataset: { role: "seed-banner" } },
          `${doc.count} person(s) in closure of ${doc.seed.label}`),
        el("button", {
          dataset: { role: "new-query" },
          onclick: () => {
            replace(results);
            filter.value = "";
            void loadOptions("");
          },
        }, "new query"),
        el("table", { class: "grid" },
          el("thead", {}, el("tr", {},
            el("th", {}, "generation"), el("th", {}, "person"))),
          el("tbody", {}, ...doc.entries.map((entry) => el("tr", {
            class: entry.generation === 0 ? "seed-row" : "",
          },
            el("td", {}, entry.display),
            el("td", {}, entry.person),
          ))),
        ),
      );
    });
  });

  return el("section", {},
    el("h2", {}, "Transitive closure of selected person"),
    el("p", { class: "muted" }, "ancestors and descendants by generation"),
    note,
    el("div", { class: "toolbar stacked" }, filter, select, compute),
    results,
  );
}
