// Registry page: record-count banner, typeahead filter, one row per record.

import { api, ApiError, Listing, Row, SetMeta } from "../api";
import { debounce, SequencedLookup } from "../debounce";
import { el, replace } from "../dom";
import { navigate, showBanner } from "../shell";

const PAGE_SIZE = 200;

export function registryView(set: SetMeta): HTMLElement {
  const banner = el("p", { class: "banner", dataset: { role: "count-banner" } });
  const tableHost = el("div", { dataset: { role: "rows" } });
  const lookup = new SequencedLookup();

  async function load(filter: string): Promise<void> {
    await lookup.run(
      () => api.list(set.name, filter, 0, PAGE_SIZE),
      (listing) => render(listing),
    );
  }

  function render(listing: Listing): void {
    banner.textContent =
      `${listing.matched} of ${listing.total} record(s) · ` +
      `current year ${listing.clockYear}`;
    replace(tableHost, rowsTable(set, listing.rows, () => load(filterInput.value)));
  }

  const reload = debounce((value: string) => {
    load(value).catch(() => undefined);
  }, 120);

  const filterInput = el("input", {
    type: "search",
    placeholder: "type to narrow the registry…",
    dataset: { role: "filter" },
    oninput: () => reload(filterInput.value),
  });

  const newButton = el("button", {
    class: "primary",
    onclick: () => navigate(`#/set/${set.name}/new`),
  }, "+ new entry");

  load("").catch(() => undefined);

  return el("section", { class: "registry" },
    el("h2", {}, `Registry of ${titleCase(set.name)}`),
    banner,
    el("div", { class: "toolbar" }, filterInput, newButton),
    tableHost,
  );
}

function rowsTable(set: SetMeta, rows: Row[], refresh: () => void): HTMLElement {
  const showable = set.columns.map((c) => c.name);
  const headers = [...showable];
  if (set.name === "PERSONS") headers.push("Age");
  const head = el("tr", {}, ...headers.map((h) => el("th", {}, h)), el("th", {}, ""));
  const body = rows.map((row) => {
    const cells = showable.map((name) => {
      const col = set.columns.find((c) => c.name === name)!;
      let text: string;
      if (col.kind === "ref") {
        text = row.refLabels[name] ?? "∅";
      } else {
        const value = row[name];
        text = value === null || value === undefined ? "—" : String(value);
      }
      return el("td", {}, text);
    });
    if (set.name === "PERSONS") {
      const age = row["Age"];
      cells.push(el("td", {}, age === null ? "—" : String(age)));
    }
    return el("tr", { dataset: { x: String(row.x) } },
      ...cells,
      el("td", { class: "actions" },
        set.name === "PERSONS"
          ? el("button", { onclick: () => navigate(`#/person/${row.x}`) }, "view")
          : null,
        el("button", { onclick: () => navigate(`#/set/${set.name}/edit/${row.x}`) }, "edit"),
        el("button", {
          class: "danger",
          onclick: async () => {
            if (!window.confirm(`Delete ${row.label}?`)) return;
            try {
              await api.remove(set.name, row.x);
              refresh();
            } catch (err) {
              if (err instanceof ApiError) {
                showBanner(err.violations[0]?.message ?? err.message);
              }
            }
          },
        }, "delete"),
      ),
    );
  });
  return el("table", { class: "grid" }, el("thead", {}, head), el("tbody", {}, ...body));
}

export function titleCase(name: string): string {
  return name.charAt(0) + name.slice(1).toLowerCase();
}
