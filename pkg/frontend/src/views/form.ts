// Create/edit form: value inputs, candidate pickers for reference fields
// (only values the engine would accept, narrowed per keystroke), the active
// axioms panel, and inline violations straight from the 422 payload.

import { api, ApiError, ColumnMeta, SetMeta } from "../api";
import { debounce, SequencedLookup } from "../debounce";
import { el, replace } from "../dom";
import { navigate, showBanner } from "../shell";
import { titleCase } from "./registry";

type Draft = Record<string, unknown>;

export function formView(set: SetMeta, editX?: number): HTMLElement {
  const draft: Draft = {};
  const pickers = new Map<string, RefPicker>();
  const violationsHost = el("ul", { class: "violations", dataset: { role: "violations" } });
  const fields = el("div", { class: "fields" });
  const heading = editX === undefined
    ? `New ${titleCase(set.name).replace(/s$/i, "").toLowerCase()} entry`
    : `Edit ${titleCase(set.name)} #${editX}`;

  const form = el("section", { class: "form-page" },
    el("h2", {}, heading),
    el("div", { class: "form-layout" },
      el("form", {
        dataset: { role: "record-form" },
        onsubmit: (event: Event) => {
          event.preventDefault();
          void submit();
        },
      },
        fields,
        violationsHost,
        el("div", { class: "toolbar" },
          el("button", { class: "primary", type: "submit", dataset: { role: "save" } },
            "save record"),
          el("button", {
            type: "button",
            onclick: () => navigate(`#/set/${set.name}`),
          }, "cancel"),
        ),
      ),
      axiomsPanel(set.name),
    ),
  );

  let submitting = false;
  async function submit(): Promise<void> {
    if (submitting) return; // at most one in-flight mutation
    submitting = true;
    const save = form.querySelector<HTMLButtonElement>('[data-role="save"]')!;
    save.disabled = true;
    replace(violationsHost);
    try {
      const payload: Draft = {};
      for (const column of set.columns) {
        payload[column.name] = draft[column.name] ?? null;
      }
      const row = editX === undefined
        ? await api.create(set.name, payload)
        : await api.update(set.name, editX, payload);
      if (set.name === "PERSONS") {
        navigate(`#/person/${row.x}`);
      } else {
        navigate(`#/set/${set.name}`);
      }
    } catch (err) {
      if (err instanceof ApiError) {
        const items = err.violations.length
          ? err.violations.map((v) => el("li", {}, v.message))
          : [el("li", {}, err.message)];
        replace(violationsHost, ...items);
      } else {
        showBanner(String(err));
      }
    } finally {
      submitting = false;
      save.disabled = false;
    }
  }

  function onDraftChanged(changed: string): void {
    if (set.name === "PERSONS" && changed === "Sex") {
      applyNeutralRule();
    }
    for (const [name, picker] of pickers) {
      if (name !== changed) picker.refresh();
    }
  }

  function applyNeutralRule(): void {
    // neutral persons cannot have parents: selecting "N" clears and
    // disables the parent pickers (after confirmation when data is lost)
    const neutral = draft["Sex"] === "N";
    const parents = ["Mother", "Father"].filter((n) => pickers.has(n));
    if (neutral && parents.some((n) => draft[n] != null)) {
      if (!window.confirm("Neutral persons may not have parents; clear them?")) {
        draft["Sex"] = previousSex;
        const select = fields.querySelector<HTMLSelectElement>('[data-field="Sex"]');
        if (select) select.value = String(previousSex ?? "");
        return;
      }
    }
    for (const name of parents) {
      const picker = pickers.get(name)!;
      if (neutral) {
        draft[name] = null;
        picker.clear();
      }
      picker.setDisabled(neutral);
    }
    previousSex = draft["Sex"];
  }

  let previousSex: unknown = null;

  for (const column of set.columns) {
    fields.append(fieldRow(set, column, draft, pickers, onDraftChanged, editX));
  }

  if (editX !== undefined) {
    void api.row(set.name, editX).then((row) => {
      for (const column of set.columns) {
        const value = row[column.name];
        draft[column.name] = value ?? null;
        const input = fields.querySelector<HTMLInputElement | HTMLSelectElement>(
          `[data-field="${column.name}"]`);
        if (input && column.kind !== "ref") {
          input.value = value === null || value === undefined ? "" : String(value);
        }
      }
      previousSex = draft["Sex"] ?? null;
      for (const picker of pickers.values()) picker.refresh();
    });
  } else {
    for (const picker of pickers.values()) picker.refresh();
  }

  return form;
}

function fieldRow(
  set: SetMeta,
  column: ColumnMeta,
  draft: Draft,
  pickers: Map<string, RefPicker>,
  onChanged: (name: string) => void,
  editX?: number,
): HTMLElement {
  const label = el("label", {}, column.name + (column.nullable ? "" : " *"));
  let control: HTMLElement;
  if (column.kind === "ref") {
    const picker = new RefPicker(set, column, draft, onChanged, editX);
    pickers.set(column.name, picker);
    control = picker.root;
  } else if (column.type === "enum") {
    control = el("select", {
      dataset: { field: column.name },
      onchange: (event: Event) => {
        const value = (event.target as HTMLSelectElement).value;
        draft[column.name] = value === "" ? null : value;
        onChanged(column.name);
      },
    },
      el("option", { value: "" }, "—"),
      ...(column.enum ?? []).map((v) => el("option", { value: v }, v)),
    );
  } else {
    control = el("input", {
      dataset: { field: column.name },
      type: column.type === "int" ? "number" : "text",
      oninput: (event: Event) => {
        const raw = (event.target as HTMLInputElement).value.trim();
        draft[column.name] = raw === ""
          ? null
          : column.type === "int" ? Number(raw) : raw;
        onChanged(column.name);
      },
    });
  }
  return el("div", { class: "field" }, label, control);
}

class RefPicker {
  readonly root: HTMLElement;
  private readonly select: HTMLSelectElement;
  private readonly filter: HTMLInputElement;
  private readonly note: HTMLElement;
  private readonly lookup = new SequencedLookup();
  private readonly debouncedRefresh = debounce(() => void this.fetch(), 120);

  constructor(
    private readonly set: SetMeta,
    private readonly column: ColumnMeta,
    private readonly draft: Draft,
    private readonly onChanged: (name: string) => void,
    private readonly editX?: number,
  ) {
    this.filter = el("input", {
      type: "search",
      placeholder: `filter ${column.target ?? ""}…`,
      dataset: { role: `picker-filter-${column.name}` },
      oninput: () => this.debouncedRefresh(),
    });
    this.select = el("select", {
      dataset: { field: column.name, role: `picker-${column.name}` },
      onchange: () => {
        const value = this.select.value;
        this.draft[column.name] = value === "" ? null : Number(value);
        this.onChanged(column.name);
      },
    });
    this.note = el("small", { class: "picker-note", dataset: { role: `picker-note-${column.name}` } });
    this.root = el("div", { class: "picker" }, this.filter, this.select, this.note);
  }

  refresh(): void {
    void this.fetch();
  }

  clear(): void {
    this.select.value = "";
  }

  setDisabled(disabled: boolean): void {
    this.select.disabled = disabled;
    this.filter.disabled = disabled;
    this.note.textContent = disabled ? "not applicable for neutral persons" : this.note.textContent;
  }

  private async fetch(): Promise<void> {
    const draft: Draft = { ...this.draft };
    delete draft[this.column.name];
    if (this.editX !== undefined) draft["x"] = this.editX;
    try {
      await this.lookup.run(
        () => api.candidates(this.set.name, this.column.name, draft, this.filter.value),
        (candidates) => {
          const current = this.draft[this.column.name];
          replace(this.select,
            el("option", { value: "" }, "∅"),
            ...candidates.rows.map((r) =>
              el("option", { value: String(r.x) }, r.label)),
          );
          if (current != null && candidates.rows.some((r) => r.x === current)) {
            this.select.value = String(current);
          }
          this.note.textContent =
            `${candidates.matched} valid candidate(s) — only values the ` +
            `axioms allow are offered`;
        },
      );
    } catch (err) {
      if (err instanceof ApiError) showBanner(err.message);
    }
  }
}

function axiomsPanel(setName: string): HTMLElement {
  const list = el("ul", { dataset: { role: "active-axioms" } });
  void api.axioms(setName).then((doc) => {
    replace(list, ...doc.axioms.map((text) => el("li", {}, text)));
  });
  return el("aside", { class: "axioms" },
    el("h3", {}, "Active axioms"),
    list,
  );
}
