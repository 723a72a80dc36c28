// Form acceptance: candidate pickers only offer what the axioms allow, the
// active-axioms panel comes from the service, and a violating draft renders
// the server's violation text inline.

import { afterAll, beforeAll, expect, it, vi } from "vitest";

import { setApiBase } from "../src/api";
import { start } from "../src/main";
import { renderRoute } from "../src/shell";
import { LiveServer, seedPersons, startServer, until } from "./server";

let server: LiveServer;
let root: HTMLElement;
let ids: number[];

beforeAll(async () => {
  server = await startServer();
  setApiBase(server.base);
  ids = await seedPersons(server.base, [
    { Name: "Helen", Sex: "F", BirthYear: 1900, PassedAwayYear: 1980 },
    { Name: "Hector", Sex: "M", BirthYear: 1898, PassedAwayYear: 1970 },
    { Name: "Young Mother", Sex: "F", BirthYear: 1990 },
  ]);
  vi.stubGlobal("confirm", () => true);
  root = document.createElement("div");
  document.body.append(root);
  window.location.hash = "#/set/PERSONS/new";
  await start(root);
});

afterAll(() => {
  server.stop();
  vi.unstubAllGlobals();
});

function freshForm(): void {
  window.location.hash = "#/set/PERSONS/new";
  renderRoute();
}

function motherOptions(): string[] {
  const select = root.querySelector<HTMLSelectElement>('[data-role="picker-Mother"]')!;
  return Array.from(select.options).map((o) => o.textContent ?? "").filter((t) => t !== "∅");
}

it("loads the active axioms panel from the service", async () => {
  const items = await until(() => {
    const list = root.querySelectorAll('[data-role="active-axioms"] li');
    return list.length > 0 ? Array.from(list, (li) => li.textContent ?? "") : null;
  }, "axioms panel");
  expect(items.some((t) => t.includes("ACYCLIC Mother, Father"))).toBe(true);
  expect(items.some((t) => t.includes("MotherIsFemale"))).toBe(true);
  expect(items.some((t) => t.includes("INJECTIVE Mother * Name"))).toBe(true);
});

it("offers only female persons as Mother candidates", async () => {
  const options = await until(
    () => (motherOptions().length ? motherOptions() : null),
    "mother candidates");
  expect(options).toContain("Helen, F (b. 1900, p. 1980)");
  expect(options).toContain("Young Mother, F (b. 1990)");
  expect(options.some((o) => o.includes(", M"))).toBe(false);
});

it("narrows the Mother picker per keystroke and respects the draft", async () => {
  freshForm();
  const filter = await until(
    () => root.querySelector<HTMLInputElement>('[data-role="picker-filter-Mother"]'),
    "picker filter");
  await until(() => motherOptions().length === 2, "both mothers offered");
  filter.value = "Hel";
  filter.dispatchEvent(new Event("input", { bubbles: true }));
  await until(() => motherOptions().length === 1, "picker narrowed");
  expect(motherOptions()).toEqual(["Helen, F (b. 1900, p. 1980)"]);
  // a draft birth year after Helen's death removes her from the candidates
  filter.value = "";
  filter.dispatchEvent(new Event("input", { bubbles: true }));
  await until(() => motherOptions().length === 2, "filter cleared");
  const birth = root.querySelector<HTMLInputElement>('input[data-field="BirthYear"]')!;
  birth.value = "2000";
  birth.dispatchEvent(new Event("input", { bubbles: true }));
  await until(() => motherOptions().length === 1, "dead mother excluded");
  expect(motherOptions()).toEqual(["Young Mother, F (b. 1990)"]);
});

it("renders the server's violation text inline on a violating draft", async () => {
  freshForm();
  await until(() => motherOptions().length === 2, "candidates ready");
  const name = root.querySelector<HTMLInputElement>('input[data-field="Name"]')!;
  name.value = "Too Early";
  name.dispatchEvent(new Event("input", { bubbles: true }));
  const sex = root.querySelector<HTMLSelectElement>('select[data-field="Sex"]')!;
  sex.value = "F";
  sex.dispatchEvent(new Event("change", { bubbles: true }));
  const mother = root.querySelector<HTMLSelectElement>('[data-role="picker-Mother"]')!;
  await until(() => mother.querySelector(`option[value="${ids[2]}"]`), "young mother option");
  mother.value = String(ids[2]);
  mother.dispatchEvent(new Event("change", { bubbles: true }));
  // now make the draft violate the mother-gap axiom (gap of 2 years)
  const birth = root.querySelector<HTMLInputElement>('input[data-field="BirthYear"]')!;
  birth.value = "1992";
  birth.dispatchEvent(new Event("input", { bubbles: true }));
  root.querySelector<HTMLFormElement>('[data-role="record-form"]')!
    .dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
  const messages = await until(() => {
    const items = root.querySelectorAll('[data-role="violations"] li');
    return items.length ? Array.from(items, (li) => li.textContent ?? "") : null;
  }, "inline violations");
  // the text is the engine's, shown verbatim
  const direct = await fetch(`${server.base}/api/persons`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ Name: "Too Early", Sex: "F", Mother: ids[2],
      BirthYear: 1992 }),
  });
  expect(direct.status).toBe(422);
  const payload = (await direct.json()) as { violations: { message: string }[] };
  expect(messages).toEqual(payload.violations.map((v) => v.message));
  expect(messages.some((m) => m.includes("MotherGap"))).toBe(true);
});

it("clears and disables parent pickers for neutral persons", async () => {
  freshForm();
  await until(() => motherOptions().length >= 1, "candidates ready");
  const mother = root.querySelector<HTMLSelectElement>('[data-role="picker-Mother"]')!;
  mother.value = String(ids[0]);
  mother.dispatchEvent(new Event("change", { bubbles: true }));
  const sex = root.querySelector<HTMLSelectElement>('select[data-field="Sex"]')!;
  sex.value = "N";
  sex.dispatchEvent(new Event("change", { bubbles: true }));
  await until(() => mother.disabled, "mother picker disabled");
  expect(mother.value).toBe("");
  const father = root.querySelector<HTMLSelectElement>('[data-role="picker-Father"]')!;
  expect(father.disabled).toBe(true);
});

it("creates a valid person and navigates to the detail page", async () => {
  freshForm();
  await until(() => motherOptions().length >= 1, "candidates ready");
  const name = root.querySelector<HTMLInputElement>('input[data-field="Name"]')!;
  name.value = "Paris";
  name.dispatchEvent(new Event("input", { bubbles: true }));
  const sex = root.querySelector<HTMLSelectElement>('select[data-field="Sex"]')!;
  sex.value = "M";
  sex.dispatchEvent(new Event("change", { bubbles: true }));
  const mother = root.querySelector<HTMLSelectElement>('[data-role="picker-Mother"]')!;
  mother.value = String(ids[0]);
  mother.dispatchEvent(new Event("change", { bubbles: true }));
  root.querySelector<HTMLFormElement>('[data-role="record-form"]')!
    .dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
  await until(() => window.location.hash.startsWith("#/person/"), "detail navigation");
  const heading = await until(
    () => root.querySelector(".detail h2"), "detail heading");
  expect(heading.textContent).toBe("Paris");
});
