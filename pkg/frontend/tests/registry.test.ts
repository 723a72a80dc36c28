// Typeahead acceptance: every keystroke in the persons filter narrows the
// visible rows, against a live service.

import { afterAll, beforeAll, expect, it } from "vitest";

import { setApiBase } from "../src/api";
import { start } from "../src/main";
import { LiveServer, seedPersons, startServer, until } from "./server";

let server: LiveServer;
let root: HTMLElement;

beforeAll(async () => {
  server = await startServer();
  setApiBase(server.base);
  await seedPersons(server.base, [
    { Name: "Abdel Fattah el-Sisi", Sex: "M", BirthYear: 1954 },
    { Name: "Adela of France (the Holly)", Sex: "F", BirthYear: 1009, PassedAwayYear: 1079 },
    { Name: "Adela of Normandy (Saint Adela)", Sex: "F", BirthYear: 1067, PassedAwayYear: 1137 },
    { Name: "Acațiu Barcsai", Sex: "M", BirthYear: 1619, PassedAwayYear: 1661 },
    { Name: "Charles III, King of UK", Sex: "M", BirthYear: 1948 },
  ]);
  root = document.createElement("div");
  document.body.append(root);
  window.location.hash = "#/set/PERSONS";
  await start(root);
});

afterAll(() => server.stop());

function visibleRows(): string[] {
  return Array.from(root.querySelectorAll('[data-role="rows"] tbody tr td:first-child'))
    .map((td) => td.textContent ?? "");
}

async function type(
  input: HTMLInputElement, text: string, expectedCounts: number[],
): Promise<string[][]> {
  const progression: string[][] = [];
  for (let i = 1; i <= text.length; i++) {
    input.value = text.slice(0, i);
    input.dispatchEvent(new Event("input", { bubbles: true }));
    await until(
      () => visibleRows().length === expectedCounts[i - 1],
      `rows narrowed for ${JSON.stringify(text.slice(0, i))}`,
    );
    progression.push(visibleRows());
  }
  return progression;
}

const ALL = ["Abdel Fattah el-Sisi", "Acațiu Barcsai",
  "Adela of France (the Holly)", "Adela of Normandy (Saint Adela)",
  "Charles III, King of UK"];

it("shows the full registry with a count banner", async () => {
  await until(() => visibleRows().length === 5, "initial rows");
  const banner = root.querySelector('[data-role="count-banner"]')!;
  expect(banner.textContent).toContain("5 of 5 record(s)");
  expect(banner.textContent).toContain("current year 2026");
  // server sort order: name ascending
  expect(visibleRows()).toEqual(ALL);
});

it("narrows the rows with every keystroke", async () => {
  const input = root.querySelector<HTMLInputElement>('[data-role="filter"]')!;
  // substring matching on the display label: "a" occurs in every label,
  // "ad" keeps only the two Adelas, and each further key re-queries
  const progression = await type(input, "Adel", [5, 2, 2, 2]);
  expect(progression[0]).toEqual(ALL);
  const adelas = ["Adela of France (the Holly)", "Adela of Normandy (Saint Adela)"];
  expect(progression[1]).toEqual(adelas);
  expect(progression[2]).toEqual(adelas);
  expect(progression[3]).toEqual(adelas);
  for (let i = 1; i < progression.length; i++) {
    expect(progression[i].length).toBeLessThanOrEqual(progression[i - 1].length);
  }
  const banner = root.querySelector('[data-role="count-banner"]')!;
  expect(banner.textContent).toContain("2 of 5 record(s)");
});

it("returns to the full registry when the filter is cleared", async () => {
  const input = root.querySelector<HTMLInputElement>('[data-role="filter"]')!;
  input.value = "";
  input.dispatchEvent(new Event("input", { bubbles: true }));
  await until(() => visibleRows().length === 5, "full registry restored");
  expect(visibleRows()).toEqual(ALL);
});
