// App shell: navigation, hash routing, and the global error banner.

import { onNetworkError, SchemaMeta } from "./api";
import { el, replace } from "./dom";

const MANAGE_SETS = ["PERSONS", "MARRIAGES", "REIGNS", "COUNTRIES", "TITLES"];

let outlet: HTMLElement | null = null;
let banner: HTMLElement | null = null;
let schemaMeta: SchemaMeta | null = null;
type Renderer = (hash: string) => HTMLElement | null;
let renderer: Renderer = () => null;

export function navigate(hash: string): void {
  if (location.hash === hash) {
    renderRoute();
  } else {
    location.hash = hash;
  }
}

export function showBanner(message: string): void {
  if (!banner) return;
  banner.textContent = message;
  banner.classList.add("visible");
  setTimeout(() => banner?.classList.remove("visible"), 6000);
}

export function schema(): SchemaMeta {
  if (!schemaMeta) throw new Error("schema not loaded yet");
  return schemaMeta;
}

function menu(label: string, items: [string, string][]): HTMLElement {
  return el("details", { class: "menu" },
    el("summary", {}, label),
    el("ul", {}, ...items.map(([text, hash]) =>
      el("li", {}, el("a", {
        href: hash,
        onclick: () => {
          // close the dropdown; the hashchange handler does the rest
          document.querySelectorAll("details.menu").forEach((d) =>
            (d as HTMLDetailsElement).open = false);
        },
      }, text)))),
  );
}

export function mountShell(
  root: HTMLElement,
  meta: SchemaMeta,
  routeRenderer: Renderer,
): void {
  schemaMeta = meta;
  renderer = routeRenderer;
  banner = el("div", { class: "error-banner", dataset: { role: "error-banner" } });
  outlet = el("main", { dataset: { role: "outlet" } });
  onNetworkError(showBanner);
  replace(root,
    el("header", {},
      el("h1", {}, "Genealogies"),
      el("p", { class: "subtitle" }, "formal genealogical database"),
      el("nav", {},
        menu("manage data", MANAGE_SETS.map((s) =>
          [s.charAt(0) + s.slice(1).toLowerCase(), `#/set/${s}`])),
        menu("queries", [
          ["Persons transitive closure", "#/queries/closure"],
          ["Transitive closure of selected person", "#/queries/closure-seed"],
        ]),
      ),
    ),
    banner,
    outlet,
  );
  window.addEventListener("hashchange", renderRoute);
  renderRoute();
}

export function renderRoute(): void {
  if (!outlet) return;
  const view = renderer(location.hash || "#/set/PERSONS");
  if (view) replace(outlet, view);
}
