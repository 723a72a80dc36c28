import { api, SchemaMeta } from "./api";
import { el } from "./dom";
import { mountShell, schema, showBanner } from "./shell";
import { closureAllView, closureSeedView } from "./views/closure";
import { detailView } from "./views/detail";
import { formView } from "./views/form";
import { registryView } from "./views/registry";

import "./styles.css";

function route(hash: string): HTMLElement | null {
  const parts = hash.replace(/^#\//, "").split("/");
  const meta = schema();
  const setOf = (name: string) =>
    meta.sets.find((s) => s.name.toLowerCase() === name.toLowerCase());
  if (parts[0] === "set" && parts[1]) {
    const set = setOf(parts[1]);
    if (!set) return el("p", {}, `unknown set ${parts[1]}`);
    if (parts[2] === "new") return formView(set);
    if (parts[2] === "edit" && parts[3]) return formView(set, Number(parts[3]));
    return registryView(set);
  }
  if (parts[0] === "person" && parts[1]) return detailView(Number(parts[1]));
  if (parts[0] === "queries" && parts[1] === "closure") return closureAllView();
  if (parts[0] === "queries" && parts[1] === "closure-seed") return closureSeedView();
  return registryView(setOf("PERSONS")!);
}

export async function start(root: HTMLElement): Promise<SchemaMeta> {
  const meta = await api.schema();
  mountShell(root, meta, route);
  return meta;
}

const appRoot = document.getElementById("app");
if (appRoot) {
  start(appRoot).catch((err) => {
    showBanner(`cannot reach the service: ${String(err)}`);
    appRoot.textContent = "The data service is not reachable.";
  });
}
