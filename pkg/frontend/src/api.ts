// Typed client for the engine's JSON API. Every verdict and axiom string
// shown in the UI comes from these payloads verbatim; the client never
// reimplements constraints.

export interface Violation {
  constraintId: string;
  witnesses: { table: string; x: number }[];
  message: string;
}

export interface ColumnMeta {
  name: string;
  nullable: boolean;
  kind: "ref" | "value";
  type: "int" | "text" | "enum" | "ref";
  target: string | null;
  enum: string[] | null;
}

export interface SetMeta {
  name: string;
  columns: ColumnMeta[];
}

export interface SchemaMeta {
  sets: SetMeta[];
  stats: Record<string, number>;
}

export type Row = {
  x: number;
  label: string;
  refLabels: Record<string, string>;
} & Record<string, unknown>;

export interface Listing {
  rows: Row[];
  total: number;
  matched: number;
  clockYear: number;
}

export interface CandidateList {
  field: string;
  target: string;
  rows: { x: number; label: string }[];
  matched: number;
}

export interface PersonDetail {
  person: Row;
  marriages: Row[];
  children: Row[];
  reigns: Row[];
}

export interface ClosureAll {
  count: number;
  elapsedMs: number;
  pairs: { ancestor: { x: number; label: string }; descendant: { x: number; label: string } }[];
}

export interface ClosureSeed {
  seed: { x: number; label: string };
  count: number;
  elapsedMs: number;
  entries: { x: number; generation: number; label: string; display: string; person: string }[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly violations: Violation[],
  ) {
    super(message);
  }
}

let base = "";

export function setApiBase(url: string): void {
  base = url.replace(/\/$/, "");
}

type Listener = (message: string) => void;
const errorListeners: Listener[] = [];

export function onNetworkError(listener: Listener): void {
  errorListeners.push(listener);
}

function reportNetworkError(message: string): void {
  for (const listener of errorListeners) listener(message);
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(base + path, init);
  } catch (err) {
    // never fail silently: surface connectivity problems in the UI
    reportNetworkError(`network error talking to the service: ${String(err)}`);
    throw err;
  }
  const body = (await response.json().catch(() => ({}))) as Record<string, unknown>;
  if (!response.ok) {
    throw new ApiError(
      response.status,
      String(body.error ?? "Error"),
      String(body.message ?? response.statusText),
      (body.violations as Violation[] | undefined) ?? [],
    );
  }
  return body as T;
}

export const api = {
  schema: () => request<SchemaMeta>("/api/schema"),

  list: (set: string, filter = "", offset = 0, limit?: number) => {
    const params = new URLSearchParams({ filter, offset: String(offset) });
    if (limit !== undefined) params.set("limit", String(limit));
    return request<Listing>(`/api/${set.toLowerCase()}?${params}`);
  },

  row: (set: string, x: number) => request<Row>(`/api/${set.toLowerCase()}/${x}`),

  create: (set: string, values: Record<string, unknown>) =>
    request<Row>(`/api/${set.toLowerCase()}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(values),
    }),

  update: (set: string, x: number, values: Record<string, unknown>) =>
    request<Row>(`/api/${set.toLowerCase()}/${x}`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(values),
    }),

  remove: (set: string, x: number) =>
    request<{ deleted: number }>(`/api/${set.toLowerCase()}/${x}`, { method: "DELETE" }),

  candidates: (set: string, field: string, draft: Record<string, unknown>, filter = "") => {
    const params = new URLSearchParams({ field, draft: JSON.stringify(draft), filter });
    return request<CandidateList>(`/api/${set.toLowerCase()}/candidates?${params}`);
  },

  axioms: (set: string) =>
    request<{ set: string; axioms: string[] }>(`/api/${set.toLowerCase()}/axioms`),

  personDetail: (x: number) => request<PersonDetail>(`/api/persons/${x}/detail`),

  closureAll: () => request<ClosureAll>("/api/queries/transitive-closure"),

  closureSeed: (x: number) => request<ClosureSeed>(`/api/queries/closure/${x}`),
};
