/** Thin typed client over the session API.  The fetch function is injected
 * so contract tests can run against a recorded mock server. */

import {
  InvalidationReport,
  RunReport,
  SessionResource,
  SnapshotDoc,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown>; text(): Promise<string> }>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }

  get busy(): boolean {
    return this.status === 409;
  }
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetcher: FetchLike = (url, init) => fetch(url, init as RequestInit),
    private token: string | null = null,
  ) {}

  private headers(): Record<string, string> {
    const h: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) h["X-Api-Token"] = this.token;
    return h;
  }

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetcher(this.base + path, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (res.status === 204) return undefined as T;
    if (res.status >= 400) {
      let detail = `${res.status}`;
      try {
        const doc = (await res.json()) as { detail?: string };
        if (doc && doc.detail) detail = String(doc.detail);
      } catch {
        // keep the bare status
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  listSessions(): Promise<SessionResource[]> {
    return this.call("GET", "/sessions");
  }

  getSession(id: string): Promise<SessionResource> {
    return this.call("GET", `/sessions/${id}`);
  }

  createSession(body: Record<string, unknown>): Promise<SessionResource> {
    return this.call("POST", "/sessions", body);
  }

  uploadDataset(body: Record<string, unknown>): Promise<{ name: string; rows: number }> {
    return this.call("POST", "/datasets", body);
  }

  listDatasets(): Promise<Record<string, { rows: number; schema: string[] }>> {
    return this.call("GET", "/datasets");
  }

  run(id: string, until: number | "end"): Promise<RunReport> {
    return this.call("POST", `/sessions/${id}/run`, { until });
  }

  resume(id: string): Promise<RunReport> {
    return this.call("POST", `/sessions/${id}/resume`);
  }

  patchParams(
    id: string,
    params: { minsup?: string; minconf?: string },
  ): Promise<InvalidationReport> {
    return this.call("PATCH", `/sessions/${id}/params`, params);
  }

  toggleBreakpoint(
    id: string,
    edge: [number, number],
    enabled: boolean,
  ): Promise<{ breakpoints: [number, number][]; session: SessionResource }> {
    return this.call("POST", `/sessions/${id}/breakpoints`, { edge, enabled });
  }

  snapshot(id: string, node: number): Promise<SnapshotDoc> {
    return this.call("GET", `/sessions/${id}/nodes/${node}/snapshot`);
  }

  deleteSession(id: string): Promise<void> {
    return this.call("DELETE", `/sessions/${id}`);
  }
}
