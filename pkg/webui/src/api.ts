import type {
  ComplianceReport,
  GridResponse,
  LonLat,
  PlanResponse,
  Viewport,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface ClientOptions {
  baseUrl: string;
  apiKey: string;
  /** Injectable for tests; defaults to the global fetch. */
  fetchImpl?: typeof fetch;
}

export interface RouteRequest {
  dbs?: string[];
  t?: string;
}

/** Typed client for the service; every number the UI shows comes from here. */
export class FieldsClient {
  private readonly baseUrl: string;
  private readonly apiKey: string;
  private readonly fetchImpl: typeof fetch;

  constructor(opts: ClientOptions) {
    this.baseUrl = opts.baseUrl.replace(/\/+$/, "");
    this.apiKey = opts.apiKey;
    this.fetchImpl = opts.fetchImpl ?? fetch;
  }

  async fieldGrid(
    view: Viewport,
    opts: RouteRequest & { signal?: AbortSignal } = {},
  ): Promise<GridResponse> {
    const q = new URLSearchParams({
      bbox: `${view.minLon},${view.minLat},${view.maxLon},${view.maxLat}`,
      nx: String(view.nx),
      ny: String(view.ny),
    });
    if (opts.dbs) q.set("dbs", opts.dbs.join(","));
    if (opts.t) q.set("t", opts.t);
    return this.request<GridResponse>(`/fields/grid?${q}`, {
      signal: opts.signal,
    });
  }

  async planRoute(
    start: LonLat,
    goal: LonLat,
    opts: RouteRequest & { signal?: AbortSignal } = {},
  ): Promise<PlanResponse> {
    return this.request<PlanResponse>("/routes/plan", {
      method: "POST",
      body: { start, goal, dbs: opts.dbs, t: opts.t },
      signal: opts.signal,
    });
  }

  async validateRoute(
    route: LonLat[],
    opts: RouteRequest = {},
  ): Promise<ComplianceReport> {
    return this.request<ComplianceReport>("/routes/validate", {
      method: "POST",
      body: { route, dbs: opts.dbs, t: opts.t },
    });
  }

  private async request<T>(
    path: string,
    opts: { method?: string; body?: unknown; signal?: AbortSignal } = {},
  ): Promise<T> {
    const init: RequestInit = {
      method: opts.method ?? "GET",
      headers: { "X-Api-Key": this.apiKey },
      signal: opts.signal ?? null,
    };
    if (opts.body !== undefined) {
      init.headers = { ...init.headers, "Content-Type": "application/json" };
      init.body = JSON.stringify(opts.body);
    }
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!res.ok) {
      let message = `${res.status}`;
      try {
        const body = (await res.json()) as { error?: string };
        if (body.error) message = body.error;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(res.status, message);
    }
    return (await res.json()) as T;
  }
}
