/** Thin HTTP client for the failover service.

The console only reads and issues commands; it never computes decisions,
so every method maps one-to-one onto a service route. */

import type {
  ActiveInfo,
  DecisionDoc,
  DecisionsPayload,
  HealthDoc,
  MatrixPayload,
  RegistryPayload,
  StatusDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

export interface ClientOptions {
  endpoint: string;
  token?: string;
  fetchImpl?: typeof fetch;
}

export class ServiceClient {
  readonly endpoint: string;
  private readonly token: string | undefined;
  private readonly fetchImpl: typeof fetch;

  constructor(options: ClientOptions) {
    this.endpoint = options.endpoint.replace(/\/+$/, "");
    this.token = options.token;
    this.fetchImpl = options.fetchImpl ?? fetch;
  }

  /** URL for the SSE stream; the feed owns the connection itself. */
  eventsUrl(since: number): string {
    return `${this.endpoint}/events?since=${since}`;
  }

  health(): Promise<HealthDoc> {
    return this.request("GET", "/health");
  }

  registryDoc(): Promise<RegistryPayload> {
    return this.request("GET", "/registry");
  }

  matrix(dataType: string): Promise<MatrixPayload> {
    return this.request("GET", `/matrix?data_type=${encodeURIComponent(dataType)}`);
  }

  active(): Promise<Record<string, ActiveInfo>> {
    return this.request("GET", "/active");
  }

  statuses(): Promise<{ statuses: Record<string, StatusDoc> }> {
    return this.request("GET", "/statuses");
  }

  decisions(since = 0): Promise<DecisionsPayload> {
    return this.request("GET", `/decisions?since=${since}`);
  }

  setWeights(weights: Record<string, number>): Promise<{
    "pack-digest": string;
    matrices: Record<string, string>;
    weights: Record<string, number>;
  }> {
    return this.request("PUT", "/weights", weights);
  }

  preActivate(sourceId: string): Promise<{ "source-id": string; "ready-at": number }> {
    return this.request("POST", "/commands/pre-activate", { "source-id": sourceId });
  }

  forceSwitch(dataType: string, sourceId: string): Promise<DecisionDoc> {
    return this.request("POST", "/commands/force-switch", {
      "data-type": dataType,
      "source-id": sourceId,
    });
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token !== undefined && method !== "GET") {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    const response = await this.fetchImpl(this.endpoint + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      parsed = text;
    }
    if (!response.ok) {
      const detail =
        parsed !== null && typeof parsed === "object" && "detail" in parsed
          ? String((parsed as { detail: unknown }).detail)
          : `${response.status} ${response.statusText}`;
      throw new ApiError(response.status, detail);
    }
    return parsed as T;
  }
}
