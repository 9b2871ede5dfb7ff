// Typed client for the suggestion service JSON API.

export interface Candidate {
  name: string;
  display: string;
  locs: Record<string, number>;
  rank: number;
  nod: number;
  similarity: number;
  display_rank: number;
}

export interface SuggestResponse {
  query: string;
  cutoff: number;
  candidates: Candidate[];
  engines: { engine: string; status: string }[];
  elapsed_ms: number;
}

export interface EngineInfo {
  name: string;
  priority: number;
  enabled: boolean;
  parser: string;
  native_cutoff: number;
  timeout_ms: number;
}

export interface HighlightedSuggestion {
  name: string;
  display: string;
  overlap: boolean;
}

export interface HighlightResponse {
  query: string;
  suggestions: HighlightedSuggestion[];
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = "ApiError";
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (typeof body.detail === "string") detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(detail, response.status);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  suggest(q: string, cutoff?: number, engines?: string[]): Promise<SuggestResponse> {
    const params = new URLSearchParams({ q });
    if (cutoff !== undefined) params.set("cutoff", String(cutoff));
    if (engines !== undefined) params.set("engines", engines.join(","));
    return fetch(`${this.baseUrl}/api/suggest?${params}`).then((r) =>
      asJson<SuggestResponse>(r),
    );
  }

  highlight(q: string, hostSuggestions: string[]): Promise<HighlightResponse> {
    return fetch(`${this.baseUrl}/api/highlight`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ q, host_suggestions: hostSuggestions }),
    }).then((r) => asJson<HighlightResponse>(r));
  }

  engines(): Promise<{ engines: EngineInfo[] }> {
    return fetch(`${this.baseUrl}/api/engines`).then((r) =>
      asJson<{ engines: EngineInfo[] }>(r),
    );
  }

  toggleEngine(name: string): Promise<{ engine: string; enabled: boolean }> {
    return fetch(`${this.baseUrl}/api/engines/${encodeURIComponent(name)}/toggle`, {
      method: "POST",
    }).then((r) => asJson<{ engine: string; enabled: boolean }>(r));
  }
}
