// Typed client for the /v1 API. At most one search-like request is in
// flight at a time: starting a new one aborts the previous.

import type {
  DocumentList,
  DocumentSummary,
  ObjectSearchRequestBody,
  ObjectSearchResponse,
  SearchRequestBody,
  SearchResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private inflight: AbortController | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, body: unknown, cancellable: boolean): Promise<T> {
    let signal: AbortSignal | undefined;
    if (cancellable) {
      this.inflight?.abort();
      this.inflight = new AbortController();
      signal = this.inflight.signal;
    }
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const payload = (await resp.json()) as { detail?: string };
        if (payload.detail) detail = payload.detail;
      } catch {
        // non-JSON error body, keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  search(body: SearchRequestBody): Promise<SearchResponse> {
    return this.post<SearchResponse>("/v1/search", body, true);
  }

  objectSearch(body: ObjectSearchRequestBody): Promise<ObjectSearchResponse> {
    return this.post<ObjectSearchResponse>("/v1/object-search", body, true);
  }

  async listDocuments(limit = 24, offset = 0): Promise<DocumentList> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/v1/documents?limit=${limit}&offset=${offset}`,
    );
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText);
    return (await resp.json()) as DocumentList;
  }

  async getDocument(signature: string): Promise<DocumentSummary> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/documents/${signature}`);
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText);
    return (await resp.json()) as DocumentSummary;
  }
}

export function isAbortError(err: unknown): boolean {
  return err instanceof DOMException && err.name === "AbortError";
}
