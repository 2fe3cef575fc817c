/** Thin typed client for the corpus API. */

import type {
  ContextResponse,
  ExportFormat,
  MetaResponse,
  SearchResponse,
  StatsRowsResponse,
} from "./types.js";

/** A 4xx response: user-correctable, rendered as an inline message. */
export class RequestError extends Error {
  constructor(
    message: string,
    public status: number,
    public detail: unknown,
  ) {
    super(message);
  }
}

/** A 5xx or network failure: transient, rendered as a retry banner. */
export class ServiceUnavailableError extends Error {}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(response: Response): Promise<Response> {
  if (response.ok) return response;
  if (response.status >= 500) {
    throw new ServiceUnavailableError(`service returned ${response.status}`);
  }
  let detail: unknown = null;
  try {
    detail = (await response.json()).detail;
  } catch {
    // non-JSON error body; keep the status alone
  }
  throw new RequestError(
    `request failed with ${response.status}`,
    response.status,
    detail,
  );
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async getJson<T>(path: string, signal?: AbortSignal): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, { signal });
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") throw err;
      throw new ServiceUnavailableError(String(err));
    }
    await raiseForStatus(response);
    return (await response.json()) as T;
  }

  search(params: URLSearchParams, signal?: AbortSignal): Promise<SearchResponse> {
    return this.getJson(`/api/search?${params}`, signal);
  }

  stats(params: URLSearchParams, signal?: AbortSignal): Promise<StatsRowsResponse> {
    return this.getJson(`/api/stats?${params}`, signal);
  }

  context(
    accession: string,
    item: string,
    index: number,
    signal?: AbortSignal,
  ): Promise<ContextResponse> {
    const params = new URLSearchParams({
      accession,
      item,
      index: String(index),
    });
    return this.getJson(`/api/context?${params}`, signal);
  }

  meta(signal?: AbortSignal): Promise<MetaResponse> {
    return this.getJson("/api/meta", signal);
  }

  async export(
    query: Record<string, unknown>,
    format: ExportFormat,
  ): Promise<Blob> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}/api/export`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ query, format }),
      });
    } catch (err) {
      throw new ServiceUnavailableError(String(err));
    }
    await raiseForStatus(response);
    return response.blob();
  }
}
