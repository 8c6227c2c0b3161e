/** Thin typed client for the session service HTTP API.
 *
 * Every game-state mutation goes through here; the UI never invents state.
 * `fetch` is injectable so tests can drive the client without a server.
 */

import type {
  FinalizeResponse,
  MoveResponse,
  SessionConfigJson,
  SessionView,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiRequestError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

async function parseError(response: Response): Promise<ApiRequestError> {
  let code = `HTTP_${response.status}`;
  let message = response.statusText;
  try {
    const body = (await response.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiRequestError(code, message, response.status);
}

export class SessionApi {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(base = "", fetchImpl: FetchLike = (input, init) => fetch(input, init)) {
    this.base = base.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  createSession(config: SessionConfigJson): Promise<{ id: string; view: SessionView }> {
    return this.request("/sessions", { method: "POST", body: JSON.stringify(config) });
  }

  getView(sessionId: string): Promise<SessionView> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}`);
  }

  submitMove(sessionId: string, round: number, action: "C" | "D"): Promise<MoveResponse> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/moves`, {
      method: "POST",
      body: JSON.stringify({ round, action }),
    });
  }

  finalize(sessionId: string): Promise<FinalizeResponse> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/finalize`, {
      method: "POST",
    });
  }

  eventsUrl(sessionId: string): string {
    return `${this.base}/sessions/${encodeURIComponent(sessionId)}/events`;
  }
}
