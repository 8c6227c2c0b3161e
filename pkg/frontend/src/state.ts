/** Client session state: a thin, server-authoritative view holder.
 *
 * Every rendered fact originates from a server response; this module only
 * tracks which view is current, whether a move is in flight, and the
 * finalized summary. Optimistic updates are deliberately impossible.
 */

import { ApiRequestError, SessionApi } from "./api.js";
import type { FinalizeResponse, SessionView } from "./types.js";

export interface ClientState {
  sessionId: string | null;
  view: SessionView | null;
  inFlight: boolean;
  error: string | null;
  summary: FinalizeResponse | null;
}

export function initialState(): ClientState {
  return { sessionId: null, view: null, inFlight: false, error: null, summary: null };
}

export type Listener = (state: ClientState) => void;

export class SessionController {
  readonly api: SessionApi;
  state: ClientState;
  private listeners: Listener[] = [];

  constructor(api: SessionApi, state: ClientState = initialState()) {
    this.api = api;
    this.state = state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private commit(patch: Partial<ClientState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  /** Adopt a server view; stale snapshots (fewer resolved rounds) are ignored. */
  applyView(view: SessionView): void {
    const current = this.state.view;
    if (current && current.id === view.id && view.rounds_played < current.rounds_played) {
      return;
    }
    this.commit({ sessionId: view.id, view, error: null });
  }

  async start(config: Parameters<SessionApi["createSession"]>[0]): Promise<void> {
    this.commit({ inFlight: true, error: null, summary: null, view: null, sessionId: null });
    try {
      const created = await this.api.createSession(config);
      this.commit({ inFlight: false, sessionId: created.id, view: created.view });
    } catch (err) {
      this.commit({ inFlight: false, error: describe(err) });
      throw err;
    }
  }

  /** Resume an existing session (page reload path). */
  async resume(sessionId: string): Promise<void> {
    const view = await this.api.getView(sessionId);
    this.commit({ sessionId, view, summary: null, error: null });
  }

  /**
   * Submit the pending round's move. The server resolves duplicates
   * idempotently, so one network retry is safe; a WrongRound reply means
   * this client is stale and triggers a resync instead of an error.
   */
  async playRound(action: "C" | "D"): Promise<void> {
    const { view, sessionId, inFlight } = this.state;
    if (!view || !sessionId || inFlight) return;
    if (view.state !== "awaiting_human" || view.next_round === null) return;
    const round = view.next_round;

    this.commit({ inFlight: true, error: null });
    try {
      const response = await this.submitWithRetry(sessionId, round, action);
      this.commit({ inFlight: false, view: response.view });
    } catch (err) {
      if (err instanceof ApiRequestError && err.code === "WrongRound") {
        const fresh = await this.api.getView(sessionId);
        this.commit({ inFlight: false, view: fresh });
        return;
      }
      this.commit({ inFlight: false, error: describe(err) });
    }
  }

  private async submitWithRetry(sessionId: string, round: number, action: "C" | "D") {
    try {
      return await this.api.submitMove(sessionId, round, action);
    } catch (err) {
      if (err instanceof ApiRequestError) throw err; // server spoke; do not retry
      return await this.api.submitMove(sessionId, round, action); // idempotent resubmit
    }
  }

  async finish(): Promise<void> {
    const { sessionId } = this.state;
    if (!sessionId) return;
    try {
      const summary = await this.api.finalize(sessionId);
      this.commit({ summary });
    } catch (err) {
      this.commit({ error: describe(err) });
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiRequestError) return `${err.code}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}
