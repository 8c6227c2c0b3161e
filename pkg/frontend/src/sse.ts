/** Live view updates: server-sent events with a polling fallback.
 *
 * The game is turn-based with a single human, so a one-way stream is
 * plenty. When EventSource is unavailable or errors out, a 2s poll of
 * GET /sessions/{id} keeps the view fresh.
 */

import type { SessionApi } from "./api.js";
import type { SessionView } from "./types.js";

export interface EventSourceLike {
  addEventListener(type: string, handler: (event: { data: string }) => void): void;
  close(): void;
  onerror: ((event: unknown) => void) | null;
}

export interface SubscribeDeps {
  makeEventSource?: (url: string) => EventSourceLike;
  pollIntervalMs?: number;
  setIntervalImpl?: typeof setInterval;
  clearIntervalImpl?: typeof clearInterval;
}

export function subscribeViews(
  api: SessionApi,
  sessionId: string,
  onView: (view: SessionView) => void,
  deps: SubscribeDeps = {},
): () => void {
  const pollMs = deps.pollIntervalMs ?? 2000;
  const setI = deps.setIntervalImpl ?? setInterval;
  const clearI = deps.clearIntervalImpl ?? clearInterval;
  const makeSource =
    deps.makeEventSource ??
    (typeof EventSource !== "undefined"
      ? (url: string) => new EventSource(url) as unknown as EventSourceLike
      : undefined);

  let pollTimer: ReturnType<typeof setInterval> | null = null;
  let source: EventSourceLike | null = null;
  let closed = false;

  const startPolling = () => {
    if (closed || pollTimer !== null) return;
    pollTimer = setI(() => {
      api
        .getView(sessionId)
        .then((view) => {
          onView(view);
          if (view.state !== "awaiting_human" && pollTimer !== null) {
            clearI(pollTimer);
            pollTimer = null;
          }
        })
        .catch(() => {
          // transient; next tick retries
        });
    }, pollMs);
  };

  if (makeSource) {
    try {
      source = makeSource(api.eventsUrl(sessionId));
      source.addEventListener("view", (event) => {
        try {
          onView(JSON.parse(event.data) as SessionView);
        } catch {
          // malformed frame; polling will catch us up if it persists
        }
      });
      source.onerror = () => {
        source?.close();
        source = null;
        startPolling();
      };
    } catch {
      startPolling();
    }
  } else {
    startPolling();
  }

  return () => {
    closed = true;
    source?.close();
    if (pollTimer !== null) clearI(pollTimer);
  };
}
