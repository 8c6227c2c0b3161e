/** Pure DOM builders. Everything rendered comes from a server view or a
 * finalize response; there is nothing else to show.
 */

import type { ClientState } from "./state.js";
import type { FinalizeResponse, HistoryEntry, SessionView } from "./types.js";

// Neutral wording; the study's real instruction text is configured by the
// experimenter. PLACEHOLDER by design.
export const INSTRUCTIONS_PLACEHOLDER =
  "You will play a repeated two-choice game against an unseen opponent. " +
  "Each round, press Cooperate or Defect. Your goal is to score as many " +
  "points as you can.";

const ACTION_WORDS: Record<string, string> = { C: "Cooperate", D: "Defect" };

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderHistory(history: HistoryEntry[]): HTMLElement {
  const table = el("table", "history");
  const head = el("tr");
  for (const title of ["Round", "You", "Opponent", "Your points", "Their points"]) {
    head.appendChild(el("th", undefined, title));
  }
  table.appendChild(head);
  for (const entry of history) {
    const row = el("tr", "history-row");
    row.appendChild(el("td", undefined, String(entry.round_index)));
    row.appendChild(el("td", `act-${entry.you}`, ACTION_WORDS[entry.you] ?? entry.you));
    row.appendChild(
      el("td", `act-${entry.opponent}`, ACTION_WORDS[entry.opponent] ?? entry.opponent),
    );
    row.appendChild(el("td", undefined, `+${entry.your_payoff}`));
    row.appendChild(el("td", undefined, `+${entry.opponent_payoff}`));
    table.appendChild(row);
  }
  return table;
}

export function renderScoreboard(view: SessionView): HTMLElement {
  const board = el("div", "scoreboard");
  board.appendChild(el("span", "score you", `You: ${view.totals.you}`));
  board.appendChild(el("span", "score opp", `Opponent: ${view.totals.opponent}`));
  if (view.opponent_name !== null) {
    board.appendChild(el("span", "opponent-name", `Playing against: ${view.opponent_name}`));
  }
  return board;
}

export interface GameHandlers {
  onMove: (action: "C" | "D") => void;
  onFinish: () => void;
}

export function renderGame(state: ClientState, handlers: GameHandlers): HTMLElement {
  const view = state.view;
  const root = el("div", "game");
  if (!view) return root;

  root.appendChild(renderScoreboard(view));
  if (view.horizon_note) {
    root.appendChild(el("p", "horizon-note", view.horizon_note));
  }

  const awaiting = view.state === "awaiting_human";
  if (awaiting && view.next_round !== null) {
    root.appendChild(el("h2", "round-title", `Round ${view.next_round}`));
  } else {
    root.appendChild(
      el("h2", "round-title", view.state === "finished" ? "Game over" : "Session aborted"),
    );
  }

  const buttons = el("div", "move-buttons");
  for (const action of ["C", "D"] as const) {
    const button = el("button", `move move-${action}`, ACTION_WORDS[action]);
    button.disabled = !awaiting || state.inFlight;
    button.addEventListener("click", () => handlers.onMove(action));
    buttons.appendChild(button);
  }
  root.appendChild(buttons);

  if (!awaiting) {
    const finish = el("button", "finish", "Show summary");
    finish.addEventListener("click", () => handlers.onFinish());
    root.appendChild(finish);
  }

  root.appendChild(renderHistory(view.history));

  if (state.error) {
    root.appendChild(el("p", "error-banner", state.error));
  }
  return root;
}

export function renderSummary(view: SessionView, summary: FinalizeResponse): HTMLElement {
  const root = el("div", "summary");
  root.appendChild(el("h2", undefined, "Session summary"));

  const aborted = view.state === "aborted";
  if (aborted) {
    root.appendChild(el("p", "aborted-flag", "Partial result: this session was aborted."));
  }

  const totals = summary.metrics.totals;
  root.appendChild(el("p", "totals", `Final score: you ${totals.you}, opponent ${totals.opponent}`));

  if (summary.metrics.cooperation_rate !== undefined) {
    const pct = (summary.metrics.cooperation_rate * 100).toFixed(1);
    root.appendChild(el("p", "coop-rate", `Your cooperation rate: ${pct}%`));
  }

  const adaptation = summary.metrics.adaptation;
  if (adaptation) {
    const speed =
      adaptation.adaptation_speed === null
        ? "did not settle"
        : `${adaptation.adaptation_speed} rounds`;
    root.appendChild(
      el(
        "p",
        "adaptation",
        `Opponent switched at round ${adaptation.switch_round}; ` +
          `your adaptation speed: ${speed}; ` +
          `post-switch cooperation: ${(adaptation.post_rate * 100).toFixed(1)}%`,
      ),
    );
  }

  root.appendChild(renderHistory(view.history));
  return root;
}

export function renderInstructions(): HTMLElement {
  const intro = el("div", "instructions");
  intro.appendChild(el("p", undefined, INSTRUCTIONS_PLACEHOLDER));
  return intro;
}
