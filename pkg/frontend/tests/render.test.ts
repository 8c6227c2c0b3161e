// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { initialState, type ClientState } from "../src/state.js";
import { renderGame, renderSummary } from "../src/render.js";
import type { FinalizeResponse, SessionView } from "../src/types.js";

function view(overrides: Partial<SessionView> = {}): SessionView {
  return {
    id: "sid",
    state: "awaiting_human",
    next_round: 3,
    rounds_played: 2,
    history: [
      { round_index: 1, you: "C", opponent: "C", your_payoff: 3, opponent_payoff: 3 },
      { round_index: 2, you: "C", opponent: "D", your_payoff: 0, opponent_payoff: 5 },
    ],
    totals: { you: 3, opponent: 8 },
    payoffs: { H: 5, R: 3, P: 1, L: 0 },
    horizon_note: "This game lasts exactly 50 rounds.",
    opponent_name: null,
    participant_label: "anonymous",
    ...overrides,
  };
}

function stateWith(v: SessionView, extra: Partial<ClientState> = {}): ClientState {
  return { ...initialState(), sessionId: v.id, view: v, ...extra };
}

const HANDLERS = { onMove: () => {}, onFinish: () => {} };

describe("renderGame", () => {
  it("shows two move buttons for the pending round", () => {
    const root = renderGame(stateWith(view()), HANDLERS);
    const buttons = root.querySelectorAll<HTMLButtonElement>("button.move");
    expect(buttons).toHaveLength(2);
    expect(buttons[0]?.textContent).toBe("Cooperate");
    expect(buttons[1]?.textContent).toBe("Defect");
    expect(buttons[0]?.disabled).toBe(false);
    expect(root.querySelector(".round-title")?.textContent).toBe("Round 3");
  });

  it("renders exactly the resolved rounds and nothing about the pending one", () => {
    const root = renderGame(stateWith(view()), HANDLERS);
    const rows = root.querySelectorAll(".history-row");
    expect(rows).toHaveLength(2); // rounds 1 and 2 only; round 3 unresolved
    // opponent action cells exist only inside resolved history rows
    const opponentCells = root.querySelectorAll(".history-row td:nth-child(3)");
    expect(opponentCells).toHaveLength(2);
    expect(root.textContent).not.toContain("Round 3:"); // no round-3 facts
  });

  it("never shows the opponent identity unless the server revealed it", () => {
    const hidden = renderGame(stateWith(view()), HANDLERS);
    expect(hidden.innerHTML).not.toContain("tit_for_tat");
    expect(hidden.querySelector(".opponent-name")).toBeNull();

    const revealed = renderGame(
      stateWith(view({ opponent_name: "tit_for_tat" })),
      HANDLERS,
    );
    expect(revealed.querySelector(".opponent-name")?.textContent).toContain("tit_for_tat");
  });

  it("disables the buttons while a move is in flight", () => {
    const root = renderGame(stateWith(view(), { inFlight: true }), HANDLERS);
    const buttons = root.querySelectorAll<HTMLButtonElement>("button.move");
    expect(buttons[0]?.disabled).toBe(true);
    expect(buttons[1]?.disabled).toBe(true);
  });

  it("disables play and offers the summary once the game is over", () => {
    const root = renderGame(
      stateWith(view({ state: "finished", next_round: null })),
      HANDLERS,
    );
    const buttons = root.querySelectorAll<HTMLButtonElement>("button.move");
    expect(buttons[0]?.disabled).toBe(true);
    expect(root.querySelector("button.finish")).not.toBeNull();
    expect(root.querySelector(".round-title")?.textContent).toBe("Game over");
  });

  it("clicking a move calls the handler with the action", () => {
    const clicks: string[] = [];
    const root = renderGame(stateWith(view()), {
      onMove: (action) => clicks.push(action),
      onFinish: () => {},
    });
    root.querySelectorAll<HTMLButtonElement>("button.move").forEach((b) => b.click());
    expect(clicks).toEqual(["C", "D"]);
  });

  it("surfaces controller errors as a banner", () => {
    const root = renderGame(stateWith(view(), { error: "HTTP_503: down" }), HANDLERS);
    expect(root.querySelector(".error-banner")?.textContent).toContain("down");
  });
});

describe("renderSummary", () => {
  const summary: FinalizeResponse = {
    record: {},
    metrics: {
      totals: { you: 120, opponent: 97 },
      cooperation_rate: 0.82,
      adaptation: {
        switch_round: 26,
        window: 5,
        epsilon: 0.1,
        pre_rate: 1.0,
        post_rate: 0.4,
        post_payoff: 1.2,
        baseline_rate: 0.0,
        adaptation_speed: 4,
        recovery_curve: [],
        payoff_delta_curve: [],
        records_used: 1,
      },
    },
  };

  it("shows totals, cooperation rate, and the adaptation report", () => {
    const root = renderSummary(view({ state: "finished", next_round: null }), summary);
    expect(root.textContent).toContain("you 120, opponent 97");
    expect(root.textContent).toContain("82.0%");
    expect(root.textContent).toContain("switched at round 26");
    expect(root.textContent).toContain("4 rounds");
  });

  it("flags aborted sessions as partial", () => {
    const root = renderSummary(view({ state: "aborted", next_round: null }), summary);
    expect(root.querySelector(".aborted-flag")?.textContent).toMatch(/aborted/i);
  });

  it("omits the adaptation line for plain fixed-strategy sessions", () => {
    const plain: FinalizeResponse = {
      record: {},
      metrics: { totals: { you: 150, opponent: 150 }, cooperation_rate: 1.0 },
    };
    const root = renderSummary(view({ state: "finished", next_round: null }), plain);
    expect(root.querySelector(".adaptation")).toBeNull();
  });
});
