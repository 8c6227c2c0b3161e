/** Wire types mirroring the session service JSON schemas. */

export type ActionLetter = "C" | "D";

export type SessionState = "awaiting_human" | "finished" | "aborted";

export interface StrategySpecJson {
  name: string;
  params?: Record<string, unknown>;
}

export interface PayoffMatrixJson {
  H: number;
  R: number;
  P: number;
  L: number;
}

export interface HorizonJson {
  kind: "fixed" | "indefinite";
  rounds?: number;
  known_to_players?: boolean;
  stop_probability?: number;
  max_rounds?: number;
}

export interface SessionConfigJson {
  opponent: StrategySpecJson;
  matrix?: PayoffMatrixJson;
  horizon?: HorizonJson;
  reveal_opponent?: boolean;
  participant_label?: string;
  seed?: number;
}

export interface HistoryEntry {
  round_index: number;
  you: ActionLetter;
  opponent: ActionLetter;
  your_payoff: number;
  opponent_payoff: number;
}

export interface SessionView {
  id: string;
  state: SessionState;
  next_round: number | null;
  rounds_played: number;
  history: HistoryEntry[];
  totals: { you: number; opponent: number };
  payoffs: PayoffMatrixJson;
  horizon_note: string | null;
  opponent_name: string | null;
  participant_label: string;
}

export interface MoveResponse {
  outcome: HistoryEntry;
  view: SessionView;
}

export interface AdaptationJson {
  switch_round: number;
  window: number;
  epsilon: number;
  pre_rate: number;
  post_rate: number;
  post_payoff: number;
  baseline_rate: number;
  adaptation_speed: number | null;
  recovery_curve: Array<[number, number | null]>;
  payoff_delta_curve: Array<[number, number | null]>;
  records_used: number;
}

export interface FinalizeResponse {
  record: Record<string, unknown>;
  metrics: {
    totals: { you: number; opponent: number };
    cooperation_rate?: number;
    adaptation?: AdaptationJson | null;
    adaptation_error?: string;
  };
}

export interface ApiError {
  code: string;
  message: string;
}
