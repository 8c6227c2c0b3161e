/** Play-configuration form model: turns picker values into a SessionConfig.
 *
 * Client-side validation mirrors the server's rules so obvious mistakes
 * never leave the browser, but the server stays authoritative.
 */

import type { SessionConfigJson, StrategySpecJson } from "./types.js";

export type OpponentMode = "named" | "switch" | "external";

export interface FormValues {
  mode: OpponentMode;
  strategyName: string;
  preName: string;
  postName: string;
  switchRound: string;
  endpointKind: "chat_http" | "subprocess";
  endpointAddress: string;
  modelName: string;
  horizonKind: "fixed" | "indefinite";
  rounds: string;
  stopProbability: string;
  participantLabel: string;
  revealOpponent: boolean;
}

export const DEFAULT_FORM: FormValues = {
  mode: "named",
  strategyName: "tit_for_tat",
  preName: "always_cooperate",
  postName: "always_defect",
  switchRound: "26",
  endpointKind: "chat_http",
  endpointAddress: "",
  modelName: "",
  horizonKind: "fixed",
  rounds: "50",
  stopProbability: "0.05",
  participantLabel: "",
  revealOpponent: false,
};

/** Core catalog names offered in the pickers. The server accepts more. */
export const KNOWN_STRATEGIES = [
  "always_cooperate",
  "always_defect",
  "grim",
  "tit_for_tat",
  "two_step_copy",
  "generous_tit_for_tat",
  "win_stay_lose_shift",
  "suspicious_tit_for_tat",
  "random",
];

export interface FormResult {
  config?: SessionConfigJson;
  errors: string[];
}

function namedSpec(name: string, errors: string[], label: string): StrategySpecJson {
  if (!name.trim()) {
    errors.push(`${label}: pick a strategy`);
  }
  return { name: name.trim() };
}

export function buildSessionConfig(values: FormValues): FormResult {
  const errors: string[] = [];
  let opponent: StrategySpecJson;

  if (values.mode === "named") {
    opponent = namedSpec(values.strategyName, errors, "opponent");
  } else if (values.mode === "switch") {
    const pre = namedSpec(values.preName, errors, "pre-switch strategy");
    const post = namedSpec(values.postName, errors, "post-switch strategy");
    const k = Number(values.switchRound);
    if (!Number.isInteger(k) || k < 2) {
      errors.push("switch round must be an integer of at least 2");
    }
    opponent = { name: "switch", params: { a: pre, b: post, switch_round: k } };
  } else {
    if (!values.endpointAddress.trim()) {
      errors.push("agent endpoint address is required");
    }
    opponent = {
      name: "external_agent",
      params: {
        endpoint: {
          kind: values.endpointKind,
          address: values.endpointAddress.trim(),
          ...(values.endpointKind === "chat_http" && values.modelName.trim()
            ? { model_name: values.modelName.trim() }
            : {}),
        },
      },
    };
  }

  const config: SessionConfigJson = { opponent };

  if (values.horizonKind === "fixed") {
    const rounds = Number(values.rounds);
    if (!Number.isInteger(rounds) || rounds < 1) {
      errors.push("rounds must be a positive integer");
    }
    config.horizon = { kind: "fixed", rounds, known_to_players: true };
  } else {
    const p = Number(values.stopProbability);
    if (!(p > 0 && p < 1)) {
      errors.push("stop probability must lie strictly between 0 and 1");
    }
    config.horizon = { kind: "indefinite", stop_probability: p };
  }

  if (values.participantLabel.trim()) {
    config.participant_label = values.participantLabel.trim();
  }
  config.reveal_opponent = values.revealOpponent;

  return errors.length ? { errors } : { config, errors };
}
