/** Entry point: wires the form, controller, stream, and renderer together.
 *
 * The session id lives in the location hash, so a full page reload
 * reconstructs the identical view from GET /sessions/{id}.
 */

import { SessionApi } from "./api.js";
import { DEFAULT_FORM, KNOWN_STRATEGIES, buildSessionConfig, type FormValues } from "./form.js";
import { renderGame, renderInstructions, renderSummary } from "./render.js";
import { SessionController } from "./state.js";
import { subscribeViews } from "./sse.js";

const api = new SessionApi("");
const controller = new SessionController(api);

let unsubscribe: (() => void) | null = null;

function mount(): HTMLElement {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  return root;
}

function readForm(form: HTMLFormElement): FormValues {
  const data = new FormData(form);
  const text = (key: string, fallback: string) => {
    const value = data.get(key);
    return typeof value === "string" && value !== "" ? value : fallback;
  };
  return {
    mode: text("mode", DEFAULT_FORM.mode) as FormValues["mode"],
    strategyName: text("strategyName", DEFAULT_FORM.strategyName),
    preName: text("preName", DEFAULT_FORM.preName),
    postName: text("postName", DEFAULT_FORM.postName),
    switchRound: text("switchRound", DEFAULT_FORM.switchRound),
    endpointKind: text("endpointKind", DEFAULT_FORM.endpointKind) as FormValues["endpointKind"],
    endpointAddress: text("endpointAddress", ""),
    modelName: text("modelName", ""),
    horizonKind: text("horizonKind", DEFAULT_FORM.horizonKind) as FormValues["horizonKind"],
    rounds: text("rounds", DEFAULT_FORM.rounds),
    stopProbability: text("stopProbability", DEFAULT_FORM.stopProbability),
    participantLabel: text("participantLabel", ""),
    revealOpponent: data.get("revealOpponent") === "on",
  };
}

function renderConfigForm(onStart: (values: FormValues) => void): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "config";
  wrap.appendChild(renderInstructions());

  const form = document.createElement("form");
  form.innerHTML = `
    <fieldset>
      <legend>Opponent</legend>
      <label><input type="radio" name="mode" value="named" checked> Named strategy</label>
      <select name="strategyName">
        ${KNOWN_STRATEGIES.map((s) => `<option value="${s}">${s}</option>`).join("")}
      </select>
      <label><input type="radio" name="mode" value="switch"> Mid-game switch</label>
      <span class="switch-fields">
        <select name="preName">
          ${KNOWN_STRATEGIES.map((s) => `<option value="${s}">${s}</option>`).join("")}
        </select>
        →
        <select name="postName">
          ${KNOWN_STRATEGIES.map(
            (s) => `<option value="${s}" ${s === "always_defect" ? "selected" : ""}>${s}</option>`,
          ).join("")}
        </select>
        at round <input type="number" name="switchRound" value="26" min="2" size="4">
      </span>
      <label><input type="radio" name="mode" value="external"> External agent</label>
      <span class="agent-fields">
        <select name="endpointKind">
          <option value="chat_http">chat endpoint</option>
          <option value="subprocess">local command</option>
        </select>
        <input type="text" name="endpointAddress" placeholder="https://... or command">
        <input type="text" name="modelName" placeholder="model name (chat only)">
      </span>
    </fieldset>
    <fieldset>
      <legend>Game length</legend>
      <label><input type="radio" name="horizonKind" value="fixed" checked>
        Fixed <input type="number" name="rounds" value="50" min="1" size="4"> rounds</label>
      <label><input type="radio" name="horizonKind" value="indefinite">
        Random end, per-round stop
        <input type="text" name="stopProbability" value="0.05" size="5"></label>
    </fieldset>
    <fieldset>
      <legend>Participant</legend>
      <input type="text" name="participantLabel" placeholder="participant label (optional)">
      <label><input type="checkbox" name="revealOpponent"> reveal opponent name</label>
    </fieldset>
    <button type="submit" class="start">Start session</button>
    <p class="form-errors"></p>
  `;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    onStart(readForm(form));
  });
  wrap.appendChild(form);
  return wrap;
}

function draw(): void {
  const root = mount();
  root.replaceChildren();
  const { view, summary } = controller.state;

  if (!view) {
    root.appendChild(
      renderConfigForm(async (values) => {
        const { config, errors } = buildSessionConfig(values);
        const banner = root.querySelector(".form-errors");
        if (!config) {
          if (banner) banner.textContent = errors.join("; ");
          return;
        }
        try {
          await controller.start(config);
        } catch {
          return; // controller stored the error; redraw shows it
        }
        const id = controller.state.sessionId;
        if (id) {
          window.location.hash = id;
          watch(id);
        }
      }),
    );
    if (controller.state.error) {
      const banner = document.createElement("p");
      banner.className = "error-banner";
      banner.textContent = `${controller.state.error} (retry when the server is back)`;
      root.appendChild(banner);
    }
    return;
  }

  if (summary) {
    root.appendChild(renderSummary(view, summary));
    return;
  }

  root.appendChild(
    renderGame(controller.state, {
      onMove: (action) => void controller.playRound(action),
      onFinish: () => void controller.finish(),
    }),
  );
}

function watch(sessionId: string): void {
  unsubscribe?.();
  unsubscribe = subscribeViews(api, sessionId, (view) => controller.applyView(view));
}

async function boot(): Promise<void> {
  controller.subscribe(() => draw());
  const fromHash = window.location.hash.replace(/^#/, "");
  if (fromHash) {
    try {
      await controller.resume(fromHash);
      watch(fromHash);
    } catch {
      window.location.hash = "";
    }
  }
  draw();
}

void boot();
