"""Adapters that let external decision-makers play as catalog strategies.

Two transports are supported:

* ``chat_http`` — an OpenAI-compatible chat-completions endpoint. The match
  state is rendered into messages from a prompt template, the reply text is
  parsed for an action token, and unparseable replies are retried with a
  clarification message.
* ``subprocess`` — any local program speaking a newline-delimited JSON
  protocol: the engine writes one ``move_request`` line per round (full
  history each time, so the agent can be stateless) and reads back one
  ``move`` line.

Either way the adapter is just another strategy: it returns cooperation
probability 1.0 or 0.0, the engine samples (consuming no randomness), and
the resulting transcripts are indistinguishable from native ones. Credentials
are env-var names resolved at call time and never reach transcripts or logs.
"""

from __future__ import annotations

import json
import os
import queue
import re
import shlex
import string
import subprocess
import threading
import time
from dataclasses import dataclass, field

import requests

from .errors import AgentFailure, ConfigError, TemplateError, UnparseableResponse
from .game import Action, FixedHorizon, Horizon, PayoffMatrix, disclosed_rounds
from .strategies import History, Strategy

CLARIFICATION = "Please answer with exactly one word: cooperate or defect."

DEFAULT_IN_FLIGHT = 4

_ACTION_WORDS = {"cooperate": Action.C, "c": Action.C, "defect": Action.D, "d": Action.D}


@dataclass(frozen=True)
class AgentEndpointConfig:
    """Where and how to reach an external agent.

    ``credentials`` names an environment variable; the value is read only at
    request time. ``address`` is a URL for chat_http and a command line for
    subprocess agents.
    """

    kind: str
    address: str
    model_name: str = ""
    credentials: str = ""
    timeout: float = 30.0
    max_retries: int = 2
    temperature: float = 1.0
    template: str = "classic"
    history_rendering: str = "message_per_round"
    in_flight: int = DEFAULT_IN_FLIGHT

    def __post_init__(self):
        if self.kind not in ("chat_http", "subprocess"):
            raise ConfigError(f"unknown agent kind {self.kind!r}")
        if self.timeout <= 0:
            raise ConfigError("agent timeout must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "address": self.address,
            "model_name": self.model_name,
            "credentials": self.credentials,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "temperature": self.temperature,
            "template": self.template,
            "history_rendering": self.history_rendering,
            "in_flight": self.in_flight,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AgentEndpointConfig":
        known = {
            "kind",
            "address",
            "model_name",
            "credentials",
            "timeout",
            "max_retries",
            "temperature",
            "template",
            "history_rendering",
            "in_flight",
        }
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown agent endpoint keys: {sorted(unknown)}")
        if "kind" not in obj or "address" not in obj:
            raise ConfigError("agent endpoint requires 'kind' and 'address'")
        return cls(**obj)


@dataclass(frozen=True)
class PromptTemplate:
    """System text with payoff placeholders plus a history rendering mode.

    Placeholders: {H} {R} {P} {L} {horizon_note}. Rendering must be total;
    an unknown or leftover placeholder raises TemplateError.
    """

    name: str
    system_text: str
    history_rendering: str = "message_per_round"


_TEMPLATE_FIELDS = {"H", "R", "P", "L", "horizon_note"}

_CLASSIC_SYSTEM = (
    "You are playing an iterated prisoner's dilemma game against an opponent. "
    "In each round, you will be provided the history of all previous rounds, "
    "and your task is to pick either cooperate or defect. "
    "Here are the rewards for each round:\n"
    "1. If both players cooperate, each of you receives {R} points.\n"
    "2. If you defect while your opponent cooperates, you receive {H} points "
    "and your opponent receives {L} points.\n"
    "3. If you cooperate while your opponent defects, you receive {L} points "
    "and your opponent receives {H} points.\n"
    "4. If both players defect, each of you receives {P} points.\n"
    "{horizon_note}"
    "Your goal is to maximize your own total score."
)

_MINIMAL_SYSTEM = (
    "Repeated two-player game. Payoffs per round: both cooperate -> {R} each; "
    "you defect, they cooperate -> you {H}, they {L}; you cooperate, they defect "
    "-> you {L}, they {H}; both defect -> {P} each. {horizon_note}"
    "Each round, reply with cooperate or defect."
)

TEMPLATES: dict[str, PromptTemplate] = {
    "classic": PromptTemplate("classic", _CLASSIC_SYSTEM, "message_per_round"),
    "classic-summary": PromptTemplate("classic-summary", _CLASSIC_SYSTEM, "single_summary_block"),
    "minimal": PromptTemplate("minimal", _MINIMAL_SYSTEM, "message_per_round"),
}


def get_template(name: str, history_rendering: str | None = None) -> PromptTemplate:
    try:
        template = TEMPLATES[name]
    except KeyError:
        raise TemplateError(f"no prompt template named {name!r}") from None
    if history_rendering and history_rendering != template.history_rendering:
        template = PromptTemplate(template.name, template.system_text, history_rendering)
    return template


def _substitute(text: str, values: dict) -> str:
    fields = [f for _, f, _, _ in string.Formatter().parse(text) if f is not None]
    for f in fields:
        if f not in _TEMPLATE_FIELDS:
            raise TemplateError(f"unknown placeholder {{{f}}} in template")
    rendered = text.format(**{f: values[f] for f in _TEMPLATE_FIELDS})
    if re.search(r"\{[A-Za-z_]+\}", rendered):
        raise TemplateError("template left unresolved placeholders after substitution")
    return rendered


def render_prompt(
    template: PromptTemplate,
    matrix: PayoffMatrix,
    horizon: Horizon | None,
    history: History,
) -> list[dict]:
    """Build the chat message sequence for the next move.

    The horizon is disclosed only when it is fixed and known to the players;
    indefinite games carry no length hint at all.
    """
    rounds = disclosed_rounds(horizon) if horizon is not None else None
    note = f"The game lasts exactly {rounds} rounds.\n" if rounds is not None else ""
    system = _substitute(
        template.system_text,
        {"H": matrix.H, "R": matrix.R, "P": matrix.P, "L": matrix.L, "horizon_note": note},
    )
    messages = [{"role": "system", "content": system}]
    next_round = len(history) + 1
    words = {Action.C: "cooperate", Action.D: "defect"}

    if template.history_rendering == "message_per_round":
        from .game import payoff

        for i, (own, opp) in enumerate(history, start=1):
            own_pay, opp_pay = payoff(matrix, own, opp)
            messages.append(
                {
                    "role": "user",
                    "content": (
                        f"Round {i}: you played {words[own]}, your opponent played "
                        f"{words[opp]}. You scored {own_pay}, your opponent scored {opp_pay}."
                    ),
                }
            )
        messages.append(
            {
                "role": "user",
                "content": f"Round {next_round}: pick your action. Reply with cooperate or defect.",
            }
        )
    elif template.history_rendering == "single_summary_block":
        if history:
            lines = [
                f"round {i}: you {words[own]}, opponent {words[opp]}"
                for i, (own, opp) in enumerate(history, start=1)
            ]
            block = "History so far:\n" + "\n".join(lines)
        else:
            block = "No rounds have been played yet."
        messages.append(
            {
                "role": "user",
                "content": (
                    f"{block}\nRound {next_round}: pick your action. "
                    "Reply with cooperate or defect."
                ),
            }
        )
    else:
        raise TemplateError(f"unknown history rendering {template.history_rendering!r}")
    return messages


def _scan_structured(raw: str) -> Action | None:
    """Look for JSON objects carrying an "action" field; last valid one wins."""
    candidates = []
    stripped = raw.strip()
    if stripped.startswith("{"):
        candidates.append(stripped)
    candidates.extend(re.findall(r"\{[^{}]*\}", raw))
    found = None
    for text in candidates:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict) and "action" in obj:
            value = str(obj["action"]).strip().lower()
            if value in _ACTION_WORDS:
                found = _ACTION_WORDS[value]
    return found


def _is_contraction_tail(raw: str, start: int) -> bool:
    """True when the token at ``start`` hangs off an apostrophe in a word,
    as the d in "I'd"."""
    return (
        start >= 2
        and raw[start - 1] in "'’"
        and raw[start - 2].isalpha()
    )


def parse_action(raw: str) -> Action:
    """Extract the chosen action from free-form agent text.

    A JSON object with an "action" field takes precedence. Otherwise the
    LAST standalone token among cooperate/defect/C/D (case-insensitive)
    decides; a single letter that completes a contraction ("I'd") does not
    count, a quoted one ('C') does.
    """
    structured = _scan_structured(raw)
    if structured is not None:
        return structured
    found = None
    for match in re.finditer(r"[A-Za-z]+", raw):
        token = match.group(0).lower()
        if token not in _ACTION_WORDS:
            continue
        if len(token) == 1 and _is_contraction_tail(raw, match.start()):
            continue
        found = _ACTION_WORDS[token]
    if found is None:
        raise UnparseableResponse(raw)
    return found


@dataclass
class MoveResult:
    action: Action
    raw: str
    retries: int
    latency: float


@dataclass
class TranscriptEntry:
    round_index: int
    request: object
    raw_response: str
    action: str
    latency: float
    retries: int

    def to_json(self) -> dict:
        return {
            "round_index": self.round_index,
            "request": self.request,
            "raw_response": self.raw_response,
            "action": self.action,
            "latency": self.latency,
            "retries": self.retries,
        }


@dataclass
class AgentTranscript:
    """Per-round audit trail of everything exchanged with an agent."""

    endpoint_kind: str
    entries: list[TranscriptEntry] = field(default_factory=list)

    def to_json_lines(self) -> list[str]:
        return [json.dumps(e.to_json(), sort_keys=True) for e in self.entries]


_inflight_locks: dict[tuple[str, str], threading.BoundedSemaphore] = {}
_inflight_guard = threading.Lock()


def _inflight(cfg: AgentEndpointConfig) -> threading.BoundedSemaphore:
    key = (cfg.address, cfg.model_name)
    with _inflight_guard:
        if key not in _inflight_locks:
            _inflight_locks[key] = threading.BoundedSemaphore(max(1, cfg.in_flight))
        return _inflight_locks[key]


def _post_chat(cfg: AgentEndpointConfig, messages: list[dict]) -> str:
    headers = {"Content-Type": "application/json"}
    if cfg.credentials:
        secret = os.environ.get(cfg.credentials)
        if secret:
            headers["Authorization"] = f"Bearer {secret}"
    body = {"model": cfg.model_name, "messages": messages, "temperature": cfg.temperature}
    try:
        with _inflight(cfg):
            response = requests.post(cfg.address, json=body, headers=headers, timeout=cfg.timeout)
    except requests.RequestException as exc:
        raise AgentFailure(f"transport error talking to {cfg.address}: {exc}") from exc
    if response.status_code != 200:
        raise AgentFailure(f"endpoint returned HTTP {response.status_code}")
    try:
        payload = response.json()
        return payload["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise AgentFailure(f"malformed chat response: {exc}") from exc


def request_move(cfg: AgentEndpointConfig, messages: list[dict]) -> MoveResult:
    """Ask the endpoint for one move, retrying unparseable replies.

    Each unparseable reply is echoed back with a clarification request, up
    to max_retries times. Transport errors and timeouts fail immediately:
    total wall time stays bounded by timeout * (max_retries + 1).
    """
    msgs = list(messages)
    retries = 0
    started = time.monotonic()
    while True:
        raw = _post_chat(cfg, msgs)
        try:
            action = parse_action(raw)
            return MoveResult(action, raw, retries, time.monotonic() - started)
        except UnparseableResponse:
            if retries >= cfg.max_retries:
                raise AgentFailure(
                    f"no parseable action after {retries} retries", raw=raw
                ) from None
            retries += 1
            msgs = msgs + [
                {"role": "assistant", "content": raw},
                {"role": "user", "content": CLARIFICATION},
            ]


class ChatHttpAgent(Strategy):
    """Plays via an OpenAI-compatible chat-completions endpoint."""

    name = "external_agent"

    def __init__(self, cfg: AgentEndpointConfig):
        super().__init__()
        self.cfg = cfg
        self.template = get_template(cfg.template, cfg.history_rendering)
        self.transcript = AgentTranscript(endpoint_kind="chat_http")
        self._matrix: PayoffMatrix | None = None
        self._horizon: Horizon | None = None

    def begin_match(self, matrix: PayoffMatrix, total_rounds: int | None) -> None:
        self._matrix = matrix
        self._horizon = FixedHorizon(total_rounds, True) if total_rounds is not None else None
        self.transcript = AgentTranscript(endpoint_kind="chat_http")

    def match_metadata(self) -> dict:
        return {"prompt_template": self.template.name, "agent_model": self.cfg.model_name}

    def cooperation_probability(self, history: History) -> float:
        messages = render_prompt(self.template, self._matrix, self._horizon, history)
        result = request_move(self.cfg, messages)
        self.transcript.entries.append(
            TranscriptEntry(
                round_index=len(history) + 1,
                request=messages,
                raw_response=result.raw,
                action=result.action.value,
                latency=result.latency,
                retries=result.retries,
            )
        )
        return 1.0 if result.action is Action.C else 0.0


class _LineReader:
    """Drains a pipe on a daemon thread so reads can honor a deadline."""

    def __init__(self, stream):
        self._queue: queue.Queue[str | None] = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(stream,), daemon=True)
        self._thread.start()

    def _pump(self, stream):
        try:
            for line in stream:
                self._queue.put(line)
        except ValueError:
            pass
        self._queue.put(None)

    def readline(self, timeout: float) -> str | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None


class SubprocessAgent(Strategy):
    """Plays via a child process speaking the NDJSON move protocol.

    Every request carries the full history, so the child may be stateless;
    a child that answers garbage is killed and restarted, and the request is
    re-sent, up to max_retries times before the match is forfeited.
    """

    name = "external_agent"

    def __init__(self, cfg: AgentEndpointConfig):
        super().__init__()
        self.cfg = cfg
        self.transcript = AgentTranscript(endpoint_kind="subprocess")
        self._matrix: PayoffMatrix | None = None
        self._disclosed: int | None = None
        self._proc: subprocess.Popen | None = None
        self._reader: _LineReader | None = None

    def begin_match(self, matrix: PayoffMatrix, total_rounds: int | None) -> None:
        self._matrix = matrix
        self._disclosed = total_rounds
        self.transcript = AgentTranscript(endpoint_kind="subprocess")
        self._start()

    def end_match(self) -> None:
        self._stop()

    def _start(self) -> None:
        self._stop()
        try:
            self._proc = subprocess.Popen(
                shlex.split(self.cfg.address),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise AgentFailure(f"could not start agent process: {exc}") from exc
        self._reader = _LineReader(self._proc.stdout)

    def _stop(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None
            self._reader = None

    def _exchange(self, request_line: str) -> str:
        if self._proc is None or self._proc.poll() is not None:
            self._start()
        try:
            self._proc.stdin.write(request_line + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise _ProtocolViolation(f"write failed: {exc}") from exc
        line = self._reader.readline(self.cfg.timeout)
        if line is None:
            raise _ProtocolViolation("no reply within timeout")
        return line

    def cooperation_probability(self, history: History) -> float:
        request = {
            "type": "move_request",
            "round": len(history) + 1,
            "history": [[own.value, opp.value] for own, opp in history],
            "payoffs": self._matrix.to_json(),
            "horizon": (
                {"kind": "fixed", "rounds": self._disclosed}
                if self._disclosed is not None
                else None
            ),
        }
        request_line = json.dumps(request, sort_keys=True)
        started = time.monotonic()
        retries = 0
        while True:
            try:
                raw = self._exchange(request_line)
                action = self._parse_move(raw)
                self.transcript.entries.append(
                    TranscriptEntry(
                        round_index=request["round"],
                        request=request,
                        raw_response=raw.strip(),
                        action=action.value,
                        latency=time.monotonic() - started,
                        retries=retries,
                    )
                )
                return 1.0 if action is Action.C else 0.0
            except _ProtocolViolation as violation:
                if retries >= self.cfg.max_retries:
                    raise AgentFailure(f"subprocess agent failed: {violation}") from violation
                retries += 1
                self._start()

    @staticmethod
    def _parse_move(raw: str) -> Action:
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise _ProtocolViolation(f"reply is not JSON: {raw!r}") from exc
        if not isinstance(obj, dict) or obj.get("type") != "move":
            raise _ProtocolViolation(f"reply is not a move message: {raw!r}")
        action = obj.get("action")
        if action not in ("C", "D"):
            raise _ProtocolViolation(f"reply carries no valid action: {raw!r}")
        return Action.parse(action)


class _ProtocolViolation(Exception):
    pass


def subprocess_step(
    agent: SubprocessAgent, history: History, matrix: PayoffMatrix, horizon: Horizon | None
) -> Action:
    """One protocol round against an already-configured subprocess agent."""
    agent._matrix = matrix
    agent._disclosed = disclosed_rounds(horizon) if horizon is not None else None
    p = agent.cooperation_probability(history)
    return Action.C if p >= 0.5 else Action.D


def agent_strategy_from_params(params: dict) -> Strategy:
    """Catalog factory for external_agent specs."""
    endpoint = params.get("endpoint")
    if not isinstance(endpoint, dict):
        raise ConfigError("external_agent requires an 'endpoint' object parameter")
    cfg = AgentEndpointConfig.from_json(endpoint)
    if cfg.kind == "chat_http":
        return ChatHttpAgent(cfg)
    return SubprocessAgent(cfg)
