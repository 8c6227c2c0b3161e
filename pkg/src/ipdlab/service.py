"""Live session service: a human plays the same protocols over HTTP.

One session is one match where player A is a person clicking buttons and
player B is any catalog strategy (fixed, switch composite, or external
agent). Simultaneity survives the turn-based wire protocol because the
opponent's move for the current round is drawn and stored before the human
moves, and nothing about it leaves the server until the round resolves.

Sessions persist as append-only event logs (one JSON line per event) keyed
by session id. Restarting the service replays each log: the opponent is
deterministic given the persisted seed, so the rebuilt session holds the
same pre-committed move it held before the crash.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .errors import (
    ConfigError,
    InsufficientRounds,
    IpdLabError,
    MissingSwitchMetadata,
    SessionFinished,
    SessionNotFound,
    SessionStillActive,
    WrongRound,
)
from .experiments import describe_spec
from .game import (
    Action,
    FixedHorizon,
    Horizon,
    MatchRecord,
    PayoffMatrix,
    RoundOutcome,
    disclosed_rounds,
    horizon_from_json,
    payoff,
    should_continue,
)
from .metrics import DEFAULT_EPSILON, DEFAULT_WINDOW, adaptation_report, extract_events
from .rng import GameRng
from .strategies import StrategySpec, make_strategy, sample_action

DEFAULT_IDLE_TIMEOUT = 30 * 60.0

HUMAN_ID = "human"

AWAITING = "awaiting_human"
FINISHED = "finished"
ABORTED = "aborted"


@dataclass(frozen=True)
class SessionConfig:
    """What a participant plays against. ``seed`` is drawn randomly when the
    client does not pin one; either way it is persisted for replay."""

    opponent: StrategySpec
    matrix: PayoffMatrix = PayoffMatrix(5, 3, 1, 0)
    horizon: Horizon = FixedHorizon(50)
    reveal_opponent: bool = False
    participant_label: str = "anonymous"

    def to_json(self) -> dict:
        return {
            "opponent": self.opponent.to_json(),
            "matrix": self.matrix.to_json(),
            "horizon": self.horizon.to_json(),
            "reveal_opponent": self.reveal_opponent,
            "participant_label": self.participant_label,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SessionConfig":
        known = {"opponent", "matrix", "horizon", "reveal_opponent", "participant_label"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown session config keys: {sorted(unknown)}")
        if "opponent" not in obj:
            raise ConfigError("session config requires 'opponent'")
        spec = StrategySpec.from_json(obj["opponent"])
        make_strategy(spec)  # validate eagerly
        return cls(
            opponent=spec,
            matrix=(
                PayoffMatrix.from_json(obj["matrix"])
                if "matrix" in obj
                else PayoffMatrix(5, 3, 1, 0)
            ),
            horizon=(
                horizon_from_json(obj["horizon"]) if "horizon" in obj else FixedHorizon(50)
            ),
            reveal_opponent=obj.get("reveal_opponent", False),
            participant_label=obj.get("participant_label", "anonymous"),
        )


class LiveSession:
    """Single-writer state machine for one human-vs-strategy match."""

    def __init__(self, session_id: str, config: SessionConfig, seed: int):
        self.id = session_id
        self.config = config
        self.seed = seed
        self.state = AWAITING
        self.abort_reason: str | None = None
        self.outcomes: list[RoundOutcome] = []
        self.total_human = 0
        self.total_opponent = 0
        self.version = 0
        self.created_at = time.time()
        self.updated_at = self.created_at
        self.lock = threading.Lock()

        rng = GameRng(seed)
        self._horizon_stream = rng.stream("horizon")
        self._opp_stream = rng.stream("player_b")
        self.opponent = make_strategy(config.opponent)
        self.opponent.bind_stream(self._opp_stream)
        self.opponent.begin_match(config.matrix, disclosed_rounds(config.horizon))
        self._opp_history: list[tuple[Action, Action]] = []
        self._pending: Action | None = None
        self._precommit()

    # -- engine steps --

    def _precommit(self) -> None:
        p = self.opponent.cooperation_probability(self._opp_history)
        self._pending = sample_action(p, self._opp_stream)

    @property
    def current_round(self) -> int:
        return len(self.outcomes) + 1

    def resolve_move(self, round_index: int, action: Action) -> RoundOutcome:
        """Resolve the human's move against the pre-committed opponent move.

        Resubmitting an already-resolved round returns the stored outcome
        unchanged, which makes network retries safe.
        """
        if self.state == ABORTED:
            raise SessionFinished(f"session {self.id} was aborted")
        if 1 <= round_index <= len(self.outcomes):
            return self.outcomes[round_index - 1]
        if self.state == FINISHED:
            raise SessionFinished(f"session {self.id} already finished")
        if round_index != self.current_round:
            raise WrongRound(
                f"round {round_index} submitted while round {self.current_round} is pending"
            )

        opp_action = self._pending
        pay_h, pay_o = payoff(self.config.matrix, action, opp_action)
        outcome = RoundOutcome(
            round_index=round_index,
            action_a=action,
            action_b=opp_action,
            payoff_a=pay_h,
            payoff_b=pay_o,
        )
        self.outcomes.append(outcome)
        self.total_human += pay_h
        self.total_opponent += pay_o
        self._opp_history.append((opp_action, action))
        self._pending = None

        if should_continue(self.config.horizon, len(self.outcomes), self._horizon_stream):
            self._precommit()
        else:
            self.state = FINISHED
            self.opponent.end_match()
        self.version += 1
        self.updated_at = time.time()
        return outcome

    def abort(self, reason: str) -> None:
        if self.state == AWAITING:
            self.state = ABORTED
            self.abort_reason = reason
            self.opponent.end_match()
            self.version += 1
            self.updated_at = time.time()

    # -- projections --

    def view(self) -> dict:
        """Client-facing snapshot. Never contains the pre-committed move."""
        history = [
            {
                "round_index": o.round_index,
                "you": o.action_a.value,
                "opponent": o.action_b.value,
                "your_payoff": o.payoff_a,
                "opponent_payoff": o.payoff_b,
            }
            for o in self.outcomes
        ]
        rounds = disclosed_rounds(self.config.horizon)
        return {
            "id": self.id,
            "state": self.state,
            "next_round": self.current_round if self.state == AWAITING else None,
            "rounds_played": len(self.outcomes),
            "history": history,
            "totals": {"you": self.total_human, "opponent": self.total_opponent},
            "payoffs": self.config.matrix.to_json(),
            "horizon_note": (
                f"This game lasts exactly {rounds} rounds." if rounds is not None else None
            ),
            "opponent_name": (
                describe_spec(self.config.opponent) if self.config.reveal_opponent else None
            ),
            "participant_label": self.config.participant_label,
        }

    def to_record(self) -> MatchRecord:
        metadata = {
            "participant_label": self.config.participant_label,
            "session_id": self.id,
        }
        for key, value in self.opponent.match_metadata().items():
            metadata.setdefault(key, value)
        if self.state == ABORTED:
            metadata["aborted"] = self.abort_reason or "aborted"
        return MatchRecord(
            player_a_id=HUMAN_ID,
            player_b_id=describe_spec(self.config.opponent),
            payoffs=self.config.matrix,
            horizon=self.config.horizon,
            seed=self.seed,
            rounds=tuple(self.outcomes),
            total_a=self.total_human,
            total_b=self.total_opponent,
            metadata=metadata,
        )


class SessionStore:
    """Registry plus append-only persistence for live sessions."""

    def __init__(self, state_dir: str | Path | None = None,
                 idle_timeout: float = DEFAULT_IDLE_TIMEOUT):
        self.state_dir = Path(state_dir) if state_dir else None
        self.idle_timeout = idle_timeout
        self._sessions: dict[str, LiveSession] = {}
        self._guard = threading.Lock()
        if self.state_dir:
            self.state_dir.mkdir(parents=True, exist_ok=True)
            self._recover()

    # -- persistence --

    def _log_path(self, session_id: str) -> Path:
        return self.state_dir / f"{session_id}.jsonl"

    def _append_event(self, session_id: str, event: dict) -> None:
        if not self.state_dir:
            return
        with open(self._log_path(session_id), "a", encoding="utf-8") as fp:
            fp.write(json.dumps(event, sort_keys=True) + "\n")
            fp.flush()

    def _recover(self) -> None:
        for path in sorted(self.state_dir.glob("*.jsonl")):
            try:
                events = [json.loads(line) for line in path.read_text().splitlines() if line]
            except (OSError, json.JSONDecodeError):
                continue
            if not events or events[0].get("type") != "created":
                continue
            created = events[0]
            session = LiveSession(
                session_id=created["id"],
                config=SessionConfig.from_json(created["config"]),
                seed=created["seed"],
            )
            for event in events[1:]:
                if event.get("type") == "move":
                    session.resolve_move(event["round"], Action.parse(event["human"]))
                elif event.get("type") == "aborted":
                    session.abort(event.get("reason", "recovered_abort"))
            self._sessions[session.id] = session

    # -- session lifecycle --

    def create(self, config: SessionConfig, seed: int | None = None) -> LiveSession:
        session_id = uuid.uuid4().hex
        if seed is None:
            seed = int.from_bytes(uuid.uuid4().bytes[:8], "big")
        session = LiveSession(session_id, config, seed)
        with self._guard:
            self._sessions[session_id] = session
        self._append_event(
            session_id,
            {
                "type": "created",
                "id": session_id,
                "config": config.to_json(),
                "seed": seed,
                "created_at": session.created_at,
            },
        )
        return session

    def get(self, session_id: str) -> LiveSession:
        with self._guard:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFound(f"no session {session_id!r}")
        self._enforce_idle_timeout(session)
        return session

    def _enforce_idle_timeout(self, session: LiveSession) -> None:
        with session.lock:
            if (
                session.state == AWAITING
                and time.time() - session.updated_at > self.idle_timeout
            ):
                session.abort("idle_timeout")
                self._append_event(session.id, {"type": "aborted", "reason": "idle_timeout"})

    def submit_move(self, session_id: str, round_index: int, action: Action) -> dict:
        session = self.get(session_id)
        with session.lock:
            already = 1 <= round_index <= len(session.outcomes)
            outcome = session.resolve_move(round_index, action)
            if not already:
                self._append_event(
                    session_id,
                    {
                        "type": "move",
                        "round": outcome.round_index,
                        "human": outcome.action_a.value,
                        "opponent": outcome.action_b.value,
                    },
                )
                if session.state == FINISHED:
                    self._append_event(session_id, {"type": "finished"})
            return {
                "outcome": {
                    "round_index": outcome.round_index,
                    "you": outcome.action_a.value,
                    "opponent": outcome.action_b.value,
                    "your_payoff": outcome.payoff_a,
                    "opponent_payoff": outcome.payoff_b,
                },
                "view": session.view(),
            }

    def finalize(self, session_id: str) -> dict:
        session = self.get(session_id)
        with session.lock:
            if session.state == AWAITING:
                raise SessionStillActive(f"session {session_id} is still awaiting a move")
            record = session.to_record()
            metrics: dict = {"totals": {"you": record.total_a, "opponent": record.total_b}}
            if record.rounds:
                events = extract_events([record], HUMAN_ID)
                metrics["cooperation_rate"] = events.own_cooperations / events.own_moves
            if "switch_round" in record.metadata:
                try:
                    report = adaptation_report(
                        [record], HUMAN_ID, window=DEFAULT_WINDOW, epsilon=DEFAULT_EPSILON
                    )
                    metrics["adaptation"] = report.to_json()
                except (InsufficientRounds, MissingSwitchMetadata) as exc:
                    metrics["adaptation"] = None
                    metrics["adaptation_error"] = str(exc)
            return {"record": record.to_json(), "metrics": metrics}


def create_app(store: SessionStore | None = None, ui_dir: str | Path | None = None) -> FastAPI:
    """Build the FastAPI app serving the session API (and the web UI if built)."""
    store = store or SessionStore()
    app = FastAPI(title="ipdlab session service")
    app.state.store = store

    error_status = {
        SessionNotFound: 404,
        WrongRound: 409,
        SessionFinished: 409,
        SessionStillActive: 409,
        ConfigError: 400,
    }

    @app.exception_handler(IpdLabError)
    async def handle_domain_error(request: Request, exc: IpdLabError):
        status = 500
        for klass, code in error_status.items():
            if isinstance(exc, klass):
                status = code
                break
        return JSONResponse(
            status_code=status,
            content={"code": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.json()
        if not isinstance(body, dict):
            raise ConfigError("session config must be a JSON object")
        seed = body.pop("seed", None)
        if seed is not None and not isinstance(seed, int):
            raise ConfigError("seed must be an integer")
        config = SessionConfig.from_json(body)
        session = store.create(config, seed=seed)
        return {"id": session.id, "view": session.view()}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return store.get(session_id).view()

    @app.post("/sessions/{session_id}/moves")
    async def post_move(session_id: str, request: Request):
        body = await request.json()
        if not isinstance(body, dict) or "round" not in body or "action" not in body:
            raise ConfigError("move requires 'round' and 'action'")
        try:
            action = Action.parse(body["action"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        round_index = body["round"]
        if not isinstance(round_index, int) or round_index < 1:
            raise ConfigError("round must be a positive integer")
        return store.submit_move(session_id, round_index, action)

    @app.post("/sessions/{session_id}/finalize")
    def finalize_session(session_id: str):
        return store.finalize(session_id)

    @app.get("/sessions/{session_id}/events")
    async def session_events(session_id: str):
        session = store.get(session_id)

        async def stream():
            last_version = -1
            idle = 0.0
            while True:
                if session.version != last_version:
                    last_version = session.version
                    idle = 0.0
                    payload = json.dumps(session.view(), sort_keys=True)
                    yield f"event: view\ndata: {payload}\n\n"
                    if session.state != AWAITING:
                        return
                await asyncio.sleep(0.2)
                idle += 0.2
                if idle >= 15.0:
                    idle = 0.0
                    yield ": keep-alive\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/")
        def index():
            return {
                "service": "ipdlab session service",
                "ui": "not built (see frontend/README)",
            }

    return app
