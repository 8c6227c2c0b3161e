"""Game core: actions, payoffs, horizons, and the deterministic match loop.

A match is two players repeatedly playing the one-shot cooperate/defect game.
Both players choose simultaneously; the engine collects both moves before
revealing either, appends the resolved round to the transcript, and asks the
horizon whether to continue. Everything downstream (metrics, experiments,
the live session service) consumes the ``MatchRecord`` transcripts produced
here and nothing else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Iterator, Union

from .errors import AgentFailure, OrderingViolation, PersistenceError, SchemaVersionMismatch
from .rng import GameRng, RngStream

SCHEMA_VERSION = 1

# Default cap on indefinite-horizon games so a pathological seed cannot run
# unbounded. Cap hits are recorded in match metadata.
DEFAULT_MAX_ROUNDS = 10_000

Score = Union[int, float]


class Action(str, Enum):
    """The two moves. Serialized as the single characters "C" / "D"."""

    C = "C"
    D = "D"

    @classmethod
    def parse(cls, value: str) -> "Action":
        if value == "C":
            return cls.C
        if value == "D":
            return cls.D
        raise ValueError(f"not an action: {value!r}")


@dataclass(frozen=True)
class PayoffMatrix:
    """One-shot payoffs: temptation H, reward R, punishment P, sucker L.

    Construction enforces H > R > P > L (defection tempts, mutual defection
    hurts) and H + L < 2R (alternating exploitation must not beat steady
    mutual cooperation in the iterated game).
    """

    H: Score
    R: Score
    P: Score
    L: Score

    def __post_init__(self):
        for name in ("H", "R", "P", "L"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise OrderingViolation(name, f"payoff {name} must be a finite number")
            if value != value or value in (float("inf"), float("-inf")):
                raise OrderingViolation(name, f"payoff {name} must be finite")
        if not (self.H > self.R):
            raise OrderingViolation("H > R")
        if not (self.R > self.P):
            raise OrderingViolation("R > P")
        if not (self.P > self.L):
            raise OrderingViolation("P > L")
        if not (self.H + self.L < 2 * self.R):
            raise OrderingViolation("H + L < 2R")

    def to_json(self) -> dict:
        return {"H": self.H, "R": self.R, "P": self.P, "L": self.L}

    @classmethod
    def from_json(cls, obj: dict) -> "PayoffMatrix":
        return cls(H=obj["H"], R=obj["R"], P=obj["P"], L=obj["L"])


def validate_payoffs(H: Score, R: Score, P: Score, L: Score) -> PayoffMatrix:
    """Build a PayoffMatrix, raising OrderingViolation naming the failed inequality."""
    return PayoffMatrix(H=H, R=R, P=P, L=L)


def payoff(matrix: PayoffMatrix, self_action: Action, opp_action: Action) -> tuple[Score, Score]:
    """Payoffs for one round, ordered (self, opponent)."""
    if self_action is Action.C:
        if opp_action is Action.C:
            return matrix.R, matrix.R
        return matrix.L, matrix.H
    if opp_action is Action.C:
        return matrix.H, matrix.L
    return matrix.P, matrix.P


@dataclass(frozen=True)
class FixedHorizon:
    """Exactly ``rounds`` rounds; players may be told the count up front."""

    rounds: int
    known_to_players: bool = True

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("fixed horizon needs at least one round")

    def to_json(self) -> dict:
        return {"kind": "fixed", "rounds": self.rounds, "known_to_players": self.known_to_players}


@dataclass(frozen=True)
class IndefiniteHorizon:
    """After each completed round the match stops with probability ``stop_probability``.

    ``max_rounds`` is a safety cap; hitting it is recorded in match metadata.
    Players are told nothing about length.
    """

    stop_probability: float
    max_rounds: int = DEFAULT_MAX_ROUNDS

    def __post_init__(self):
        if not (0.0 < self.stop_probability < 1.0):
            raise ValueError("stop_probability must lie strictly between 0 and 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be positive")

    def to_json(self) -> dict:
        return {
            "kind": "indefinite",
            "stop_probability": self.stop_probability,
            "max_rounds": self.max_rounds,
        }


Horizon = Union[FixedHorizon, IndefiniteHorizon]


def horizon_from_json(obj: dict) -> Horizon:
    kind = obj.get("kind")
    if kind == "fixed":
        return FixedHorizon(rounds=obj["rounds"], known_to_players=obj.get("known_to_players", True))
    if kind == "indefinite":
        return IndefiniteHorizon(
            stop_probability=obj["stop_probability"],
            max_rounds=obj.get("max_rounds", DEFAULT_MAX_ROUNDS),
        )
    raise ValueError(f"unknown horizon kind: {kind!r}")


def disclosed_rounds(horizon: Horizon) -> int | None:
    """Round count players are told, or None when length is not disclosed."""
    if isinstance(horizon, FixedHorizon) and horizon.known_to_players:
        return horizon.rounds
    return None


def should_continue(horizon: Horizon, completed_rounds: int, rng: RngStream | None = None) -> bool:
    """Decide whether another round is played after ``completed_rounds``.

    Fixed horizons simply count. Indefinite horizons always play round 1,
    then draw one uniform from the horizon stream per completed round and
    continue on u >= stop_probability, with a hard stop at max_rounds (no
    draw is consumed for the cap check).
    """
    if completed_rounds < 0:
        raise ValueError("completed_rounds must be >= 0")
    if isinstance(horizon, FixedHorizon):
        return completed_rounds < horizon.rounds
    if completed_rounds == 0:
        return True
    if completed_rounds >= horizon.max_rounds:
        return False
    if rng is None:
        raise ValueError("indefinite horizon requires an rng stream")
    return rng.uniform() >= horizon.stop_probability


@dataclass(frozen=True)
class RoundOutcome:
    """One resolved round: both actions and both payoffs."""

    round_index: int
    action_a: Action
    action_b: Action
    payoff_a: Score
    payoff_b: Score

    def to_json(self) -> dict:
        return {
            "round_index": self.round_index,
            "action_a": self.action_a.value,
            "action_b": self.action_b.value,
            "payoff_a": self.payoff_a,
            "payoff_b": self.payoff_b,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RoundOutcome":
        return cls(
            round_index=obj["round_index"],
            action_a=Action.parse(obj["action_a"]),
            action_b=Action.parse(obj["action_b"]),
            payoff_a=obj["payoff_a"],
            payoff_b=obj["payoff_b"],
        )


@dataclass(frozen=True)
class MatchRecord:
    """Full transcript of one match plus identities, seed, and metadata.

    Invariants: round indices are 1..n contiguous, totals are the per-round
    sums, and fixed-horizon records hold exactly ``rounds`` entries.
    """

    player_a_id: str
    player_b_id: str
    payoffs: PayoffMatrix
    horizon: Horizon
    seed: int
    rounds: tuple[RoundOutcome, ...]
    total_a: Score
    total_b: Score
    metadata: dict = field(default_factory=dict)

    def n_rounds(self) -> int:
        return len(self.rounds)

    def actions_for(self, player_id: str) -> list[tuple[Action, Action]]:
        """Perspective-local history [(own, opponent), ...] for a participant."""
        if player_id == self.player_a_id:
            return [(r.action_a, r.action_b) for r in self.rounds]
        if player_id == self.player_b_id:
            return [(r.action_b, r.action_a) for r in self.rounds]
        from .errors import UnknownPlayer

        raise UnknownPlayer(f"{player_id!r} did not play in this record")

    def payoffs_for(self, player_id: str) -> list[Score]:
        if player_id == self.player_a_id:
            return [r.payoff_a for r in self.rounds]
        if player_id == self.player_b_id:
            return [r.payoff_b for r in self.rounds]
        from .errors import UnknownPlayer

        raise UnknownPlayer(f"{player_id!r} did not play in this record")

    def opponent_of(self, player_id: str) -> str:
        if player_id == self.player_a_id:
            return self.player_b_id
        if player_id == self.player_b_id:
            return self.player_a_id
        from .errors import UnknownPlayer

        raise UnknownPlayer(f"{player_id!r} did not play in this record")

    def to_json(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "player_a_id": self.player_a_id,
            "player_b_id": self.player_b_id,
            "payoffs": self.payoffs.to_json(),
            "horizon": self.horizon.to_json(),
            "seed": self.seed,
            "rounds": [r.to_json() for r in self.rounds],
            "total_a": self.total_a,
            "total_b": self.total_b,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MatchRecord":
        version = obj.get("v")
        if version != SCHEMA_VERSION:
            raise SchemaVersionMismatch(found=version, supported=SCHEMA_VERSION)
        return cls(
            player_a_id=obj["player_a_id"],
            player_b_id=obj["player_b_id"],
            payoffs=PayoffMatrix.from_json(obj["payoffs"]),
            horizon=horizon_from_json(obj["horizon"]),
            seed=obj["seed"],
            rounds=tuple(RoundOutcome.from_json(r) for r in obj["rounds"]),
            total_a=obj["total_a"],
            total_b=obj["total_b"],
            metadata=dict(obj.get("metadata", {})),
        )


def dump_record_line(record: MatchRecord) -> str:
    """Serialize one record as a single canonical JSON line."""
    return json.dumps(record.to_json(), sort_keys=True, separators=(",", ":"))


def write_records(records: Iterable[MatchRecord], fp: IO[str]) -> None:
    for record in records:
        fp.write(dump_record_line(record))
        fp.write("\n")


def read_records(fp: IO[str]) -> Iterator[MatchRecord]:
    """Parse a JSONL record stream, reporting the line number on corruption."""
    for lineno, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PersistenceError(f"malformed record: {exc.msg}", line=lineno) from exc
        yield MatchRecord.from_json(obj)


def play_match(
    player_a,
    player_b,
    matrix: PayoffMatrix,
    horizon: Horizon,
    seed: int,
    a_id: str | None = None,
    b_id: str | None = None,
    metadata: dict | None = None,
) -> MatchRecord:
    """Run one match to completion and return its transcript.

    ``player_a`` / ``player_b`` are strategy instances (see strategies module)
    or specs, which are instantiated fresh. Both players pick simultaneously:
    the engine computes both cooperation probabilities against the current
    histories, samples both actions, and only then resolves the round.

    An external agent that breaks protocol raises AgentFailure; the partial
    transcript is attached to the exception and the match is not recorded as
    a normal result.
    """
    from .strategies import StrategySpec, make_strategy, sample_action

    if isinstance(player_a, StrategySpec):
        player_a = make_strategy(player_a)
    if isinstance(player_b, StrategySpec):
        player_b = make_strategy(player_b)

    a_id = a_id if a_id is not None else player_a.name
    b_id = b_id if b_id is not None else player_b.name

    rng = GameRng(seed)
    horizon_stream = rng.stream("horizon")
    stream_a = rng.stream("player_a")
    stream_b = rng.stream("player_b")

    player_a.bind_stream(stream_a)
    player_b.bind_stream(stream_b)
    player_a.begin_match(matrix, disclosed_rounds(horizon))
    player_b.begin_match(matrix, disclosed_rounds(horizon))

    meta = dict(metadata or {})
    for player in (player_a, player_b):
        for key, value in player.match_metadata().items():
            meta.setdefault(key, value)

    history_a: list[tuple[Action, Action]] = []
    history_b: list[tuple[Action, Action]] = []
    outcomes: list[RoundOutcome] = []
    total_a: Score = 0
    total_b: Score = 0
    completed = 0

    def partial() -> MatchRecord:
        return MatchRecord(
            player_a_id=a_id,
            player_b_id=b_id,
            payoffs=matrix,
            horizon=horizon,
            seed=seed,
            rounds=tuple(outcomes),
            total_a=total_a,
            total_b=total_b,
            metadata={**meta, "aborted": "agent_failure"},
        )

    try:
        while should_continue(horizon, completed, horizon_stream):
            p_a = player_a.cooperation_probability(history_a)
            p_b = player_b.cooperation_probability(history_b)
            act_a = sample_action(p_a, stream_a)
            act_b = sample_action(p_b, stream_b)
            pay_a, pay_b = payoff(matrix, act_a, act_b)
            completed += 1
            outcomes.append(
                RoundOutcome(
                    round_index=completed,
                    action_a=act_a,
                    action_b=act_b,
                    payoff_a=pay_a,
                    payoff_b=pay_b,
                )
            )
            total_a += pay_a
            total_b += pay_b
            history_a.append((act_a, act_b))
            history_b.append((act_b, act_a))
    except AgentFailure as failure:
        failure.partial_record = partial()
        raise
    finally:
        player_a.end_match()
        player_b.end_match()

    if isinstance(horizon, IndefiniteHorizon) and completed == horizon.max_rounds:
        meta["max_rounds_capped"] = "true"

    return MatchRecord(
        player_a_id=a_id,
        player_b_id=b_id,
        payoffs=matrix,
        horizon=horizon,
        seed=seed,
        rounds=tuple(outcomes),
        total_a=total_a,
        total_b=total_b,
        metadata=meta,
    )


def cumulative_series(record: MatchRecord) -> list[tuple[int, Score, Score, Score]]:
    """Prefix sums per round: (round, cum_a, cum_b, cum_a - cum_b)."""
    if not record.rounds:
        raise ValueError("record has no rounds")
    series = []
    cum_a: Score = 0
    cum_b: Score = 0
    for outcome in record.rounds:
        cum_a += outcome.payoff_a
        cum_b += outcome.payoff_b
        series.append((outcome.round_index, cum_a, cum_b, cum_a - cum_b))
    return series
