"""Strategy catalog: a strategy maps the match history to a cooperation probability.

Each strategy sees the history from its own perspective, a list of
``(own_action, opponent_action)`` pairs, and answers one question for the
round about to be played: with what probability do I cooperate? The engine
does the sampling, so deterministic strategies never touch randomness and
transcripts stay bit-reproducible.

Instances may keep internal state (grim's trigger, shubik's punishment
counter) but the state must always be a pure function of the history fed so
far: re-instantiating and replaying the same rounds reproduces the same
state. That property is what lets a mid-game switch hand the full history to
a fresh instance and stay inside the formalism.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import InvalidParams, UnknownStrategy
from .game import Action, PayoffMatrix
from .rng import RngStream

History = list[tuple[Action, Action]]

C = Action.C
D = Action.D


@dataclass(frozen=True)
class StrategySpec:
    """Declarative description of a player: catalog name plus parameters.

    JSON form: ``{"name": "...", "params": {...}}``. Switch composites nest
    their sub-specs: ``{"name": "switch", "params": {"a": {...}, "b": {...},
    "switch_round": 26}}``.
    """

    name: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj: dict) -> "StrategySpec":
        if not isinstance(obj, dict) or "name" not in obj:
            raise InvalidParams(f"strategy spec must be an object with a name, got {obj!r}")
        unknown = set(obj) - {"name", "params"}
        if unknown:
            raise InvalidParams(f"unknown spec keys: {sorted(unknown)}")
        return cls(name=obj["name"], params=dict(obj.get("params", {})))


class Strategy:
    """Base class for catalog strategies.

    Subclasses implement ``probability(history)`` and may override
    ``observe(pair)`` / ``reset_state()`` to maintain incremental state.
    The base class feeds each new history pair through ``observe`` exactly
    once, and replays from scratch if handed a shorter history than it has
    already seen (fresh-replay semantics).
    """

    name = "strategy"

    def __init__(self):
        self._seen = 0
        self.stream: RngStream | None = None

    def bind_stream(self, stream: RngStream) -> None:
        """Attach the per-player draw stream for this match."""
        self.stream = stream

    def begin_match(self, matrix: PayoffMatrix, total_rounds: int | None) -> None:
        """Called once before round 1. ``total_rounds`` is None unless the
        horizon is fixed and disclosed."""

    def end_match(self) -> None:
        """Called after the last round, including on abort."""

    def match_metadata(self) -> dict:
        """Key/value strings this player contributes to the match record."""
        return {}

    def cooperation_probability(self, history: History) -> float:
        if len(history) < self._seen:
            self.reset_state()
            self._seen = 0
        for pair in history[self._seen:]:
            self.observe(pair)
        self._seen = len(history)
        return self.probability(history)

    def observe(self, pair: tuple[Action, Action]) -> None:
        """Ingest one newly revealed round (own, opponent)."""

    def reset_state(self) -> None:
        """Drop incremental state before a replay from round 1."""

    def probability(self, history: History) -> float:
        raise NotImplementedError


def sample_action(p: float, rng: RngStream) -> Action:
    """Draw an action from a cooperation probability.

    p = 1 and p = 0 short-circuit without consuming a draw, so deterministic
    strategies leave the player stream untouched.
    """
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"cooperation probability out of range: {p}")
    if p == 1.0:
        return C
    if p == 0.0:
        return D
    return C if rng.uniform() < p else D


# --- The catalog strategies ---


class AlwaysCooperate(Strategy):
    """Cooperates unconditionally, whatever the history says."""

    name = "always_cooperate"

    def probability(self, history: History) -> float:
        return 1.0


class AlwaysDefect(Strategy):
    """Defects unconditionally. The one-shot dominant strategy, iterated."""

    name = "always_defect"

    def probability(self, history: History) -> float:
        return 0.0


class Grim(Strategy):
    """Cooperates until the opponent's first defection, then defects forever.

    Maximal retaliation, zero forgiveness: the trigger never resets.
    """

    name = "grim"

    def __init__(self):
        super().__init__()
        self._triggered = False

    def reset_state(self) -> None:
        self._triggered = False

    def observe(self, pair: tuple[Action, Action]) -> None:
        if pair[1] is D:
            self._triggered = True

    def probability(self, history: History) -> float:
        return 0.0 if self._triggered else 1.0


class TitForTat(Strategy):
    """Cooperates first, then mirrors the opponent's previous move."""

    name = "tit_for_tat"

    def probability(self, history: History) -> float:
        if not history:
            return 1.0
        return 1.0 if history[-1][1] is C else 0.0


class TwoStepCopy(Strategy):
    """Mirrors the opponent's move from two rounds back instead of the last.

    Rounds 1 and 2 cooperate (there is nothing two rounds back yet).
    """

    name = "two_step_copy"

    def probability(self, history: History) -> float:
        if len(history) < 2:
            return 1.0
        return 1.0 if history[-2][1] is C else 0.0


class GenerousTitForTat(Strategy):
    """Tit-for-tat that punishes a defection only with probability p.

    After an opponent defection it cooperates with probability 1 - p, which
    breaks the mutual-retaliation spirals plain tit-for-tat can lock into.
    p = 1 collapses to tit-for-tat, p = 0 to always-cooperate-after-round-1.
    """

    name = "generous_tit_for_tat"

    def __init__(self, p: float = 0.9):
        super().__init__()
        if not isinstance(p, (int, float)) or isinstance(p, bool) or not (0.0 <= p <= 1.0):
            raise InvalidParams(f"generous_tit_for_tat requires 0 <= p <= 1, got {p!r}")
        self.p = float(p)

    def probability(self, history: History) -> float:
        if not history or history[-1][1] is C:
            return 1.0
        return 1.0 - self.p


class WinStayLoseShift(Strategy):
    """Pavlov: repeat the last move after a win, switch after a loss.

    A win is a round paying R or H, i.e. a round where the opponent
    cooperated. Opens with cooperation.
    """

    name = "win_stay_lose_shift"

    def probability(self, history: History) -> float:
        if not history:
            return 1.0
        own, opp = history[-1]
        stay = opp is C
        next_action = own if stay else (D if own is C else C)
        return 1.0 if next_action is C else 0.0


class SuspiciousTitForTat(Strategy):
    """Tit-for-tat that opens with a defection: trust must be earned first."""

    name = "suspicious_tit_for_tat"

    def probability(self, history: History) -> float:
        if not history:
            return 0.0
        return 1.0 if history[-1][1] is C else 0.0


class RandomStrategy(Strategy):
    """Cooperates with a fixed probability every round, history be damned."""

    name = "random"

    def __init__(self, p_coop: float = 0.5):
        super().__init__()
        if not isinstance(p_coop, (int, float)) or isinstance(p_coop, bool) or not (
            0.0 <= p_coop <= 1.0
        ):
            raise InvalidParams(f"random requires 0 <= p_coop <= 1, got {p_coop!r}")
        self.p_coop = float(p_coop)

    def probability(self, history: History) -> float:
        return self.p_coop


class SwitchStrategy(Strategy):
    """Plays strategy a before round k and strategy b from round k onward.

    b is evaluated on the full history: its first call (at round k) replays
    everything played so far through a fresh instance, so stateful strategies
    behave exactly as if they had watched the whole game.
    """

    name = "switch"

    def __init__(self, a: StrategySpec, b: StrategySpec, switch_round: int):
        super().__init__()
        if not isinstance(switch_round, int) or isinstance(switch_round, bool) or switch_round < 2:
            raise InvalidParams(f"switch_round must be an integer >= 2, got {switch_round!r}")
        if a.name == "switch" or b.name == "switch":
            raise InvalidParams("switch strategies cannot nest")
        self.switch_round = switch_round
        self._a = make_strategy(a)
        self._b = make_strategy(b)
        self.name = f"switch({self._a.name}->{self._b.name}@{switch_round})"

    def bind_stream(self, stream: RngStream) -> None:
        super().bind_stream(stream)
        self._a.bind_stream(stream)
        self._b.bind_stream(stream)

    def begin_match(self, matrix: PayoffMatrix, total_rounds: int | None) -> None:
        self._a.begin_match(matrix, total_rounds)
        self._b.begin_match(matrix, total_rounds)

    def end_match(self) -> None:
        self._a.end_match()
        self._b.end_match()

    def match_metadata(self) -> dict:
        return {"switch_round": str(self.switch_round)}

    def cooperation_probability(self, history: History) -> float:
        current_round = len(history) + 1
        if current_round < self.switch_round:
            return self._a.cooperation_probability(history)
        return self._b.cooperation_probability(history)


def compose_switch(a: StrategySpec, b: StrategySpec, switch_round: int) -> StrategySpec:
    """Build the spec for a single-switch composite of two non-switch specs."""
    spec = StrategySpec(
        name="switch",
        params={"a": a.to_json(), "b": b.to_json(), "switch_round": switch_round},
    )
    make_strategy(spec)  # validate eagerly
    return spec


# --- Catalog registry ---


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    factory: Callable[[dict], Strategy]
    params: dict
    description: str
    deterministic_probability: bool = True
    explicit_in_config: tuple[str, ...] = ()


_CATALOG: dict[str, CatalogEntry] = {}


def register_strategy(
    name: str,
    factory: Callable[[dict], Strategy],
    params: dict | None = None,
    description: str = "",
    deterministic_probability: bool = True,
    explicit_in_config: tuple[str, ...] = (),
) -> None:
    """Admit a strategy into the catalog.

    This is the plugin hook: external strategy collections register here and
    become addressable from specs, configs, and the CLI without touching this
    module.
    """
    _CATALOG[name] = CatalogEntry(
        name=name,
        factory=factory,
        params=dict(params or {}),
        description=description,
        deterministic_probability=deterministic_probability,
        explicit_in_config=explicit_in_config,
    )


def catalog_entry(name: str) -> CatalogEntry:
    try:
        return _CATALOG[name]
    except KeyError:
        raise UnknownStrategy(f"no strategy named {name!r} in the catalog") from None


def has_strategy(name: str) -> bool:
    return name in _CATALOG


def make_strategy(spec: StrategySpec) -> Strategy:
    """Instantiate a fresh strategy from its spec.

    Raises UnknownStrategy for names outside the catalog and InvalidParams
    for parameter values (or parameter names) the strategy rejects.
    """
    entry = catalog_entry(spec.name)
    unknown = set(spec.params) - set(entry.params)
    if unknown:
        raise InvalidParams(f"{spec.name} does not take parameters {sorted(unknown)}")
    return entry.factory(dict(spec.params))


def list_strategies() -> list[tuple[str, dict, str]]:
    """Every catalog entry as (name, param schema, description), name-sorted."""
    return [
        (entry.name, dict(entry.params), entry.description)
        for entry in sorted(_CATALOG.values(), key=lambda e: e.name)
    ]


def _simple(cls):
    return lambda params: cls(**params)


def _make_switch(params: dict) -> SwitchStrategy:
    for key in ("a", "b", "switch_round"):
        if key not in params:
            raise InvalidParams(f"switch requires parameter {key!r}")
    return SwitchStrategy(
        a=StrategySpec.from_json(params["a"]),
        b=StrategySpec.from_json(params["b"]),
        switch_round=params["switch_round"],
    )


def _make_external(params: dict) -> Strategy:
    from .bridge import agent_strategy_from_params

    return agent_strategy_from_params(params)


register_strategy(
    "always_cooperate", _simple(AlwaysCooperate), {}, "Cooperates every round."
)
register_strategy(
    "always_defect", _simple(AlwaysDefect), {}, "Defects every round."
)
register_strategy(
    "grim",
    _simple(Grim),
    {},
    "Cooperates until the opponent's first defection, then defects forever.",
)
register_strategy(
    "tit_for_tat", _simple(TitForTat), {}, "Copies the opponent's previous move; opens nice."
)
register_strategy(
    "two_step_copy",
    _simple(TwoStepCopy),
    {},
    "Copies the opponent's move from two rounds back; opens nice.",
)
register_strategy(
    "generous_tit_for_tat",
    _simple(GenerousTitForTat),
    {"p": {"type": "float", "default": 0.9, "range": "[0, 1]"}},
    "Tit-for-tat that punishes a defection only with probability p.",
    explicit_in_config=("p",),
)
register_strategy(
    "win_stay_lose_shift",
    _simple(WinStayLoseShift),
    {},
    "Repeats its move after R or H payoffs, switches otherwise (Pavlov).",
)
register_strategy(
    "suspicious_tit_for_tat",
    _simple(SuspiciousTitForTat),
    {},
    "Tit-for-tat with a defecting first move.",
)
register_strategy(
    "random",
    _simple(RandomStrategy),
    {"p_coop": {"type": "float", "default": 0.5, "range": "[0, 1]"}},
    "Cooperates with constant probability p_coop.",
    deterministic_probability=True,
)
register_strategy(
    "switch",
    _make_switch,
    {
        "a": {"type": "spec"},
        "b": {"type": "spec"},
        "switch_round": {"type": "int", "range": ">= 2"},
    },
    "Plays a before round switch_round, then b on the full history.",
)
register_strategy(
    "external_agent",
    _make_external,
    {"endpoint": {"type": "object"}},
    "Delegates each move to an external agent endpoint (HTTP chat or subprocess).",
    deterministic_probability=False,
)
