"""ipdlab: an iterated prisoner's dilemma laboratory.

Strategy catalog, deterministic match engine, behavioral and morality
metrics, tournament and switch-experiment orchestration, external-agent
bridge, and a live session service for human play.
"""

from . import historical  # noqa: F401  (registers the optional catalog entries)
from .game import (
    Action,
    FixedHorizon,
    IndefiniteHorizon,
    MatchRecord,
    PayoffMatrix,
    RoundOutcome,
    cumulative_series,
    play_match,
    payoff,
    should_continue,
    validate_payoffs,
)
from .rng import GameRng
from .strategies import (
    StrategySpec,
    compose_switch,
    list_strategies,
    make_strategy,
    register_strategy,
    sample_action,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "FixedHorizon",
    "GameRng",
    "IndefiniteHorizon",
    "MatchRecord",
    "PayoffMatrix",
    "RoundOutcome",
    "StrategySpec",
    "compose_switch",
    "cumulative_series",
    "list_strategies",
    "make_strategy",
    "payoff",
    "play_match",
    "register_strategy",
    "sample_action",
    "should_continue",
    "validate_payoffs",
]
