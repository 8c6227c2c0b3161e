"""Optional catalog entries: entrants from Axelrod's first tournament.

These are the commonly cited reconstructions of the 1980 tournament
submissions. They ship for breadth and for switch-battery experiments that
reference them, but no headline result should hinge on them; the core
catalog in ``strategies`` is the load-bearing set.
"""

from __future__ import annotations

from .errors import InvalidParams
from .game import Action, PayoffMatrix
from .strategies import History, Strategy, register_strategy

C = Action.C
D = Action.D


class FirstByGrofman(Strategy):
    """Cooperates when last round was symmetric, else with probability 2/7."""

    name = "first_by_grofman"

    def probability(self, history: History) -> float:
        if not history:
            return 1.0
        own, opp = history[-1]
        return 1.0 if own is opp else 2.0 / 7.0


class FirstByShubik(Strategy):
    """Retaliates with ever longer punishment runs.

    Cooperates until provoked (opponent defects against its cooperation),
    then defects for k rounds, where k grows by one with each new
    provocation.
    """

    name = "first_by_shubik"

    def __init__(self):
        super().__init__()
        self._punishment_length = 0
        self._remaining = 0

    def reset_state(self) -> None:
        self._punishment_length = 0
        self._remaining = 0

    def observe(self, pair: tuple[Action, Action]) -> None:
        own, opp = pair
        if self._remaining > 0:
            self._remaining -= 1
        elif own is C and opp is D:
            self._punishment_length += 1
            self._remaining = self._punishment_length

    def probability(self, history: History) -> float:
        return 0.0 if self._remaining > 0 else 1.0


class FirstByFeld(Strategy):
    """Tit-for-tat with slowly eroding goodwill.

    Mirrors defection immediately; after an opponent cooperation it
    cooperates with a probability that decays linearly from 1.0 to 0.5 over
    the first 200 rounds and stays at 0.5 after that.
    """

    name = "first_by_feld"

    def __init__(self, start: float = 1.0, end: float = 0.5, decay_rounds: int = 200):
        super().__init__()
        if not (0.0 <= end <= start <= 1.0) or decay_rounds < 1:
            raise InvalidParams("feld requires 0 <= end <= start <= 1 and decay_rounds >= 1")
        self.start = float(start)
        self.end = float(end)
        self.decay_rounds = int(decay_rounds)

    def probability(self, history: History) -> float:
        if not history:
            return 1.0
        if history[-1][1] is D:
            return 0.0
        slope = (self.start - self.end) / self.decay_rounds
        return max(self.end, self.start - slope * len(history))


class FirstByJoss(Strategy):
    """Tit-for-tat with a sneaky streak: answers cooperation with cooperation
    only 90% of the time."""

    name = "first_by_joss"

    def __init__(self, p: float = 0.9):
        super().__init__()
        if not (0.0 <= p <= 1.0):
            raise InvalidParams(f"joss requires 0 <= p <= 1, got {p!r}")
        self.p = float(p)

    def probability(self, history: History) -> float:
        if not history:
            return self.p
        return self.p if history[-1][1] is C else 0.0


class FirstByTullock(Strategy):
    """Cooperates for 11 rounds, then 10% less than the opponent recently did.

    The target rate is the opponent's cooperation fraction over the last 10
    rounds minus 0.1, floored at zero.
    """

    name = "first_by_tullock"

    def probability(self, history: History) -> float:
        if len(history) < 11:
            return 1.0
        window = history[-10:]
        opp_rate = sum(1 for _, opp in window if opp is C) / len(window)
        return max(0.0, opp_rate - 0.1)


class FirstByDowning(Strategy):
    """Outcome maximizer working from estimated opponent response rates.

    Tracks how often the opponent cooperates in response to its own
    cooperations and defections, then plays whichever move has the higher
    expected one-shot payoff under those estimates. Defects on the first two
    rounds while it has no data; breaks expected-value ties by flipping its
    previous move.
    """

    name = "first_by_downing"

    def __init__(self):
        super().__init__()
        self._matrix: PayoffMatrix | None = None
        self._prev_own: Action | None = None
        self._own_c_observed = 0
        self._own_d_observed = 0
        self._coop_after_c = 0
        self._coop_after_d = 0
        self._last_own: Action | None = None

    def begin_match(self, matrix: PayoffMatrix, total_rounds: int | None) -> None:
        self._matrix = matrix

    def reset_state(self) -> None:
        self._prev_own = None
        self._own_c_observed = 0
        self._own_d_observed = 0
        self._coop_after_c = 0
        self._coop_after_d = 0
        self._last_own = None

    def observe(self, pair: tuple[Action, Action]) -> None:
        own, opp = pair
        if self._prev_own is C:
            self._own_c_observed += 1
            if opp is C:
                self._coop_after_c += 1
        elif self._prev_own is D:
            self._own_d_observed += 1
            if opp is C:
                self._coop_after_d += 1
        self._prev_own = own
        self._last_own = own

    def probability(self, history: History) -> float:
        if len(history) < 2:
            return 0.0
        matrix = self._matrix or PayoffMatrix(5, 3, 1, 0)
        alpha = self._coop_after_c / max(self._own_c_observed, 1)
        beta = self._coop_after_d / max(self._own_d_observed, 2)
        expected_c = alpha * matrix.R + (1 - alpha) * matrix.L
        expected_d = beta * matrix.H + (1 - beta) * matrix.P
        if expected_c > expected_d:
            return 1.0
        if expected_c < expected_d:
            return 0.0
        return 1.0 if self._last_own is D else 0.0


class FirstByAnonymous(Strategy):
    """Cooperates with a probability redrawn uniformly in [0.3, 0.7] each round."""

    name = "first_by_anonymous"

    def probability(self, history: History) -> float:
        if self.stream is None:
            return 0.5
        return 0.3 + 0.4 * self.stream.uniform()


def _simple(cls):
    return lambda params: cls(**params)


register_strategy(
    "first_by_grofman",
    _simple(FirstByGrofman),
    {},
    "Cooperates after symmetric rounds, else with probability 2/7.",
)
register_strategy(
    "first_by_shubik",
    _simple(FirstByShubik),
    {},
    "Retaliates with punishment runs that grow by one per provocation.",
)
register_strategy(
    "first_by_feld",
    _simple(FirstByFeld),
    {
        "start": {"type": "float", "default": 1.0},
        "end": {"type": "float", "default": 0.5},
        "decay_rounds": {"type": "int", "default": 200},
    },
    "Tit-for-tat whose goodwill decays linearly over the match.",
)
register_strategy(
    "first_by_joss",
    _simple(FirstByJoss),
    {"p": {"type": "float", "default": 0.9}},
    "Tit-for-tat that answers cooperation with cooperation only 90% of the time.",
)
register_strategy(
    "first_by_tullock",
    _simple(FirstByTullock),
    {},
    "Cooperates for 11 rounds, then 10% less than the opponent's recent rate.",
)
register_strategy(
    "first_by_downing",
    _simple(FirstByDowning),
    {},
    "Plays the move with the higher expected payoff under estimated response rates.",
)
register_strategy(
    "first_by_anonymous",
    _simple(FirstByAnonymous),
    {},
    "Cooperates with a fresh uniform probability in [0.3, 0.7] every round.",
    deterministic_probability=False,
)
