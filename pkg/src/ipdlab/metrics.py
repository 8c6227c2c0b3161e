"""Behavioral, morality, and adaptation metrics over match transcripts.

Everything here is a pure function of MatchRecords. Counting conventions
that matter:

* An opponent defection at round t is *forgiven* if the player answers with
  C at t+1 and *retaliated* if the player answers with D at t+1. A defection
  on the final round has no following move, so it is neither; it still
  counts in ``opponent_defections``. Forgiveness and retaliation rates are
  therefore taken over the defections that had a following move, which is
  what makes a pure mirror strategy score retaliation 1.0.
* Generosity is the olive-branch rate: the fraction of mutual-defection
  rounds (before the final round) after which the player came back with C.
* Rates pool rounds across games rather than averaging per-game values;
  support counts are always kept so either convention can be recovered.

Undefined ratios (zero denominator) stay undefined: they carry ``None``
values, never a silent 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    InsufficientData,
    InsufficientRounds,
    MissingSwitchMetadata,
    MixedHorizons,
    NoConvergence,
    UnknownPlayer,
)
from .game import Action, FixedHorizon, MatchRecord

C = Action.C
D = Action.D

EIGEN_TOLERANCE = 1e-10
EIGEN_MAX_ITER = 10_000

DEFAULT_WINDOW = 5
DEFAULT_EPSILON = 0.1


@dataclass(frozen=True)
class Ratio:
    """A rate with its support. value is None when the denominator is zero."""

    numerator: float
    denominator: float

    @property
    def value(self) -> float | None:
        if self.denominator == 0:
            return None
        return self.numerator / self.denominator

    @property
    def defined(self) -> bool:
        return self.denominator != 0

    def to_json(self) -> dict:
        return {
            "numerator": self.numerator,
            "denominator": self.denominator,
            "value": self.value,
        }


@dataclass(frozen=True)
class BehaviorEvents:
    """Raw event counts for one player across a set of records."""

    games: int = 0
    first_moves_cooperative: int = 0
    opponent_defections: int = 0
    forgiven_defections: int = 0
    retaliations: int = 0
    own_moves: int = 0
    own_cooperations: int = 0
    mutual_defections: int = 0
    mutual_defections_followed_by_own_C: int = 0
    uncalled_defections: int = 0

    def __post_init__(self):
        if self.forgiven_defections + self.retaliations > self.opponent_defections:
            raise ValueError("forgiven + retaliated defections exceed opponent defections")


@dataclass(frozen=True)
class BehaviorProfile:
    """Rating vector derived from BehaviorEvents; all entries carry support."""

    cooperation_rate: Ratio
    niceness: Ratio
    forgiveness: Ratio
    retaliation: Ratio
    generosity: Ratio
    good_partner: Ratio | None = None

    def to_json(self) -> dict:
        obj = {
            "cooperation_rate": self.cooperation_rate.to_json(),
            "niceness": self.niceness.to_json(),
            "forgiveness": self.forgiveness.to_json(),
            "retaliation": self.retaliation.to_json(),
            "generosity": self.generosity.to_json(),
        }
        obj["good_partner"] = self.good_partner.to_json() if self.good_partner else None
        return obj


def _perspectives(record: MatchRecord, player_id: str):
    """Yield (own_actions, opp_actions, own_payoffs, opp_payoffs) per seat played.

    A self-play record yields both seats.
    """
    seats = []
    if player_id == record.player_a_id:
        seats.append(
            (
                [r.action_a for r in record.rounds],
                [r.action_b for r in record.rounds],
                [r.payoff_a for r in record.rounds],
                [r.payoff_b for r in record.rounds],
            )
        )
    if player_id == record.player_b_id:
        seats.append(
            (
                [r.action_b for r in record.rounds],
                [r.action_a for r in record.rounds],
                [r.payoff_b for r in record.rounds],
                [r.payoff_a for r in record.rounds],
            )
        )
    if not seats:
        raise UnknownPlayer(f"{player_id!r} did not play in record vs "
                            f"({record.player_a_id!r}, {record.player_b_id!r})")
    return seats


def extract_events(records: Sequence[MatchRecord], player_id: str) -> BehaviorEvents:
    """Scan each transcript once and count the behavioral events for a player.

    Self-play records contribute both seats.
    """
    games = 0
    first_c = 0
    opp_defections = 0
    forgiven = 0
    retaliated = 0
    own_moves = 0
    own_coops = 0
    mutual_d = 0
    olive_branches = 0
    uncalled = 0

    for record in records:
        for own, opp, _, _ in _perspectives(record, player_id):
            n = len(own)
            games += 1
            if n == 0:
                continue
            if own[0] is C:
                first_c += 1
            for t in range(n):
                own_moves += 1
                if own[t] is C:
                    own_coops += 1
                if opp[t] is D:
                    opp_defections += 1
                    if t + 1 < n:
                        if own[t + 1] is C:
                            forgiven += 1
                        else:
                            retaliated += 1
                if own[t] is D and opp[t] is D and t + 1 < n:
                    mutual_d += 1
                    if own[t + 1] is C:
                        olive_branches += 1
                if own[t] is D and (t == 0 or opp[t - 1] is C):
                    uncalled += 1

    return BehaviorEvents(
        games=games,
        first_moves_cooperative=first_c,
        opponent_defections=opp_defections,
        forgiven_defections=forgiven,
        retaliations=retaliated,
        own_moves=own_moves,
        own_cooperations=own_coops,
        mutual_defections=mutual_d,
        mutual_defections_followed_by_own_C=olive_branches,
        uncalled_defections=uncalled,
    )


def behavior_profile(events: BehaviorEvents) -> BehaviorProfile:
    """Turn event counts into rates. Zero-support rates stay undefined."""
    answerable = events.forgiven_defections + events.retaliations
    return BehaviorProfile(
        cooperation_rate=Ratio(events.own_cooperations, events.own_moves),
        niceness=Ratio(events.first_moves_cooperative, events.games),
        forgiveness=Ratio(events.forgiven_defections, answerable),
        retaliation=Ratio(events.retaliations, answerable),
        generosity=Ratio(
            events.mutual_defections_followed_by_own_C, events.mutual_defections
        ),
    )


def good_partner(records: Sequence[MatchRecord], player_id: str) -> Ratio:
    """Fraction of games in which the player cooperated at least as often as
    its opponent. Ties count as success."""
    if not records:
        raise InsufficientData("good_partner needs at least one record")
    successes = 0
    games = 0
    for record in records:
        for own, opp, _, _ in _perspectives(record, player_id):
            games += 1
            own_c = sum(1 for a in own if a is C)
            opp_c = sum(1 for a in opp if a is C)
            if own_c >= opp_c:
                successes += 1
    return Ratio(successes, games)


# --- Cooperation matrix and eigenvector ratings ---


@dataclass
class CooperationMatrix:
    """Directed cooperation rates: entry (i, j) is how often player i
    cooperated across all rounds of all games against player j.

    ``rates`` holds NaN where a pairing never met; ``support`` counts the
    pooled moves behind each entry.
    """

    players: list[str]
    rates: np.ndarray
    support: np.ndarray

    def index_of(self, player_id: str) -> int:
        try:
            return self.players.index(player_id)
        except ValueError:
            raise UnknownPlayer(player_id) from None

    def imputed(self) -> np.ndarray:
        """Rates with undefined entries (including a never-played diagonal)
        filled by the row mean over defined entries."""
        filled = self.rates.copy()
        for i in range(len(self.players)):
            row = filled[i]
            defined = row[~np.isnan(row)]
            fill = float(defined.mean()) if defined.size else 0.0
            row[np.isnan(row)] = fill
        return filled

    def to_json(self) -> dict:
        return {
            "players": list(self.players),
            "rates": [[None if np.isnan(x) else float(x) for x in row] for row in self.rates],
            "support": self.support.astype(int).tolist(),
        }


def _players_in_order(records: Iterable[MatchRecord]) -> list[str]:
    seen: dict[str, None] = {}
    for record in records:
        seen.setdefault(record.player_a_id)
        seen.setdefault(record.player_b_id)
    return list(seen)


def cooperation_matrix(
    records: Sequence[MatchRecord], players: Sequence[str] | None = None
) -> CooperationMatrix:
    """Pool every round of every game into directed cooperation rates."""
    ids = list(players) if players is not None else _players_in_order(records)
    if len(ids) < 2:
        raise InsufficientData("cooperation matrix needs at least two players")
    m = len(ids)
    index = {p: i for i, p in enumerate(ids)}
    coop = np.zeros((m, m))
    moves = np.zeros((m, m))
    for record in records:
        if record.player_a_id not in index or record.player_b_id not in index:
            continue
        i = index[record.player_a_id]
        j = index[record.player_b_id]
        for outcome in record.rounds:
            moves[i, j] += 1
            moves[j, i] += 1
            if outcome.action_a is C:
                coop[i, j] += 1
            if outcome.action_b is C:
                coop[j, i] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        rates = np.where(moves > 0, coop / np.maximum(moves, 1), np.nan)
    return CooperationMatrix(players=ids, rates=rates, support=moves)


@dataclass(frozen=True)
class PowerIterationResult:
    vector: np.ndarray
    eigenvalue: float
    iterations: int
    residual: float


def power_iteration(
    matrix: np.ndarray | Sequence[Sequence[float]],
    tolerance: float = EIGEN_TOLERANCE,
    max_iter: int = EIGEN_MAX_ITER,
) -> PowerIterationResult:
    """Dominant eigenpair by repeated multiplication from the uniform start.

    Every iterate is L2-normalized and sign-fixed so its largest-magnitude
    component is positive; this keeps the iteration convergent for negative
    dominant eigenvalues. Convergence means successive iterates differ by at
    most ``tolerance`` in L2 norm. The eigenvalue is the Rayleigh quotient of
    the final iterate. Complex dominant pairs oscillate and are reported as
    NoConvergence, never masked.
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix must be finite")
    m = M.shape[0]
    if m < 1:
        raise ValueError("matrix must be at least 1x1")

    def sign_fix(u: np.ndarray) -> np.ndarray:
        pivot = int(np.argmax(np.abs(u)))
        return -u if u[pivot] < 0 else u

    v = np.full(m, 1.0 / np.sqrt(m))
    residual = float("inf")
    for iteration in range(1, max_iter + 1):
        w = M @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            raise NoConvergence(iterations=iteration, residual=float("inf"))
        w = sign_fix(w / norm)
        residual = float(np.linalg.norm(w - v))
        v = w
        if residual <= tolerance:
            eigenvalue = float(v @ (M @ v))
            return PowerIterationResult(
                vector=v, eigenvalue=eigenvalue, iterations=iteration, residual=residual
            )
    raise NoConvergence(iterations=max_iter, residual=residual)


def eigenjesus(
    cm: CooperationMatrix,
    tolerance: float = EIGEN_TOLERANCE,
    max_iter: int = EIGEN_MAX_ITER,
) -> tuple[dict[str, float], PowerIterationResult]:
    """Cooperativeness weighted by the cooperativeness of whom you meet:
    the unit dominant eigenvector of the nonnegative cooperation-rate matrix."""
    result = power_iteration(cm.imputed(), tolerance, max_iter)
    ratings = {p: float(result.vector[i]) for i, p in enumerate(cm.players)}
    return ratings, result


def eigenmoses(
    cm: CooperationMatrix,
    tolerance: float = EIGEN_TOLERANCE,
    max_iter: int = EIGEN_MAX_ITER,
) -> tuple[dict[str, float], PowerIterationResult]:
    """Like eigenjesus, but defecting against defectors counts in favor:
    the same pipeline on the affinely rescaled matrix 2*rate - 1, mapping
    cooperation to +1 and defection to -1."""
    rescaled = 2.0 * cm.imputed() - 1.0
    result = power_iteration(rescaled, tolerance, max_iter)
    ratings = {p: float(result.vector[i]) for i, p in enumerate(cm.players)}
    return ratings, result


@dataclass
class MoralityRatings:
    good_partner: dict[str, Ratio]
    eigenjesus: dict[str, float]
    eigenmoses: dict[str, float]
    eigen_meta: dict[str, dict]

    def to_json(self) -> dict:
        return {
            "good_partner": {p: r.to_json() for p, r in self.good_partner.items()},
            "eigenjesus": dict(self.eigenjesus),
            "eigenmoses": dict(self.eigenmoses),
            "eigen_meta": dict(self.eigen_meta),
        }


def morality_ratings(
    records: Sequence[MatchRecord],
    players: Sequence[str] | None = None,
    tolerance: float = EIGEN_TOLERANCE,
    max_iter: int = EIGEN_MAX_ITER,
) -> MoralityRatings:
    """Good-partner, eigenjesus, and eigenmoses ratings for a record pool."""
    cm = cooperation_matrix(records, players)
    gp = {}
    for p in cm.players:
        mine = [r for r in records if p in (r.player_a_id, r.player_b_id)]
        if mine:  # players whose every match failed have no defined rating
            gp[p] = good_partner(mine, p)
    ej, ej_meta = eigenjesus(cm, tolerance, max_iter)
    em, em_meta = eigenmoses(cm, tolerance, max_iter)
    return MoralityRatings(
        good_partner=gp,
        eigenjesus=ej,
        eigenmoses=em,
        eigen_meta={
            "eigenjesus": {
                "iterations": ej_meta.iterations,
                "residual": ej_meta.residual,
                "eigenvalue": ej_meta.eigenvalue,
                "tolerance": tolerance,
            },
            "eigenmoses": {
                "iterations": em_meta.iterations,
                "residual": em_meta.residual,
                "eigenvalue": em_meta.eigenvalue,
                "tolerance": tolerance,
            },
        },
    )


# --- Time series ---


def cooperation_rate_series(
    record: MatchRecord, player_id: str, window: int
) -> list[tuple[int, float]]:
    """Trailing-window cooperation rate per round, inclusive of the round.

    Rounds earlier than one full window use the available prefix.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    own, _, _, _ = _perspectives(record, player_id)[0]
    series = []
    for t in range(1, len(own) + 1):
        lo = max(0, t - window)
        chunk = own[lo:t]
        series.append((t, sum(1 for a in chunk if a is C) / len(chunk)))
    return series


def win_series(
    records: Sequence[MatchRecord], player_id: str
) -> list[tuple[int, float, float]]:
    """Cumulative round-wins and score differential, averaged across records.

    A round-win is a strictly greater payoff in that round; ties win nothing.
    All records must share one fixed horizon.
    """
    if not records:
        raise InsufficientData("win_series needs at least one record")
    horizons = {r.horizon for r in records}
    if len(horizons) != 1 or not isinstance(next(iter(horizons)), FixedHorizon):
        raise MixedHorizons("win_series requires records sharing one fixed horizon")
    n = next(iter(horizons)).rounds

    cum_wins = np.zeros(n)
    cum_diff = np.zeros(n)
    count = 0
    for record in records:
        for _, _, own_pay, opp_pay in _perspectives(record, player_id):
            count += 1
            wins = 0.0
            diff = 0.0
            for t in range(n):
                wins += 1.0 if own_pay[t] > opp_pay[t] else 0.0
                diff += own_pay[t] - opp_pay[t]
                cum_wins[t] += wins
                cum_diff[t] += diff
    return [(t + 1, cum_wins[t] / count, cum_diff[t] / count) for t in range(n)]


# --- Adaptation around a known switch round ---


@dataclass
class AdaptationReport:
    """Cooperation and payoff dynamics around a mid-game strategy switch.

    ``adaptation_speed`` is the smallest t >= 1 such that at every round r in
    [k+t, k+t+window-1] the windowed rate entering r (the mean over rounds
    [r-window, r-1]) sits within epsilon of the end-of-game baseline; None if
    the rate never settles. Curves are indexed by offset from the switch
    round and pooled across records.
    """

    switch_round: int
    window: int
    epsilon: float
    pre_rate: float
    post_rate: float
    post_payoff: float
    baseline_rate: float
    adaptation_speed: int | None
    recovery_curve: list[tuple[int, float | None]]
    payoff_delta_curve: list[tuple[int, float | None]]
    records_used: int

    def to_json(self) -> dict:
        return {
            "switch_round": self.switch_round,
            "window": self.window,
            "epsilon": self.epsilon,
            "pre_rate": self.pre_rate,
            "post_rate": self.post_rate,
            "post_payoff": self.post_payoff,
            "baseline_rate": self.baseline_rate,
            "adaptation_speed": self.adaptation_speed,
            "recovery_curve": [[o, r] for o, r in self.recovery_curve],
            "payoff_delta_curve": [[o, d] for o, d in self.payoff_delta_curve],
            "records_used": self.records_used,
        }


def _switch_round_of(records: Sequence[MatchRecord]) -> int:
    ks = set()
    for record in records:
        value = record.metadata.get("switch_round")
        if value is None:
            raise MissingSwitchMetadata("record lacks switch_round metadata")
        ks.add(int(value))
    if len(ks) != 1:
        raise MissingSwitchMetadata(f"records disagree on switch_round: {sorted(ks)}")
    return ks.pop()


def adaptation_report(
    records: Sequence[MatchRecord],
    player_id: str,
    window: int = DEFAULT_WINDOW,
    epsilon: float = DEFAULT_EPSILON,
) -> AdaptationReport:
    """Measure how quickly a player settles after the opponent's switch."""
    if not records:
        raise InsufficientData("adaptation_report needs at least one record")
    if window < 1:
        raise ValueError("window must be >= 1")
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1)")
    k = _switch_round_of(records)

    seats = []
    for record in records:
        for own, _, pay, _ in _perspectives(record, player_id):
            if k - window < 1 or len(own) < k + window:
                raise InsufficientRounds(
                    f"switch at {k} with window {window} does not fit a "
                    f"{len(own)}-round record"
                )
            seats.append((own, pay))

    n = min(len(own) for own, _ in seats)

    def pooled_rate(lo: int, hi: int) -> float | None:
        """Pooled cooperation rate over 1-based rounds [lo, hi]."""
        lo = max(1, lo)
        num = den = 0
        for own, _ in seats:
            hi_r = min(hi, len(own))
            if hi_r < lo:
                continue
            num += sum(1 for a in own[lo - 1 : hi_r] if a is C)
            den += hi_r - lo + 1
        return num / den if den else None

    def pooled_payoff(lo: int, hi: int) -> float | None:
        lo = max(1, lo)
        num = den = 0
        for _, pay in seats:
            hi_r = min(hi, len(pay))
            if hi_r < lo:
                continue
            num += sum(pay[lo - 1 : hi_r])
            den += hi_r - lo + 1
        return num / den if den else None

    pre_rate = pooled_rate(k - window, k - 1)
    post_num = post_den = 0
    post_pay = 0.0
    for own, pay in seats:
        post_num += sum(1 for a in own[k - 1 :] if a is C)
        post_pay += sum(pay[k - 1 :])
        post_den += len(own) - (k - 1)
    post_rate = post_num / post_den
    post_payoff = post_pay / post_den
    baseline_num = baseline_den = 0
    for own, _ in seats:
        baseline_num += sum(1 for a in own[len(own) - window :] if a is C)
        baseline_den += window
    baseline = baseline_num / baseline_den

    def entering_rate(r: int) -> float | None:
        return pooled_rate(r - window, r - 1)

    adaptation_speed = None
    for t in range(1, n - k - window + 2):
        if all(
            (rate := entering_rate(r)) is not None and abs(rate - baseline) <= epsilon
            for r in range(k + t, k + t + window)
        ):
            adaptation_speed = t
            break

    pre_payoff = pooled_payoff(k - window, k - 1)
    recovery = []
    payoff_delta = []
    for offset in range(-window, n - k + 1):
        r = k + offset
        rate = entering_rate(r)
        recovery.append((offset, rate))
        pay = pooled_payoff(r - window, r - 1)
        payoff_delta.append(
            (offset, None if pay is None or pre_payoff is None else pay - pre_payoff)
        )

    return AdaptationReport(
        switch_round=k,
        window=window,
        epsilon=epsilon,
        pre_rate=pre_rate if pre_rate is not None else 0.0,
        post_rate=post_rate,
        post_payoff=post_payoff,
        baseline_rate=baseline,
        adaptation_speed=adaptation_speed,
        recovery_curve=recovery,
        payoff_delta_curve=payoff_delta,
        records_used=len(seats),
    )


# --- Pooled report assembly ---


def behavior_profiles(
    records: Sequence[MatchRecord], players: Sequence[str] | None = None
) -> dict[str, BehaviorProfile]:
    """Per-player profiles (good-partner included) for a record pool."""
    ids = list(players) if players is not None else _players_in_order(records)
    profiles = {}
    for player_id in ids:
        mine = [r for r in records if player_id in (r.player_a_id, r.player_b_id)]
        if not mine:
            continue
        events = extract_events(mine, player_id)
        profile = behavior_profile(events)
        profiles[player_id] = BehaviorProfile(
            cooperation_rate=profile.cooperation_rate,
            niceness=profile.niceness,
            forgiveness=profile.forgiveness,
            retaliation=profile.retaliation,
            generosity=profile.generosity,
            good_partner=good_partner(mine, player_id),
        )
    return profiles


def metrics_report(
    records: Sequence[MatchRecord], players: Sequence[str] | None = None
) -> dict:
    """Full JSON-ready metric report: profiles plus morality ratings."""
    profiles = behavior_profiles(records, players)
    ratings = morality_ratings(records, players)
    return {
        "profiles": {p: prof.to_json() for p, prof in profiles.items()},
        "morality": ratings.to_json(),
    }


def report_csv_rows(report: dict) -> list[tuple[str, str, str, str]]:
    """Tidy rows (player, metric, value, support) for the report CSV."""
    rows = []
    for player, profile in report["profiles"].items():
        for metric in ("cooperation_rate", "niceness", "forgiveness", "retaliation", "generosity", "good_partner"):
            ratio = profile.get(metric)
            if ratio is None:
                continue
            value = ratio["value"]
            rows.append(
                (
                    player,
                    metric,
                    "" if value is None else f"{value:.6f}",
                    f"{ratio['numerator']:g}/{ratio['denominator']:g}",
                )
            )
    for method in ("eigenjesus", "eigenmoses"):
        meta = report["morality"]["eigen_meta"][method]
        for player, value in report["morality"][method].items():
            rows.append((player, method, f"{value:.6f}", f"iters={meta['iterations']}"))
    return rows
