"""Experiment orchestration: round-robin tournaments, switch batteries,
run-directory persistence, and plot-data emission.

Determinism contract: a rerun with the same config and base seed reproduces
byte-identical records.jsonl and summary.json. Per-match seeds are derived
from the pairing identity (player ids), not schedule positions, so removing
one player never perturbs anyone else's matches. Matches may execute in
parallel; results are always assembled in (pair, seed) order.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import (
    AgentFailure,
    ConfigError,
    MissingSeries,
    NoConvergence,
    PersistenceError,
    SchemaVersionMismatch,
)
from .game import (
    FixedHorizon,
    Horizon,
    MatchRecord,
    PayoffMatrix,
    horizon_from_json,
    play_match,
    read_records,
    write_records,
)
from .metrics import (
    AdaptationReport,
    BehaviorProfile,
    MoralityRatings,
    Ratio,
    adaptation_report,
    behavior_profiles,
    cooperation_rate_series,
    metrics_report,
    morality_ratings,
    win_series,
)
from .rng import derive_seed
from .strategies import (
    StrategySpec,
    catalog_entry,
    compose_switch,
    has_strategy,
    make_strategy,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

DEFAULT_MATRIX = PayoffMatrix(5, 3, 1, 0)
DEFAULT_ROUNDS = 50
DEFAULT_SEEDS = 20


def _require_keys(obj: dict, known: set[str], context: str) -> None:
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown {context} keys: {sorted(unknown)}")


def _check_spec_params(spec: StrategySpec) -> None:
    """Reject config specs that lean on defaults the catalog marks explicit."""
    entry = catalog_entry(spec.name)
    for param in entry.explicit_in_config:
        if param not in spec.params:
            raise ConfigError(
                f"{spec.name} requires explicit parameter {param!r} in experiment configs"
            )
    if spec.name == "switch":
        for side in ("a", "b"):
            if side in spec.params:
                _check_spec_params(StrategySpec.from_json(spec.params[side]))


def describe_spec(spec: StrategySpec) -> str:
    """Short stable display id for a spec."""
    if spec.name == "switch":
        a = describe_spec(StrategySpec.from_json(spec.params["a"]))
        b = describe_spec(StrategySpec.from_json(spec.params["b"]))
        return f"switch({a}->{b}@{spec.params['switch_round']})"
    if spec.name == "external_agent":
        endpoint = spec.params.get("endpoint", {})
        tag = endpoint.get("model_name") or endpoint.get("kind", "agent")
        return f"external_agent[{tag}]"
    if spec.params:
        inner = ",".join(f"{k}={spec.params[k]}" for k in sorted(spec.params))
        return f"{spec.name}({inner})"
    return spec.name


def player_ids_for(specs: list[StrategySpec]) -> list[str]:
    """Unique display ids, suffixing duplicates with #2, #3, ..."""
    ids: list[str] = []
    counts: dict[str, int] = {}
    for spec in specs:
        base = describe_spec(spec)
        counts[base] = counts.get(base, 0) + 1
        ids.append(base if counts[base] == 1 else f"{base}#{counts[base]}")
    return ids


@dataclass(frozen=True)
class TournamentConfig:
    players: tuple[StrategySpec, ...]
    matrix: PayoffMatrix = DEFAULT_MATRIX
    horizon: Horizon = FixedHorizon(DEFAULT_ROUNDS)
    seeds_per_pairing: int = DEFAULT_SEEDS
    include_self_play: bool = False
    base_seed: int = 0
    parallelism: int = 1

    def __post_init__(self):
        if len(self.players) < 2:
            raise ConfigError("a tournament needs at least two players")
        if self.seeds_per_pairing < 1:
            raise ConfigError("seeds_per_pairing must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def to_json(self) -> dict:
        return {
            "players": [s.to_json() for s in self.players],
            "matrix": self.matrix.to_json(),
            "horizon": self.horizon.to_json(),
            "seeds_per_pairing": self.seeds_per_pairing,
            "include_self_play": self.include_self_play,
            "base_seed": self.base_seed,
            "parallelism": self.parallelism,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TournamentConfig":
        _require_keys(
            obj,
            {
                "players",
                "matrix",
                "horizon",
                "seeds_per_pairing",
                "include_self_play",
                "base_seed",
                "parallelism",
            },
            "tournament config",
        )
        if "players" not in obj:
            raise ConfigError("tournament config requires 'players'")
        specs = [StrategySpec.from_json(p) for p in obj["players"]]
        for spec in specs:
            _check_spec_params(spec)
            make_strategy(spec)  # validates name and params up front
        return cls(
            players=tuple(specs),
            matrix=PayoffMatrix.from_json(obj["matrix"]) if "matrix" in obj else DEFAULT_MATRIX,
            horizon=(
                horizon_from_json(obj["horizon"])
                if "horizon" in obj
                else FixedHorizon(DEFAULT_ROUNDS)
            ),
            seeds_per_pairing=obj.get("seeds_per_pairing", DEFAULT_SEEDS),
            include_self_play=obj.get("include_self_play", False),
            base_seed=obj.get("base_seed", 0),
            parallelism=obj.get("parallelism", 1),
        )


@dataclass(frozen=True)
class RankingEntry:
    player_id: str
    mean_score_per_round: float
    wins: int
    ties: int
    matches: int
    total_score: float
    total_rounds: int

    def to_json(self) -> dict:
        return {
            "player_id": self.player_id,
            "mean_score_per_round": self.mean_score_per_round,
            "wins": self.wins,
            "ties": self.ties,
            "matches": self.matches,
            "total_score": self.total_score,
            "total_rounds": self.total_rounds,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RankingEntry":
        return cls(**obj)


def ranking_from_records(records: list[MatchRecord], player_ids: list[str]) -> list[RankingEntry]:
    """Mean score per round, descending; ties broken by wins, then name."""
    score: dict[str, float] = {p: 0 for p in player_ids}
    rounds: dict[str, int] = {p: 0 for p in player_ids}
    wins: dict[str, int] = {p: 0 for p in player_ids}
    ties: dict[str, int] = {p: 0 for p in player_ids}
    matches: dict[str, int] = {p: 0 for p in player_ids}
    for record in records:
        a, b = record.player_a_id, record.player_b_id
        n = record.n_rounds()
        for pid, total in ((a, record.total_a), (b, record.total_b)):
            if pid in score:
                score[pid] += total
                rounds[pid] += n
                matches[pid] += 1
        if a in score and b in score:
            if record.total_a > record.total_b:
                wins[a] += 1
            elif record.total_b > record.total_a:
                wins[b] += 1
            else:
                ties[a] += 1
                if a != b:
                    ties[b] += 1
    entries = [
        RankingEntry(
            player_id=p,
            mean_score_per_round=score[p] / rounds[p] if rounds[p] else 0.0,
            wins=wins[p],
            ties=ties[p],
            matches=matches[p],
            total_score=score[p],
            total_rounds=rounds[p],
        )
        for p in player_ids
    ]
    entries.sort(key=lambda e: (-e.mean_score_per_round, -e.wins, e.player_id))
    return entries


@dataclass
class TournamentResult:
    config: TournamentConfig
    player_ids: list[str]
    records: list[MatchRecord]
    failures: list[dict]
    ranking: list[RankingEntry]
    profiles: dict[str, BehaviorProfile]
    morality: MoralityRatings | None
    morality_error: str | None = None
    transcripts: dict[str, list[str]] = field(default_factory=dict, compare=False)

    def summary_json(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "kind": "tournament",
            "config": self.config.to_json(),
            "player_ids": list(self.player_ids),
            "n_records": len(self.records),
            "failures": list(self.failures),
            "ranking": [e.to_json() for e in self.ranking],
            "profiles": {p: prof.to_json() for p, prof in self.profiles.items()},
            "morality": self.morality.to_json() if self.morality else None,
            "morality_error": self.morality_error,
        }


def _match_task(a_spec, b_spec, a_id, b_id, matrix, horizon, seed, extra_meta=None):
    """Run one match with fresh instances; returns (record|None, failure|None, transcripts)."""
    player_a = make_strategy(a_spec)
    player_b = make_strategy(b_spec)
    transcripts = {}
    try:
        record = play_match(
            player_a,
            player_b,
            matrix,
            horizon,
            seed,
            a_id=a_id,
            b_id=b_id,
            metadata=extra_meta,
        )
        failure = None
    except AgentFailure as exc:
        record = None
        failure = {
            "player_a_id": a_id,
            "player_b_id": b_id,
            "seed": seed,
            "error": str(exc),
        }
    for pid, player in ((a_id, player_a), (b_id, player_b)):
        transcript = getattr(player, "transcript", None)
        if transcript is not None and transcript.entries:
            transcripts[f"{pid}__seed{seed}"] = transcript.to_json_lines()
    return record, failure, transcripts


def _run_schedule(tasks: list[tuple], parallelism: int):
    """Execute match tasks, preserving submission order in the results."""
    if parallelism <= 1:
        return [_match_task(*task) for task in tasks]
    with concurrent.futures.ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(_match_task, *task) for task in tasks]
        return [f.result() for f in futures]


def _spec_uses_agent(spec: StrategySpec) -> bool:
    if spec.name == "external_agent":
        return True
    if spec.name == "switch":
        return any(
            _spec_uses_agent(StrategySpec.from_json(spec.params[s])) for s in ("a", "b")
        )
    return False


def _ping_agent(spec: StrategySpec, matrix: PayoffMatrix) -> str | None:
    """One throwaway move request; returns an error string if unreachable."""
    try:
        player = make_strategy(spec)
        player.begin_match(matrix, None)
        player.cooperation_probability([])
        player.end_match()
        return None
    except AgentFailure as exc:
        return str(exc)


def run_round_robin(cfg: TournamentConfig) -> TournamentResult:
    """Play every pairing for every seed and assemble ranking plus metrics.

    Agent failures never abort the tournament: the affected matches land in
    the failures list and are excluded from every rating denominator.
    """
    ids = player_ids_for(list(cfg.players))

    unreachable: dict[int, str] = {}
    for idx, spec in enumerate(cfg.players):
        if _spec_uses_agent(spec):
            error = _ping_agent(spec, cfg.matrix)
            if error is not None:
                unreachable[idx] = error
                logger.warning("player %s unreachable, matches will be skipped: %s",
                               ids[idx], error)

    tasks = []
    skipped_failures = []
    n = len(cfg.players)
    for i in range(n):
        for j in range(i, n):
            if i == j and not cfg.include_self_play:
                continue
            for seed_index in range(cfg.seeds_per_pairing):
                seed = derive_seed(cfg.base_seed, ids[i], ids[j], seed_index)
                if i in unreachable or j in unreachable:
                    error = unreachable.get(i) or unreachable.get(j)
                    skipped_failures.append(
                        {
                            "player_a_id": ids[i],
                            "player_b_id": ids[j],
                            "seed": seed,
                            "error": f"ping failed: {error}",
                        }
                    )
                    continue
                tasks.append(
                    (cfg.players[i], cfg.players[j], ids[i], ids[j], cfg.matrix,
                     cfg.horizon, seed, None)
                )

    outcomes = _run_schedule(tasks, cfg.parallelism)

    records: list[MatchRecord] = []
    failures: list[dict] = list(skipped_failures)
    transcripts: dict[str, list[str]] = {}
    for record, failure, t in outcomes:
        if record is not None:
            records.append(record)
        if failure is not None:
            failures.append(failure)
        transcripts.update(t)

    ranking = ranking_from_records(records, ids)
    profiles = behavior_profiles(records, ids) if records else {}
    morality = None
    morality_error = None
    if records:
        try:
            morality = morality_ratings(records, ids)
        except NoConvergence as exc:
            morality_error = str(exc)

    return TournamentResult(
        config=cfg,
        player_ids=ids,
        records=records,
        failures=failures,
        ranking=ranking,
        profiles=profiles,
        morality=morality,
        morality_error=morality_error,
        transcripts=transcripts,
    )


# --- Switch batteries ---


@dataclass(frozen=True)
class SwitchCondition:
    label: str
    pre: StrategySpec
    post: StrategySpec
    switch_round: int

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "pre": self.pre.to_json(),
            "post": self.post.to_json(),
            "switch_round": self.switch_round,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SwitchCondition":
        _require_keys(obj, {"label", "pre", "post", "switch_round"}, "switch condition")
        return cls(
            label=obj["label"],
            pre=StrategySpec.from_json(obj["pre"]),
            post=StrategySpec.from_json(obj["post"]),
            switch_round=obj["switch_round"],
        )


def canonical_conditions(switch_round: int = 26) -> list[SwitchCondition]:
    """The four standard conditions. "Competitive" is mapped to tit_for_tat."""
    coop = StrategySpec("always_cooperate")
    defect = StrategySpec("always_defect")
    tft = StrategySpec("tit_for_tat")
    return [
        SwitchCondition("coop_to_defect", coop, defect, switch_round),
        SwitchCondition("defect_to_coop", defect, coop, switch_round),
        SwitchCondition("coop_to_competitive", coop, tft, switch_round),
        SwitchCondition("defect_to_competitive", defect, tft, switch_round),
    ]


@dataclass(frozen=True)
class SwitchExperimentConfig:
    subject: StrategySpec
    conditions: tuple[SwitchCondition, ...]
    rounds: int = DEFAULT_ROUNDS
    seeds: int = DEFAULT_SEEDS
    window: int = 5
    epsilon: float = 0.1
    matrix: PayoffMatrix = DEFAULT_MATRIX
    base_seed: int = 0
    parallelism: int = 1

    def __post_init__(self):
        if not self.conditions:
            raise ConfigError("switch experiment needs at least one condition")
        labels = [c.label for c in self.conditions]
        if len(set(labels)) != len(labels):
            raise ConfigError("condition labels must be unique")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError("epsilon must lie in (0, 1)")
        for cond in self.conditions:
            if not (self.window < cond.switch_round < self.rounds - self.window):
                raise ConfigError(
                    f"condition {cond.label!r}: switch_round {cond.switch_round} must lie "
                    f"strictly between window ({self.window}) and rounds - window "
                    f"({self.rounds - self.window})"
                )

    def to_json(self) -> dict:
        return {
            "subject": self.subject.to_json(),
            "conditions": [c.to_json() for c in self.conditions],
            "rounds": self.rounds,
            "seeds": self.seeds,
            "window": self.window,
            "epsilon": self.epsilon,
            "matrix": self.matrix.to_json(),
            "base_seed": self.base_seed,
            "parallelism": self.parallelism,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SwitchExperimentConfig":
        _require_keys(
            obj,
            {
                "subject",
                "conditions",
                "switch_round",
                "rounds",
                "seeds",
                "window",
                "epsilon",
                "matrix",
                "base_seed",
                "parallelism",
            },
            "switch config",
        )
        if "subject" not in obj:
            raise ConfigError("switch config requires 'subject'")
        subject = StrategySpec.from_json(obj["subject"])
        _check_spec_params(subject)
        if "conditions" in obj:
            conditions = tuple(SwitchCondition.from_json(c) for c in obj["conditions"])
        else:
            conditions = tuple(canonical_conditions(obj.get("switch_round", 26)))
        return cls(
            subject=subject,
            conditions=conditions,
            rounds=obj.get("rounds", DEFAULT_ROUNDS),
            seeds=obj.get("seeds", DEFAULT_SEEDS),
            window=obj.get("window", 5),
            epsilon=obj.get("epsilon", 0.1),
            matrix=PayoffMatrix.from_json(obj["matrix"]) if "matrix" in obj else DEFAULT_MATRIX,
            base_seed=obj.get("base_seed", 0),
            parallelism=obj.get("parallelism", 1),
        )


@dataclass
class SwitchExperimentResult:
    config: SwitchExperimentConfig
    subject_id: str
    reports: dict[str, AdaptationReport]
    records: list[MatchRecord]
    failures: list[dict]
    skipped: list[dict]
    transcripts: dict[str, list[str]] = field(default_factory=dict, compare=False)

    def summary_json(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "kind": "switch",
            "config": self.config.to_json(),
            "subject_id": self.subject_id,
            "n_records": len(self.records),
            "failures": list(self.failures),
            "skipped": list(self.skipped),
            "reports": {label: r.to_json() for label, r in self.reports.items()},
        }


def run_switch_battery(cfg: SwitchExperimentConfig) -> SwitchExperimentResult:
    """Play the subject against each switch condition for every seed.

    Conditions referencing strategies missing from the catalog are skipped
    with a warning rather than failing the battery.
    """
    subject_id = describe_spec(cfg.subject)
    horizon = FixedHorizon(cfg.rounds)

    reports: dict[str, AdaptationReport] = {}
    all_records: list[MatchRecord] = []
    failures: list[dict] = []
    skipped: list[dict] = []
    transcripts: dict[str, list[str]] = {}

    for cond in cfg.conditions:
        missing = [
            s.name
            for s in (cfg.subject, cond.pre, cond.post)
            if not has_strategy(s.name)
        ]
        if missing:
            skipped.append({"label": cond.label, "missing": missing})
            logger.warning("skipping condition %s: unknown strategies %s", cond.label, missing)
            continue

        opponent = compose_switch(cond.pre, cond.post, cond.switch_round)
        opponent_id = describe_spec(opponent)
        tasks = []
        for seed_index in range(cfg.seeds):
            seed = derive_seed(cfg.base_seed, "switch", cond.label, subject_id, seed_index)
            tasks.append(
                (
                    cfg.subject,
                    opponent,
                    subject_id,
                    opponent_id,
                    cfg.matrix,
                    horizon,
                    seed,
                    {"condition": cond.label},
                )
            )
        outcomes = _run_schedule(tasks, cfg.parallelism)
        cond_records = []
        for record, failure, t in outcomes:
            if record is not None:
                cond_records.append(record)
            if failure is not None:
                failure = {**failure, "condition": cond.label}
                failures.append(failure)
            transcripts.update(t)
        all_records.extend(cond_records)
        if cond_records:
            reports[cond.label] = adaptation_report(
                cond_records, subject_id, window=cfg.window, epsilon=cfg.epsilon
            )

    return SwitchExperimentResult(
        config=cfg,
        subject_id=subject_id,
        reports=reports,
        records=all_records,
        failures=failures,
        skipped=skipped,
        transcripts=transcripts,
    )


# --- Persistence ---


def persist(result: TournamentResult | SwitchExperimentResult, path: str | Path) -> Path:
    """Write a run directory: records.jsonl + summary.json (+ transcripts/)."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with open(out / "records.jsonl", "w", encoding="utf-8") as fp:
            write_records(result.records, fp)
        with open(out / "summary.json", "w", encoding="utf-8") as fp:
            json.dump(result.summary_json(), fp, sort_keys=True, indent=2)
            fp.write("\n")
        if result.transcripts:
            tdir = out / "transcripts"
            tdir.mkdir(exist_ok=True)
            for key, lines in sorted(result.transcripts.items()):
                safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in key)
                with open(tdir / f"{safe}.jsonl", "w", encoding="utf-8") as fp:
                    fp.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise PersistenceError(f"could not write run directory {out}: {exc}") from exc
    return out


def _ratio_from_json(obj: dict) -> Ratio:
    return Ratio(numerator=obj["numerator"], denominator=obj["denominator"])


def _profile_from_json(obj: dict) -> BehaviorProfile:
    return BehaviorProfile(
        cooperation_rate=_ratio_from_json(obj["cooperation_rate"]),
        niceness=_ratio_from_json(obj["niceness"]),
        forgiveness=_ratio_from_json(obj["forgiveness"]),
        retaliation=_ratio_from_json(obj["retaliation"]),
        generosity=_ratio_from_json(obj["generosity"]),
        good_partner=_ratio_from_json(obj["good_partner"]) if obj.get("good_partner") else None,
    )


def _morality_from_json(obj: dict | None) -> MoralityRatings | None:
    if obj is None:
        return None
    return MoralityRatings(
        good_partner={p: _ratio_from_json(r) for p, r in obj["good_partner"].items()},
        eigenjesus=dict(obj["eigenjesus"]),
        eigenmoses=dict(obj["eigenmoses"]),
        eigen_meta=dict(obj["eigen_meta"]),
    )


def _adaptation_from_json(obj: dict) -> AdaptationReport:
    return AdaptationReport(
        switch_round=obj["switch_round"],
        window=obj["window"],
        epsilon=obj["epsilon"],
        pre_rate=obj["pre_rate"],
        post_rate=obj["post_rate"],
        post_payoff=obj["post_payoff"],
        baseline_rate=obj["baseline_rate"],
        adaptation_speed=obj["adaptation_speed"],
        recovery_curve=[(o, r) for o, r in obj["recovery_curve"]],
        payoff_delta_curve=[(o, d) for o, d in obj["payoff_delta_curve"]],
        records_used=obj["records_used"],
    )


def load(path: str | Path) -> TournamentResult | SwitchExperimentResult:
    """Reload a run directory persisted by :func:`persist`."""
    out = Path(path)
    summary_path = out / "summary.json"
    records_path = out / "records.jsonl"
    try:
        with open(summary_path, encoding="utf-8") as fp:
            summary = json.load(fp)
    except OSError as exc:
        raise PersistenceError(f"could not read {summary_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PersistenceError(f"malformed summary.json: {exc.msg}", line=exc.lineno) from exc

    version = summary.get("v")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(found=version, supported=SCHEMA_VERSION)

    try:
        with open(records_path, encoding="utf-8") as fp:
            records = list(read_records(fp))
    except OSError as exc:
        raise PersistenceError(f"could not read {records_path}: {exc}") from exc

    kind = summary.get("kind")
    if kind == "tournament":
        return TournamentResult(
            config=TournamentConfig.from_json(summary["config"]),
            player_ids=list(summary["player_ids"]),
            records=records,
            failures=list(summary["failures"]),
            ranking=[RankingEntry.from_json(e) for e in summary["ranking"]],
            profiles={p: _profile_from_json(v) for p, v in summary["profiles"].items()},
            morality=_morality_from_json(summary["morality"]),
            morality_error=summary.get("morality_error"),
        )
    if kind == "switch":
        return SwitchExperimentResult(
            config=SwitchExperimentConfig.from_json(summary["config"]),
            subject_id=summary["subject_id"],
            reports={
                label: _adaptation_from_json(r) for label, r in summary["reports"].items()
            },
            records=records,
            failures=list(summary["failures"]),
            skipped=list(summary["skipped"]),
        )
    raise PersistenceError(f"unknown result kind {kind!r} in summary.json")


# --- Plot data ---

PLOT_KINDS = ("win_series", "coop_series", "recovery", "overlay", "rankings")

PLOT_WINDOW = 5


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_plot_data(
    result: TournamentResult | SwitchExperimentResult,
    kind: str,
    path: str | Path,
    player: str | None = None,
) -> Path:
    """Write one tidy CSV of plot-ready series.

    kinds: win_series (opponent, round, cum_wins, cum_diff) for one focal
    player; coop_series (windowed cooperation rates per round); recovery
    (per-condition windowed rate plus pre-switch-normalized recovery rate);
    overlay (per-condition cooperation change in percent and payoff change);
    rankings (tournament table).
    """
    if kind not in PLOT_KINDS:
        raise MissingSeries(f"unknown plot kind {kind!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    rows: list[list] = []
    if kind == "win_series":
        if not isinstance(result, TournamentResult):
            raise MissingSeries("win_series requires a tournament result")
        focal = player or result.player_ids[0]
        by_opponent: dict[str, list[MatchRecord]] = {}
        for record in result.records:
            if focal not in (record.player_a_id, record.player_b_id):
                continue
            by_opponent.setdefault(record.opponent_of(focal), []).append(record)
        if not by_opponent:
            raise MissingSeries(f"no records involve player {focal!r}")
        header = ["opponent", "round", "cum_wins", "cum_diff"]
        for opponent in sorted(by_opponent):
            for round_no, wins, diff in win_series(by_opponent[opponent], focal):
                rows.append([opponent, round_no, _fmt(wins), _fmt(diff)])
    elif kind == "coop_series":
        if isinstance(result, TournamentResult):
            header = ["player", "opponent", "round", "coop_rate"]
            groups: dict[tuple[str, str], list] = {}
            for record in result.records:
                for pid in {record.player_a_id, record.player_b_id}:
                    opp = record.opponent_of(pid)
                    groups.setdefault((pid, opp), []).append(record)
            for (pid, opp), recs in sorted(groups.items()):
                series = [cooperation_rate_series(r, pid, PLOT_WINDOW) for r in recs]
                length = min(len(s) for s in series)
                for t in range(length):
                    mean = sum(s[t][1] for s in series) / len(series)
                    rows.append([pid, opp, t + 1, _fmt(mean)])
        else:
            header = ["condition", "round", "coop_rate"]
            for label in sorted(result.reports):
                recs = [r for r in result.records if r.metadata.get("condition") == label]
                series = [
                    cooperation_rate_series(r, result.subject_id, PLOT_WINDOW) for r in recs
                ]
                length = min(len(s) for s in series)
                for t in range(length):
                    mean = sum(s[t][1] for s in series) / len(series)
                    rows.append([label, t + 1, _fmt(mean)])
    elif kind == "recovery":
        if not isinstance(result, SwitchExperimentResult):
            raise MissingSeries("recovery requires a switch experiment result")
        header = ["condition", "offset", "coop_rate", "recovery_rate"]
        for label in sorted(result.reports):
            report = result.reports[label]
            for offset, rate in report.recovery_curve:
                normalized = (
                    None if rate is None or report.pre_rate == 0 else rate / report.pre_rate
                )
                rows.append([label, offset, _fmt(rate), _fmt(normalized)])
    elif kind == "overlay":
        if not isinstance(result, SwitchExperimentResult):
            raise MissingSeries("overlay requires a switch experiment result")
        header = ["condition", "offset", "coop_rate_change_pct", "payoff_change"]
        for label in sorted(result.reports):
            report = result.reports[label]
            deltas = dict(report.payoff_delta_curve)
            for offset, rate in report.recovery_curve:
                change = None if rate is None else (rate - report.pre_rate) * 100.0
                rows.append([label, offset, _fmt(change), _fmt(deltas.get(offset))])
    else:  # rankings
        if not isinstance(result, TournamentResult):
            raise MissingSeries("rankings requires a tournament result")
        header = ["player", "mean_score_per_round", "wins", "ties", "matches"]
        for entry in result.ranking:
            rows.append(
                [
                    entry.player_id,
                    _fmt(entry.mean_score_per_round),
                    entry.wins,
                    entry.ties,
                    entry.matches,
                ]
            )

    try:
        with open(path, "w", encoding="utf-8", newline="") as fp:
            writer = csv.writer(fp)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise PersistenceError(f"could not write plot CSV {path}: {exc}") from exc
    return path


def write_standard_plots(result: TournamentResult | SwitchExperimentResult, out_dir: Path) -> None:
    """Emit every plot kind that applies to the result into out_dir/plots/."""
    plots = Path(out_dir) / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    if isinstance(result, TournamentResult):
        kinds = ["win_series", "coop_series", "rankings"]
    else:
        kinds = ["coop_series", "recovery", "overlay"]
    for kind in kinds:
        if isinstance(result, SwitchExperimentResult) and not result.reports:
            continue
        emit_plot_data(result, kind, plots / f"{kind}.csv")
