from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from ipdlab.errors import ConfigError, MissingSeries, PersistenceError, SchemaVersionMismatch
from ipdlab.experiments import (
    SwitchCondition,
    SwitchExperimentConfig,
    TournamentConfig,
    canonical_conditions,
    describe_spec,
    emit_plot_data,
    load,
    persist,
    player_ids_for,
    ranking_from_records,
    run_round_robin,
    run_switch_battery,
)
from ipdlab.metrics import metrics_report
from ipdlab.strategies import StrategySpec

from conftest import agent_command, spec

TRIO = (
    StrategySpec("always_cooperate"),
    StrategySpec("always_defect"),
    StrategySpec("tit_for_tat"),
)


def trio_config(**kw) -> TournamentConfig:
    defaults = dict(players=TRIO, seeds_per_pairing=1, base_seed=5)
    defaults.update(kw)
    return TournamentConfig(**defaults)


# --- round robin ---

def test_round_robin_hand_summed_example():
    result = run_round_robin(trio_config())
    totals = {e.player_id: e.total_score for e in result.ranking}
    assert totals == {"always_defect": 304, "tit_for_tat": 199, "always_cooperate": 150}
    assert result.ranking[0].player_id == "always_defect"
    assert result.ranking[0].mean_score_per_round == pytest.approx(3.04)


def test_round_robin_match_count():
    result = run_round_robin(trio_config(seeds_per_pairing=20))
    assert len(result.records) == 60  # 3 pairs x 20 seeds
    assert not result.failures


def test_round_robin_self_play_count():
    result = run_round_robin(trio_config(include_self_play=True, seeds_per_pairing=2))
    assert len(result.records) == 12  # 6 pairings x 2 seeds


def test_round_robin_rerun_identical():
    first = run_round_robin(trio_config(seeds_per_pairing=4))
    second = run_round_robin(trio_config(seeds_per_pairing=4))
    assert json.dumps(first.summary_json(), sort_keys=True) == json.dumps(
        second.summary_json(), sort_keys=True
    )
    assert first.records == second.records


def test_round_robin_score_conservation():
    result = run_round_robin(trio_config(seeds_per_pairing=3))
    per_player = sum(e.total_score for e in result.ranking)
    per_record = sum(r.total_a + r.total_b for r in result.records)
    assert per_player == per_record


def test_round_robin_seed_uniqueness():
    result = run_round_robin(
        trio_config(players=TRIO + (spec("random", p_coop=0.5), StrategySpec("grim")),
                    seeds_per_pairing=20)
    )
    seeds = [r.seed for r in result.records]
    assert len(seeds) == len(set(seeds))


def test_excluding_player_leaves_other_pairings_unchanged():
    full = run_round_robin(trio_config(seeds_per_pairing=3))
    reduced = run_round_robin(
        trio_config(players=(TRIO[0], TRIO[2]), seeds_per_pairing=3)
    )
    survivors = [
        r for r in full.records
        if {r.player_a_id, r.player_b_id} == {"always_cooperate", "tit_for_tat"}
    ]
    assert survivors == reduced.records


def test_parallel_execution_matches_serial():
    serial = run_round_robin(trio_config(seeds_per_pairing=5, parallelism=1))
    parallel = run_round_robin(trio_config(seeds_per_pairing=5, parallelism=4))
    assert serial.records == parallel.records
    a, b = serial.summary_json(), parallel.summary_json()
    a["config"].pop("parallelism")
    b["config"].pop("parallelism")
    assert a == b


def test_ranking_recomputable_from_records():
    result = run_round_robin(trio_config(seeds_per_pairing=2))
    assert ranking_from_records(result.records, result.player_ids) == result.ranking


def test_duplicate_specs_get_distinct_ids():
    ids = player_ids_for([StrategySpec("grim"), StrategySpec("grim")])
    assert ids == ["grim", "grim#2"]


def test_tournament_with_failing_agent_records_failures():
    bad_agent = spec(
        "external_agent",
        endpoint={
            "kind": "subprocess",
            "address": agent_command("garbage"),
            "timeout": 3.0,
            "max_retries": 0,
        },
    )
    cfg = TournamentConfig(players=TRIO + (bad_agent,), seeds_per_pairing=1, base_seed=5)
    result = run_round_robin(cfg)
    # the three classical pairings survive, the agent's three matches fail
    assert len(result.records) == 3
    assert len(result.failures) == 3
    assert all("ping failed" in f["error"] for f in result.failures)
    ranked = {e.player_id: e.matches for e in result.ranking}
    assert ranked[describe_spec(bad_agent)] == 0


# --- switch battery ---

def test_switch_battery_tft_post_rate():
    cfg = SwitchExperimentConfig(
        subject=StrategySpec("tit_for_tat"),
        conditions=(canonical_conditions(26)[0],),
        rounds=50,
        seeds=5,
        window=1,
        epsilon=0.01,
        base_seed=9,
    )
    result = run_switch_battery(cfg)
    report = result.reports["coop_to_defect"]
    assert report.post_rate == pytest.approx(1 / 25)
    assert report.adaptation_speed == 2


def test_switch_battery_counts():
    cfg = SwitchExperimentConfig(
        subject=StrategySpec("tit_for_tat"),
        conditions=tuple(canonical_conditions(26)[:2]),
        seeds=20,
        base_seed=9,
    )
    result = run_switch_battery(cfg)
    assert len(result.records) == 40
    assert len(result.reports) == 2
    assert all(r.metadata["switch_round"] == "26" for r in result.records)


def test_switch_battery_constant_subject_flat():
    cfg = SwitchExperimentConfig(
        subject=StrategySpec("always_cooperate"),
        conditions=(canonical_conditions(26)[0],),
        seeds=2,
        base_seed=9,
    )
    report = run_switch_battery(cfg).reports["coop_to_defect"]
    assert all(r == 1.0 for _, r in report.recovery_curve if r is not None)


def test_switch_battery_skips_missing_strategies():
    cfg = SwitchExperimentConfig(
        subject=StrategySpec("tit_for_tat"),
        conditions=(
            SwitchCondition("real", StrategySpec("always_cooperate"),
                            StrategySpec("always_defect"), 26),
            SwitchCondition("ghost", StrategySpec("not_installed_strategy"),
                            StrategySpec("always_defect"), 26),
        ),
        seeds=2,
        base_seed=9,
    )
    result = run_switch_battery(cfg)
    assert "real" in result.reports
    assert "ghost" not in result.reports
    assert result.skipped == [{"label": "ghost", "missing": ["not_installed_strategy"]}]


def test_switch_config_validation():
    with pytest.raises(ConfigError):
        SwitchExperimentConfig(
            subject=StrategySpec("tit_for_tat"),
            conditions=(canonical_conditions(3)[0],),  # k=3 within window 5
            window=5,
        )
    with pytest.raises(ConfigError):
        SwitchExperimentConfig(
            subject=StrategySpec("tit_for_tat"),
            conditions=(canonical_conditions(26)[0], canonical_conditions(26)[0]),
        )


# --- config files ---

def test_tournament_config_round_trip():
    cfg = trio_config(seeds_per_pairing=7)
    assert TournamentConfig.from_json(cfg.to_json()) == cfg


def test_tournament_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        TournamentConfig.from_json({"players": [], "surprise": 1})


def test_tournament_config_requires_explicit_generosity():
    good = {
        "players": [
            {"name": "tit_for_tat"},
            {"name": "generous_tit_for_tat", "params": {"p": 0.9}},
        ]
    }
    TournamentConfig.from_json(good)
    bad = {"players": [{"name": "tit_for_tat"}, {"name": "generous_tit_for_tat"}]}
    with pytest.raises(ConfigError):
        TournamentConfig.from_json(bad)


def test_switch_config_canonical_default():
    cfg = SwitchExperimentConfig.from_json(
        {"subject": {"name": "tit_for_tat"}, "switch_round": 26, "seeds": 2}
    )
    assert [c.label for c in cfg.conditions] == [
        "coop_to_defect",
        "defect_to_coop",
        "coop_to_competitive",
        "defect_to_competitive",
    ]


# --- persistence ---

def test_tournament_round_trip(tmp_path):
    result = run_round_robin(trio_config(seeds_per_pairing=2))
    persist(result, tmp_path / "run")
    loaded = load(tmp_path / "run")
    assert loaded == result


def test_switch_round_trip(tmp_path):
    cfg = SwitchExperimentConfig(
        subject=StrategySpec("tit_for_tat"),
        conditions=tuple(canonical_conditions(26)),
        seeds=3,
        base_seed=9,
    )
    result = run_switch_battery(cfg)
    persist(result, tmp_path / "run")
    loaded = load(tmp_path / "run")
    assert loaded == result


def test_metrics_recomputable_from_persisted_records(tmp_path):
    result = run_round_robin(trio_config(seeds_per_pairing=2))
    persist(result, tmp_path / "run")
    loaded = load(tmp_path / "run")
    recomputed = metrics_report(loaded.records, loaded.player_ids)
    embedded = {p: prof.to_json() for p, prof in result.profiles.items()}
    assert recomputed["profiles"] == embedded
    assert recomputed["morality"] == result.morality.to_json()


def test_load_truncated_records_reports_line(tmp_path):
    result = run_round_robin(trio_config())
    persist(result, tmp_path / "run")
    records = tmp_path / "run" / "records.jsonl"
    content = records.read_text().splitlines()
    content[1] = content[1][: len(content[1]) // 2]  # chop a line in half
    records.write_text("\n".join(content) + "\n")
    with pytest.raises(PersistenceError) as err:
        load(tmp_path / "run")
    assert err.value.line == 2


def test_load_future_version_rejected(tmp_path):
    result = run_round_robin(trio_config())
    persist(result, tmp_path / "run")
    summary = tmp_path / "run" / "summary.json"
    obj = json.loads(summary.read_text())
    obj["v"] = 2
    summary.write_text(json.dumps(obj))
    with pytest.raises(SchemaVersionMismatch) as err:
        load(tmp_path / "run")
    assert err.value.found == 2 and err.value.supported == 1


# --- plot data ---

def read_csv(path: Path):
    with open(path, newline="") as fp:
        return list(csv.reader(fp))


def test_win_series_csv_schema(tmp_path):
    result = run_round_robin(trio_config(seeds_per_pairing=2))
    out = tmp_path / "win.csv"
    emit_plot_data(result, "win_series", out, player="tit_for_tat")
    rows = read_csv(out)
    assert rows[0] == ["opponent", "round", "cum_wins", "cum_diff"]
    opponents = {row[0] for row in rows[1:]}
    assert opponents == {"always_cooperate", "always_defect"}
    assert len(rows) == 1 + 2 * 50


def test_overlay_csv_four_conditions(tmp_path):
    cfg = SwitchExperimentConfig(
        subject=StrategySpec("tit_for_tat"),
        conditions=tuple(canonical_conditions(26)),
        seeds=2,
        base_seed=9,
    )
    result = run_switch_battery(cfg)
    out = tmp_path / "overlay.csv"
    emit_plot_data(result, "overlay", out)
    rows = read_csv(out)
    assert rows[0] == ["condition", "offset", "coop_rate_change_pct", "payoff_change"]
    assert {row[0] for row in rows[1:]} == {c.label for c in cfg.conditions}


def test_recovery_csv_equals_report_curve(tmp_path):
    cfg = SwitchExperimentConfig(
        subject=StrategySpec("tit_for_tat"),
        conditions=(canonical_conditions(26)[0],),
        seeds=2,
        base_seed=9,
    )
    result = run_switch_battery(cfg)
    report = result.reports["coop_to_defect"]
    out = tmp_path / "recovery.csv"
    emit_plot_data(result, "recovery", out)
    rows = read_csv(out)
    assert rows[0] == ["condition", "offset", "coop_rate", "recovery_rate"]
    parsed = {int(r[1]): float(r[2]) for r in rows[1:] if r[2] != ""}
    expected = {o: v for o, v in report.recovery_curve if v is not None}
    assert parsed == expected


def test_rankings_csv(tmp_path):
    result = run_round_robin(trio_config())
    out = tmp_path / "rankings.csv"
    emit_plot_data(result, "rankings", out)
    rows = read_csv(out)
    assert rows[0] == ["player", "mean_score_per_round", "wins", "ties", "matches"]
    assert rows[1][0] == "always_defect"


def test_missing_series_errors(tmp_path):
    tournament = run_round_robin(trio_config())
    with pytest.raises(MissingSeries):
        emit_plot_data(tournament, "recovery", tmp_path / "x.csv")
    with pytest.raises(MissingSeries):
        emit_plot_data(tournament, "bogus_kind", tmp_path / "x.csv")
