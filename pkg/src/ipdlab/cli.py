"""Command-line entry point.

Subcommands: tournament, switch, metrics, agent-check, serve, plot.
All experiment configs are JSON files; --set applies dotted-path overrides
after parsing (e.g. --set horizon.rounds=100). Exit codes are stable:

  0  success
  2  configuration error
  3  agent failures occurred (results were still written)
  4  records could not be read or were empty
  5  agent check failed
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

from .bridge import AgentEndpointConfig, ChatHttpAgent, SubprocessAgent
from .errors import (
    AgentFailure,
    ConfigError,
    InsufficientData,
    IpdLabError,
    MissingSeries,
    OrderingViolation,
    PersistenceError,
    SchemaVersionMismatch,
)
from .game import Action, PayoffMatrix, read_records
from .metrics import metrics_report, report_csv_rows
from .experiments import (
    SwitchExperimentConfig,
    TournamentConfig,
    emit_plot_data,
    load,
    persist,
    run_round_robin,
    run_switch_battery,
    write_standard_plots,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_AGENT_FAILURES = 3
EXIT_IO = 4
EXIT_AGENT_CHECK = 5

logger = logging.getLogger("ipdlab")


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    """Apply repeated --set key.path=value entries onto the raw config dict."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        dotted, raw_value = item.split("=", 1)
        parts = dotted.split(".")
        node = config
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = _parse_override_value(raw_value)
    return config


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fp:
            obj = json.load(fp)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config root must be a JSON object")
    return obj


def _prepare_out_dir(out: str, force: bool) -> Path:
    out_dir = Path(out)
    markers = [out_dir / "summary.json", out_dir / "records.jsonl"]
    if any(m.exists() for m in markers) and not force:
        raise ConfigError(
            f"output directory {out_dir} already holds a run (use --force to overwrite)"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _print_ranking(result) -> None:
    width = max((len(e.player_id) for e in result.ranking), default=10)
    print(f"{'player':<{width}}  {'score/round':>11}  {'wins':>4}  {'ties':>4}  {'matches':>7}")
    for entry in result.ranking:
        print(
            f"{entry.player_id:<{width}}  {entry.mean_score_per_round:>11.4f}  "
            f"{entry.wins:>4}  {entry.ties:>4}  {entry.matches:>7}"
        )


def cmd_tournament(args) -> int:
    raw = apply_overrides(_load_config_file(args.config), args.set or [])
    if args.parallelism is not None:
        raw["parallelism"] = args.parallelism
    cfg = TournamentConfig.from_json(raw)
    out_dir = _prepare_out_dir(args.out, args.force)
    result = run_round_robin(cfg)
    persist(result, out_dir)
    write_standard_plots(result, out_dir)
    _print_ranking(result)
    if result.failures:
        print(f"{len(result.failures)} match(es) failed on agent errors", file=sys.stderr)
        return EXIT_AGENT_FAILURES
    return EXIT_OK


def cmd_switch(args) -> int:
    raw = apply_overrides(_load_config_file(args.config), args.set or [])
    if args.parallelism is not None:
        raw["parallelism"] = args.parallelism
    cfg = SwitchExperimentConfig.from_json(raw)
    out_dir = _prepare_out_dir(args.out, args.force)
    result = run_switch_battery(cfg)
    persist(result, out_dir)
    write_standard_plots(result, out_dir)

    width = max((len(label) for label in result.reports), default=9)
    print(f"{'condition':<{width}}  {'adaptation speed':>16}  {'coop. rate (%)':>14}  {'payoff':>7}")
    for label, report in result.reports.items():
        speed = "n/a" if report.adaptation_speed is None else str(report.adaptation_speed)
        print(
            f"{label:<{width}}  {speed:>16}  {report.post_rate * 100:>14.1f}  "
            f"{report.post_payoff:>7.2f}"
        )
    for item in result.skipped:
        print(f"skipped condition {item['label']}: missing {item['missing']}", file=sys.stderr)
    if result.failures:
        print(f"{len(result.failures)} match(es) failed on agent errors", file=sys.stderr)
        return EXIT_AGENT_FAILURES
    return EXIT_OK


def _percent(ratio: dict) -> str:
    return "" if ratio["value"] is None else f"{ratio['value'] * 100:.1f}"


def cmd_metrics(args) -> int:
    records_path = Path(args.records)
    if records_path.is_dir():
        records_path = records_path / "records.jsonl"
    try:
        with open(records_path, encoding="utf-8") as fp:
            records = list(read_records(fp))
    except (OSError, PersistenceError, SchemaVersionMismatch) as exc:
        print(f"cannot read records: {exc}", file=sys.stderr)
        return EXIT_IO
    if not records:
        print("records file is empty", file=sys.stderr)
        return EXIT_IO

    try:
        report = metrics_report(records)
    except InsufficientData as exc:
        print(f"cannot compute metrics: {exc}", file=sys.stderr)
        return EXIT_IO

    out_dir = Path(args.out)
    if (out_dir / "metrics.json").exists() and not args.force:
        raise ConfigError(
            f"output directory {out_dir} already holds metrics (use --force to overwrite)"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as fp:
        json.dump(report, fp, sort_keys=True, indent=2)
        fp.write("\n")
    with open(out_dir / "metrics.csv", "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["player", "metric", "value", "support"])
        writer.writerows(report_csv_rows(report))

    columns = ["cooperation_rate", "good_partner", "forgiveness", "retaliation", "generosity"]
    headers = ["Strategy", "Coop. Rate", "Good Partner", "Forgiveness", "Retaliation", "Generosity"]
    with open(out_dir / "ratings_table.csv", "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(headers)
        for player, profile in report["profiles"].items():
            writer.writerow([player] + [_percent(profile[c]) for c in columns])

    width = max(len(p) for p in report["profiles"])
    print(f"{'strategy':<{width}}  " + "  ".join(f"{h:>12}" for h in headers[1:]))
    for player, profile in report["profiles"].items():
        cells = "  ".join(f"{_percent(profile[c]) or '-':>12}" for c in columns)
        print(f"{player:<{width}}  {cells}")
    return EXIT_OK


def cmd_agent_check(args) -> int:
    raw = apply_overrides(_load_config_file(args.config), args.set or [])
    cfg = AgentEndpointConfig.from_json(raw)
    agent = ChatHttpAgent(cfg) if cfg.kind == "chat_http" else SubprocessAgent(cfg)
    matrix = PayoffMatrix(5, 3, 1, 0)
    history = [
        (Action.C, Action.C),
        (Action.C, Action.D),
        (Action.D, Action.C),
    ]
    agent.begin_match(matrix, None)
    started = time.monotonic()
    try:
        p = agent.cooperation_probability(history)
    except AgentFailure as exc:
        excerpt = f" (raw: {exc.raw[:200]!r})" if exc.raw else ""
        print(f"agent check failed: {exc}{excerpt}", file=sys.stderr)
        return EXIT_AGENT_CHECK
    finally:
        agent.end_match()
    latency = time.monotonic() - started
    action = "C" if p >= 0.5 else "D"
    print(f"agent answered {action} in {latency:.3f}s")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import SessionStore, create_app

    host, _, port_text = args.bind.rpartition(":")
    host = host or "127.0.0.1"
    try:
        port = int(port_text)
    except ValueError:
        raise ConfigError(f"bind address must look like host:port, got {args.bind!r}") from None

    store = SessionStore(state_dir=args.state_dir)
    ui_dir = args.ui if args.ui else None
    app = create_app(store, ui_dir=ui_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info" if args.verbose else "warning")
    except OSError as exc:
        print(f"cannot bind {args.bind}: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


def cmd_plot(args) -> int:
    if Path(args.out).exists() and not args.force:
        raise ConfigError(f"{args.out} already exists (use --force to overwrite)")
    try:
        result = load(args.records)
    except (PersistenceError, SchemaVersionMismatch) as exc:
        print(f"cannot load run: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        emit_plot_data(result, args.kind, args.out, player=args.player)
    except MissingSeries as exc:
        print(f"cannot emit {args.kind}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipdlab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", required=True, help="JSON config file")
        if needs_out:
            p.add_argument("--out", required=True, help="output run directory")
            p.add_argument("--force", action="store_true", help="overwrite an existing run")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted-path config override (repeatable)")
        p.add_argument("--parallelism", type=int, default=None, help="match workers")

    p = sub.add_parser("tournament", help="run a round-robin tournament")
    common(p)
    p.set_defaults(func=cmd_tournament)

    p = sub.add_parser("switch", help="run a strategy-switch battery")
    common(p)
    p.set_defaults(func=cmd_switch)

    p = sub.add_parser("metrics", help="recompute metrics from records.jsonl")
    p.add_argument("--records", required=True, help="records.jsonl file or run directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing metrics")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("agent-check", help="preflight an external agent endpoint")
    p.add_argument("--config", required=True, help="agent endpoint config JSON")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_agent_check)

    p = sub.add_parser("serve", help="serve the live session API and web UI")
    p.add_argument("--bind", default="127.0.0.1:8000", help="host:port")
    p.add_argument("--state-dir", default="session_state", help="session event-log directory")
    p.add_argument("--ui", default="frontend/dist", help="built web UI directory")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("plot", help="emit plot CSV from a persisted run")
    p.add_argument("--records", required=True, help="run directory")
    p.add_argument("--kind", required=True,
                   choices=["win_series", "coop_series", "recovery", "overlay", "rankings"])
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--player", default=None, help="focal player for win_series")
    p.add_argument("--force", action="store_true", help="overwrite an existing CSV")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, OrderingViolation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PersistenceError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except IpdLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
