from __future__ import annotations

import json
import re

import pytest

from ipdlab.bridge import (
    AgentEndpointConfig,
    ChatHttpAgent,
    SubprocessAgent,
    TEMPLATES,
    get_template,
    parse_action,
    render_prompt,
    request_move,
)
from ipdlab.errors import AgentFailure, ConfigError, TemplateError, UnparseableResponse
from ipdlab.game import Action, FixedHorizon, IndefiniteHorizon, PayoffMatrix, play_match
from ipdlab.game import dump_record_line
from ipdlab.strategies import StrategySpec

from conftest import agent_command, spec

C, D = Action.C, Action.D


# --- prompt rendering ---

def test_render_empty_history_two_messages(matrix):
    messages = render_prompt(TEMPLATES["classic"], matrix, FixedHorizon(50), [])
    assert len(messages) == 2
    assert messages[0]["role"] == "system"
    assert messages[1]["role"] == "user"


def test_render_message_per_round_counts(matrix):
    history = [(C, C), (C, D), (D, C)]
    messages = render_prompt(TEMPLATES["classic"], matrix, FixedHorizon(50), history)
    assert len(messages) == 1 + 3 + 1


def test_render_substitutes_all_four_payoffs(matrix):
    messages = render_prompt(TEMPLATES["classic"], matrix, FixedHorizon(50), [])
    system = messages[0]["content"]
    for value in ("5", "3", "1", "0"):
        assert value in system
    assert "cooperate" in system and "defect" in system
    assert not re.search(r"\{[A-Za-z_]+\}", system)


def test_render_discloses_fixed_known_horizon_only(matrix):
    known = render_prompt(TEMPLATES["classic"], matrix, FixedHorizon(50, True), [])
    assert "50 rounds" in known[0]["content"]
    unknown = render_prompt(
        TEMPLATES["classic"], matrix, FixedHorizon(50, known_to_players=False), []
    )
    assert "50" not in unknown[0]["content"].replace("{", "")
    indefinite = render_prompt(TEMPLATES["classic"], matrix, IndefiniteHorizon(0.05), [])
    assert "rounds." not in indefinite[0]["content"].split("\n")[0]
    assert "0.05" not in indefinite[0]["content"]


def test_render_single_summary_block(matrix):
    template = get_template("classic-summary")
    history = [(C, C), (D, D)]
    messages = render_prompt(template, matrix, FixedHorizon(50), history)
    assert len(messages) == 2
    assert "round 1" in messages[1]["content"]
    assert "round 2" in messages[1]["content"]


def test_render_is_pure(matrix):
    history = [(C, D)]
    first = render_prompt(TEMPLATES["classic"], matrix, FixedHorizon(50), history)
    second = render_prompt(TEMPLATES["classic"], matrix, FixedHorizon(50), history)
    assert first == second


def test_unknown_placeholder_rejected(matrix):
    from ipdlab.bridge import PromptTemplate

    bad = PromptTemplate("bad", "payoffs {H} {R} {P} {L} {horizon_note} {oops}")
    with pytest.raises(TemplateError):
        render_prompt(bad, matrix, FixedHorizon(50), [])


# --- action parsing ---

# Expected values frozen from the reference tokenizer in
# test_parse_action_corpus_matches_reference_tokenizer below.
PARSE_CORPUS = [
    ("I will cooperate.", C),
    ('{"action":"D"}', D),
    ("Cooperating seems risky. Defect.", D),
    ("cooperate", C),
    ("COOPERATE", C),
    ("defect", D),
    ("C", C),
    ("d", D),
    ("(C)", C),
    ("'C'", C),
    ("My answer: defect!", D),
    ("I choose to defect this round.", D),
    ("Let's cooperate, they earned it.", C),
    ("Defect. No wait, cooperate.", C),
    ("Cooperate. No wait, defect.", D),
    ("The letter C", C),
    ("d.", D),
    ("I pick option D", D),
    ("Given the history, defecting is tempting, but I cooperate.", C),
    ("They defected last round so I will defect too.", D),
    ("cooperate cooperate cooperate", C),
    ("defect defect cooperate", C),
    ("I'd normally cooperate", C),
    ('{"action": "cooperate"}', C),
    ('{"action": "DEFECT"}', D),
    ('Some reasoning first. {"action":"C"} done.', C),
    ('{"move":"X","action":"d"}', D),
    ("After much thought: COOPERATE!", C),
    ("DEFECT!!!", D),
    ("Round 4: defect", D),
    ("My move is C.", C),
    ("My move is D.", D),
    ("cooperate\n", C),
    ("\tdefect\t", D),
    ("I Defect", D),
    ("We should both cooperate forever", C),
    ("Tit for tat says defect now", D),
    ("c then d then c", C),
    ("d then c then d", D),
    ("choice=C", C),
    ("choice=D", D),
    ("**defect**", D),
    ("**cooperate**", C),
    ("Answer: c", C),
    ("Answer: d", D),
    ("The best move here is to defect.", D),
    ("The best move here is to cooperate.", C),
    ("Despite their defection, cooperate.", C),
    ("Continue cooperating? No: defect.", D),
    ('JSON: {"action":"defect"} as requested', D),
]

UNPARSEABLE = [
    "",
    "I am thinking.",
    "Cooperation is a nice concept.",
    "Defection tendencies aside, no answer.",
    "I'd",
    '{"action":"maybe"}',
]


def reference_parse(raw: str):
    """Independent oracle: simple tokenizer applying the same spec rules."""
    words = {"cooperate": C, "defect": D, "c": C, "d": D}
    # structured objects take precedence; scan all {...} chunks in order
    best = None
    chunks = re.findall(r"\{[^{}]*\}", raw)
    if raw.strip().startswith("{"):
        chunks.insert(0, raw.strip())
    for chunk in chunks:
        try:
            obj = json.loads(chunk)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict) and str(obj.get("action", "")).strip().lower() in words:
            best = words[str(obj["action"]).strip().lower()]
    if best is not None:
        return best
    last = None
    # tokenize on alphabetic runs; a lone letter completing a contraction
    # (letter-apostrophe-letter) is not an answer, a quoted letter is
    for m in re.finditer(r"[A-Za-z]+", raw):
        token = m.group(0).lower()
        if token in words:
            i = m.start()
            if len(token) == 1 and i >= 2 and raw[i - 1] in "'’" and raw[i - 2].isalpha():
                continue
            last = words[token]
    return last


def test_parse_action_corpus_matches_reference_tokenizer():
    assert len(PARSE_CORPUS) >= 50
    for raw, expected in PARSE_CORPUS:
        assert reference_parse(raw) is expected, f"oracle disagrees on {raw!r}"
        assert parse_action(raw) is expected, f"parse_action failed on {raw!r}"


def test_parse_action_unparseable():
    for raw in UNPARSEABLE:
        assert reference_parse(raw) is None
        with pytest.raises(UnparseableResponse):
            parse_action(raw)


# --- chat endpoint ---

def endpoint(url: str, **kw) -> AgentEndpointConfig:
    defaults = dict(kind="chat_http", address=url, model_name="stub", timeout=2.0, max_retries=2)
    defaults.update(kw)
    return AgentEndpointConfig.from_json(defaults)


def test_request_move_happy_path(chat_server):
    chat_server.replies = ["cooperate"]
    result = request_move(endpoint(chat_server.url), [{"role": "user", "content": "go"}])
    assert result.action is C
    assert result.raw == "cooperate"
    assert result.retries == 0


def test_request_move_retries_with_clarification(chat_server):
    chat_server.replies = ["hmm", "thinking...", "D"]
    result = request_move(endpoint(chat_server.url), [{"role": "user", "content": "go"}])
    assert result.action is D
    assert result.raw == "D"
    assert result.retries == 2
    # the third request carried the clarification
    final = chat_server.requests[-1]["messages"]
    assert any("cooperate or defect" in m["content"] for m in final if m["role"] == "user")


def test_request_move_retries_exhausted(chat_server):
    chat_server.replies = ["a", "b", "c", "d?? no tokens here"]
    chat_server.default_reply = "garbage with no usable content!!"
    cfg = endpoint(chat_server.url, max_retries=1)
    chat_server.replies = ["nothing usable here...", "still nothing usable..."]
    with pytest.raises(AgentFailure):
        request_move(cfg, [{"role": "user", "content": "go"}])


def test_request_move_timeout(chat_server):
    chat_server.replies = [("sleep", 3.0)]
    cfg = endpoint(chat_server.url, timeout=0.3)
    with pytest.raises(AgentFailure):
        request_move(cfg, [{"role": "user", "content": "go"}])


def test_request_move_unreachable():
    cfg = endpoint("http://127.0.0.1:1/v1/chat/completions", timeout=0.5)
    with pytest.raises(AgentFailure):
        request_move(cfg, [{"role": "user", "content": "go"}])


def test_credentials_resolved_from_env_not_logged(chat_server, monkeypatch):
    monkeypatch.setenv("STUB_AGENT_KEY", "sk-super-secret")
    cfg = endpoint(chat_server.url, credentials="STUB_AGENT_KEY")
    chat_server.replies = ["defect"]
    agent = ChatHttpAgent(cfg)
    agent.begin_match(PayoffMatrix(5, 3, 1, 0), 50)
    agent.cooperation_probability([])
    assert chat_server.headers_seen[-1].get("Authorization") == "Bearer sk-super-secret"
    transcript_blob = "\n".join(agent.transcript.to_json_lines())
    assert "sk-super-secret" not in transcript_blob
    assert "STUB_AGENT_KEY" not in transcript_blob


def test_chat_agent_plays_matches(chat_server, matrix):
    chat_server.default_reply = "cooperate"
    agent = ChatHttpAgent(endpoint(chat_server.url))
    record = play_match(
        agent, StrategySpec("always_defect"), matrix, FixedHorizon(3), seed=1,
        a_id="agent", b_id="alld",
    )
    assert [r.action_a for r in record.rounds] == [C, C, C]
    assert len(agent.transcript.entries) == 3
    assert record.metadata["prompt_template"] == "classic"


def test_chat_agent_failure_aborts_match(chat_server, matrix):
    chat_server.default_reply = "no answer in this text at all!!"
    agent = ChatHttpAgent(endpoint(chat_server.url, max_retries=0))
    with pytest.raises(AgentFailure) as err:
        play_match(agent, StrategySpec("always_defect"), matrix, FixedHorizon(5), seed=1)
    partial = err.value.partial_record
    assert partial is not None
    assert partial.metadata["aborted"] == "agent_failure"


# --- subprocess agents ---

def sub_endpoint(mode: str, **kw) -> AgentEndpointConfig:
    defaults = dict(kind="subprocess", address=agent_command(mode), timeout=5.0, max_retries=1)
    defaults.update(kw)
    return AgentEndpointConfig.from_json(defaults)


def test_subprocess_always_cooperate(matrix):
    agent = SubprocessAgent(sub_endpoint("coop"))
    record = play_match(
        agent, StrategySpec("always_defect"), matrix, FixedHorizon(3), seed=1
    )
    assert [r.action_a for r in record.rounds] == [C, C, C]


def test_subprocess_malformed_reply_fails_after_retries(matrix):
    agent = SubprocessAgent(sub_endpoint("garbage", max_retries=1))
    with pytest.raises(AgentFailure):
        play_match(agent, StrategySpec("always_defect"), matrix, FixedHorizon(3), seed=1)


def test_subprocess_restart_recovers_flaky_agent(matrix, tmp_path):
    # the agent replies garbage until its marker file exists, so the first
    # violation forces one restart and the resent request succeeds
    marker = tmp_path / "tripped"
    agent = SubprocessAgent(sub_endpoint(f"flaky {marker}", max_retries=2))
    record = play_match(
        agent, StrategySpec("always_cooperate"), matrix, FixedHorizon(2), seed=1
    )
    assert record.n_rounds() == 2
    assert agent.transcript.entries[0].retries == 1


def test_subprocess_timeout(matrix):
    agent = SubprocessAgent(sub_endpoint("silent", timeout=0.5, max_retries=0))
    with pytest.raises(AgentFailure):
        play_match(agent, StrategySpec("always_defect"), matrix, FixedHorizon(2), seed=1)


def test_subprocess_tft_matches_native_transcript(matrix):
    native = play_match(
        StrategySpec("tit_for_tat"), spec("random", p_coop=0.3),
        matrix, FixedHorizon(50), seed=77, a_id="tft", b_id="rand",
    )
    agent = SubprocessAgent(sub_endpoint("tft"))
    bridged = play_match(
        agent, spec("random", p_coop=0.3), matrix, FixedHorizon(50), seed=77,
        a_id="tft", b_id="rand",
    )
    assert dump_record_line(bridged) == dump_record_line(native)


def test_subprocess_receives_protocol_fields(matrix):
    agent = SubprocessAgent(sub_endpoint("tft"))
    record = play_match(
        agent, StrategySpec("always_defect"), matrix, FixedHorizon(2, True), seed=5
    )
    assert record.n_rounds() == 2
    request = agent.transcript.entries[-1].request
    assert request["type"] == "move_request"
    assert request["payoffs"] == {"H": 5, "R": 3, "P": 1, "L": 0}
    assert request["horizon"] == {"kind": "fixed", "rounds": 2}
    assert request["history"] == [["C", "D"]]


def test_external_agent_spec_in_catalog(matrix):
    agent_spec = spec(
        "external_agent",
        endpoint={"kind": "subprocess", "address": agent_command("tft"), "timeout": 5.0},
    )
    record = play_match(
        agent_spec, StrategySpec("always_defect"), matrix, FixedHorizon(3), seed=2
    )
    assert [r.action_a for r in record.rounds] == [C, D, D]


def test_endpoint_config_validation():
    with pytest.raises(ConfigError):
        AgentEndpointConfig.from_json({"kind": "smoke_signals", "address": "x"})
    with pytest.raises(ConfigError):
        AgentEndpointConfig.from_json({"kind": "chat_http", "address": "x", "bogus": 1})
    with pytest.raises(ConfigError):
        AgentEndpointConfig.from_json({"kind": "chat_http", "address": "x", "timeout": 0})
