from __future__ import annotations

import json
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from ipdlab.game import FixedHorizon, PayoffMatrix, play_match
from ipdlab.strategies import StrategySpec

AGENT_SCRIPT = Path(__file__).parent / "agents" / "scripted_agent.py"


def spec(name: str, **params) -> StrategySpec:
    return StrategySpec(name, params)


def agent_command(mode: str) -> str:
    return f"{sys.executable} {AGENT_SCRIPT} {mode}"


@pytest.fixture
def matrix() -> PayoffMatrix:
    return PayoffMatrix(5, 3, 1, 0)


@pytest.fixture
def quick_match(matrix):
    """Play two named strategies over a fixed horizon."""

    def run(a: str | StrategySpec, b: str | StrategySpec, rounds: int = 50, seed: int = 1, **kw):
        a_spec = a if isinstance(a, StrategySpec) else StrategySpec(a)
        b_spec = b if isinstance(b, StrategySpec) else StrategySpec(b)
        return play_match(a_spec, b_spec, matrix, FixedHorizon(rounds), seed=seed, **kw)

    return run


class StubChatServer:
    """Minimal OpenAI-compatible chat endpoint with scripted replies.

    Each POST consumes the next scripted reply; once the script runs dry the
    default reply is served. A reply of ("sleep", seconds) delays before
    answering, which is how the timeout path is exercised.
    """

    def __init__(self, default_reply: str = "cooperate"):
        self.default_reply = default_reply
        self.replies: list = []
        self.requests: list[dict] = []
        self.headers_seen: list[dict] = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length)) if length else {}
                stub.requests.append(body)
                stub.headers_seen.append(dict(self.headers))
                reply = stub.replies.pop(0) if stub.replies else stub.default_reply
                if isinstance(reply, tuple) and reply[0] == "sleep":
                    time.sleep(reply[1])
                    reply = stub.default_reply
                payload = {"choices": [{"message": {"content": reply}}]}
                data = json.dumps(payload).encode()
                try:
                    self.send_response(200)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except BrokenPipeError:
                    pass  # client gave up (timeout tests)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def chat_server():
    server = StubChatServer()
    yield server
    server.close()
