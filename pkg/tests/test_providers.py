import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from src.agent.providers import RemoteProvider, ScriptedProvider, build_provider, read_script
from src.config import ProviderSettings
from src.errors import ProviderError, ScriptExhausted
from src.toolkit import tabular
from src.utils.latency_tracker import latency_tracker

KEY_ENV = "URBAN_AGENT_TEST_KEY"


def reply(content):
    return 200, json.dumps({"choices": [{"message": {"role": "assistant", "content": content}}]})


class StubHandler(BaseHTTPRequestHandler):
    responses = []
    requests = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        type(self).requests.append({"auth": self.headers.get("Authorization"), "body": body})
        status, text = type(self).responses.pop(0) if type(self).responses else reply("Final Answer: ok")
        data = text.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub():
    StubHandler.responses = []
    StubHandler.requests = []
    server = HTTPServer(("127.0.0.1", 0), StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield StubHandler, f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
    server.shutdown()
    server.server_close()


@pytest.fixture
def remote(stub, monkeypatch):
    handler, endpoint = stub
    monkeypatch.setenv(KEY_ENV, "sk-secret-value")
    for proxy in ("HTTP_PROXY", "HTTPS_PROXY", "http_proxy", "https_proxy", "ALL_PROXY", "all_proxy"):
        monkeypatch.delenv(proxy, raising=False)
    settings = ProviderSettings(endpoint=endpoint, api_key_env=KEY_ENV, retries=2, backoff=0, timeout=5.0)
    return handler, RemoteProvider(settings)


def test_read_script_splits_on_separator_lines(tmp_path):
    path = tmp_path / "q.tools.txt"
    path.write_text("Thought: a\nAction: describe\n---\n\n---\nFinal Answer: 3 --- parks\n", encoding="utf-8")
    assert read_script(str(path)) == ["Thought: a\nAction: describe", "Final Answer: 3 --- parks"]


def test_missing_script_is_a_config_error(tmp_path):
    with pytest.raises(ProviderError) as info:
        read_script(str(tmp_path / "absent.txt"))
    assert info.value.category == "config"


def test_scripted_provider_replays_in_order(registry, city_files):
    tabular.read_table(city_files["sites.csv"], registry, name="sites")
    provider = ScriptedProvider(["first {{file:sites}}", "second {{ file: nobody }}"], registry=registry)
    assert provider.complete("p1") == "first sites.csv"
    assert provider.complete("p2", system="note") == "second nobody.csv"
    assert provider.prompts == ["p1", "p2"]
    assert provider.remaining() == 0
    with pytest.raises(ScriptExhausted):
        provider.complete("p3")


def test_build_provider(tmp_path):
    with pytest.raises(ProviderError):
        build_provider("scripted")
    with pytest.raises(ProviderError):
        build_provider("local")
    path = tmp_path / "s.txt"
    path.write_text("Final Answer: 1\n", encoding="utf-8")
    assert build_provider("scripted", script=str(path)).entries == ["Final Answer: 1"]


def test_remote_completion(remote):
    handler, provider = remote
    handler.responses.append(reply("Thought: x\nFinal Answer: 5"))
    assert provider.complete("How many?", system="be brief") == "Thought: x\nFinal Answer: 5"
    request = handler.requests[0]
    assert request["auth"] == "Bearer sk-secret-value"
    assert request["body"]["messages"] == [
        {"role": "system", "content": "be brief"},
        {"role": "user", "content": "How many?"},
    ]
    assert request["body"]["temperature"] == 0.0
    assert latency_tracker.get_statistics()["provider_complete"]["total_calls"] == 1


def test_auth_failures_are_not_retried(remote):
    handler, provider = remote
    handler.responses.append((401, '{"error": "bad key"}'))
    with pytest.raises(ProviderError) as info:
        provider.complete("q")
    assert info.value.category == "auth"
    assert info.value.status == 401
    assert len(handler.requests) == 1


def test_server_errors_are_retried(remote):
    handler, provider = remote
    handler.responses.extend([(503, "busy"), reply("Final Answer: recovered")])
    assert provider.complete("q") == "Final Answer: recovered"
    assert len(handler.requests) == 2


def test_malformed_body_after_all_retries(remote):
    handler, provider = remote
    handler.responses.extend([(200, "not json")] * 3)
    with pytest.raises(ProviderError) as info:
        provider.complete("q")
    assert info.value.category == "malformed"
    assert len(handler.requests) == 3


def test_secret_is_redacted(remote):
    _, provider = remote
    assert provider.redact("token sk-secret-value leaked") == "token *** leaked"
