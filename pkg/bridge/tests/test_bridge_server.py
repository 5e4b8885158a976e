import io
import json
import random
import sys

import pytest
from fastapi.testclient import TestClient

from genscore.backends import ExternalBackend
from genscore.backends.external import ResponseStats, validate_score_response
from genscore.errors import BackendError

from genscore_bridge import BridgeConfig, ScoringModel
from genscore_bridge.server import build_app, handle_request, serve_stdio

from checkpoint_factory import WORDS


@pytest.fixture(scope="module")
def model(checkpoint):
    return ScoringModel(BridgeConfig(checkpoint, max_length=32))


class TestHandleRequest:
    def test_score(self, model):
        resp = handle_request(model, {"op": "score", "source": "hello", "target": "the cat"})
        assert resp["tokens"] == ["the", "cat", "</s>"]
        assert len(resp["logprobs"]) == 3
        assert resp["truncated"] is False

    def test_tokenize(self, model):
        resp = handle_request(model, {"op": "tokenize", "text": "the cat runs"})
        assert resp == {"tokens": ["the", "cat", "runs"]}

    def test_unknown_op(self, model):
        assert "error" in handle_request(model, {"op": "generate"})

    def test_missing_field(self, model):
        resp = handle_request(model, {"op": "score", "source": "x"})
        assert "missing request field" in resp["error"]

    def test_protocol_conformance_on_random_requests(self, model):
        """Every score response must pass the consuming client's validator."""
        rng = random.Random(0)
        stats = ResponseStats()
        for _ in range(100):
            source = " ".join(rng.choices(WORDS + ["zebra"], k=rng.randint(1, 12)))
            target = " ".join(rng.choices(WORDS + ["qux"], k=rng.randint(0, 10)))
            resp = handle_request(model, {"op": "score", "source": source, "target": target})
            seq = validate_score_response(resp, stats)
            assert len(seq.tokens) == len(seq.logprobs) >= 1
        assert stats.positive_logprobs_floored == 0
        assert stats.below_floor_clamped == 0


class TestStdioLoop:
    def run_lines(self, model, lines):
        out = io.StringIO()
        serve_stdio(model, stdin=io.StringIO("".join(l + "\n" for l in lines)), stdout=out)
        return [json.loads(l) for l in out.getvalue().splitlines()]

    def test_order_preserved(self, model):
        responses = self.run_lines(model, [
            json.dumps({"op": "tokenize", "text": "the cat"}),
            json.dumps({"op": "score", "source": "hello", "target": "a dog"}),
            json.dumps({"op": "tokenize", "text": "world"}),
        ])
        assert responses[0]["tokens"] == ["the", "cat"]
        assert responses[1]["tokens"] == ["a", "dog", "</s>"]
        assert responses[2]["tokens"] == ["world"]

    def test_malformed_line_yields_error_response(self, model):
        responses = self.run_lines(model, ["{not json", json.dumps({"op": "tokenize", "text": "a"})])
        assert "error" in responses[0]
        assert responses[1]["tokens"] == ["a"]

    def test_blank_lines_skipped(self, model):
        responses = self.run_lines(model, ["", json.dumps({"op": "tokenize", "text": "a"}), "  "])
        assert len(responses) == 1


@pytest.fixture(scope="module")
def client(model):
    return TestClient(build_app(model))


class TestHttp:
    def test_score(self, client):
        resp = client.post("/v1/score", json={"source": "hello", "target": "the cat"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["tokens"] == ["the", "cat", "</s>"]

    def test_tokenize(self, client):
        resp = client.post("/v1/tokenize", json={"text": "a big house"})
        assert resp.json() == {"tokens": ["a", "big", "house"]}

    def test_health(self, client, checkpoint):
        body = client.get("/v1/health").json()
        assert body["status"] == "ok"
        assert body["checkpoint"] == checkpoint
        assert body["max_length"] == 32

    def test_score_error_payload(self, client):
        resp = client.post("/v1/score", json={"source": "x"})
        assert "error" in resp.json()


@pytest.fixture(scope="module")
def backend(checkpoint):
    command = [
        sys.executable, "-m", "genscore_bridge.cli", "serve",
        "--checkpoint", checkpoint, "--max-length", "32",
    ]
    with ExternalBackend(command=command) as child:
        yield child


class TestEndToEndStdio:
    """The primary client drives a real bridge child process."""

    def test_round_trip(self, backend):
        assert backend.tokenize("the cat runs") == ["the", "cat", "runs"]
        seq = backend.token_log_probs("hello world", "the cat")
        assert seq.tokens == ("the", "cat", "</s>")
        assert all(lp <= 0.0 for lp in seq.logprobs)

    def test_deterministic_across_requests(self, backend):
        a = backend.token_log_probs("the house is big", "a small dog")
        b = backend.token_log_probs("the house is big", "a small dog")
        assert a == b

    def test_bad_op_yields_error_payload(self, backend):
        resp = backend._transport.request({"op": "nope"})
        assert "unknown op" in resp["error"]
        with pytest.raises(BackendError):
            validate_score_response(resp)

    def test_stats_untouched_by_clean_responses(self, backend):
        backend.token_log_probs("hello", "world")
        assert backend.stats.positive_logprobs_floored == 0
