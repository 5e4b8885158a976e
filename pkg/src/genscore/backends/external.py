"""Client for external scoring servers speaking the NDJSON wire protocol.

Requests are single JSON objects:
    {"op": "score", "source": ..., "target": ...}
    {"op": "tokenize", "text": ...}
and responses are
    {"tokens": [...], "logprobs": [...]}   (score)
    {"tokens": [...]}                      (tokenize)
    {"error": "..."}                       (failure)

Two transports: a child process exchanging one JSON line per request over
stdio, or HTTP POST against /v1/score and /v1/tokenize.  Responses are
re-validated client-side; positive log-probabilities are clamped to 0 and a
warning counter is incremented.
"""

from __future__ import annotations

import json
import subprocess
import threading
from typing import Sequence

from ..errors import BackendError
from .core import Backend, BackendDescriptor, ScoredSequence, floor_logprob


class ResponseStats:
    """Counts client-side repairs applied to server responses."""

    def __init__(self) -> None:
        self.positive_logprobs_floored = 0
        self.below_floor_clamped = 0


def validate_score_response(payload: dict, stats: ResponseStats | None = None) -> ScoredSequence:
    """Check a score response and convert it, applying the floor rule."""
    if not isinstance(payload, dict):
        raise BackendError(f"malformed response: expected object, got {type(payload).__name__}")
    if "error" in payload:
        raise BackendError(f"server error: {payload['error']}")
    tokens = payload.get("tokens")
    logprobs = payload.get("logprobs")
    if not isinstance(tokens, list) or not isinstance(logprobs, list):
        raise BackendError("malformed response: missing tokens/logprobs arrays")
    if len(tokens) != len(logprobs):
        raise BackendError(
            f"protocol error: {len(tokens)} tokens but {len(logprobs)} logprobs"
        )
    if len(tokens) < 1:
        raise BackendError("protocol error: empty scored sequence")
    cleaned = []
    for lp in logprobs:
        if not isinstance(lp, (int, float)):
            raise BackendError(f"protocol error: non-numeric logprob {lp!r}")
        floored = floor_logprob(float(lp))
        if stats is not None:
            if lp > 0.0:
                stats.positive_logprobs_floored += 1
            elif floored > lp or lp != lp:
                stats.below_floor_clamped += 1
        cleaned.append(floored)
    return ScoredSequence(tuple(str(t) for t in tokens), tuple(cleaned))


class _StdioTransport:
    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self.proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self.lock = threading.Lock()

    def request(self, obj: dict) -> dict:
        if self.proc.poll() is not None:
            raise BackendError(f"backend process exited with code {self.proc.returncode}")
        with self.lock:
            try:
                self.proc.stdin.write(json.dumps(obj) + "\n")
                self.proc.stdin.flush()
                line = self.proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise BackendError(f"backend process connection failed: {exc}") from exc
        if not line:
            raise BackendError("backend process closed the stream")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendError(f"malformed response line: {line!r}") from exc

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.stdin.close()
            self.proc.wait(timeout=5)


class _HttpTransport:
    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def request(self, obj: dict) -> dict:
        import requests

        path = "/v1/score" if obj.get("op") == "score" else "/v1/tokenize"
        try:
            resp = requests.post(self.endpoint + path, json=obj, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendError(f"backend unreachable: {exc}") from exc
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendError(f"malformed response body: {resp.text[:200]!r}") from exc

    def close(self) -> None:
        pass


class ExternalBackend(Backend):
    """Scores via a remote or child-process model server."""

    def __init__(
        self,
        endpoint: str | None = None,
        command: Sequence[str] | None = None,
        name: str = "external",
        tokenizer_id: str = "server-owned",
        timeout: float = 60.0,
    ):
        if (endpoint is None) == (command is None):
            raise BackendError("exactly one of endpoint or command must be given")
        self.stats = ResponseStats()
        if command is not None:
            self._transport = _StdioTransport(command)
        else:
            self._transport = _HttpTransport(endpoint, timeout=timeout)
        self._descriptor = BackendDescriptor(name=name, kind="external", tokenizer_id=tokenizer_id)

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def tokenize(self, text: str) -> list[str]:
        payload = self._transport.request({"op": "tokenize", "text": text})
        if "error" in payload:
            raise BackendError(f"server error: {payload['error']}")
        tokens = payload.get("tokens")
        if not isinstance(tokens, list):
            raise BackendError("malformed tokenize response")
        return [str(t) for t in tokens]

    def token_log_probs(self, source: str, target: str) -> ScoredSequence:
        payload = self._transport.request({"op": "score", "source": source, "target": target})
        return validate_score_response(payload, self.stats)

    def close(self) -> None:
        self._transport.close()

    def __enter__(self) -> "ExternalBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
