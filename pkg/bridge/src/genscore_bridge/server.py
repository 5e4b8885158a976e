"""Request handling and the two transports: NDJSON over stdio, and HTTP.

Requests are handled one at a time off a single queue; responses preserve
request order per connection.
"""

from __future__ import annotations

import json
import sys
import threading

from fastapi import FastAPI, Request

from .model import ScoringModel


def handle_request(model: ScoringModel, request: dict) -> dict:
    """Dispatch one protocol request; failures become an error payload."""
    try:
        op = request.get("op")
        if op == "tokenize":
            return {"tokens": model.tokenize(str(request["text"]))}
        if op == "score":
            result = model.score(str(request["source"]), str(request["target"]))
            return {
                "tokens": list(result.tokens),
                "logprobs": list(result.logprobs),
                "truncated": result.truncated,
            }
        return {"error": f"unknown op {op!r}"}
    except KeyError as exc:
        return {"error": f"missing request field {exc}"}
    except Exception as exc:
        return {"error": str(exc)}


def serve_stdio(model: ScoringModel, stdin=None, stdout=None) -> None:
    """One JSON object per line in, one per line out, until EOF."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    lock = threading.Lock()
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            response = {"error": f"malformed request line: {exc.msg}"}
        else:
            response = handle_request(model, request)
        with lock:
            stdout.write(json.dumps(response) + "\n")
            stdout.flush()


def build_app(model: ScoringModel) -> FastAPI:
    app = FastAPI(title="genscore-bridge")
    lock = threading.Lock()

    @app.post("/v1/score")
    async def score(request: Request):
        body = await request.json()
        body["op"] = "score"
        with lock:
            return handle_request(model, body)

    @app.post("/v1/tokenize")
    async def tokenize(request: Request):
        body = await request.json()
        body["op"] = "tokenize"
        with lock:
            return handle_request(model, body)

    @app.get("/v1/health")
    async def health():
        return model.health()

    return app
