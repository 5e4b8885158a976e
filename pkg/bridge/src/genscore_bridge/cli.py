from __future__ import annotations

import sys

import click

from .config import BridgeConfig


@click.group()
def main() -> None:
    """Token log-probability server for encoder-decoder checkpoints."""


@main.command("serve")
@click.option("--checkpoint", required=True, help="Model id or local checkpoint path.")
@click.option("--device", default="cpu", show_default=True)
@click.option("--max-length", type=int, default=1024, show_default=True)
@click.option("--batch-size", type=int, default=8, show_default=True)
@click.option("--transport", type=click.Choice(["stdio", "http"]), default="stdio", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
def serve(checkpoint, device, max_length, batch_size, transport, host, port):
    """Load the checkpoint and serve score/tokenize requests."""
    try:
        config = BridgeConfig(checkpoint, device, max_length, batch_size)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)

    from .model import ScoringModel
    from .server import build_app, serve_stdio

    try:
        model = ScoringModel(config)
    except RuntimeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    if transport == "stdio":
        serve_stdio(model)
    else:
        import uvicorn

        uvicorn.run(build_app(model), host=host, port=port, log_level="warning")


@main.command("health")
@click.option("--endpoint", required=True, help="Base URL of a running HTTP bridge.")
def health(endpoint):
    """Print the health record of a running HTTP bridge."""
    import json
    import urllib.request

    try:
        with urllib.request.urlopen(endpoint.rstrip("/") + "/v1/health", timeout=10) as resp:
            click.echo(resp.read().decode())
    except OSError as exc:
        click.echo(json.dumps({"error": str(exc)}), err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
