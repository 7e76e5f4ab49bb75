"""Thin command-line client for the localization service.

By default the CLI talks to an in-process instance of the FastAPI app, so
no server needs to be running; ``--server URL`` targets a remote one.
Every pipeline configuration key can be overridden with ``--<key> <value>``.

Exit codes: 0 success, 2 input error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from .pipeline import STAGES, PipelineConfig

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STAGE = 3


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from starlette.testclient import TestClient

    from .service.app import app
    return TestClient(app, raise_server_exceptions=False)


def _parse_overrides(extra: list[str]) -> dict:
    """Turn leftover --key value / --key=value args into config overrides."""
    known = set(PipelineConfig.keys())
    overrides: dict = {}
    i = 0
    while i < len(extra):
        arg = extra[i]
        if not arg.startswith("--"):
            raise SystemExit(f"unexpected argument {arg!r}")
        key, eq, value = arg[2:].partition("=")
        key = key.replace("-", "_")
        if not eq:
            if i + 1 >= len(extra):
                raise SystemExit(f"missing value for --{key}")
            value = extra[i + 1]
            i += 1
        if key not in known:
            raise SystemExit(f"unknown configuration key --{key}")
        overrides[key] = value
        i += 1
    return overrides


def _payload(args, extra: list[str]) -> dict:
    overrides = _parse_overrides(extra)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    return {"config_path": args.config, "overrides": overrides}


def _post(client: httpx.Client, path: str, payload: dict) -> int:
    try:
        resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_INPUT
    body = resp.json()
    if resp.status_code == 200:
        print(json.dumps(body, indent=1, sort_keys=True))
        return EXIT_OK
    print(f"error: {body.get('detail', resp.text)}", file=sys.stderr)
    if body.get("kind") == "stage":
        return EXIT_STAGE
    return EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radarloc",
        description="Roadside radar self-localization pipeline client")
    parser.add_argument("--server", help="base URL of a running service "
                                         "(default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a flat YAML config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory (out_dir)")

    common(sub.add_parser("run", help="run the full pipeline"))
    p_stage = sub.add_parser("stage", help="run a single pipeline stage")
    p_stage.add_argument("stage", choices=STAGES)
    common(p_stage)
    p_gen = sub.add_parser("gen-scenario", help="generate a synthetic scenario")
    p_gen.add_argument("spec", help="bundled scenario name or spec JSON path")
    p_gen.add_argument("--out", required=True, help="scenario output directory")
    p_gen.add_argument("--seed", type=int)
    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service.app import app
        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK

    with _client(args.server) as client:
        if args.command == "run":
            return _post(client, "/pipeline/run", _payload(args, extra))
        if args.command == "stage":
            payload = _payload(args, extra)
            payload["stage"] = args.stage
            return _post(client, "/pipeline/stage", payload)
        if args.command == "gen-scenario":
            if extra:
                raise SystemExit(f"unexpected arguments: {extra}")
            return _post(client, "/scenario/generate",
                         {"spec": args.spec, "out_dir": args.out,
                          "seed": args.seed})
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
