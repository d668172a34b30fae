"""Thin command-line client for the solver service.

By default the CLI talks to an in-process instance of the HTTP app, so no
server needs to be running; pass --server to point it at a remote
deployment instead.  Artifacts returned by the service are written under
the output directory.  Log verbosity comes from the WEINGARTEN_LOG
environment variable (DEBUG/INFO/WARNING/ERROR).

Exit codes: 0 ok, 1 internal/transport error, 2 config error,
3 compatibility gate failure, 4 continuation failure, 5 diagnostics failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, load_raw, validate_config

PSI_GRAMMAR_HELP = """\
psi grammar: an expression over the unit-normal components nx, ny, nz.
  literals     1, 0.25, 1e-3
  operators    + - * / ^   (^ is right-associative; unary minus allowed)
  functions    exp, log, sin, cos, sqrt, abs, min(a,b), max(a,b)
abs/min/max parse but are rejected for solves unless allow_nonsmooth_psi
is set, since the linearization needs one continuous derivative.
"""


def _client(server: str | None):
    if server:
        import httpx
        return httpx.Client(base_url=server, timeout=None)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app
    return TestClient(app)


def _load_with_overrides(args) -> dict:
    raw = load_raw(args.config)
    if args.rings is not None:
        raw["rings"] = args.rings
    if args.sectors is not None:
        raw["sectors"] = args.sectors
    if args.out is not None:
        raw["out_dir"] = args.out
    validate_config(raw)  # fail fast client-side with a precise message
    return raw


def _post(args, endpoint: str, payload: dict):
    with _client(args.server) as client:
        response = client.post(endpoint, json=payload)
    if response.status_code == 422:
        detail = response.json().get("detail", [])
        for item in detail:
            loc = ".".join(str(p) for p in item.get("loc", []) if p != "body")
            print(f"config error: {loc}: {item.get('msg')}", file=sys.stderr)
        return None
    response.raise_for_status()
    return response.json()


def cmd_solve(args) -> int:
    try:
        payload = _load_with_overrides(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    body = _post(args, "/solve", payload)
    if body is None:
        return 2

    out_dir = Path(payload.get("out_dir", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    for artifact in body["artifacts"]:
        path = out_dir / artifact["name"]
        path.write_bytes(artifact["content"].encode("utf-8"))
        print(f"wrote {path}")

    print(f"status: {body['status']}")
    for message in body["messages"]:
        print(message)
    accepted = [h for h in body["history"] if h["accepted"]]
    if body["history"]:
        print(f"continuation: {len(accepted)} accepted steps "
              f"({len(body['history'])} attempted)")
    return int(body["exit_code"])


def cmd_check(args) -> int:
    try:
        payload = _load_with_overrides(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    body = _post(args, "/check", payload)
    if body is None:
        return 2
    print(json.dumps(body, indent=2, sort_keys=True))
    return int(body["exit_code"])


def cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return 0 if run_selftest() else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="weingarten",
        description="Strictly convex caps with prescribed Weingarten curvature",
        epilog=PSI_GRAMMAR_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="path to a JSON run configuration")
        p.add_argument("--server", default=None,
                       help="base URL of a running service (default: in-process)")
        p.add_argument("--rings", type=int, default=None, help="override grid rings")
        p.add_argument("--sectors", type=int, default=None, help="override grid sectors")
        p.add_argument("--out", default=None, help="override output directory")

    p_solve = sub.add_parser("solve", help="run the full pipeline and export artifacts")
    add_common(p_solve)
    p_solve.set_defaults(fn=cmd_solve)

    p_check = sub.add_parser("check", help="compatibility gate and subsolution only")
    add_common(p_check)
    p_check.set_defaults(fn=cmd_check)

    p_self = sub.add_parser("selftest", help="run the built-in property suites")
    p_self.set_defaults(fn=cmd_selftest)

    args = parser.parse_args(argv)
    logging.basicConfig(level=os.environ.get("WEINGARTEN_LOG", "WARNING").upper())
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # transport errors, unexpected failures
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
