"""Command-line client for the solver service.

Every subcommand talks HTTP to the service API: against `--server URL` when
given, otherwise against an in-process ASGI transport (no running server
required).  The client writes returned artifacts (JSON/CSV) into the output
directory.

Exit codes: 0 ok, 2 config error, 3 solver failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

_CONFIG_KEYS = ("k", "w_c", "n_max", "nodes_per_panel", "density_points",
                "newton_tol", "max_iters", "use_full_derivative", "r_omega",
                "orbit_tol")


class ClientError(Exception):
    def __init__(self, exit_code: int, payload: dict):
        super().__init__(payload.get("message", "request failed"))
        self.exit_code = exit_code
        self.payload = payload


class ServiceClient:
    """Thin HTTP client; in-process ASGI unless a server URL is given."""

    def __init__(self, server: str | None):
        self.server = server

    async def _request(self, path: str, payload: dict) -> dict:
        if self.server:
            transport = None
            base = self.server
        else:
            from .service import create_app
            transport = httpx.ASGITransport(app=create_app())
            base = "http://rotvlasov.local"
        async with httpx.AsyncClient(transport=transport, base_url=base,
                                     timeout=None) as client:
            resp = await client.post(path, json=payload)
        if resp.status_code == 200:
            return resp.json()
        try:
            body = resp.json()
        except ValueError:
            body = {"code": "solver-failure", "message": resp.text}
        code = EXIT_CONFIG if body.get("code") == "config-error" else EXIT_SOLVER
        raise ClientError(code, body)

    def post(self, path: str, payload: dict) -> dict:
        return asyncio.run(self._request(path, payload))


def _load_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ClientError(EXIT_CONFIG, {"code": "config-error",
                                            "message": f"config file: {exc}"})
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text)
    print(f"wrote {path}", file=sys.stderr)


def _parse_vec(text: str):
    parts = [float(p) for p in text.replace(",", " ").split()]
    if len(parts) != 3:
        raise ClientError(EXIT_CONFIG, {"code": "config-error",
                                        "message": f"need 3 components, got {text!r}"})
    return parts


def cmd_basestate(client: ServiceClient, args) -> int:
    doc = client.post("/basestate", {"config": _load_config(args)})
    out = _out_dir(args)
    _write(out / "profile.csv", doc["profile_csv"])
    _write(out / "operators.csv", doc["operators_csv"])
    _write(out / "basestate.json", json.dumps(doc["summary"], indent=1))
    print(json.dumps(doc["summary"], indent=1))
    return EXIT_OK


def cmd_solve(client: ServiceClient, args) -> int:
    doc = client.post("/solve", {"config": _load_config(args),
                                 "omega": args.omega})
    out = _out_dir(args)
    tag = f"{args.omega:.6f}".replace(".", "p").replace("-", "m")
    _write(out / f"state_omega_{tag}.json", json.dumps(doc["state"], indent=1))
    _write(out / f"fields_omega_{tag}.csv", doc["fields_csv"])
    print(json.dumps(doc["summary"], indent=1))
    return EXIT_OK


def cmd_continue(client: ServiceClient, args) -> int:
    payload = {"config": _load_config(args), "steps": args.steps}
    if args.omega_max is not None:
        payload["omega_max"] = args.omega_max
    doc = client.post("/continuation", payload)
    out = _out_dir(args)
    for i, state in enumerate(doc["states"]):
        _write(out / f"state_{i:04d}.json", json.dumps(state, indent=1))
    _write(out / "manifest.json", json.dumps(doc["manifest"], indent=1))
    print(json.dumps(doc["manifest"], indent=1))
    stopped = doc["manifest"].get("stopped_early")
    return EXIT_SOLVER if stopped else EXIT_OK


def cmd_verify(client: ServiceClient, args) -> int:
    try:
        state = json.loads(Path(args.state_file).read_text())
    except (OSError, ValueError) as exc:
        raise ClientError(EXIT_CONFIG, {"code": "config-error",
                                        "message": f"state file: {exc}"})
    doc = client.post("/verify", {"state": state})
    print(json.dumps(doc["report"], indent=1))
    return EXIT_OK if doc["ok"] else EXIT_VERIFY


def cmd_orbit(client: ServiceClient, args) -> int:
    try:
        state = json.loads(Path(args.state_file).read_text())
    except (OSError, ValueError) as exc:
        raise ClientError(EXIT_CONFIG, {"code": "config-error",
                                        "message": f"state file: {exc}"})
    payload = {"state": state, "x0": _parse_vec(args.x0),
               "v0": _parse_vec(args.v0), "t_end": args.t_end}
    if args.tol is not None:
        payload["tol"] = args.tol
    doc = client.post("/orbit", payload)
    out = _out_dir(args)
    _write(out / "orbit.csv", doc["orbit_csv"])
    _write(out / "orbit.json", json.dumps(doc["summary"], indent=1))
    print(json.dumps(doc["summary"], indent=1))
    return EXIT_VERIFY if doc["summary"]["escaped"] else EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--server", help="service URL (default: run in-process)")
    p.add_argument("--out", default="out", help="artifact output directory")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--k", type=float, help="polytropic exponent")
    p.add_argument("--w-c", dest="w_c", type=float, help="central depth of the shot")
    p.add_argument("--n-max", dest="n_max", type=int, help="max harmonic degree")
    p.add_argument("--nodes-per-panel", dest="nodes_per_panel", type=int)
    p.add_argument("--newton-tol", dest="newton_tol", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--full-derivative", dest="use_full_derivative",
                   action="store_const", const=True, default=None,
                   help="solve chord steps with the full Frechet derivative")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rotvlasov",
                                 description="rotating steady-state solver client")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basestate", help="build and export the base state")
    _add_common(p)
    p.set_defaults(func=cmd_basestate)

    p = sub.add_parser("solve", help="solve at a single angular velocity")
    _add_common(p)
    p.add_argument("--omega", type=float, required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("continue", help="continuation from 0 to omega-max")
    _add_common(p)
    p.add_argument("--omega-max", dest="omega_max", type=float,
                   help="default: half the hard cap sqrt(E1)/4")
    p.add_argument("--steps", type=int, default=8)
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("verify", help="re-run all invariant checks on a state file")
    p.add_argument("state_file")
    p.add_argument("--server")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("orbit", help="integrate a characteristic in a stored state")
    p.add_argument("state_file")
    p.add_argument("--x0", required=True, help="initial position 'x,y,z'")
    p.add_argument("--v0", required=True, help="initial velocity 'vx,vy,vz'")
    p.add_argument("--t-end", dest="t_end", type=float, default=50.0)
    p.add_argument("--tol", type=float)
    p.add_argument("--server")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    client = ServiceClient(getattr(args, "server", None))
    try:
        return args.func(client, args)
    except ClientError as exc:
        print(json.dumps(exc.payload, indent=1))
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
