"""Command-line client of the simulator service.

Every subcommand builds a validated request, sends it through the HTTP API,
and writes CSV/JSON artifacts from the response. By default the requests are
dispatched to an in-process instance of the app (no server required);
``--server http://host:port`` targets a running service instead. ``serve``
starts that service.

Exit codes: 0 success, 1 usage or validation error, 2 numerical failure,
3 partial ensemble failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import httpx
from pydantic import ValidationError

from . import __version__, schemas
from .serialize import read_csv, write_csv, write_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_PARTIAL = 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


class ServiceClient:
    """HTTP client; in-process ASGI transport unless a server URL is given."""

    def __init__(self, server: str | None = None):
        self._client = httpx.Client(base_url=server, timeout=None) if server else None

    def _post_in_process(self, path: str, payload: dict):
        import asyncio

        from .service import app

        async def go():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://spinmix.internal", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        return asyncio.run(go())

    def post(self, path: str, payload: dict) -> dict:
        if self._client is not None:
            resp = self._client.post(path, json=payload)
        else:
            resp = self._post_in_process(path, payload)
        if resp.status_code == 422:
            raise CliError(f"request rejected: {resp.json().get('detail')}", EXIT_USAGE)
        if resp.status_code >= 400:
            raise CliError(f"service error {resp.status_code}: {resp.text}", EXIT_NUMERICAL)
        return resp.json()

    def close(self):
        if self._client is not None:
            self._client.close()


def _load_config(path, model):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"config file is not valid JSON: {exc}")
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        raise CliError(f"config does not match the schema:\n{exc}")


def _manifest(command, config, outputs, started, **extra):
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "outputs": outputs,
        "elapsed_s": round(time.monotonic() - started, 3),
        **extra,
    }
    print(json.dumps(manifest, indent=2, sort_keys=True))


def _cmd_simulate(args, client: ServiceClient):
    started = time.monotonic()
    job = _load_config(args.config, schemas.SimulateJob)
    if job.runs != 1:
        raise CliError("simulate runs a single trajectory; use the ensemble subcommand for runs > 1")
    req = schemas.SimulateRequest(**job.model_dump(exclude={"output_csv", "output_json", "runs"}))
    data = client.post("/simulate", req.model_dump())
    if data["status"] == "aborted":
        print(json.dumps({"command": "simulate", "status": "aborted", "detail": data["detail"]}, indent=2))
        return EXIT_NUMERICAL
    outputs = []
    if job.output_csv:
        write_csv(
            job.output_csv,
            ["tau", "n0_mean", "n0_var", "current", "dW"],
            zip(data["times"], data["n0_mean"], data["n0_var"], data["current"], data["wiener"]),
            metadata=data["meta"],
        )
        outputs.append(job.output_csv)
    if job.output_json:
        write_json(job.output_json, data)
        outputs.append(job.output_json)
    _manifest("simulate", req.model_dump(), outputs, started, status="ok",
              samples=len(data["times"]))
    return EXIT_OK


def _cmd_ensemble(args, client: ServiceClient):
    started = time.monotonic()
    job = _load_config(args.config, schemas.EnsembleJob)
    req = schemas.EnsembleRequest(**job.model_dump(exclude={"output_csv", "output_json"}))
    data = client.post("/ensemble", req.model_dump())
    outputs = []
    if job.output_csv:
        write_csv(
            job.output_csv,
            ["tau", "mean_n0", "std_n0", "mean_current", "mean_n0_fluct"],
            zip(data["times"], data["mean_n0"], data["std_n0"],
                data["mean_current"], data["mean_n0_fluct"]),
            metadata={"run_count": data["run_count"], **data["meta"]},
        )
        outputs.append(job.output_csv)
    if job.output_json:
        write_json(job.output_json, data)
        outputs.append(job.output_json)
    _manifest("ensemble", req.model_dump(), outputs, started, status=data["status"],
              run_count=data["run_count"], failed_indices=data["failed_indices"])
    return EXIT_OK if data["status"] == "ok" else EXIT_PARTIAL


def _cmd_steadystate(args, client: ServiceClient):
    started = time.monotonic()
    job = _load_config(args.config, schemas.SteadyStateJob)
    req = schemas.SteadyStateRequest(**job.model_dump(exclude={"output_csv", "output_json"}))
    data = client.post("/steadystate", req.model_dump())
    outputs = []
    if job.output_csv:
        write_csv(
            job.output_csv,
            ["k", "p", "stderr"],
            zip(range(len(data["p_k"])), data["p_k"], data["p_k_stderr"]),
            metadata={"run_count": data["run_count"], "t_hold": data["t_hold"],
                      "chi2_stat": data["chi2_stat"], "p_value": data["p_value"]},
        )
        outputs.append(job.output_csv)
    if job.output_json:
        write_json(job.output_json, data)
        outputs.append(job.output_json)
    _manifest("steadystate", req.model_dump(), outputs, started, status=data["status"],
              uniform_ok=data["uniform_ok"], converged=data["converged"],
              p_value=data["p_value"])
    return EXIT_OK if data["status"] == "ok" else EXIT_PARTIAL


def _cmd_groundstate(args, client: ServiceClient):
    started = time.monotonic()
    try:
        req = schemas.GroundStateRequest(N=args.N, sigma=args.sigma, m=args.m)
    except ValidationError as exc:
        raise CliError(str(exc))
    data = client.post("/groundstate", req.model_dump())
    outputs = []
    if args.output_csv:
        write_csv(
            args.output_csv,
            ["k", "N_plus", "N_0", "N_minus", "amplitude"],
            [(r["k"], r["N_plus"], r["N_0"], r["N_minus"], r["amplitude"]) for r in data["rows"]],
            metadata={"N": data["N"], "sigma": data["sigma"], "m": data["m"],
                      "energy": data["energy"]},
        )
        outputs.append(args.output_csv)
    else:
        print("k,N_plus,N_0,N_minus,amplitude")
        for r in data["rows"]:
            print(f"{r['k']},{r['N_plus']},{r['N_0']},{r['N_minus']},{r['amplitude']:.12g}")
    _manifest("groundstate", req.model_dump(), outputs, started,
              energy=data["energy"], n0_mean=data["n0_mean"], n0_fluct=data["n0_fluct"])
    return EXIT_OK


def _cmd_spectrum(args, client: ServiceClient):
    started = time.monotonic()
    try:
        _, _, cols = read_csv(args.input)
    except OSError as exc:
        raise CliError(f"cannot read input CSV: {exc}")
    time_col = args.time_column
    if time_col not in cols or args.column not in cols:
        raise CliError(f"input CSV lacks column {time_col!r} or {args.column!r}")
    req = schemas.SpectrumRequest(times=cols[time_col].tolist(),
                                  values=cols[args.column].tolist(), window=args.window)
    data = client.post("/spectrum", req.model_dump())
    outputs = []
    if args.output_csv:
        write_csv(args.output_csv, ["omega", "magnitude"],
                  zip(data["frequencies"], data["magnitudes"]),
                  metadata={"source": args.input, "column": args.column, "window": args.window})
        outputs.append(args.output_csv)
    _manifest("spectrum", {"input": args.input, "column": args.column, "window": args.window},
              outputs, started, peaks=data["peaks"][:8])
    return EXIT_OK


def _cmd_params(args, client: ServiceClient):
    started = time.monotonic()
    job = _load_config(args.config, schemas.ParamsJob)
    req = schemas.ParamsRequest(**job.model_dump(exclude={"output_csv", "output_json"}))
    data = client.post("/params", req.model_dump(by_alias=True))
    outputs = []
    if job.output_json:
        write_json(job.output_json, data)
        outputs.append(job.output_json)
    _manifest("params", req.model_dump(by_alias=True), outputs, started, **data)
    return EXIT_OK


def _cmd_bloch2(args, client: ServiceClient):
    started = time.monotonic()
    try:
        req = schemas.BlochRequest(
            sigma=args.sigma, xi=args.xi, dt=args.dt, t_final=args.t_final,
            seed=args.seed, record_stride=args.record_stride,
        )
    except ValidationError as exc:
        raise CliError(str(exc))
    data = client.post("/bloch2", req.model_dump())
    outputs = []
    if args.output_csv:
        write_csv(args.output_csv, ["tau", "s_x", "s_y", "s_z"],
                  zip(data["times"], data["s_x"], data["s_y"], data["s_z"]),
                  metadata=req.model_dump())
        outputs.append(args.output_csv)
    _manifest("bloch2", req.model_dump(), outputs, started, samples=len(data["times"]))
    return EXIT_OK


def _cmd_serve(args, client=None):
    import uvicorn

    uvicorn.run("spinmix.service:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinmix",
        description="Monitored spin-1 condensate simulator (thin client of the spinmix service)",
    )
    parser.add_argument("--server", default=None,
                        help="URL of a running service; default runs the app in-process")
    parser.add_argument("--version", action="version", version=f"spinmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("simulate", "run one conditional trajectory from a JSON config"),
        ("ensemble", "run and average many trajectories from a JSON config"),
        ("steadystate", "estimate the late-time ladder distribution from a JSON config"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON job file (strict schema)")

    p = sub.add_parser("groundstate", help="tabulate an analytic/numerical ground state")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--sigma", type=int, default=1, choices=(1, -1))
    p.add_argument("--m", type=int, default=0, help="ferromagnetic manifold index")
    p.add_argument("--output-csv", default=None)

    p = sub.add_parser("spectrum", help="Fourier spectrum of a recorded series")
    p.add_argument("--input", required=True, help="CSV produced by simulate/ensemble")
    p.add_argument("--column", default="n0_mean")
    p.add_argument("--time-column", default="tau")
    p.add_argument("--window", default="none", choices=("none", "hann"))
    p.add_argument("--output-csv", default=None)

    p = sub.add_parser("params", help="dimensionless couplings from lab parameters")
    p.add_argument("--config", required=True, help="JSON file with kappa, g0, lambda, eta, delta_pa, q (Hz)")

    p = sub.add_parser("bloch2", help="closed two-atom model trajectory")
    p.add_argument("--xi", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-final", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=int, default=1, choices=(1, -1))
    p.add_argument("--record-stride", type=int, default=10)
    p.add_argument("--output-csv", default=None)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


COMMANDS = {
    "simulate": _cmd_simulate,
    "ensemble": _cmd_ensemble,
    "steadystate": _cmd_steadystate,
    "groundstate": _cmd_groundstate,
    "spectrum": _cmd_spectrum,
    "params": _cmd_params,
    "bloch2": _cmd_bloch2,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.command == "serve":
        return _cmd_serve(args)
    client = ServiceClient(args.server)
    try:
        return COMMANDS[args.command](args, client)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    finally:
        client.close()


def main():  # console entry point
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
