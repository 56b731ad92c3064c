"""Command-line client for solves, sweeps, and IVP checks.

The CLI builds the same request models the HTTP service accepts and, by
default, executes them in-process; ``--server URL`` sends them to a
running service instead.  Results land as CSV/JSON files stamped with
schema versions.  Exit codes: 0 success, 1 solver non-convergence,
2 configuration or expression errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from pydantic import ValidationError

from . import models, runner
from .controls import ControlExprError
from .service.schemas import (
    IvpRequest,
    IvpResponse,
    ParamOverrides,
    SolveRequest,
    SolveResponse,
    SolverSettings,
    SweepRequest,
    SweepResponse,
    SWEEP_SCHEMA,
)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    pass


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, comments: list[str], header: list[str], rows) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_overrides(path: str | None) -> ParamOverrides:
    if path is None:
        return ParamOverrides()
    params = models.load_params(path)  # validates the schema string
    return ParamOverrides(
        pendulum=dataclasses.asdict(params.pendulum),
        cartpole=dataclasses.asdict(params.cartpole),
    )


def _solver_settings(args) -> SolverSettings:
    return SolverSettings(
        feas_tol=args.feas_tol, opt_tol=args.opt_tol, max_iter=args.max_iter
    )


def _parse_n_range(text: str) -> list[int]:
    """Accept '8', '6,10,14', or 'start:stop[:step]' (inclusive stop)."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                start, stop, step = parts[0], parts[1], 1
            elif len(parts) == 3:
                start, stop, step = parts
            else:
                raise ValueError
            if step < 1 or stop < start:
                raise ValueError
            return list(range(start, stop + 1, step))
        if "," in text:
            return [int(p) for p in text.split(",") if p.strip()]
        return [int(text)]
    except ValueError:
        raise ConfigError(
            f"invalid N-range {text!r}; use 'N', 'a,b,c', or 'start:stop[:step]'"
        )


def _post(server: str, endpoint: str, request_model, response_cls):
    import httpx

    resp = httpx.post(
        f"{server.rstrip('/')}/{endpoint}",
        json=json.loads(request_model.model_dump_json()),
        timeout=3600.0,
    )
    if resp.status_code != 200:
        raise ConfigError(f"server returned {resp.status_code}: {resp.text[:400]}")
    return response_cls.model_validate(resp.json())


def _summary_header(n_q: int) -> list[str]:
    cols = ["problem", "scheme", "N", "status", "converged", "objective", "t_f",
            "iterations", "wall_s", "eq_violation"]
    cols += [f"e1_q{i+1}" for i in range(n_q)]
    cols += [f"e2_q{i+1}" for i in range(n_q)]
    cols += ["e1_joint", "e2_joint"]
    return cols


def _summary_row(rec) -> list:
    return [rec.problem, rec.scheme, rec.N, rec.status, rec.converged,
            rec.objective, rec.t_f, rec.iterations, rec.wall_s,
            rec.eq_violation, *rec.e1_per_coord, *rec.e2_per_coord,
            rec.e1_joint, rec.e2_joint]


def cmd_solve(args) -> int:
    request = SolveRequest(
        problem=args.problem,
        scheme=args.scheme,
        N=args.N,
        solver=_solver_settings(args),
        params=_load_overrides(args.config),
        trajectory_points=args.trajectory_points,
    )
    if args.server:
        response = _post(args.server, "solve", request, SolveResponse)
    else:
        response = runner.run_solve(request)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for samples in response.trajectories:
        path = out / (
            f"solve_{samples.problem}_{samples.scheme}_N{samples.N}_trajectory.csv"
        )
        _write_csv(
            path,
            [
                f"schema: {samples.schema_version}",
                f"problem: {samples.problem} scheme: {samples.scheme} N: {samples.N}",
                "u_extrapolated: 1 marks control samples outside the collocation "
                "span (interpolant extrapolation)",
            ],
            samples.columns,
            samples.rows,
        )

    n_q = len(response.records[0].e1_per_coord)
    if args.format == "csv":
        path = out / f"solve_{args.problem}_summary.csv"
        _write_csv(
            path,
            [
                f"schema: {response.schema_version}",
                "config: " + response.config.model_dump_json(),
            ],
            _summary_header(n_q),
            [_summary_row(r) for r in response.records],
        )
    else:
        path = out / f"solve_{args.problem}_summary.json"
        doc = response.model_dump(exclude={"trajectories"})
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {path}")
    for rec in response.records:
        print(
            f"{rec.problem} {rec.scheme} N={rec.N}: {rec.status}, "
            f"objective {rec.objective:.6g}, t_f {rec.t_f:.6g}"
        )
    return EXIT_OK if all(r.converged for r in response.records) else EXIT_NOT_CONVERGED


def cmd_sweep(args) -> int:
    request = SweepRequest(
        problem=args.problem,
        scheme=args.scheme,
        N_list=_parse_n_range(args.N_range),
        solver=_solver_settings(args),
        params=_load_overrides(args.config),
    )
    if args.server:
        response = _post(args.server, "sweep", request, SweepResponse)
    else:
        response = runner.run_sweep(request)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = response.rows
    n_q = len(rows[0].e2_per_coord) if rows else 0
    header = ["scheme", "N"]
    header += [f"e2_q{i+1}" for i in range(n_q)]
    header += ["e2_joint"]
    header += [f"e1_q{i+1}" for i in range(n_q)]
    header += ["e1_joint", "objective", "t_f", "iterations", "wall_s", "status"]
    path = out / f"sweep_{args.problem}.csv"
    _write_csv(
        path,
        [
            f"schema: {SWEEP_SCHEMA}",
            "config: " + response.config.model_dump_json(),
            "columns: scheme tag; collocation count N; integrated second-order "
            "dynamic error per coordinate and joint (empty when units differ); "
            "same for first-order error; objective; final time; solver outer "
            "iterations; wall-clock seconds; solver status",
        ],
        header,
        [
            [row.scheme, row.N, *row.e2_per_coord, row.e2_joint,
             *row.e1_per_coord, row.e1_joint, row.objective, row.t_f,
             row.iterations, row.wall_s, row.status]
            for row in rows
        ],
    )
    print(f"wrote {path}")
    converged = sum(row.status == "converged" for row in rows)
    print(f"{converged}/{len(rows)} rows converged")
    return EXIT_OK if converged >= 1 else EXIT_NOT_CONVERGED


def cmd_ivp(args) -> int:
    request = IvpRequest(
        problem=args.problem,
        q0=[float(x) for x in args.q0.split(",")],
        v0=[float(x) for x in args.v0.split(",")] if args.v0 else None,
        control=args.control,
        t_f=args.t_f,
        N=args.N,
        scheme=args.scheme,
        oracle_tol=args.oracle_tol,
        params=_load_overrides(args.config),
    )
    if args.server:
        response = _post(args.server, "ivp", request, IvpResponse)
    else:
        response = runner.run_ivp(request)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        path = out / f"ivp_{args.problem}.csv"
        _write_csv(
            path,
            [
                f"schema: {response.schema_version}",
                "config: " + response.config.model_dump_json(),
            ],
            ["endpoint_discrepancy", "max_grid_discrepancy", "converged"],
            [[response.endpoint_discrepancy, response.max_grid_discrepancy,
              response.converged]],
        )
    else:
        path = out / f"ivp_{args.problem}.json"
        path.write_text(response.model_dump_json(indent=2) + "\n", encoding="utf-8")
    print(f"wrote {path}")
    if not response.converged:
        print(f"collocation IVP failed: {response.message}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    print(
        f"endpoint discrepancy {response.endpoint_discrepancy:.3e}, "
        f"max over grid {response.max_grid_discrepancy:.3e}"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pscolloc",
        description="Pseudospectral trajectory optimization benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scheme_choices):
        p.add_argument("--problem", required=True, choices=["pendulum", "cartpole"])
        p.add_argument("--scheme", default="lg2", choices=scheme_choices)
        p.add_argument("--config", default=None, help="parameter JSON file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", default="json", choices=["csv", "json"])
        p.add_argument("--server", default=None, help="run against a service URL")
        p.add_argument("--feas-tol", type=float, default=1e-8)
        p.add_argument("--opt-tol", type=float, default=1e-6)
        p.add_argument("--max-iter", type=int, default=30)

    p_solve = sub.add_parser("solve", help="solve one benchmark problem")
    common(p_solve, ["lg", "lg2", "both"])
    p_solve.add_argument("--N", type=int, required=True)
    p_solve.add_argument("--trajectory-points", type=int, default=1000)
    p_solve.set_defaults(fn=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="compare schemes over a range of N")
    common(p_sweep, ["lg", "lg2", "both"])
    p_sweep.add_argument(
        "--N-range", required=True, dest="N_range",
        help="'N', 'a,b,c', or 'start:stop[:step]' (inclusive)",
    )
    p_sweep.set_defaults(fn=cmd_sweep)

    p_ivp = sub.add_parser("ivp", help="collocation IVP vs reference integrator")
    common(p_ivp, ["lg", "lg2"])
    p_ivp.add_argument("--q0", required=True, help="comma-separated configuration")
    p_ivp.add_argument("--v0", default=None, help="comma-separated velocity")
    p_ivp.add_argument(
        "--control", default="0",
        help="expression in t (+,-,*,/, sin, cos); one per control, comma-separated",
    )
    p_ivp.add_argument("--t-f", type=float, required=True, dest="t_f")
    p_ivp.add_argument("--N", type=int, required=True)
    p_ivp.add_argument("--oracle-tol", type=float, default=1e-10)
    p_ivp.set_defaults(fn=cmd_ivp)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ControlExprError as exc:
        print(f"control expression error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ValidationError, ValueError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
