"""Shared orchestration behind the HTTP service and the CLI.

Builds benchmark problems from (possibly overridden) parameters, runs
solves, sweeps, and collocation-IVP checks, and returns the wire-format
response models.  Everything is deterministic for a fixed request, so two
runs differ only in wall-time fields.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from . import analysis, ivp, models
from .controls import parse_control
from .nlp import STATUS_CONVERGED, SolveOptions
from .service.schemas import (
    IvpRequest,
    IvpResponse,
    ParamOverrides,
    SolveRecord,
    SolveRequest,
    SolveResponse,
    SweepRequest,
    SweepResponse,
    SweepRow,
    TrajectorySamples,
)

TRAJECTORY_COLUMNS_BASE = ["t"]


def resolve_params(overrides: ParamOverrides) -> models.BenchmarkParams:
    base = models.default_params()
    pend = dataclasses.replace(base.pendulum, **overrides.pendulum)
    cart = dataclasses.replace(base.cartpole, **overrides.cartpole)
    return models.BenchmarkParams(pendulum=pend, cartpole=cart)


def build_ocp(problem: str, params: models.BenchmarkParams) -> models.OcpDefinition:
    if problem == "pendulum":
        return models.pendulum_ocp(params.pendulum)
    if problem == "cartpole":
        return models.cartpole_ocp(params.cartpole)
    raise ValueError(f"unknown problem {problem!r}")


def build_model(problem: str, params: models.BenchmarkParams) -> models.SecondOrderModel:
    return build_ocp(problem, params).model


def _solver_options(req_solver) -> SolveOptions:
    return SolveOptions(
        feas_tol=req_solver.feas_tol,
        opt_tol=req_solver.opt_tol,
        max_iter=req_solver.max_iter,
    )


def _schemes(choice: str) -> list[str]:
    return ["lg", "lg2"] if choice == "both" else [choice]


def trajectory_columns(n_q: int, n_u: int) -> list[str]:
    cols = ["t"]
    cols += [f"q{i+1}" for i in range(n_q)]
    cols += [f"v{i+1}" for i in range(n_q)]
    cols += [f"u{j+1}" for j in range(n_u)]
    cols += [f"eps1_q{i+1}" for i in range(n_q)]
    cols += [f"eps2_q{i+1}" for i in range(n_q)]
    cols += ["u_extrapolated"]
    return cols


def sample_trajectory(
    traj, model: models.SecondOrderModel, n_points: int
) -> list[list[float]]:
    """Uniform time grid with states, controls, and dynamic errors per row."""
    ts = np.linspace(0.0, traj.t_f, n_points)
    rows = []
    for t in ts:
        q = np.atleast_1d(traj.config(t))
        v = np.atleast_1d(traj.velocity(t))
        u = np.atleast_1d(traj.control(t))
        e1 = analysis.eps1(traj, t)
        e2 = analysis.eps2(traj, model, t)
        extrap = float(traj.control_is_extrapolated(t))
        rows.append(
            [float(t), *map(float, q), *map(float, v), *map(float, u),
             *map(float, e1), *map(float, e2), extrap]
        )
    return rows


def _record_from(problem: str, report, result_message: str) -> SolveRecord:
    return SolveRecord(
        problem=problem,
        scheme=report.scheme,
        N=report.N,
        status=report.status,
        converged=report.status == STATUS_CONVERGED,
        objective=report.objective,
        t_f=report.t_f,
        iterations=report.iterations,
        wall_s=report.wall_time,
        eq_violation=report.eq_violation,
        ineq_violation=0.0,
        e1_per_coord=list(report.e1_per_coord),
        e2_per_coord=list(report.e2_per_coord),
        e1_joint=report.e1_joint,
        e2_joint=report.e2_joint,
        message=result_message,
    )


def run_solve(req: SolveRequest) -> SolveResponse:
    params = resolve_params(req.params)
    ocp = build_ocp(req.problem, params)
    options = _solver_options(req.solver)
    records = []
    trajectories = []
    for scheme in _schemes(req.scheme):
        result, traj, wall = analysis.solve_ocp(ocp, scheme, req.N, options)
        report = analysis.error_report(
            traj,
            ocp.model,
            status=result.status,
            iterations=result.iterations,
            wall_time=wall,
            objective=result.objective_value,
            eq_violation=result.eq_violation,
        )
        records.append(_record_from(req.problem, report, result.message))
        if req.include_trajectories:
            trajectories.append(
                TrajectorySamples(
                    problem=req.problem,
                    scheme=report.scheme,
                    N=req.N,
                    columns=trajectory_columns(ocp.model.n_q, ocp.model.n_u),
                    rows=sample_trajectory(traj, ocp.model, req.trajectory_points),
                )
            )
    return SolveResponse(config=req, records=records, trajectories=trajectories)


def run_sweep(req: SweepRequest) -> SweepResponse:
    params = resolve_params(req.params)
    ocp = build_ocp(req.problem, params)
    options = _solver_options(req.solver)
    rows = []
    for scheme in _schemes(req.scheme):
        for report in analysis.sweep(ocp, scheme, req.N_list, options):
            rows.append(
                SweepRow(
                    scheme=report.scheme,
                    N=report.N,
                    e2_per_coord=list(report.e2_per_coord),
                    e2_joint=report.e2_joint,
                    e1_per_coord=list(report.e1_per_coord),
                    e1_joint=report.e1_joint,
                    objective=report.objective,
                    t_f=report.t_f,
                    iterations=report.iterations,
                    wall_s=report.wall_time,
                    status=report.status,
                )
            )
    return SweepResponse(config=req, rows=rows)


def run_ivp(req: IvpRequest) -> IvpResponse:
    params = resolve_params(req.params)
    model = build_model(req.problem, params)
    q0 = np.asarray(req.q0, dtype=float)
    v0 = (
        np.zeros(model.n_q)
        if req.v0 is None
        else np.asarray(req.v0, dtype=float)
    )
    control_fn = parse_control(req.control, model.n_u)
    spec = ivp.IvpSpec(
        model=model, q0=q0, v0=v0, control_fn=control_fn, t_f=req.t_f, N=req.N
    )
    solver = ivp.solve_ivp_lg2 if req.scheme == "lg2" else ivp.solve_ivp_lg
    try:
        traj = solver(spec)
    except ivp.IvpConvergenceError as exc:
        return IvpResponse(
            config=req,
            endpoint_discrepancy=float("nan"),
            max_grid_discrepancy=float("nan"),
            final_config=[],
            final_velocity=[],
            converged=False,
            message=str(exc),
        )
    ref = ivp.reference_integrate(
        model, q0, v0, control_fn, req.t_f, tol=req.oracle_tol
    )
    ts = np.linspace(0.0, req.t_f, req.grid_points)
    diffs = [
        float(np.max(np.abs(np.atleast_1d(traj.config(t)) - ref.config(t))))
        for t in ts
    ]
    return IvpResponse(
        config=req,
        endpoint_discrepancy=diffs[-1],
        max_grid_discrepancy=max(diffs),
        final_config=[float(x) for x in np.atleast_1d(traj.config(req.t_f))],
        final_velocity=[float(x) for x in np.atleast_1d(traj.velocity(req.t_f))],
        converged=True,
    )
