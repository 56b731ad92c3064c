"""Dynamic-error functionals and scheme-comparison sweeps.

The first-order error measures the mismatch between the velocity
trajectory and the derivative of the configuration trajectory; the
second-order error measures the residual of the dynamics along the
reconstructed polynomials.  Integrated over the horizon they summarize how
faithful a solution is to the system dynamics, which is the quantity the
two collocation schemes are compared on.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import lg_points, lg_weights
from .models import OcpDefinition, SecondOrderModel
from .nlp import STATUS_CONVERGED, SolveOptions, solve
from .transcription import (
    SCHEME_LG,
    Trajectory,
    build_basis,
    extract_trajectory,
    guess_from_trajectory,
    make_initial_guess,
    normalize_scheme,
    short_scheme,
    transcribe_lg,
    transcribe_lg2,
)

# fixed composite quadrature for error integrals: |eps| of a first-order
# solution has kinks at collocation points, so panels keep the error
# bounded without adaptive (and order-dependent) subdivision
_PANELS = 20
_PANEL_ORDER = 10


class NonFiniteErrorValue(ValueError):
    """The integrand returned a non-finite value; carries the time."""


@dataclass(frozen=True)
class ErrorReport:
    scheme: str
    N: int
    e1_per_coord: tuple[float, ...]
    e2_per_coord: tuple[float, ...]
    e1_joint: Optional[float]
    e2_joint: Optional[float]
    status: str
    iterations: int
    wall_time: float
    objective: float
    t_f: float
    eq_violation: float


def eps1(traj: Trajectory, t) -> np.ndarray:
    """First-order dynamic error qdot(t) - v(t) per coordinate.

    Identically zero for second-order trajectories: velocity and
    configuration derivative share one polynomial.
    """
    return np.atleast_1d(traj.config_derivative(t) - traj.velocity(t))


def eps2(traj: Trajectory, model: SecondOrderModel, t) -> np.ndarray:
    """Second-order dynamic error qddot(t) - g(q, qdot, u, t) per coordinate.

    qddot and qdot are exact derivatives of the configuration polynomial;
    the control is its collocation-point interpolant.
    """
    q = traj.config(t)
    qd = traj.config_derivative(t)
    qdd = traj.config_second_derivative(t)
    u = traj.control(t)
    return np.atleast_1d(qdd - model.accel(q, qd, u, t))


def joint_eps2(traj: Trajectory, model: SecondOrderModel, t) -> float:
    """Sum of per-coordinate |eps2|; requires uniform coordinate units."""
    units = set(model.coord_units)
    if len(units) > 1:
        raise ValueError(
            f"joint error undefined for mixed coordinate units {sorted(units)}"
        )
    return float(np.sum(np.abs(eps2(traj, model, t))))


def _quadrature_grid(t_f: float) -> tuple[np.ndarray, np.ndarray]:
    x = lg_points(_PANEL_ORDER)
    w = lg_weights(_PANEL_ORDER)
    width = t_f / _PANELS
    starts = width * np.arange(_PANELS)
    ts = (starts[:, None] + 0.5 * width * (x[None, :] + 1.0)).ravel()
    ws = np.tile(0.5 * width * w, _PANELS)
    return ts, ws


def integrate_error(err_fn: Callable[[float], float], t_f: float) -> float:
    """Composite Gauss quadrature of err_fn over [0, t_f] (20 x 10 points)."""
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    ts, ws = _quadrature_grid(t_f)
    total = 0.0
    for t, w in zip(ts, ws):
        val = float(err_fn(t))
        if not np.isfinite(val):
            raise NonFiniteErrorValue(f"non-finite error value at t={t}")
        total += w * val
    return total


def error_report(
    traj: Trajectory,
    model: SecondOrderModel,
    *,
    status: str = "",
    iterations: int = 0,
    wall_time: float = 0.0,
    objective: float = float("nan"),
    eq_violation: float = float("nan"),
) -> ErrorReport:
    """Integrate per-coordinate and joint errors on the shared grid."""
    ts, ws = _quadrature_grid(traj.t_f)
    E1 = np.abs(np.stack([eps1(traj, t) for t in ts]))
    E2 = np.abs(np.stack([eps2(traj, model, t) for t in ts]))
    if not (np.all(np.isfinite(E1)) and np.all(np.isfinite(E2))):
        raise NonFiniteErrorValue("non-finite dynamic error along trajectory")
    e1 = tuple(float(v) for v in ws @ E1)
    e2 = tuple(float(v) for v in ws @ E2)
    uniform = len(set(model.coord_units)) == 1
    return ErrorReport(
        scheme=short_scheme(traj.scheme),
        N=traj.basis.N,
        e1_per_coord=e1,
        e2_per_coord=e2,
        e1_joint=float(ws @ E1.sum(axis=1)) if uniform else None,
        e2_joint=float(ws @ E2.sum(axis=1)) if uniform else None,
        status=status,
        iterations=iterations,
        wall_time=wall_time,
        objective=objective,
        t_f=traj.t_f,
        eq_violation=eq_violation,
    )


def solve_ocp(
    ocp: OcpDefinition,
    scheme: str,
    N: int,
    options: SolveOptions | None = None,
    warm_start: Trajectory | None = None,
):
    """Transcribe, solve, and reconstruct; returns (result, traj, wall_s).

    Starts from the deterministic linear guess unless a previously solved
    trajectory is supplied, in which case its resampling seeds the solve.
    """
    tag = normalize_scheme(scheme)
    transcribe = transcribe_lg if tag == SCHEME_LG else transcribe_lg2
    problem, layout = transcribe(ocp, N)
    bas = build_basis(tag, N)
    if warm_start is not None:
        z0 = guess_from_trajectory(ocp, layout, bas, warm_start)
    else:
        z0 = make_initial_guess(ocp, layout, bas)
    t0 = time.perf_counter()
    result = solve(problem, options, initial_guess=z0)
    wall = time.perf_counter() - t0
    traj = extract_trajectory(layout, result.z_star, bas)
    return result, traj, wall


def sweep(
    ocp: OcpDefinition,
    scheme: str,
    N_list: Sequence[int],
    options: SolveOptions | None = None,
    warm_start: bool = True,
) -> list[ErrorReport]:
    """Solve the problem for each N and report integrated dynamic errors.

    Consecutive N warm-start from the previous solution by default, which
    keeps the whole sweep inside one local basin so scheme comparisons are
    like for like (and speeds convergence).  Failed solves are recorded
    with their status rather than dropped.
    """
    if not N_list:
        raise ValueError("N_list must be non-empty")
    reports = []
    prev_traj = None
    for N in N_list:
        result, traj, wall = solve_ocp(
            ocp, scheme, N, options,
            warm_start=prev_traj if warm_start else None,
        )
        reports.append(
            error_report(
                traj,
                ocp.model,
                status=result.status,
                iterations=result.iterations,
                wall_time=wall,
                objective=result.objective_value,
                eq_violation=result.eq_violation,
            )
        )
        if result.status == STATUS_CONVERGED:
            prev_traj = traj
    return reports
