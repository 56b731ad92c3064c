"""Initial value problems on the collocation bases.

The Gauss-structured node sets leave exactly as many free parameters as
there are collocation plus initial-value equations, so an IVP is a square
nonlinear system solved here by damped Newton.  A high-accuracy adaptive
Runge-Kutta integrator provides the independent reference solution used
throughout the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp as _scipy_solve_ivp

from .basis import KIND_LG, KIND_LG2, build_basis
from .models import SecondOrderModel, first_order_wrap
from .nlp import differentiate
from .transcription import DecisionLayout, Trajectory, extract_trajectory

_NEWTON_TOL = 1e-10
_MAX_HALVINGS = 30


class IvpConvergenceError(RuntimeError):
    """Damped Newton failed; carries the residual-norm history."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(f"{message}; residual history {history}")
        self.history = history


@dataclass(frozen=True)
class IvpSpec:
    model: SecondOrderModel
    q0: np.ndarray
    v0: np.ndarray
    control_fn: Callable[[float], np.ndarray]
    t_f: float
    N: int

    def __post_init__(self):
        q0 = np.asarray(self.q0, dtype=float).reshape(self.model.n_q)
        v0 = np.asarray(self.v0, dtype=float).reshape(self.model.n_q)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "v0", v0)
        if self.t_f <= 0:
            raise ValueError("t_f must be positive")
        if self.N < 1:
            raise ValueError("N must be >= 1")


def _controls_at(spec: IvpSpec, times: np.ndarray) -> np.ndarray:
    return np.stack(
        [np.atleast_1d(np.asarray(spec.control_fn(t), dtype=float)) for t in times]
    )


def _damped_newton(residual, x0: np.ndarray, max_iter: int = 60) -> np.ndarray:
    x = x0
    r = residual(x)
    norm = float(np.max(np.abs(r)))
    history = [norm]
    for _ in range(max_iter):
        if norm <= _NEWTON_TOL:
            return x
        J = differentiate(residual, x)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise IvpConvergenceError(f"singular Jacobian: {exc}", history)
        alpha = 1.0
        for _ in range(_MAX_HALVINGS):
            x_new = x + alpha * step
            r_new = residual(x_new)
            norm_new = float(np.max(np.abs(r_new)))
            if norm_new < norm:
                break
            alpha *= 0.5
        else:
            raise IvpConvergenceError(
                "no descent after 30 step halvings; reduce t_f or raise N", history
            )
        x, r, norm = x_new, r_new, norm_new
        history.append(norm)
    if norm <= _NEWTON_TOL:
        return x
    raise IvpConvergenceError("Newton iteration limit reached", history)


def solve_ivp_lg2(spec: IvpSpec) -> "Trajectory":
    """Solve the IVP on the second-order basis.

    Unknowns are the configuration values at all N+2 nodes; equations are
    the N collocation residuals plus the initial configuration and initial
    velocity conditions.
    """
    bas = build_basis(KIND_LG2, spec.N)
    n_q = spec.model.n_q
    B = bas.B
    Dst = bas.D
    D2 = Dst @ Dst
    s = 2.0 / spec.t_f
    t_c = spec.t_f * (bas.collocation_points + 1.0) / 2.0
    Uc = _controls_at(spec, t_c)
    accel = spec.model.accel

    def residual(qflat):
        Q = qflat.reshape(B, n_q)
        Qd = s * (Dst @ Q)
        Qdd = s * s * (D2 @ Q)
        G = accel(Q[1:-1], Qd[1:-1], Uc, t_c)
        return np.concatenate(
            [(Qdd[1:-1] - G).ravel(), Q[0] - spec.q0, Qd[0] - spec.v0]
        )

    x0 = np.tile(spec.q0, B)
    Qsol = _damped_newton(residual, x0).reshape(B, n_q)
    layout = DecisionLayout(
        scheme=KIND_LG2,
        N=spec.N,
        n_q=n_q,
        n_u=spec.model.n_u,
        node_rows=B,
        node_width=n_q,
        t_f_fixed=spec.t_f,
    )
    z = layout.pack(Qsol, Uc)
    return extract_trajectory(layout, z, bas)


def solve_ivp_lg(spec: IvpSpec) -> "Trajectory":
    """First-order analogue: state values at the N+1 nodes, with the
    collocation equations plus the initial-state condition."""
    bas = build_basis(KIND_LG, spec.N)
    n_q = spec.model.n_q
    B = bas.B
    D = bas.D
    s = 2.0 / spec.t_f
    t_c = spec.t_f * (bas.collocation_points + 1.0) / 2.0
    Uc = _controls_at(spec, t_c)
    f = first_order_wrap(spec.model)
    x_init = np.concatenate([spec.q0, spec.v0])

    def residual(xflat):
        X = xflat.reshape(B, 2 * n_q)
        F = f(X[1:], Uc, t_c)
        return np.concatenate([(s * (D @ X) - F).ravel(), X[0] - x_init])

    x0 = np.tile(x_init, B)
    Xsol = _damped_newton(residual, x0).reshape(B, 2 * n_q)
    layout = DecisionLayout(
        scheme=KIND_LG,
        N=spec.N,
        n_q=n_q,
        n_u=spec.model.n_u,
        node_rows=B,
        node_width=2 * n_q,
        t_f_fixed=spec.t_f,
    )
    z = layout.pack(Xsol, Uc)
    return extract_trajectory(layout, z, bas)


@dataclass(frozen=True)
class ReferenceSolution:
    """Dense adaptive Runge-Kutta solution, evaluable at any t in [0, t_f]."""

    t_f: float
    n_q: int
    _sol: object

    def state(self, t) -> np.ndarray:
        y = self._sol(np.asarray(t, dtype=float))
        return y.T if np.ndim(t) else y

    def config(self, t) -> np.ndarray:
        return self.state(t)[..., : self.n_q]

    def velocity(self, t) -> np.ndarray:
        return self.state(t)[..., self.n_q :]


def reference_integrate(
    model: SecondOrderModel,
    q0,
    v0,
    control_fn: Callable[[float], np.ndarray],
    t_f: float,
    tol: float = 1e-10,
) -> ReferenceSolution:
    """Adaptive embedded Runge-Kutta (Dormand-Prince pair) on the
    first-order form, with the method's dense-output interpolant."""
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-13, 1e-6]")
    n_q = model.n_q
    q0 = np.asarray(q0, dtype=float).reshape(n_q)
    v0 = np.asarray(v0, dtype=float).reshape(n_q)
    f = first_order_wrap(model)

    def rhs(t, y):
        u = np.atleast_1d(np.asarray(control_fn(t), dtype=float))
        return f(y, u, t)

    out = _scipy_solve_ivp(
        rhs,
        (0.0, t_f),
        np.concatenate([q0, v0]),
        method="RK45",
        rtol=tol,
        atol=tol,
        dense_output=True,
    )
    if not out.success:
        raise RuntimeError(f"reference integration failed: {out.message}")
    return ReferenceSolution(t_f=t_f, n_q=n_q, _sol=out.sol)
