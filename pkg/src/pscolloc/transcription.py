"""Transcription of optimal control problems into nonlinear programs.

Two schemes are provided.  The first-order scheme interpolates the full
state on tau_0 = -1 plus the N Gauss points and enforces xdot = f at the
Gauss points.  The second-order scheme interpolates only the configuration
on N+2 nodes (both endpoints added), obtains velocities and accelerations
by exact differentiation of that polynomial, and enforces qdd = g at the
Gauss points.  Velocity consistency is therefore structural in the second
scheme instead of being approximated.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import (
    KIND_LG,
    KIND_LG2,
    CollocationBasis,
    barycentric_weights,
    build_basis,
    interpolation_matrix,
)
from .models import FixedFinalTime, FreeFinalTime, OcpDefinition
from .nlp import NlpProblem

SCHEME_LG = KIND_LG
SCHEME_LG2 = KIND_LG2

_SCHEME_ALIASES = {
    "lg": SCHEME_LG,
    "lg-firstorder": SCHEME_LG,
    "lg2": SCHEME_LG2,
}


def normalize_scheme(scheme: str) -> str:
    try:
        return _SCHEME_ALIASES[scheme.lower()]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; expected 'lg' or 'lg2'")


def short_scheme(scheme: str) -> str:
    """CLI-facing tag: 'lg' or 'lg2'."""
    return "lg" if normalize_scheme(scheme) == SCHEME_LG else "lg2"


def time_map(t: float, t_f: float) -> float:
    """Map t in [0, t_f] to tau in [-1, 1] affinely."""
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    if t < -1e-12 * t_f or t > t_f * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {t_f}]")
    return -1.0 + 2.0 * t / t_f


def time_from_tau(tau: float, t_f: float) -> float:
    """Inverse of :func:`time_map`."""
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    return t_f * (tau + 1.0) / 2.0


@dataclass(frozen=True)
class DecisionLayout:
    """Slices of the flat decision vector for one transcription.

    The node block holds the state matrix row-major: (N+1) x 2n_q rows of
    X for the first-order scheme, (N+2) x n_q rows of Q for the second.
    Controls follow, one row per collocation point, then t_f when free.
    """

    scheme: str
    N: int
    n_q: int
    n_u: int
    node_rows: int
    node_width: int
    t_f_fixed: Optional[float]

    @property
    def node_block(self) -> slice:
        return slice(0, self.node_rows * self.node_width)

    @property
    def control_block(self) -> slice:
        start = self.node_rows * self.node_width
        return slice(start, start + self.N * self.n_u)

    @property
    def tf_index(self) -> Optional[int]:
        if self.t_f_fixed is not None:
            return None
        return self.node_rows * self.node_width + self.N * self.n_u

    @property
    def total_len(self) -> int:
        n = self.node_rows * self.node_width + self.N * self.n_u
        return n if self.t_f_fixed is not None else n + 1

    @property
    def offsets(self) -> dict[str, slice]:
        name = "state_nodes" if self.scheme == SCHEME_LG else "config_nodes"
        out = {name: self.node_block, "controls": self.control_block}
        if self.tf_index is not None:
            out["t_f"] = slice(self.tf_index, self.tf_index + 1)
        return out

    def node_matrix(self, z: np.ndarray) -> np.ndarray:
        return z[self.node_block].reshape(self.node_rows, self.node_width)

    def controls(self, z: np.ndarray) -> np.ndarray:
        return z[self.control_block].reshape(self.N, self.n_u)

    def t_f(self, z: np.ndarray) -> float:
        if self.t_f_fixed is not None:
            return self.t_f_fixed
        return float(z[self.tf_index])

    def pack(
        self,
        nodes: np.ndarray,
        controls: np.ndarray,
        t_f: Optional[float] = None,
    ) -> np.ndarray:
        z = np.empty(self.total_len)
        z[self.node_block] = np.asarray(nodes, dtype=float).reshape(-1)
        z[self.control_block] = np.asarray(controls, dtype=float).reshape(-1)
        if self.tf_index is not None:
            if t_f is None:
                raise ValueError("t_f required for a free-final-time layout")
            z[self.tf_index] = t_f
        return z


def _layout_for(ocp: OcpDefinition, scheme: str, N: int) -> DecisionLayout:
    model = ocp.model
    if scheme == SCHEME_LG:
        rows, width = N + 1, 2 * model.n_q
    else:
        rows, width = N + 2, model.n_q
    fixed = (
        ocp.t_f_mode.value if isinstance(ocp.t_f_mode, FixedFinalTime) else None
    )
    return DecisionLayout(
        scheme=scheme,
        N=N,
        n_q=model.n_q,
        n_u=model.n_u,
        node_rows=rows,
        node_width=width,
        t_f_fixed=fixed,
    )


def _bounds_for(ocp: OcpDefinition, layout: DecisionLayout) -> tuple[np.ndarray, np.ndarray]:
    if layout.scheme == SCHEME_LG:
        node_lo = np.tile(ocp.state_bounds[:, 0], layout.node_rows)
        node_hi = np.tile(ocp.state_bounds[:, 1], layout.node_rows)
    else:
        node_lo = np.tile(ocp.state_bounds[: layout.n_q, 0], layout.node_rows)
        node_hi = np.tile(ocp.state_bounds[: layout.n_q, 1], layout.node_rows)
    lo = [node_lo, np.tile(ocp.control_bounds[:, 0], layout.N)]
    hi = [node_hi, np.tile(ocp.control_bounds[:, 1], layout.N)]
    if layout.tf_index is not None:
        lo.append([ocp.t_f_mode.lower])
        hi.append([ocp.t_f_mode.upper])
    return np.concatenate(lo), np.concatenate(hi)


def transcribe_lg(ocp: OcpDefinition, N: int) -> tuple[NlpProblem, DecisionLayout]:
    """First-order transcription: (2/t_f) D X = F(X, U) at the Gauss points.

    The terminal state is the degree-N interpolant evaluated at tau = +1.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    layout = _layout_for(ocp, SCHEME_LG, N)
    bas = build_basis(KIND_LG, N)
    model = ocp.model
    n_q, n_u = model.n_q, model.n_u

    D = bas.D
    wq = bas.quad_weights
    tau_c = bas.collocation_points
    end_row = bas.interp_matrix(np.array([1.0]))[0]
    accel = model.accel
    boundary = ocp.boundary_constraint
    cost = ocp.cost_integrand
    path = ocp.path_constraint

    def split(z):
        X = z[layout.node_block].reshape(N + 1, 2 * n_q)
        U = z[layout.control_block].reshape(N, n_u)
        return X, U, layout.t_f(z)

    def eq_constraints(z):
        X, U, t_f = split(z)
        Xc = X[1:]
        q, v = Xc[:, :n_q], Xc[:, n_q:]
        t_c = t_f * (tau_c + 1.0) / 2.0
        F = np.concatenate([v, accel(q, v, U, t_c)], axis=1)
        resid = (2.0 / t_f) * (D @ X) - F
        x_end = end_row @ X
        return np.concatenate([resid.ravel(), boundary(X[0], x_end, t_f)])

    def ineq_constraints(z):
        if path is None:
            return np.empty(0)
        X, U, _ = split(z)
        return path(X[1:], U).ravel()

    def objective(z):
        X, U, t_f = split(z)
        return 0.5 * t_f * float(wq @ cost(X[1:], U))

    lower, upper = _bounds_for(ocp, layout)
    problem = NlpProblem(
        dim=layout.total_len,
        objective=objective,
        eq_constraints=eq_constraints,
        ineq_constraints=ineq_constraints,
        lower=lower,
        upper=upper,
        eq_blocks=(("collocation", N * 2 * n_q), ("boundary", ocp.n_boundary)),
        ineq_blocks=(("path", N * ocp.n_path),) if path is not None else (),
        name=f"{ocp.name or 'ocp'}-lg-N{N}",
    )
    return problem, layout


def transcribe_lg2(ocp: OcpDefinition, N: int) -> tuple[NlpProblem, DecisionLayout]:
    """Second-order transcription: exact-polynomial accelerations against
    the dynamics at the Gauss points; boundary states read off genuine
    endpoint nodes, no extrapolation."""
    if N < 1:
        raise ValueError("N must be >= 1")
    layout = _layout_for(ocp, SCHEME_LG2, N)
    bas = build_basis(KIND_LG2, N)
    model = ocp.model
    n_q, n_u = model.n_q, model.n_u
    B = bas.B

    Dst = bas.D
    D2 = Dst @ Dst
    wq = bas.quad_weights
    tau_c = bas.collocation_points
    accel = model.accel
    boundary = ocp.boundary_constraint
    cost = ocp.cost_integrand
    path = ocp.path_constraint

    # velocity bounds cannot be box constraints here (velocities are not
    # decision variables); finite ones become inequality rows at the nodes
    v_bounds = ocp.state_bounds[n_q:]
    v_lo_mask = np.isfinite(v_bounds[:, 0])
    v_hi_mask = np.isfinite(v_bounds[:, 1])
    n_vrows = B * (int(v_lo_mask.sum()) + int(v_hi_mask.sum()))

    def split(z):
        Q = z[layout.node_block].reshape(B, n_q)
        U = z[layout.control_block].reshape(N, n_u)
        return Q, U, layout.t_f(z)

    def eq_constraints(z):
        Q, U, t_f = split(z)
        s = 2.0 / t_f
        Qd = s * (Dst @ Q)
        Qdd = s * s * (D2 @ Q)
        t_c = t_f * (tau_c + 1.0) / 2.0
        G = accel(Q[1:-1], Qd[1:-1], U, t_c)
        resid = Qdd[1:-1] - G
        x0 = np.concatenate([Q[0], Qd[0]])
        xf = np.concatenate([Q[-1], Qd[-1]])
        return np.concatenate([resid.ravel(), boundary(x0, xf, t_f)])

    def ineq_constraints(z):
        Q, U, t_f = split(z)
        parts = []
        if path is not None:
            Qd = (2.0 / t_f) * (Dst @ Q)
            x = np.concatenate([Q[1:-1], Qd[1:-1]], axis=1)
            parts.append(path(x, U).ravel())
        if n_vrows:
            Qd = (2.0 / t_f) * (Dst @ Q)
            if v_hi_mask.any():
                parts.append((Qd[:, v_hi_mask] - v_bounds[v_hi_mask, 1]).ravel())
            if v_lo_mask.any():
                parts.append((v_bounds[v_lo_mask, 0] - Qd[:, v_lo_mask]).ravel())
        if not parts:
            return np.empty(0)
        return np.concatenate(parts)

    def objective(z):
        Q, U, t_f = split(z)
        Qd = (2.0 / t_f) * (Dst @ Q)
        x = np.concatenate([Q[1:-1], Qd[1:-1]], axis=1)
        return 0.5 * t_f * float(wq @ cost(x, U))

    lower, upper = _bounds_for(ocp, layout)
    ineq_blocks = []
    if path is not None:
        ineq_blocks.append(("path", N * ocp.n_path))
    if n_vrows:
        ineq_blocks.append(("velocity-bounds", n_vrows))
    problem = NlpProblem(
        dim=layout.total_len,
        objective=objective,
        eq_constraints=eq_constraints,
        ineq_constraints=ineq_constraints,
        lower=lower,
        upper=upper,
        eq_blocks=(("collocation", N * n_q), ("boundary", ocp.n_boundary)),
        ineq_blocks=tuple(ineq_blocks),
        name=f"{ocp.name or 'ocp'}-lg2-N{N}",
    )
    return problem, layout


def make_initial_guess(
    ocp: OcpDefinition, layout: DecisionLayout, basis: CollocationBasis
) -> np.ndarray:
    """Deterministic start: configuration linear between the boundary poses,
    zero velocity and control, midpoint t_f when free."""
    n_q = layout.n_q
    q0 = ocp.x0_hint[:n_q] if ocp.x0_hint is not None else np.zeros(n_q)
    qf = ocp.xf_hint[:n_q] if ocp.xf_hint is not None else np.zeros(n_q)
    frac = (basis.nodes.points + 1.0) / 2.0
    q_lin = q0[None, :] + frac[:, None] * (qf - q0)[None, :]
    if layout.scheme == SCHEME_LG:
        nodes = np.concatenate([q_lin, np.zeros_like(q_lin)], axis=1)
    else:
        nodes = q_lin
    controls = np.zeros((layout.N, layout.n_u))
    t_f = None
    if layout.t_f_fixed is None:
        t_f = 0.5 * (ocp.t_f_mode.lower + ocp.t_f_mode.upper)
    return layout.pack(nodes, controls, t_f)


def guess_from_trajectory(
    ocp: OcpDefinition,
    layout: DecisionLayout,
    basis: CollocationBasis,
    traj: "Trajectory",
) -> np.ndarray:
    """Resample a solved trajectory onto a new layout as a warm start.

    Controls are clipped into bounds (endpoint samples of the control
    interpolant are extrapolations and may overshoot); a free final time
    carries over, clipped into its bounds.
    """
    t_f = traj.t_f
    if layout.t_f_fixed is None:
        t_f = float(np.clip(t_f, ocp.t_f_mode.lower, ocp.t_f_mode.upper))
    else:
        t_f = layout.t_f_fixed
    t_nodes = np.minimum(traj.t_f, t_f * (basis.nodes.points + 1.0) / 2.0)
    q = np.stack([np.atleast_1d(traj.config(t)) for t in t_nodes])
    if layout.scheme == SCHEME_LG:
        v = np.stack([np.atleast_1d(traj.velocity(t)) for t in t_nodes])
        nodes = np.concatenate([q, v], axis=1)
        lo = np.tile(ocp.state_bounds[:, 0], (layout.node_rows, 1))
        hi = np.tile(ocp.state_bounds[:, 1], (layout.node_rows, 1))
    else:
        nodes = q
        lo = np.tile(ocp.state_bounds[: layout.n_q, 0], (layout.node_rows, 1))
        hi = np.tile(ocp.state_bounds[: layout.n_q, 1], (layout.node_rows, 1))
    nodes = np.clip(nodes, lo, hi)
    t_coll = np.minimum(traj.t_f, t_f * (basis.collocation_points + 1.0) / 2.0)
    controls = np.stack([np.atleast_1d(traj.control(t)) for t in t_coll])
    controls = np.clip(
        controls, ocp.control_bounds[None, :, 0], ocp.control_bounds[None, :, 1]
    )
    return layout.pack(
        nodes, controls, t_f if layout.t_f_fixed is None else None
    )


@dataclass(frozen=True)
class Trajectory:
    """Polynomial trajectory over [0, t_f], evaluable at any t.

    For the second-order scheme the velocity is the exact derivative of the
    configuration polynomial (they share node data), so the first-order
    dynamic error vanishes identically.  For the first-order scheme the
    velocity components are independent interpolants.
    """

    scheme: str
    basis: CollocationBasis
    t_f: float
    node_matrix: np.ndarray
    control_nodes: np.ndarray
    n_q: int
    n_u: int
    config_deriv_nodes: np.ndarray    # tau-domain d(q)/dtau at all nodes
    config_deriv2_nodes: np.ndarray   # tau-domain d2(q)/dtau2 at all nodes
    control_bary: np.ndarray

    def tau_of(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < -1e-9 * self.t_f) or np.any(t > self.t_f * (1 + 1e-9)):
            raise ValueError(f"t outside [0, {self.t_f}]")
        return np.clip(-1.0 + 2.0 * t / self.t_f, -1.0, 1.0)

    def _interp(self, values: np.ndarray, t) -> np.ndarray:
        M = self.basis.interp_matrix(self.tau_of(t))
        out = M @ values
        return out[0] if np.isscalar(t) else out

    @property
    def config_nodes(self) -> np.ndarray:
        if self.scheme == SCHEME_LG2:
            return self.node_matrix
        return self.node_matrix[:, : self.n_q]

    def config(self, t) -> np.ndarray:
        return self._interp(self.config_nodes, t)

    def config_derivative(self, t) -> np.ndarray:
        return (2.0 / self.t_f) * self._interp(self.config_deriv_nodes, t)

    def config_second_derivative(self, t) -> np.ndarray:
        return (2.0 / self.t_f) ** 2 * self._interp(self.config_deriv2_nodes, t)

    def velocity(self, t) -> np.ndarray:
        if self.scheme == SCHEME_LG2:
            # identical code path to config_derivative: consistency is
            # structural, not approximate
            return self.config_derivative(t)
        return self._interp(self.node_matrix[:, self.n_q :], t)

    def state(self, t) -> np.ndarray:
        return np.concatenate(
            [np.atleast_1d(self.config(t)), np.atleast_1d(self.velocity(t))], axis=-1
        )

    def control(self, t) -> np.ndarray:
        taus = self.tau_of(t)
        M = interpolation_matrix(
            self.basis.collocation_points, self.control_bary, taus
        )
        out = M @ self.control_nodes
        return out[0] if np.isscalar(t) else out

    def control_is_extrapolated(self, t) -> np.ndarray:
        """True where the control value is an extrapolation of the Gauss-point
        interpolant (outside the collocation span)."""
        taus = self.tau_of(t)
        pts = self.basis.collocation_points
        out = (taus < pts[0]) | (taus > pts[-1])
        return bool(out[0]) if np.isscalar(t) else out


def extract_trajectory(
    layout: DecisionLayout, z: np.ndarray, basis: CollocationBasis
) -> Trajectory:
    """Reconstruct the evaluable trajectory from a decision vector."""
    z = np.asarray(z, dtype=float)
    if z.shape != (layout.total_len,):
        raise ValueError(
            f"decision vector has length {z.shape}, expected ({layout.total_len},)"
        )
    if basis.kind != layout.scheme or basis.N != layout.N:
        raise ValueError("basis does not match layout")
    nodes = layout.node_matrix(z).copy()
    controls = layout.controls(z).copy()
    q_nodes = nodes if layout.scheme == SCHEME_LG2 else nodes[:, : layout.n_q]
    qd = basis.D_all @ q_nodes
    qdd = basis.D_all @ qd
    for arr in (nodes, controls, qd, qdd):
        arr.setflags(write=False)
    return Trajectory(
        scheme=layout.scheme,
        basis=basis,
        t_f=layout.t_f(z),
        node_matrix=nodes,
        control_nodes=controls,
        n_q=layout.n_q,
        n_u=layout.n_u,
        config_deriv_nodes=qd,
        config_deriv2_nodes=qdd,
        control_bary=barycentric_weights(basis.collocation_points),
    )
