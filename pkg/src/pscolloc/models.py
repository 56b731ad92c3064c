"""Second-order dynamics models and benchmark optimal control problems.

A model supplies accelerations ``qdd = accel(q, v, u, t)``; the classical
first-order form is obtained with :func:`first_order_wrap`.  Benchmark
parameters live in the packaged ``data/params.json`` so they are auditable
and overridable from the CLI; the dataclass defaults mirror that file.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

import numpy as np

PARAMS_SCHEMA = "pscolloc-params-v1"


@dataclass(frozen=True)
class SecondOrderModel:
    """Dynamics in the form qdd = accel(q, v, u, t).

    ``accel`` must broadcast over a leading batch axis: q, v with shape
    (..., n_q) and u with shape (..., n_u) yield (..., n_q).
    """

    name: str
    n_q: int
    n_u: int
    accel: Callable[..., np.ndarray]
    coord_units: tuple[str, ...]

    def __post_init__(self):
        if self.n_q < 1 or self.n_u < 0:
            raise ValueError("n_q must be >= 1 and n_u >= 0")
        if len(self.coord_units) != self.n_q:
            raise ValueError("coord_units must have one entry per coordinate")


@dataclass(frozen=True)
class FixedFinalTime:
    value: float

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError("fixed final time must be positive")


@dataclass(frozen=True)
class FreeFinalTime:
    lower: float
    upper: float

    def __post_init__(self):
        if not 0 < self.lower <= self.upper:
            raise ValueError("free final time needs 0 < lower <= upper")


TfMode = FixedFinalTime | FreeFinalTime


@dataclass(frozen=True)
class OcpDefinition:
    """A second-order optimal control problem.

    ``cost_integrand`` maps (x, u) to the running cost; ``path_constraint``
    (optional) is satisfied when <= 0; ``boundary_constraint`` maps
    (x0, xf, t_f) to a residual vector that must vanish.  Bounds are
    (n, 2) arrays of [lo, hi] rows; +/-inf disables a bound.  ``x0_hint``
    and ``xf_hint`` seed the transcription's initial guess.
    """

    model: SecondOrderModel
    cost_integrand: Callable[[np.ndarray, np.ndarray], np.ndarray]
    boundary_constraint: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    n_boundary: int
    control_bounds: np.ndarray
    state_bounds: np.ndarray
    t_f_mode: TfMode
    path_constraint: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    n_path: int = 0
    x0_hint: Optional[np.ndarray] = None
    xf_hint: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        cb = np.asarray(self.control_bounds, dtype=float).reshape(self.model.n_u, 2)
        sb = np.asarray(self.state_bounds, dtype=float).reshape(2 * self.model.n_q, 2)
        for arr in (cb, sb):
            if np.any(arr[:, 0] > arr[:, 1]):
                raise ValueError("bounds need lo <= hi componentwise")
            arr.setflags(write=False)
        object.__setattr__(self, "control_bounds", cb)
        object.__setattr__(self, "state_bounds", sb)
        for attr in ("x0_hint", "xf_hint"):
            hint = getattr(self, attr)
            if hint is not None:
                hint = np.asarray(hint, dtype=float).reshape(2 * self.model.n_q)
                hint.setflags(write=False)
                object.__setattr__(self, attr, hint)
        # probe the boundary residual once to catch dimension mistakes early
        x_probe = np.zeros(2 * self.model.n_q)
        t_probe = (
            self.t_f_mode.value
            if isinstance(self.t_f_mode, FixedFinalTime)
            else self.t_f_mode.upper
        )
        b = np.atleast_1d(self.boundary_constraint(x_probe, x_probe, t_probe))
        if b.shape != (self.n_boundary,):
            raise ValueError(
                f"boundary_constraint returned shape {b.shape}, "
                f"expected ({self.n_boundary},)"
            )
        if self.path_constraint is not None:
            h = np.atleast_1d(self.path_constraint(x_probe, np.zeros(self.model.n_u)))
            if h.shape[-1] != self.n_path:
                raise ValueError(
                    f"path_constraint returned {h.shape[-1]} rows, "
                    f"expected {self.n_path}"
                )


def first_order_wrap(model: SecondOrderModel) -> Callable[..., np.ndarray]:
    """Rewrite qdd = g(q, v, u, t) as xdot = f(x, u, t) with x = (q, v)."""
    n_q = model.n_q

    def f(x, u, t):
        x = np.asarray(x, dtype=float)
        q, v = x[..., :n_q], x[..., n_q:]
        return np.concatenate([v, model.accel(q, v, u, t)], axis=-1)

    return f


# --- pendulum -----------------------------------------------------------

@dataclass(frozen=True)
class PendulumParams:
    mass: float = 1.0
    length: float = 1.0
    gravity: float = 9.81
    u_max: float = 2.5
    t_f_min: float = 0.1
    t_f_max: float = 10.0


def pendulum_accel(q, v, u, params: PendulumParams | None = None):
    """Angular acceleration of a torque-driven pendulum.

    The angle q is measured from the hanging rest pose, so q = pi is the
    inverted balance.  Broadcasts over array inputs.
    """
    p = params or PendulumParams()
    return (u - p.mass * p.gravity * p.length * np.sin(q)) / (p.mass * p.length**2)


def make_pendulum(params: PendulumParams | None = None) -> SecondOrderModel:
    p = params or default_params().pendulum

    def accel(q, v, u, t):
        return pendulum_accel(q, v, u, p)

    return SecondOrderModel(
        name="pendulum", n_q=1, n_u=1, accel=accel, coord_units=("rad",)
    )


def pendulum_ocp(params: PendulumParams | None = None) -> OcpDefinition:
    """Minimum-time swing-up: from hanging at rest to inverted at rest."""
    p = params or default_params().pendulum
    model = make_pendulum(p)
    x_start = np.array([0.0, 0.0])
    x_goal = np.array([np.pi, 0.0])

    def cost(x, u):
        return np.ones(np.broadcast(x[..., 0], u[..., 0]).shape)

    def boundary(x0, xf, t_f):
        return np.concatenate([x0 - x_start, xf - x_goal])

    return OcpDefinition(
        model=model,
        cost_integrand=cost,
        boundary_constraint=boundary,
        n_boundary=4,
        control_bounds=np.array([[-p.u_max, p.u_max]]),
        state_bounds=np.full((2, 2), (-np.inf, np.inf)),
        t_f_mode=FreeFinalTime(p.t_f_min, p.t_f_max),
        x0_hint=x_start,
        xf_hint=x_goal,
        name="pendulum",
    )


# --- cart-pole ----------------------------------------------------------

@dataclass(frozen=True)
class CartPoleParams:
    cart_mass: float = 1.0
    pole_mass: float = 0.3
    pole_length: float = 0.5
    gravity: float = 9.81
    distance: float = 1.0
    t_f: float = 2.0
    u_max: float = 20.0
    cart_limit: float = 2.0


def cartpole_accel(q, v, u, params: CartPoleParams | None = None):
    """Cart and pole accelerations; q = (cart position, pole angle).

    The pole angle is zero hanging down and pi upright.  Broadcasts over
    leading axes; q, v have trailing dimension 2 and u trailing dimension 1.
    """
    p = params or CartPoleParams()
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    th = q[..., 1]
    om = v[..., 1]
    f = u[..., 0]
    s, c = np.sin(th), np.cos(th)
    m1, m2, L, g = p.cart_mass, p.pole_mass, p.pole_length, p.gravity
    denom = m1 + m2 * (1.0 - c * c)
    a_cart = (L * m2 * s * om**2 + f + m2 * g * c * s) / denom
    a_pole = -(L * m2 * c * s * om**2 + f * c + (m1 + m2) * g * s) / (L * denom)
    return np.stack([a_cart, a_pole], axis=-1)


def make_cartpole(params: CartPoleParams | None = None) -> SecondOrderModel:
    p = params or default_params().cartpole

    def accel(q, v, u, t):
        return cartpole_accel(q, v, u, p)

    return SecondOrderModel(
        name="cartpole", n_q=2, n_u=1, accel=accel, coord_units=("m", "rad")
    )


def cartpole_ocp(params: CartPoleParams | None = None) -> OcpDefinition:
    """Minimum-effort swing-up in fixed time, cart displaced by ``distance``."""
    p = params or default_params().cartpole
    model = make_cartpole(p)
    x_start = np.zeros(4)
    x_goal = np.array([p.distance, np.pi, 0.0, 0.0])

    def cost(x, u):
        return u[..., 0] ** 2

    def boundary(x0, xf, t_f):
        return np.concatenate([x0 - x_start, xf - x_goal])

    state_bounds = np.full((4, 2), (-np.inf, np.inf))
    state_bounds = state_bounds.copy()
    state_bounds[0] = (-p.cart_limit, p.cart_limit)

    return OcpDefinition(
        model=model,
        cost_integrand=cost,
        boundary_constraint=boundary,
        n_boundary=8,
        control_bounds=np.array([[-p.u_max, p.u_max]]),
        state_bounds=state_bounds,
        t_f_mode=FixedFinalTime(p.t_f),
        x0_hint=x_start,
        xf_hint=x_goal,
        name="cartpole",
    )


# --- double integrator (analytic minimum-time oracle) --------------------

def make_double_integrator() -> SecondOrderModel:
    def accel(q, v, u, t):
        return np.asarray(u, dtype=float)

    return SecondOrderModel(
        name="double-integrator", n_q=1, n_u=1, accel=accel, coord_units=("m",)
    )


def double_integrator_ocp(
    distance: float = 1.0,
    u_max: float = 1.0,
    t_f_bounds: tuple[float, float] = (0.5, 5.0),
) -> OcpDefinition:
    """Minimum-time rest-to-rest translation; bang-bang optimum
    t_f* = 2 sqrt(distance / u_max)."""
    model = make_double_integrator()
    x_start = np.array([0.0, 0.0])
    x_goal = np.array([distance, 0.0])

    def cost(x, u):
        return np.ones(np.broadcast(x[..., 0], u[..., 0]).shape)

    def boundary(x0, xf, t_f):
        return np.concatenate([x0 - x_start, xf - x_goal])

    return OcpDefinition(
        model=model,
        cost_integrand=cost,
        boundary_constraint=boundary,
        n_boundary=4,
        control_bounds=np.array([[-u_max, u_max]]),
        state_bounds=np.full((2, 2), (-np.inf, np.inf)),
        t_f_mode=FreeFinalTime(*t_f_bounds),
        x0_hint=x_start,
        xf_hint=x_goal,
        name="double-integrator",
    )


# --- parameter files ------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkParams:
    pendulum: PendulumParams = field(default_factory=PendulumParams)
    cartpole: CartPoleParams = field(default_factory=CartPoleParams)


def _params_from_dict(raw: dict) -> BenchmarkParams:
    if raw.get("schema") != PARAMS_SCHEMA:
        raise ValueError(
            f"unsupported params schema {raw.get('schema')!r}; "
            f"expected {PARAMS_SCHEMA!r}"
        )
    pend = PendulumParams(**raw.get("pendulum", {}))
    cart = CartPoleParams(**raw.get("cartpole", {}))
    return BenchmarkParams(pendulum=pend, cartpole=cart)


def load_params(path: str | None = None) -> BenchmarkParams:
    """Load benchmark parameters from a JSON file (packaged default if None)."""
    if path is None:
        text = (
            resources.files("pscolloc").joinpath("data/params.json").read_text()
        )
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return _params_from_dict(json.loads(text))


def default_params() -> BenchmarkParams:
    return load_params(None)
