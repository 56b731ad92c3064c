"""Nonlinear programming: problem container, finite differences, and a
reference solver.

The reference solver runs an augmented-Lagrangian outer loop over the
equality (and inequality) constraints with a bound-constrained quasi-Newton
inner minimizer.  Derivatives come from central finite differences, so the
whole pipeline is deterministic and derivative-free from the caller's side.
An export adapter serializes problem metadata so an external solver can be
plugged in behind the same contract.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

NLP_EXPORT_SCHEMA = "pscolloc-nlp-export-v1"

_CBRT_EPS = float(np.finfo(float).eps) ** (1.0 / 3.0)

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max_iter"
STATUS_LINE_SEARCH = "line_search_failure"


class NonFiniteEvaluationError(ValueError):
    """A callback produced a non-finite value during differentiation."""


@dataclass(frozen=True)
class NlpProblem:
    """Flattened NLP: minimize objective(z) subject to eq(z) = 0,
    ineq(z) <= 0, and lower <= z <= upper."""

    dim: int
    objective: Callable[[np.ndarray], float]
    eq_constraints: Callable[[np.ndarray], np.ndarray]
    ineq_constraints: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    eq_blocks: tuple = ()
    ineq_blocks: tuple = ()
    name: str = ""

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(self.dim)
        hi = np.asarray(self.upper, dtype=float).reshape(self.dim)
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


@dataclass(frozen=True)
class SolveResult:
    z_star: np.ndarray
    objective_value: float
    eq_violation: float
    ineq_violation: float
    iterations: int
    status: str
    message: str = ""


@dataclass
class SolveOptions:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-6
    max_iter: int = 30            # outer augmented-Lagrangian rounds
    inner_max_iter: int = 800     # quasi-Newton iterations per round
    penalty0: float = 10.0
    penalty_max: float = 1e7      # higher penalties stall the FD inner solver
    polish_iters: int = 8         # Gauss-Newton feasibility refinements
    finish_rounds: int = 4        # optimality passes at estimated multipliers


def _fd_steps(z: np.ndarray) -> np.ndarray:
    return _CBRT_EPS * np.maximum(1.0, np.abs(z))


def differentiate(fn: Callable[[np.ndarray], np.ndarray], z: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of fn at z; rows index outputs."""
    z = np.asarray(z, dtype=float)
    f0 = np.atleast_1d(np.asarray(fn(z), dtype=float))
    if not np.all(np.isfinite(f0)):
        bad = int(np.flatnonzero(~np.isfinite(f0))[0])
        raise NonFiniteEvaluationError(f"non-finite output entry {bad} at base point")
    m, n = f0.size, z.size
    J = np.empty((m, n))
    h = _fd_steps(z)
    for j in range(n):
        zp = z.copy()
        zm = z.copy()
        zp[j] += h[j]
        zm[j] -= h[j]
        fp = np.atleast_1d(np.asarray(fn(zp), dtype=float))
        fm = np.atleast_1d(np.asarray(fn(zm), dtype=float))
        for val, side in ((fp, "forward"), (fm, "backward")):
            if not np.all(np.isfinite(val)):
                bad = int(np.flatnonzero(~np.isfinite(val))[0])
                raise NonFiniteEvaluationError(
                    f"non-finite output entry {bad} while perturbing "
                    f"variable {j} ({side} step)"
                )
        J[:, j] = (fp - fm) / (zp[j] - zm[j])
    return J


def _grad_scalar(fn: Callable[[np.ndarray], float], z: np.ndarray) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    n = z.size
    g = np.empty(n)
    h = _fd_steps(z)
    for j in range(n):
        zp = z.copy()
        zm = z.copy()
        zp[j] += h[j]
        zm[j] -= h[j]
        g[j] = (fn(zp) - fn(zm)) / (zp[j] - zm[j])
    return g


def _max_abs(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _polish_feasibility(
    problem: NlpProblem, z: np.ndarray, feas_tol: float, max_rounds: int
) -> np.ndarray:
    """Damped Gauss-Newton on the active constraint system, within bounds.

    The quasi-Newton phase localizes constraints only to the level of its
    finite-difference gradient noise; Newton steps on the (exactly
    evaluated) constraints push the violation well below feas_tol with a
    minimum-norm correction that leaves the objective essentially unmoved.
    """
    lo, hi = problem.lower, problem.upper

    def active_residual(x):
        c = np.atleast_1d(problem.eq_constraints(x))
        g = np.atleast_1d(problem.ineq_constraints(x))
        return np.concatenate([c, np.maximum(0.0, g)]) if g.size else c

    r = active_residual(z)
    if not r.size:
        return z
    viol = _max_abs(r)
    for _ in range(max_rounds):
        if viol <= 0.05 * feas_tol:
            break
        # correct only over variables off their bounds: steps into pinned
        # variables would be clipped away and defeat the Newton decrease
        atol = 1e-10 * np.maximum(1.0, np.abs(z))
        free = np.ones(z.size, dtype=bool)
        fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
        free[fin_lo] &= z[fin_lo] > lo[fin_lo] + atol[fin_lo]
        free[fin_hi] &= z[fin_hi] < hi[fin_hi] - atol[fin_hi]
        if not free.any():
            break
        J = differentiate(active_residual, z)
        step_free, *_ = np.linalg.lstsq(J[:, free], -r, rcond=None)
        step = np.zeros(z.size)
        step[free] = step_free
        alpha = 1.0
        for _ in range(20):
            z_new = np.clip(z + alpha * step, lo, hi)
            r_new = active_residual(z_new)
            if _max_abs(r_new) < viol:
                break
            alpha *= 0.5
        else:
            break
        z, r, viol = z_new, r_new, _max_abs(r_new)
    return z


def _column_scaling(problem: NlpProblem, z0: np.ndarray) -> np.ndarray:
    """Diagonal variable scaling from constraint-Jacobian column norms.

    Collocation problems mix variables whose constraint sensitivities span
    several orders of magnitude (differentiation-matrix columns versus
    controls); equilibrating them is what lets a quasi-Newton inner solver
    make progress.  Deterministic: computed once at the starting point.
    """
    rows = []
    if np.atleast_1d(problem.eq_constraints(z0)).size:
        rows.append(differentiate(problem.eq_constraints, z0))
    if np.atleast_1d(problem.ineq_constraints(z0)).size:
        rows.append(differentiate(problem.ineq_constraints, z0))
    if not rows:
        return np.ones(z0.size)
    A = np.vstack(rows)
    col = np.linalg.norm(A, axis=0)
    S = 1.0 / np.maximum(col, 1.0)
    S /= np.median(S)
    return S


def _kkt_state(problem: NlpProblem, z: np.ndarray, feas_tol: float):
    """Projected Lagrangian gradient at least-squares multipliers.

    Returns (pg, eq_multipliers, active_ineq_mask, ineq_multipliers): the
    best first-order multiplier estimates at z, used both for the
    convergence verdict and to hot-start optimality-finish rounds.
    """
    lo, hi = problem.lower, problem.upper
    grad_f = _grad_scalar(problem.objective, z)
    atol = 1e-9 * np.maximum(1.0, np.abs(z))
    free = np.ones(z.size, dtype=bool)
    fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
    free[fin_lo] &= z[fin_lo] > lo[fin_lo] + atol[fin_lo]
    free[fin_hi] &= z[fin_hi] < hi[fin_hi] - atol[fin_hi]

    c = np.atleast_1d(problem.eq_constraints(z))
    g = np.atleast_1d(problem.ineq_constraints(z))
    active = g >= -10.0 * feas_tol if g.size else np.zeros(0, dtype=bool)
    rows = []
    if c.size:
        rows.append(differentiate(problem.eq_constraints, z))
    if g.size and active.any():
        rows.append(differentiate(problem.ineq_constraints, z)[active])

    lam = np.zeros(c.size)
    mu_active = np.zeros(int(active.sum()))
    grad_L = grad_f
    if rows:
        A = np.vstack(rows)
        if free.any():
            mult, *_ = np.linalg.lstsq(A[:, free].T, -grad_f[free], rcond=None)
        else:
            mult = np.zeros(A.shape[0])
        if mu_active.size:
            mult[c.size:] = np.maximum(0.0, mult[c.size:])
            mu_active = mult[c.size:]
        lam = mult[: c.size]
        grad_L = grad_f + A.T @ mult
    pg = _max_abs(z - np.clip(z - grad_L, lo, hi))
    return pg, lam, active, mu_active


def _free_mask(z: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    atol = 1e-9 * np.maximum(1.0, np.abs(z))
    free = np.ones(z.size, dtype=bool)
    fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
    free[fin_lo] &= z[fin_lo] > lo[fin_lo] + atol[fin_lo]
    free[fin_hi] &= z[fin_hi] < hi[fin_hi] - atol[fin_hi]
    return free


def _reduced_newton_step(
    problem: NlpProblem,
    z: np.ndarray,
    lam: np.ndarray,
    active: np.ndarray,
    mu_act: np.ndarray,
    feas_tol: float,
) -> Optional[np.ndarray]:
    """One damped Newton step of the Lagrangian restricted to the null
    space of the active constraints, followed by feasibility restoration.

    The bounded quasi-Newton phase leaves a small non-stationarity along
    the constraint manifold; an explicit reduced Hessian (finite
    differences of the Lagrangian gradient) removes it quadratically.
    """
    lo, hi = problem.lower, problem.upper
    free = _free_mask(z, lo, hi)
    if not free.any():
        return None

    def lagr_grad(x):
        g = _grad_scalar(problem.objective, x)
        if lam.size:
            g = g + differentiate(problem.eq_constraints, x).T @ lam
        if active.any():
            J_in = differentiate(problem.ineq_constraints, x)[active]
            g = g + J_in.T @ mu_act
        return g

    rows = []
    if lam.size:
        rows.append(differentiate(problem.eq_constraints, z))
    if active.any():
        rows.append(differentiate(problem.ineq_constraints, z)[active])
    if rows:
        Jf = np.vstack(rows)[:, free]
        _, sv, Vt = np.linalg.svd(Jf, full_matrices=True)
        rank = int(np.sum(sv > 1e-9 * sv[0])) if sv.size else 0
        Zns = Vt[rank:].T
    else:
        Zns = np.eye(int(free.sum()))
    k = Zns.shape[1]
    if k == 0 or k > 150:
        return None

    gL = lagr_grad(z)
    gr = Zns.T @ gL[free]
    Hr = np.empty((k, k))
    h = 1e-5
    for i in range(k):
        dz = np.zeros(z.size)
        dz[free] = Zns[:, i]
        Hr[:, i] = Zns.T @ ((lagr_grad(z + h * dz) - lagr_grad(z - h * dz))[free]
                            / (2.0 * h))
    Hr = 0.5 * (Hr + Hr.T)
    eig_min = float(np.linalg.eigvalsh(Hr)[0])
    reg = max(0.0, 1e-8 - eig_min)
    try:
        w = np.linalg.solve(Hr + reg * np.eye(k), -gr)
    except np.linalg.LinAlgError:
        return None
    dz = np.zeros(z.size)
    dz[free] = Zns @ w

    def max_violation(x):
        c = np.atleast_1d(problem.eq_constraints(x))
        g = np.atleast_1d(problem.ineq_constraints(x))
        out = _max_abs(c)
        if g.size:
            out = max(out, float(np.max(g.clip(min=0.0))))
        return out

    base_obj = problem.objective(z)
    base_viol = max_violation(z)
    alpha = 1.0
    for _ in range(15):
        z_try = np.clip(z + alpha * dz, lo, hi)
        z_try = _polish_feasibility(problem, z_try, feas_tol, 8)
        # a step only counts with feasibility restored; min-time objectives
        # otherwise reward walking off the constraint manifold
        if (
            max_violation(z_try) <= max(3.0 * feas_tol, base_viol)
            and problem.objective(z_try) < base_obj
        ):
            return z_try
        alpha *= 0.5
    return None


def solve(
    problem: NlpProblem,
    options: SolveOptions | None = None,
    initial_guess: Optional[np.ndarray] = None,
) -> SolveResult:
    """Reference augmented-Lagrangian solve.

    Equality constraints enter the classical AL term; inequalities use the
    positive-part (Rockafellar) form; variable bounds go straight to the
    bounded quasi-Newton inner solver.  The penalty grows tenfold whenever
    the constraint violation fails to drop by 4x between rounds (while
    still infeasible).  A Gauss-Newton feasibility polish and reduced-space
    Newton optimality rounds finish the solve; the verdict comes from the
    violation and the projected Lagrangian gradient at least-squares
    multipliers, both measured in column-equilibrated variables.
    """
    opts = options or SolveOptions()
    if initial_guess is None:
        z_user = np.clip(np.zeros(problem.dim), problem.lower, problem.upper)
    else:
        guess = np.asarray(initial_guess, dtype=float)
        if guess.shape != (problem.dim,):
            raise ValueError(
                f"initial guess has shape {guess.shape}, expected ({problem.dim},)"
            )
        z_user = np.clip(guess, problem.lower, problem.upper)

    # work in column-equilibrated variables y = z / S throughout
    S = _column_scaling(problem, z_user)
    user_obj = problem.objective
    user_eq = problem.eq_constraints
    user_ineq = problem.ineq_constraints
    scaled = NlpProblem(
        dim=problem.dim,
        objective=lambda y: user_obj(S * y),
        eq_constraints=lambda y: user_eq(S * y),
        ineq_constraints=lambda y: user_ineq(S * y),
        lower=problem.lower / S,
        upper=problem.upper / S,
        eq_blocks=problem.eq_blocks,
        ineq_blocks=problem.ineq_blocks,
        name=problem.name,
    )
    lo, hi = scaled.lower, scaled.upper
    z = z_user / S
    orig_problem = problem
    problem = scaled

    c0 = np.atleast_1d(problem.eq_constraints(z))
    g0 = np.atleast_1d(problem.ineq_constraints(z))
    n_eq, n_ineq = c0.size, g0.size
    bounds = list(zip(lo, hi))

    def violation(x):
        c = np.atleast_1d(problem.eq_constraints(x)) if n_eq else np.empty(0)
        g = np.atleast_1d(problem.ineq_constraints(x)) if n_ineq else np.empty(0)
        vi = float(np.max(g.clip(min=0.0))) if g.size else 0.0
        return _max_abs(c), vi

    def inner_solve(x, lam, mu, rho, gtol):
        def al_value(y):
            val = problem.objective(y)
            if n_eq:
                c = np.atleast_1d(problem.eq_constraints(y))
                val += lam @ c + 0.5 * rho * (c @ c)
            if n_ineq:
                g = np.atleast_1d(problem.ineq_constraints(y))
                s = np.maximum(0.0, mu + rho * g)
                val += (s @ s - mu @ mu) / (2.0 * rho)
            return float(val)

        def fun_and_grad(y):
            return al_value(y), _grad_scalar(al_value, y)

        res = minimize(
            fun_and_grad,
            x,
            method="L-BFGS-B",
            jac=True,
            bounds=bounds,
            options={
                "maxiter": opts.inner_max_iter,
                "ftol": 1e2 * np.finfo(float).eps,
                "gtol": gtol,
                "maxcor": 30,
                "maxls": 60,
            },
        )
        return np.clip(res.x, lo, hi), res

    lam = np.zeros(n_eq)
    mu = np.zeros(n_ineq)
    rho = opts.penalty0
    prev_viol = np.inf
    best_viol = np.inf
    gtol = 1e-3
    line_search_stalled = False
    abnormal_streak = 0
    stall_streak = 0
    outer = 0

    # descent phase: classical first-order multiplier updates
    for outer in range(1, opts.max_iter + 1):
        z, inner = inner_solve(z, lam, mu, rho, gtol)
        c = np.atleast_1d(problem.eq_constraints(z)) if n_eq else np.empty(0)
        g = np.atleast_1d(problem.ineq_constraints(z)) if n_ineq else np.empty(0)
        ve = _max_abs(c)
        vi = float(np.max(g.clip(min=0.0))) if g.size else 0.0
        viol = max(ve, vi)

        lam = np.clip(lam + rho * c, -1e10, 1e10) if n_eq else lam
        mu = np.clip(np.maximum(0.0, mu + rho * g), 0.0, 1e10) if n_ineq else mu

        if viol <= 3.0 * opts.feas_tol:
            break  # the Newton polish finishes feasibility from here

        # no longer improving at the penalty cap: stop burning rounds, the
        # polish plus the optimality finish take over
        if rho >= opts.penalty_max and viol > 0.5 * best_viol:
            stall_streak += 1
            if stall_streak >= 3:
                break
        else:
            stall_streak = 0

        abnormal = not inner.success and "ABNORMAL" in str(inner.message).upper()
        if abnormal and viol >= 0.99 * prev_viol:
            abnormal_streak += 1
            if abnormal_streak >= 3:
                line_search_stalled = True
                break
        else:
            abnormal_streak = 0

        if viol > prev_viol / 4.0:
            rho = min(rho * 10.0, opts.penalty_max)
        prev_viol = min(prev_viol, viol)
        best_viol = min(best_viol, viol)
        gtol = max(0.2 * opts.opt_tol, 0.1 * gtol)

    # feasibility polish, then optimality finish: reduced-space Newton on
    # the constraint manifold, with hot AL rounds at the estimated
    # multipliers as fallback while the Newton step is not yet acceptable
    z = _polish_feasibility(problem, z, opts.feas_tol, opts.polish_iters)
    proj_grad, lam_ls, active, mu_act = _kkt_state(problem, z, opts.feas_tol)
    rho_finish = min(max(100.0 * opts.penalty0, 1e3), opts.penalty_max)
    for _ in range(opts.finish_rounds):
        ve, vi = violation(z)
        if max(ve, vi) <= opts.feas_tol and proj_grad <= opts.opt_tol:
            break

        def try_accept(z_new):
            nonlocal z, proj_grad, lam_ls, active, mu_act
            if z_new is None:
                return False
            pg_new, lam_new, act_new, mu_new = _kkt_state(
                problem, z_new, opts.feas_tol
            )
            ve_new, vi_new = violation(z_new)
            if pg_new < proj_grad or max(ve_new, vi_new) < max(ve, vi):
                z, proj_grad = z_new, pg_new
                lam_ls, active, mu_act = lam_new, act_new, mu_new
                return True
            return False

        if try_accept(
            _reduced_newton_step(problem, z, lam_ls, active, mu_act, opts.feas_tol)
        ):
            continue
        mu_hot = np.zeros(n_ineq)
        if n_ineq and active.any():
            mu_hot[active] = mu_act
        z_al, _ = inner_solve(z, lam_ls, mu_hot, rho_finish, 0.2 * opts.opt_tol)
        z_al = _polish_feasibility(problem, z_al, opts.feas_tol, opts.polish_iters)
        if not try_accept(z_al):
            rho_finish = min(10.0 * rho_finish, opts.penalty_max)

    ve, vi = violation(z)
    feasible = max(ve, vi) <= opts.feas_tol
    if feasible and proj_grad <= opts.opt_tol:
        status = STATUS_CONVERGED
        message = "feasible and stationary"
    elif line_search_stalled:
        status = STATUS_LINE_SEARCH
        message = (
            f"inner line search stalled (violation {max(ve, vi):.3e}, "
            f"projected gradient {proj_grad:.3e})"
        )
    else:
        status = STATUS_MAX_ITER
        message = (
            f"no convergence in {outer} outer rounds (violation "
            f"{max(ve, vi):.3e}, projected gradient {proj_grad:.3e})"
        )

    z_out = S * z
    z_out.setflags(write=False)
    return SolveResult(
        z_star=z_out,
        objective_value=float(orig_problem.objective(z_out)),
        eq_violation=ve,
        ineq_violation=vi,
        iterations=outer,
        status=status,
        message=message,
    )


# --- canonical export ------------------------------------------------------

def _probe_sizes(problem: NlpProblem) -> tuple[int, int]:
    z0 = np.clip(np.zeros(problem.dim), problem.lower, problem.upper)
    n_eq = np.atleast_1d(problem.eq_constraints(z0)).size
    n_ineq = np.atleast_1d(problem.ineq_constraints(z0)).size
    return n_eq, n_ineq


def export_nlp(problem: NlpProblem) -> str:
    """Serialize dims, bounds, and block structure as structured text.

    Callbacks cannot travel over text; the export documents the dense
    callback protocol an external solver must implement, and
    :func:`import_nlp` re-attaches in-process callables.
    """
    if problem.eq_blocks or problem.ineq_blocks:
        n_eq = sum(size for _, size in problem.eq_blocks)
        n_ineq = sum(size for _, size in problem.ineq_blocks)
    else:
        n_eq, n_ineq = _probe_sizes(problem)
    doc = {
        "schema": NLP_EXPORT_SCHEMA,
        "name": problem.name,
        "dim": problem.dim,
        "lower": problem.lower.tolist(),
        "upper": problem.upper.tolist(),
        "n_eq": n_eq,
        "n_ineq": n_ineq,
        "eq_blocks": [list(b) for b in problem.eq_blocks],
        "ineq_blocks": [list(b) for b in problem.ineq_blocks],
        "callback_protocol": {
            "convention": "dense",
            "objective": "z[dim] -> float",
            "eq_constraints": "z[dim] -> r[n_eq], feasible when r = 0",
            "ineq_constraints": "z[dim] -> r[n_ineq], feasible when r <= 0",
        },
    }
    return json.dumps(doc, indent=2)


def import_nlp(
    text: str,
    objective: Callable[[np.ndarray], float],
    eq_constraints: Callable[[np.ndarray], np.ndarray],
    ineq_constraints: Callable[[np.ndarray], np.ndarray],
) -> NlpProblem:
    """Rebuild an NlpProblem from exported text plus in-process callables."""
    doc = json.loads(text)
    if doc.get("schema") != NLP_EXPORT_SCHEMA:
        raise ValueError(f"unsupported export schema {doc.get('schema')!r}")
    return NlpProblem(
        dim=int(doc["dim"]),
        objective=objective,
        eq_constraints=eq_constraints,
        ineq_constraints=ineq_constraints,
        lower=np.array(doc["lower"], dtype=float),
        upper=np.array(doc["upper"], dtype=float),
        eq_blocks=tuple((n, int(s)) for n, s in doc["eq_blocks"]),
        ineq_blocks=tuple((n, int(s)) for n, s in doc["ineq_blocks"]),
        name=doc.get("name", ""),
    )
