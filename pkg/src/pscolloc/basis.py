"""Legendre-Gauss collocation bases.

Node generation, Gauss quadrature weights, barycentric Lagrange
interpolation, and the differentiation matrices used by the first-order
and second-order collocation schemes.  Everything here is immutable and
pure, so bases can be shared freely across threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Basis kinds.  The first-order scheme interpolates on tau_0 = -1 plus the
# N interior Gauss points (B = N + 1); the second-order scheme adds the
# right endpoint as well (B = N + 2).  "collocation-only" is the bare
# N-point Gauss set, used for control interpolation.
KIND_COLLOCATION = "collocation-only"
KIND_LG = "lg-firstorder"
KIND_LG2 = "lg2"

# Largest supported collocation count; desk-scale sweeps stop well below
# this, and float64 barycentric weights stay well-conditioned up to here.
MAX_POINTS = 64

_NEWTON_TOL = 1e-14
_NEWTON_MAX_ITER = 100


class NodeGenerationError(RuntimeError):
    """Newton iteration for Legendre roots failed to converge."""


def legendre_eval(n: int, tau):
    """Evaluate the degree-n Legendre polynomial and its derivative.

    Uses the three-term recurrence with the standard normalization
    (P_0 = 1, P_1 = tau).  Accepts a scalar or an ndarray and returns
    (value, derivative) of matching shape.
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    scalar = np.isscalar(tau)
    x = np.asarray(tau, dtype=float)
    p_prev = np.ones_like(x)
    d_prev = np.zeros_like(x)
    if n == 0:
        return (1.0, 0.0) if scalar else (p_prev, d_prev)
    p = x.copy()
    d = np.ones_like(x)
    for k in range(1, n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        d_next = (2 * k + 1) * p + d_prev
        p_prev, p = p, p_next
        d_prev, d = d, d_next
    if scalar:
        return float(p), float(d)
    return p, d


def lg_points(N: int) -> np.ndarray:
    """Roots of the degree-N Legendre polynomial, strictly increasing.

    Newton iteration from Chebyshev-type initial guesses; tolerance 1e-14
    on the update, at most 100 iterations.  The result is symmetrized so
    that tau_i = -tau_{N+1-i} holds exactly.
    """
    if not 1 <= N <= MAX_POINTS:
        raise ValueError(f"N must be in [1, {MAX_POINTS}], got {N}")
    i = np.arange(1, N + 1)
    tau = -np.cos(np.pi * (i - 0.25) / (N + 0.5))
    for _ in range(_NEWTON_MAX_ITER):
        p, dp = legendre_eval(N, tau)
        step = p / dp
        tau -= step
        if np.max(np.abs(step)) <= _NEWTON_TOL:
            break
    else:
        raise NodeGenerationError(
            f"Legendre root search did not converge for N={N}; "
            "initial-guess table is defective"
        )
    tau = 0.5 * (tau - tau[::-1])
    if np.any(np.diff(tau) <= 0.0):
        raise NodeGenerationError(f"non-monotone root set for N={N}")
    tau.setflags(write=False)
    return tau


def lg_weights(N: int) -> np.ndarray:
    """Gauss quadrature weights for the N Legendre-Gauss points."""
    return _gauss_weights(lg_points(N))


def _gauss_weights(tau: np.ndarray) -> np.ndarray:
    n = len(tau)
    _, dp = legendre_eval(n, tau)
    w = 2.0 / ((1.0 - tau**2) * dp**2)
    w.setflags(write=False)
    return w


def barycentric_weights(points: np.ndarray) -> np.ndarray:
    """Barycentric interpolation weights for an arbitrary 1-D node set.

    Normalized by the largest magnitude; the barycentric form is invariant
    under common scaling, and normalization keeps values O(1) for B ~ 60.
    """
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None] - pts[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / diff.prod(axis=1)
    w /= np.max(np.abs(w))
    w.setflags(write=False)
    return w


def differentiation_matrix(points: np.ndarray, bary_w: np.ndarray) -> np.ndarray:
    """Square matrix mapping node values to derivative values at all nodes.

    Built analytically from barycentric weights; the diagonal is the
    negated off-diagonal row sum, so each row annihilates constants.
    """
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None] - pts[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (bary_w[None, :] / bary_w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def interpolation_matrix(points: np.ndarray, bary_w: np.ndarray, taus) -> np.ndarray:
    """Rows of barycentric interpolation weights: result @ node_values
    evaluates the interpolant at each requested tau.

    A tau that coincides with a node bit-exactly yields a unit row, so
    node values are reproduced exactly.
    """
    pts = np.asarray(points, dtype=float)
    t = np.atleast_1d(np.asarray(taus, dtype=float))
    d = t[:, None] - pts[None, :]
    hit_rows, hit_cols = np.nonzero(d == 0.0)
    d[hit_rows, :] = 1.0  # placeholder; hit rows become unit rows below
    M = bary_w[None, :] / d
    sums = M.sum(axis=1, keepdims=True)
    if hit_rows.size:
        M[hit_rows, :] = 0.0
        M[hit_rows, hit_cols] = 1.0
        sums[hit_rows] = 1.0
    M /= sums
    return M


@dataclass(frozen=True)
class NodeSet:
    """Ordered abscissae in [-1, 1] with a scheme tag."""

    points: np.ndarray
    kind: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or len(pts) == 0:
            raise ValueError("points must be a non-empty 1-D array")
        if np.any(np.diff(pts) <= 0.0):
            raise ValueError("points must be strictly increasing")
        if pts[0] < -1.0 or pts[-1] > 1.0:
            raise ValueError("points must lie in [-1, 1]")
        if self.kind == KIND_LG:
            if pts[0] != -1.0 or pts[-1] == 1.0:
                raise ValueError("lg-firstorder nodes are -1 plus interior points")
        elif self.kind == KIND_LG2:
            if pts[0] != -1.0 or pts[-1] != 1.0:
                raise ValueError("lg2 nodes must include both endpoints")
        elif self.kind == KIND_COLLOCATION:
            if pts[0] == -1.0 or pts[-1] == 1.0:
                raise ValueError("collocation-only nodes are interior")
        else:
            raise ValueError(f"unknown node kind: {self.kind!r}")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class CollocationBasis:
    """Nodes, quadrature weights, and differentiation matrices for one scheme.

    ``D`` is the scheme's constraint-side matrix: rows at the N collocation
    points for the first-order scheme (N x (N+1)), rows at all nodes for the
    second-order scheme ((N+2) x (N+2)).  ``D_all`` is always the square
    all-nodes map, used when differentiating reconstructed trajectories; for
    the second-order scheme it is the same object as ``D``.
    """

    nodes: NodeSet
    N: int
    B: int
    quad_weights: np.ndarray
    bary_weights: np.ndarray
    D: np.ndarray
    D_all: np.ndarray

    @property
    def kind(self) -> str:
        return self.nodes.kind

    @property
    def collocation_points(self) -> np.ndarray:
        """The N interior Gauss points."""
        if self.kind == KIND_LG:
            return self.nodes.points[1:]
        if self.kind == KIND_LG2:
            return self.nodes.points[1:-1]
        return self.nodes.points

    @property
    def collocation_slice(self) -> slice:
        """Rows of the node set that are collocation points."""
        if self.kind == KIND_LG:
            return slice(1, self.B)
        if self.kind == KIND_LG2:
            return slice(1, self.B - 1)
        return slice(0, self.B)

    def interp_matrix(self, taus) -> np.ndarray:
        return interpolation_matrix(self.nodes.points, self.bary_weights, taus)


def build_basis(kind: str, N: int) -> CollocationBasis:
    """Assemble the collocation basis for the given scheme and N."""
    if kind not in (KIND_LG, KIND_LG2):
        raise ValueError(f"kind must be {KIND_LG!r} or {KIND_LG2!r}, got {kind!r}")
    gauss = lg_points(N)
    wq = _gauss_weights(gauss)
    if kind == KIND_LG:
        pts = np.concatenate(([-1.0], gauss))
    else:
        pts = np.concatenate(([-1.0], gauss, [1.0]))
    nodes = NodeSet(points=pts, kind=kind)
    bw = barycentric_weights(pts)
    D_all = differentiation_matrix(pts, bw)
    D_all.setflags(write=False)
    D = D_all[1:, :] if kind == KIND_LG else D_all
    D.setflags(write=False)
    return CollocationBasis(
        nodes=nodes,
        N=N,
        B=len(pts),
        quad_weights=wq,
        bary_weights=bw,
        D=D,
        D_all=D_all,
    )


def interp_eval(basis: CollocationBasis, node_values, tau: float) -> float:
    """Evaluate the interpolating polynomial through the basis nodes at tau.

    Second barycentric form; returns the stored node value bit-exactly when
    tau coincides with a node.
    """
    vals = np.asarray(node_values, dtype=float)
    if vals.shape != (basis.B,):
        raise ValueError(f"expected {basis.B} node values, got {vals.shape}")
    pts = basis.nodes.points
    d = tau - pts
    hit = np.nonzero(d == 0.0)[0]
    if hit.size:
        return float(vals[hit[0]])
    c = basis.bary_weights / d
    return float((c @ vals) / c.sum())


def diff_values(basis: CollocationBasis, node_values) -> np.ndarray:
    """Derivative values D @ node_values in the tau domain.

    Length N for the first-order scheme (collocation points only), B for
    the second-order scheme (all nodes).  Callers apply the 2/t_f factor.
    """
    vals = np.asarray(node_values, dtype=float)
    if vals.shape[0] != basis.B:
        raise ValueError(f"expected {basis.B} node values, got {vals.shape}")
    return basis.D @ vals
