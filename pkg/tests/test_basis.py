import numpy as np
import numpy.testing as npt
import pytest

from pscolloc import basis
from pscolloc.basis import (
    KIND_LG,
    KIND_LG2,
    CollocationBasis,
    NodeSet,
    build_basis,
    diff_values,
    interp_eval,
    legendre_eval,
    lg_points,
    lg_weights,
)


def lagrange_polys(points):
    """Explicit product-form Lagrange basis, used as an oracle."""
    points = np.asarray(points, dtype=float)

    def L(i, x):
        out = np.ones_like(np.asarray(x, dtype=float))
        for k, pk in enumerate(points):
            if k != i:
                out = out * (x - pk) / (points[i] - pk)
        return out

    return L


class TestLegendreEval:
    def test_constant(self):
        assert legendre_eval(0, 0.7) == (1.0, 0.0)

    def test_degree_two_at_zero(self):
        val, der = legendre_eval(2, 0.0)
        assert val == -0.5
        assert der == 0.0

    def test_degree_five_closed_form(self):
        # oracle: coefficients of P_5 expanded from the recurrence
        tau = 0.3
        val, der = legendre_eval(5, tau)
        exact_val = (63 * tau**5 - 70 * tau**3 + 15 * tau) / 8
        exact_der = (315 * tau**4 - 210 * tau**2 + 15) / 8
        assert abs(val - exact_val) < 1e-14
        assert abs(der - exact_der) < 1e-14

    def test_vectorized_matches_scalar(self):
        taus = np.linspace(-1, 1, 7)
        vals, ders = legendre_eval(4, taus)
        for t, v, d in zip(taus, vals, ders):
            sv, sd = legendre_eval(4, t)
            assert v == sv and d == sd

    def test_negative_degree_rejected(self):
        with pytest.raises(ValueError):
            legendre_eval(-1, 0.0)


class TestLgPoints:
    def test_n1(self):
        npt.assert_allclose(lg_points(1), [0.0], atol=1e-15)

    def test_n2(self):
        npt.assert_allclose(lg_points(2), [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)

    def test_n3(self):
        npt.assert_allclose(
            lg_points(3), [-np.sqrt(3 / 5), 0.0, np.sqrt(3 / 5)], atol=1e-15
        )

    @pytest.mark.parametrize("N", [1, 2, 5, 13, 30, 64])
    def test_roots_and_symmetry(self, N):
        pts = lg_points(N)
        assert len(pts) == N
        assert np.all(np.diff(pts) > 0)
        val, _ = legendre_eval(N, pts)
        assert np.max(np.abs(val)) < 1e-13
        npt.assert_allclose(pts, -pts[::-1], atol=1e-14)

    @pytest.mark.parametrize("N", [4, 9, 27, 50])
    def test_against_library_generator(self, N):
        x, w = np.polynomial.legendre.leggauss(N)
        npt.assert_allclose(lg_points(N), x, atol=1e-14)
        npt.assert_allclose(lg_weights(N), w, atol=1e-13)

    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            lg_points(0)
        with pytest.raises(ValueError):
            lg_points(65)


class TestLgWeights:
    def test_n1(self):
        npt.assert_allclose(lg_weights(1), [2.0], atol=1e-15)

    def test_n2(self):
        npt.assert_allclose(lg_weights(2), [1.0, 1.0], atol=1e-15)

    def test_sum_is_two(self):
        for N in (1, 3, 8, 21, 40):
            assert abs(lg_weights(N).sum() - 2.0) < 1e-13

    def test_positive(self):
        assert np.all(lg_weights(17) > 0)

    def test_degree_eight_monomial_n5(self):
        # exactness up to degree 2N-1 = 9
        x, w = lg_points(5), lg_weights(5)
        assert abs(w @ x**8 - 2.0 / 9.0) < 1e-13

    @pytest.mark.parametrize("N", list(range(1, 31)))
    def test_exactness_sweep(self, N):
        x, w = lg_points(N), lg_weights(N)
        for m in range(2 * N):
            exact = 0.0 if m % 2 else 2.0 / (m + 1)
            assert abs(w @ x**m - exact) < 1e-12


class TestNodeSet:
    def test_lg_structure(self):
        ns = build_basis(KIND_LG, 4).nodes
        assert ns.points[0] == -1.0
        assert ns.points[-1] < 1.0
        assert len(ns) == 5

    def test_lg2_structure(self):
        ns = build_basis(KIND_LG2, 4).nodes
        assert ns.points[0] == -1.0 and ns.points[-1] == 1.0
        assert len(ns) == 6

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            NodeSet(points=np.array([0.5, -0.5]), kind=basis.KIND_COLLOCATION)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            NodeSet(points=np.array([-1.5, 0.0]), kind=basis.KIND_COLLOCATION)

    def test_rejects_bad_kind(self):
        with pytest.raises(ValueError):
            NodeSet(points=np.array([0.0]), kind="radau")


class TestBuildBasis:
    def test_lg_shape_and_row_sums(self):
        b = build_basis(KIND_LG, 3)
        assert b.D.shape == (3, 4)
        assert np.max(np.abs(b.D.sum(axis=1))) < 1e-12

    def test_lg2_shape(self):
        b = build_basis(KIND_LG2, 3)
        assert b.D.shape == (5, 5)
        assert b.D is b.D_all

    def test_lg2_quartic_derivative(self):
        # D* applied to tau^4 samples must give 4 tau^3 (degree N+1 = 4)
        b = build_basis(KIND_LG2, 3)
        pts = b.nodes.points
        npt.assert_allclose(b.D @ pts**4, 4 * pts**3, atol=1e-10)

    def test_lg2_matches_finite_difference_oracle(self):
        # differentiate the explicitly constructed Lagrange polynomials
        b = build_basis(KIND_LG2, 2)
        L = lagrange_polys(b.nodes.points)
        h = 1e-6
        for k, tk in enumerate(b.nodes.points):
            for i in range(b.B):
                fd = (L(i, tk + h) - L(i, tk - h)) / (2 * h)
                assert abs(b.D[k, i] - fd) < 1e-5

    def test_lg_matches_finite_difference_oracle(self):
        b = build_basis(KIND_LG, 3)
        L = lagrange_polys(b.nodes.points)
        h = 1e-6
        for k, tk in enumerate(b.collocation_points):
            for i in range(b.B):
                fd = (L(i, tk + h) - L(i, tk - h)) / (2 * h)
                assert abs(b.D[k, i] - fd) < 1e-5

    @pytest.mark.parametrize("N", [1, 2, 7, 20, 30])
    def test_lg_derivative_exact_to_degree_n(self, N):
        b = build_basis(KIND_LG, N)
        pts = b.nodes.points
        coll = b.collocation_points
        for d in range(N + 1):
            want = d * coll ** (d - 1) if d else np.zeros_like(coll)
            npt.assert_allclose(b.D @ pts**d, want, atol=1e-9)

    @pytest.mark.parametrize("N", [1, 2, 7, 20, 30])
    def test_lg2_derivative_exact_to_degree_n_plus_1(self, N):
        b = build_basis(KIND_LG2, N)
        pts = b.nodes.points
        for d in range(N + 2):
            want = d * pts ** (d - 1) if d else np.zeros_like(pts)
            npt.assert_allclose(b.D @ pts**d, want, atol=1e-9)

    @pytest.mark.parametrize("N", [2, 7, 20, 30])
    def test_lg2_second_derivative_exact(self, N):
        b = build_basis(KIND_LG2, N)
        pts = b.nodes.points
        for d in range(N + 2):
            want = d * (d - 1) * pts ** (d - 2) if d >= 2 else np.zeros_like(pts)
            npt.assert_allclose(b.D @ (b.D @ pts**d), want, atol=1e-9)

    def test_rejects_bad_kind(self):
        with pytest.raises(ValueError):
            build_basis("chebyshev", 4)

    def test_spectral_decay_of_derivative_error(self):
        # node-wise derivative error for sin(tau) must fall >= 10x per
        # doubling; N=24 sits at the rounding floor, far below the N=8 level
        errs = {}
        for N in (4, 8, 16, 24):
            b = build_basis(KIND_LG, N)
            dv = b.D @ np.sin(b.nodes.points)
            errs[N] = np.max(np.abs(dv - np.cos(b.collocation_points)))
        assert errs[8] <= errs[4] / 10
        assert errs[16] <= errs[8] / 10
        assert errs[24] < 1e-10


class TestInterpEval:
    def test_constant_reproduction(self):
        b = build_basis(KIND_LG2, 3)
        vals = np.full(b.B, 3.25)
        for tau in (-1.0, -0.33, 0.0, 0.9, 1.0):
            assert abs(interp_eval(b, vals, tau) - 3.25) < 1e-14

    def test_quadratic_reproduction(self):
        b = build_basis(KIND_LG2, 2)
        vals = b.nodes.points**2 + 1.0
        assert abs(interp_eval(b, vals, 0.25) - 1.0625) < 1e-14

    def test_node_hit_is_bit_exact(self):
        b = build_basis(KIND_LG, 5)
        rng = np.random.default_rng(7)
        vals = rng.normal(size=b.B)
        assert interp_eval(b, vals, b.nodes.points[1]) == vals[1]

    def test_polynomial_reproduction_to_full_degree(self):
        b = build_basis(KIND_LG2, 6)
        rng = np.random.default_rng(3)
        coeffs = rng.normal(size=b.B)  # degree B-1 = N+1
        poly = np.polynomial.Polynomial(coeffs)
        vals = poly(b.nodes.points)
        for tau in np.linspace(-1, 1, 17):
            assert abs(interp_eval(b, vals, tau) - poly(tau)) < 1e-12

    def test_length_mismatch_rejected(self):
        b = build_basis(KIND_LG, 3)
        with pytest.raises(ValueError):
            interp_eval(b, np.zeros(b.B + 1), 0.0)


class TestDiffValues:
    def test_identity_derivative(self):
        b = build_basis(KIND_LG2, 3)
        npt.assert_allclose(diff_values(b, b.nodes.points), np.ones(b.B), atol=1e-12)

    def test_cubic_derivative(self):
        b = build_basis(KIND_LG2, 3)
        pts = b.nodes.points
        npt.assert_allclose(diff_values(b, pts**3), 3 * pts**2, atol=1e-11)

    def test_zero_vector(self):
        b = build_basis(KIND_LG, 4)
        npt.assert_array_equal(diff_values(b, np.zeros(b.B)), np.zeros(b.N))

    def test_output_length_per_scheme(self):
        assert diff_values(build_basis(KIND_LG, 6), np.zeros(7)).shape == (6,)
        assert diff_values(build_basis(KIND_LG2, 6), np.zeros(8)).shape == (8,)


class TestImmutability:
    def test_arrays_read_only(self):
        b = build_basis(KIND_LG2, 4)
        for arr in (b.nodes.points, b.quad_weights, b.bary_weights, b.D):
            with pytest.raises(ValueError):
                arr[0] = 0.0
