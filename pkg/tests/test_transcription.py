import numpy as np
import numpy.testing as npt
import pytest

from pscolloc.basis import build_basis
from pscolloc.models import (
    FixedFinalTime,
    OcpDefinition,
    SecondOrderModel,
    cartpole_ocp,
    pendulum_ocp,
)
from pscolloc.transcription import (
    SCHEME_LG,
    SCHEME_LG2,
    extract_trajectory,
    make_initial_guess,
    normalize_scheme,
    time_from_tau,
    time_map,
    transcribe_lg,
    transcribe_lg2,
)


def oscillator_ocp(t_f: float = 1.0) -> OcpDefinition:
    """Unforced linear oscillator qdd = -q with analytic solution cos(t)."""
    model = SecondOrderModel(
        name="oscillator",
        n_q=1,
        n_u=1,
        accel=lambda q, v, u, t: -np.asarray(q, dtype=float),
        coord_units=("m",),
    )
    return OcpDefinition(
        model=model,
        cost_integrand=lambda x, u: np.ones(np.broadcast(x[..., 0], u[..., 0]).shape),
        boundary_constraint=lambda x0, xf, tf: np.concatenate(
            [x0 - np.array([1.0, 0.0]), np.zeros(0)]
        ),
        n_boundary=2,
        control_bounds=np.array([[-1.0, 1.0]]),
        state_bounds=np.full((2, 2), (-np.inf, np.inf)),
        t_f_mode=FixedFinalTime(t_f),
        x0_hint=np.array([1.0, 0.0]),
        xf_hint=np.array([np.cos(t_f), -np.sin(t_f)]),
        name="oscillator",
    )


class TestTimeMap:
    def test_interval_start(self):
        assert time_map(0.0, 2.0) == -1.0

    def test_interval_end(self):
        assert time_map(2.0, 2.0) == 1.0

    def test_affine_midpoint(self):
        assert time_map(0.5, 2.0) == -0.5

    def test_round_trip(self):
        for t in np.linspace(0.0, 3.7, 13):
            assert abs(time_from_tau(time_map(t, 3.7), 3.7) - t) <= 1e-15 * 3.7

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            time_map(2.5, 2.0)
        with pytest.raises(ValueError):
            time_map(-0.1, 2.0)
        with pytest.raises(ValueError):
            time_map(0.5, 0.0)

    def test_scheme_normalization(self):
        assert normalize_scheme("lg") == SCHEME_LG
        assert normalize_scheme("LG2") == SCHEME_LG2
        with pytest.raises(ValueError):
            normalize_scheme("radau")


class TestLayouts:
    def test_lg_pendulum_counts(self):
        problem, layout = transcribe_lg(pendulum_ocp(), 5)
        # X: 6 nodes x 2 states, U: 5, t_f free
        assert layout.total_len == 12 + 5 + 1
        z0 = make_initial_guess(pendulum_ocp(), layout, build_basis(SCHEME_LG, 5))
        assert len(problem.eq_constraints(z0)) == 10 + 4

    def test_lg2_pendulum_counts(self):
        problem, layout = transcribe_lg2(pendulum_ocp(), 5)
        assert layout.total_len == 7 + 5 + 1
        z0 = make_initial_guess(pendulum_ocp(), layout, build_basis(SCHEME_LG2, 5))
        assert len(problem.eq_constraints(z0)) == 5 + 4

    def test_offsets_disjoint_and_covering(self):
        for transcribe in (transcribe_lg, transcribe_lg2):
            _, layout = transcribe(cartpole_ocp(), 7)
            seen = np.zeros(layout.total_len, dtype=int)
            for sl in layout.offsets.values():
                seen[sl] += 1
            assert np.all(seen == 1)

    def test_fixed_tf_has_no_tf_slot(self):
        _, layout = transcribe_lg2(cartpole_ocp(), 6)
        assert layout.tf_index is None
        assert layout.t_f(np.zeros(layout.total_len)) == 2.0

    def test_pack_round_trip(self):
        _, layout = transcribe_lg2(pendulum_ocp(), 4)
        rng = np.random.default_rng(0)
        nodes = rng.normal(size=(6, 1))
        controls = rng.normal(size=(4, 1))
        z = layout.pack(nodes, controls, t_f=2.5)
        npt.assert_array_equal(layout.node_matrix(z), nodes)
        npt.assert_array_equal(layout.controls(z), controls)
        assert layout.t_f(z) == 2.5

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            transcribe_lg(pendulum_ocp(), 0)
        with pytest.raises(ValueError):
            transcribe_lg2(pendulum_ocp(), 0)


class TestLgResiduals:
    def test_zero_dynamics_constant_state(self):
        # f == 0 with constant nodes: D annihilates constants
        model = SecondOrderModel(
            name="frozen", n_q=1, n_u=1,
            accel=lambda q, v, u, t: np.zeros_like(np.asarray(q, dtype=float)),
            coord_units=("m",),
        )
        ocp = OcpDefinition(
            model=model,
            cost_integrand=lambda x, u: np.zeros(np.broadcast(x[..., 0], u[..., 0]).shape),
            boundary_constraint=lambda x0, xf, tf: np.zeros(0),
            n_boundary=0,
            control_bounds=np.array([[-1.0, 1.0]]),
            state_bounds=np.full((2, 2), (-np.inf, np.inf)),
            t_f_mode=FixedFinalTime(1.0),
        )
        problem, layout = transcribe_lg(ocp, 6)
        nodes = np.tile([0.7, 0.0], (7, 1))
        z = layout.pack(nodes, np.zeros((6, 1)))
        npt.assert_allclose(problem.eq_constraints(z), 0.0, atol=1e-13)

    def test_analytic_oscillator_sampled_residual_small(self):
        # exact solution sampled at nodes: residual at spectral accuracy
        ocp = oscillator_ocp(1.0)
        problem, layout = transcribe_lg(ocp, 12)
        bas = build_basis(SCHEME_LG, 12)
        t_nodes = 0.5 * (bas.nodes.points + 1.0)
        X = np.column_stack([np.cos(t_nodes), -np.sin(t_nodes)])
        z = layout.pack(X, np.zeros((12, 1)))
        resid = problem.eq_constraints(z)[: 2 * 12]
        assert np.max(np.abs(resid)) < 1e-8

    def test_objective_unit_cost_equals_tf(self):
        problem, layout = transcribe_lg(pendulum_ocp(), 9)
        bas = build_basis(SCHEME_LG, 9)
        z = make_initial_guess(pendulum_ocp(), layout, bas)
        t_f = layout.t_f(z)
        assert abs(problem.objective(z) - t_f) <= 1e-13 * t_f

    def test_cartpole_zero_control_objective(self):
        problem, layout = transcribe_lg(cartpole_ocp(), 8)
        z = make_initial_guess(cartpole_ocp(), layout, build_basis(SCHEME_LG, 8))
        assert problem.objective(z) == 0.0

    def test_boundary_block_uses_interpolated_endpoint(self):
        ocp = oscillator_ocp(1.0)
        problem, layout = transcribe_lg(ocp, 12)
        bas = build_basis(SCHEME_LG, 12)
        t_nodes = 0.5 * (bas.nodes.points + 1.0)
        X = np.column_stack([np.cos(t_nodes), -np.sin(t_nodes)])
        z = layout.pack(X, np.zeros((12, 1)))
        b = problem.eq_constraints(z)[2 * 12 :]
        npt.assert_allclose(b, 0.0, atol=1e-10)  # x0 matches exactly by sampling


class TestLg2Residuals:
    def test_quadratic_exactness(self):
        # Q sampled from tau^2 with the matching constant acceleration
        t_f = 2.0
        model = SecondOrderModel(
            name="const-accel", n_q=1, n_u=1,
            accel=lambda q, v, u, t: np.full(np.shape(np.asarray(q)), 2.0 * (2.0 / t_f) ** 2)[..., :1]
            if np.ndim(q) > 1
            else np.full(1, 2.0 * (2.0 / t_f) ** 2),
            coord_units=("m",),
        )
        ocp = OcpDefinition(
            model=model,
            cost_integrand=lambda x, u: np.zeros(np.broadcast(x[..., 0], u[..., 0]).shape),
            boundary_constraint=lambda x0, xf, tf: np.zeros(0),
            n_boundary=0,
            control_bounds=np.array([[-1.0, 1.0]]),
            state_bounds=np.full((2, 2), (-np.inf, np.inf)),
            t_f_mode=FixedFinalTime(t_f),
        )
        problem, layout = transcribe_lg2(ocp, 5)
        bas = build_basis(SCHEME_LG2, 5)
        Q = (bas.nodes.points**2)[:, None]
        z = layout.pack(Q, np.zeros((5, 1)))
        npt.assert_allclose(problem.eq_constraints(z), 0.0, atol=1e-12)

    @pytest.mark.parametrize("pair", [(4, 8), (8, 16)])
    def test_oscillator_residual_spectral_decay(self, pair):
        ocp = oscillator_ocp(1.0)
        maxres = {}
        for N in pair:
            problem, layout = transcribe_lg2(ocp, N)
            bas = build_basis(SCHEME_LG2, N)
            t_nodes = 0.5 * (bas.nodes.points + 1.0)
            Q = np.cos(t_nodes)[:, None]
            z = layout.pack(Q, np.zeros((N, 1)))
            maxres[N] = np.max(np.abs(problem.eq_constraints(z)[:N]))
        lo, hi = pair
        assert maxres[hi] <= maxres[lo] / 10

    def test_objective_unit_cost_equals_tf(self):
        problem, layout = transcribe_lg2(pendulum_ocp(), 9)
        z = make_initial_guess(pendulum_ocp(), layout, build_basis(SCHEME_LG2, 9))
        t_f = layout.t_f(z)
        assert abs(problem.objective(z) - t_f) <= 1e-13 * t_f

    def test_boundary_uses_endpoint_nodes(self):
        ocp = oscillator_ocp(1.0)
        problem, layout = transcribe_lg2(ocp, 10)
        bas = build_basis(SCHEME_LG2, 10)
        t_nodes = 0.5 * (bas.nodes.points + 1.0)
        Q = np.cos(t_nodes)[:, None]
        z = layout.pack(Q, np.zeros((10, 1)))
        b = problem.eq_constraints(z)[10:]
        # x(0) from row 0 of Q and its derivative: matches (1, 0) spectrally
        npt.assert_allclose(b, 0.0, atol=1e-9)


class TestTrajectory:
    def _solved_like_vector(self, layout, basis, rng):
        nodes = rng.normal(size=(layout.node_rows, layout.node_width))
        controls = rng.normal(size=(layout.N, layout.n_u))
        t_f = 2.0 if layout.t_f_fixed is None else None
        return layout.pack(nodes, controls, t_f)

    def test_node_time_reproduction(self):
        ocp = pendulum_ocp()
        _, layout = transcribe_lg2(ocp, 6)
        bas = build_basis(SCHEME_LG2, 6)
        rng = np.random.default_rng(5)
        z = self._solved_like_vector(layout, bas, rng)
        traj = extract_trajectory(layout, z, bas)
        t_nodes = traj.t_f * (bas.nodes.points + 1.0) / 2.0
        for k, t in enumerate(t_nodes):
            # the t -> tau affine round trip can cost one ulp, so node values
            # reproduce to rounding here; bit-exact hits are covered in tau
            # space by the basis interpolation tests
            assert abs(traj.config(t)[0] - layout.node_matrix(z)[k, 0]) < 1e-12

    def test_lg2_velocity_is_config_derivative_fd(self):
        ocp = pendulum_ocp()
        _, layout = transcribe_lg2(ocp, 8)
        bas = build_basis(SCHEME_LG2, 8)
        rng = np.random.default_rng(11)
        z = self._solved_like_vector(layout, bas, rng)
        traj = extract_trajectory(layout, z, bas)
        h = 1e-6 * traj.t_f
        ts = rng.uniform(h, traj.t_f - h, size=50)
        for t in ts:
            fd = (traj.config(t + h)[0] - traj.config(t - h)[0]) / (2 * h)
            assert abs(traj.velocity(t)[0] - fd) < 1e-5

    def test_lg2_eps1_identically_zero(self):
        # structural identity, bit-exact at 100 random times
        ocp = cartpole_ocp()
        _, layout = transcribe_lg2(ocp, 9)
        bas = build_basis(SCHEME_LG2, 9)
        rng = np.random.default_rng(2)
        z = self._solved_like_vector(layout, bas, rng)
        traj = extract_trajectory(layout, z, bas)
        for t in rng.uniform(0.0, traj.t_f, size=100):
            diff = traj.config_derivative(t) - traj.velocity(t)
            assert np.all(diff == 0.0)

    def test_lg_velocity_inconsistent_off_collocation(self):
        # v nodes deliberately not equal to the q-polynomial derivative
        ocp = pendulum_ocp()
        _, layout = transcribe_lg(ocp, 6)
        bas = build_basis(SCHEME_LG, 6)
        rng = np.random.default_rng(3)
        z = self._solved_like_vector(layout, bas, rng)
        traj = extract_trajectory(layout, z, bas)
        t_mid = 0.5 * traj.t_f
        assert abs(traj.velocity(t_mid)[0] - traj.config_derivative(t_mid)[0]) > 1e-6

    def test_lg2_second_derivative_fd(self):
        ocp = pendulum_ocp()
        _, layout = transcribe_lg2(ocp, 7)
        bas = build_basis(SCHEME_LG2, 7)
        rng = np.random.default_rng(7)
        z = self._solved_like_vector(layout, bas, rng)
        traj = extract_trajectory(layout, z, bas)
        h = 1e-5 * traj.t_f
        for t in rng.uniform(2 * h, traj.t_f - 2 * h, size=20):
            fd = (
                traj.config(t + h)[0] - 2 * traj.config(t)[0] + traj.config(t - h)[0]
            ) / h**2
            assert abs(traj.config_second_derivative(t)[0] - fd) < 1e-3

    def test_control_extrapolation_flag(self):
        ocp = pendulum_ocp()
        _, layout = transcribe_lg2(ocp, 5)
        bas = build_basis(SCHEME_LG2, 5)
        rng = np.random.default_rng(9)
        z = self._solved_like_vector(layout, bas, rng)
        traj = extract_trajectory(layout, z, bas)
        assert traj.control_is_extrapolated(0.0)
        assert traj.control_is_extrapolated(traj.t_f)
        assert not traj.control_is_extrapolated(0.5 * traj.t_f)

    def test_length_mismatch_rejected(self):
        ocp = pendulum_ocp()
        _, layout = transcribe_lg2(ocp, 5)
        bas = build_basis(SCHEME_LG2, 5)
        with pytest.raises(ValueError):
            extract_trajectory(layout, np.zeros(layout.total_len + 1), bas)


class TestInitialGuess:
    def test_linear_configuration_profile(self):
        ocp = pendulum_ocp()
        _, layout = transcribe_lg2(ocp, 6)
        bas = build_basis(SCHEME_LG2, 6)
        z = make_initial_guess(ocp, layout, bas)
        Q = layout.node_matrix(z)
        assert Q[0, 0] == 0.0
        assert abs(Q[-1, 0] - np.pi) < 1e-15
        assert np.all(np.diff(Q[:, 0]) > 0)
        npt.assert_array_equal(layout.controls(z), 0.0)
        assert layout.t_f(z) == 0.5 * (
            ocp.t_f_mode.lower + ocp.t_f_mode.upper
        )

    def test_lg_guess_zero_velocity(self):
        ocp = cartpole_ocp()
        _, layout = transcribe_lg(ocp, 4)
        bas = build_basis(SCHEME_LG, 4)
        z = make_initial_guess(ocp, layout, bas)
        X = layout.node_matrix(z)
        npt.assert_array_equal(X[:, 2:], 0.0)
        assert abs(X[-1, 1] - np.pi * (bas.nodes.points[-1] + 1) / 2) < 1e-14
