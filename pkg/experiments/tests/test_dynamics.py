import numpy as np
from django.test import SimpleTestCase

from mcv_control.diagnostics import finite_difference_jacobians, random_nominal
from mcv_control.dynamics import (
    DragFormula,
    DragMode,
    Input,
    Params,
    State,
    drag_coefficient,
    drag_force,
    linearize,
    noise_injection,
    quat_derivative,
    quat_multiply,
    quat_to_rotation,
    rk4_step,
    state_derivative,
    step,
)
from mcv_control.exceptions import DegenerateQuaternionError, SingularLinearizationError


class QuaternionTest(SimpleTestCase):
    def test_identity_rotation(self):
        np.testing.assert_allclose(quat_to_rotation([1.0, 0.0, 0.0, 0.0]), np.eye(3))

    def test_yaw_quarter_turn(self):
        """90 degrees about z maps body x onto inertial y"""
        s = np.sqrt(0.5)
        R = quat_to_rotation([s, 0.0, 0.0, s])
        np.testing.assert_allclose(R @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-12)

    def test_rotation_of_unnormalized_quaternion_is_orthonormal(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            R = quat_to_rotation(3.0 * rng.standard_normal(4))
            np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
            self.assertAlmostEqual(np.linalg.det(R), 1.0, places=12)

    def test_product_rotation_composes(self):
        rng = np.random.default_rng(1)
        a, b = rng.standard_normal(4), rng.standard_normal(4)
        np.testing.assert_allclose(
            quat_to_rotation(quat_multiply(a, b)), quat_to_rotation(a) @ quat_to_rotation(b), atol=1e-12
        )

    def test_zero_quaternion_rejected(self):
        with self.assertRaises(DegenerateQuaternionError):
            quat_to_rotation(np.zeros(4))

    def test_half_turn_about_z(self):
        np.testing.assert_allclose(quat_to_rotation([0.0, 0.0, 0.0, 1.0]), np.diag([-1.0, -1.0, 1.0]), atol=1e-12)


class QuaternionRateTest(SimpleTestCase):
    def test_no_rotation(self):
        np.testing.assert_array_equal(quat_derivative([1.0, 0.0, 0.0, 0.0], np.zeros(3)), np.zeros(4))

    def test_roll_rate_at_identity(self):
        np.testing.assert_allclose(quat_derivative([1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0]), [0.0, 1.0, 0.0, 0.0])

    def test_rate_is_tangent_to_unit_sphere(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            q = rng.standard_normal(4)
            q /= np.linalg.norm(q)
            self.assertAlmostEqual(q @ quat_derivative(q, rng.standard_normal(3) * 3.0), 0.0, places=12)


class IntegratorTest(SimpleTestCase):
    def setUp(self):
        self.params = Params()

    def integrate(self, x, u, dt, duration):
        for _ in range(int(round(duration / dt))):
            x = rk4_step(x, u, np.zeros(3), dt, self.params)
        return x

    def test_yaw_half_turn(self):
        """pi rad/s about z for one second at hover thrust"""
        u = Input([0.0, 0.0, np.pi], self.params.m * self.params.g).vector
        x = self.integrate(State.at_rest((1.0, 1.0, 8.0)).vector, u, 1e-4, 1.0)
        np.testing.assert_allclose(x[3:7], [0.0, 0.0, 0.0, 1.0], atol=1e-6)
        np.testing.assert_allclose(x[:3], [1.0, 1.0, 8.0], atol=1e-9)

    def test_fourth_order_convergence(self):
        x0 = State([0.0, 0.0, 4.0], [1.0, 0.0, 0.0, 0.0], [1.0, 0.5, -0.2]).vector
        u = Input([0.1, -0.05, 0.5], 11.0).vector
        coarse, mid, fine = (self.integrate(x0.copy(), u, dt, 1.0) for dt in (0.04, 0.02, 0.01))
        order = np.log2(np.linalg.norm(coarse - mid) / np.linalg.norm(mid - fine))
        self.assertGreaterEqual(order, 3.5)


class DragTest(SimpleTestCase):
    def test_offset_formula_at_rest(self):
        d = drag_coefficient(np.zeros(3), np.zeros(3), DragFormula.OFFSET)
        np.testing.assert_allclose(d, (0.2 + 0.9 * np.exp(-2.0)) * np.eye(3))

    def test_scaled_formula_is_clamped(self):
        d = drag_coefficient(np.zeros(3), np.zeros(3), DragFormula.SCALED)
        np.testing.assert_allclose(d, 1.1 * np.eye(3))

    def test_coefficient_bounds(self):
        for speed in (0.0, 0.5, 3.0, 50.0):
            for formula in DragFormula:
                d = drag_coefficient([speed, 0.0, 0.0], np.zeros(3), formula)[0, 0]
                self.assertGreaterEqual(d, 0.2)
                self.assertLessEqual(d, 1.1)

    def test_zero_velocity_gives_zero_force(self):
        np.testing.assert_array_equal(drag_force([1.0, 0.0, 0.0, 0.0], np.zeros(3), np.eye(3)), np.zeros(3))

    def test_force_is_quadratic_in_speed(self):
        q = [1.0, 0.0, 0.0, 0.0]
        D = 0.3 * np.eye(3)
        np.testing.assert_allclose(drag_force(q, [2.0, 0.0, 0.0], D), [1.2, 0.0, 0.0])


class DerivativeTest(SimpleTestCase):
    def setUp(self):
        self.params = Params()

    def test_hover_is_an_equilibrium(self):
        x = State.at_rest((1.0, 1.0, 8.0))
        u = Input(np.zeros(3), self.params.m * self.params.g)
        np.testing.assert_allclose(
            state_derivative(x.vector, u.vector, np.zeros(3), self.params), np.zeros(10), atol=1e-12
        )

    def test_wind_moves_position_directly(self):
        x = State.at_rest()
        u = self.params.hover_input()
        x_dot = state_derivative(x.vector, u, np.array([1.0, -2.0, 0.5]), self.params)
        np.testing.assert_allclose(x_dot[:3], [1.0, -2.0, 0.5])

    def test_step_holds_hover(self):
        x = State.at_rest((1.0, 1.0, 8.0))
        u = Input(np.zeros(3), self.params.m * self.params.g)
        for k in range(100):
            x = step(x, u, np.zeros(3), 0.01, self.params, t=k * 0.01)
        np.testing.assert_allclose(x.p, [1.0, 1.0, 8.0], atol=1e-12)
        np.testing.assert_allclose(x.v, np.zeros(3), atol=1e-12)

    def test_step_keeps_unit_quaternion(self):
        x = State([0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [1.0, 0.5, 0.0])
        u = Input([0.4, -0.3, 0.2], 9.0)
        for _ in range(50):
            x = step(x, u, np.array([0.5, 0.0, 0.0]), 0.02, self.params)
        self.assertAlmostEqual(np.linalg.norm(x.q), 1.0, places=12)

    def test_free_fall_from_rest(self):
        """No thrust and no drag: RK4 integrates constant gravity exactly"""
        params = Params(drag_mode=DragMode.FIXED, drag_matrix=np.zeros((3, 3)))
        x = rk4_step(State.at_rest().vector, np.zeros(4), np.zeros(3), 0.1, params)
        self.assertAlmostEqual(x[9], -0.981, places=12)
        self.assertAlmostEqual(x[2], -0.5 * 9.81 * 0.01, places=12)

    def test_step_rejects_nonpositive_dt(self):
        with self.assertRaises(ValueError):
            step(State.at_rest(), Input(np.zeros(3), 9.81), np.zeros(3), 0.0, self.params)

    def test_noise_injection_shape(self):
        G = noise_injection()
        self.assertEqual(G.shape, (10, 3))
        np.testing.assert_array_equal(G[:3], np.eye(3))
        np.testing.assert_array_equal(G[3:], 0.0)


class LinearizationTest(SimpleTestCase):
    def assertJacobiansMatch(self, params, seed):
        rng = np.random.default_rng(seed)
        for _ in range(20):
            x, u, v_w = random_nominal(rng)
            A, B = linearize(x, u, params, v_w=v_w)
            A_fd, B_fd = finite_difference_jacobians(x, u, v_w, params)
            np.testing.assert_allclose(A, A_fd, atol=1e-5 * max(1.0, np.abs(A_fd).max()))
            np.testing.assert_allclose(B, B_fd, atol=1e-5 * max(1.0, np.abs(B_fd).max()))

    def test_matches_finite_differences(self):
        self.assertJacobiansMatch(Params(), seed=0)

    def test_matches_finite_differences_scaled_formula(self):
        self.assertJacobiansMatch(Params(drag_formula=DragFormula.SCALED), seed=1)

    def test_matches_finite_differences_fixed_drag(self):
        self.assertJacobiansMatch(
            Params(drag_mode=DragMode.FIXED, drag_matrix=np.diag([0.2, 0.3, 0.4])), seed=2
        )

    def test_matches_finite_differences_airspeed_drag(self):
        self.assertJacobiansMatch(Params(drag_uses_airspeed=True), seed=3)

    def test_input_jacobian_at_hover(self):
        x = State([0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.001, 0.0, 0.0])
        _, B = linearize(x, Params().hover_input(), Params())
        np.testing.assert_allclose(B[4:7, :3], 0.5 * np.eye(3))
        np.testing.assert_allclose(B[7:, 3], [0.0, 0.0, 1.0])

    def test_zero_velocity_rejected(self):
        with self.assertRaises(SingularLinearizationError):
            linearize(State.at_rest(), Params().hover_input(), Params())
