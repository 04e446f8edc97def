import numpy as np
from django.test import SimpleTestCase
from pydantic import ValidationError

from core.exceptions import ConfigurationError, DomainError

from .plant import LtiModel, PlantState, measure, step_plant
from .scenarios import (
    CwParams, CwVariant, Scenario, build_cw, build_scenario, build_workbench, is_controllable,
    mean_motion,
)


class LtiModelTests(SimpleTestCase):
    def test_workbench_matrices(self):
        model = build_workbench()
        np.testing.assert_array_equal(model.A, [[0, 1], [0, 0]])
        np.testing.assert_array_equal(model.B, [[0], [1]])
        np.testing.assert_array_equal(model.C, [[1, 0]])
        np.testing.assert_allclose(model.Q, 0.001 * np.eye(2))
        np.testing.assert_allclose(model.R, [[0.01]])
        self.assertEqual(model.dt, 0.01)
        self.assertEqual((model.n_x, model.n_u, model.n_z), (2, 1, 1))

    def test_workbench_controllable(self):
        model = build_workbench()
        self.assertTrue(is_controllable(model.A, model.B))

    def test_as_printed_workbench_is_not_controllable(self):
        model = build_workbench(as_printed=True)
        self.assertFalse(is_controllable(model.A, model.B))

    def test_rejects_inconsistent_dimensions(self):
        with self.assertRaises(ValidationError):
            LtiModel(A=np.eye(2), B=np.ones((3, 1)), C=[[1, 0]], Q=np.eye(2), R=[[1]], dt=0.1)
        with self.assertRaises(ValidationError):
            LtiModel(A=np.eye(2), B=[[0], [1]], C=[[1, 0]], Q=np.eye(2), R=[[1]], dt=0.0)

    def test_rejects_non_pd_measurement_noise(self):
        with self.assertRaises(ValidationError):
            LtiModel(A=np.eye(2), B=[[0], [1]], C=[[1, 0]], Q=np.eye(2), R=[[0.0]], dt=0.1)
        with self.assertRaises(ValidationError):
            LtiModel(A=np.eye(2), B=[[0], [1]], C=[[1, 0]], Q=[[1, 2], [0, 1]], R=[[1]], dt=0.1)

    def test_scaled_only_touches_dynamics(self):
        model = build_workbench()
        design = model.scaled(0.8)
        np.testing.assert_allclose(design.A, 0.8 * model.A)
        np.testing.assert_array_equal(design.B, model.B)
        np.testing.assert_array_equal(design.Q, model.Q)
        np.testing.assert_array_equal(model.A, [[0, 1], [0, 0]])
        with self.assertRaises(DomainError):
            model.scaled(0.0)


class PlantStepTests(SimpleTestCase):
    def setUp(self):
        self.model = build_workbench()

    def test_euler_step_without_noise(self):
        nxt = step_plant(self.model, PlantState(x=np.array([0.0, 1.0])), [0.0], noise_on=False)
        np.testing.assert_allclose(nxt.x, [0.01, 1.0])
        self.assertAlmostEqual(nxt.t, 0.01)

    def test_double_integrator_equilibrium(self):
        nxt = step_plant(self.model, PlantState(x=np.array([1.0, 0.0])), [0.0], noise_on=False)
        np.testing.assert_allclose(nxt.x, [1.0, 0.0])

    def test_origin_is_fixed_point(self):
        cw = build_cw()
        nxt = step_plant(cw, PlantState(x=np.zeros(6)), np.zeros(3), noise_on=False)
        np.testing.assert_array_equal(nxt.x, np.zeros(6))

    def test_noise_free_step_is_affine(self):
        rng = np.random.default_rng(3)
        cw = build_cw()
        x1, x2 = rng.normal(size=6), rng.normal(size=6)
        u1, u2 = rng.normal(size=3), rng.normal(size=3)

        def step(x, u):
            return step_plant(cw, PlantState(x=x), u, noise_on=False).x

        np.testing.assert_allclose(
            step(x1 + x2, u1 + u2), step(x1, u1) + step(x2, u2) - step(np.zeros(6), np.zeros(3)),
            atol=1e-12,
        )

    def test_process_noise_covariance(self):
        model = LtiModel(A=np.zeros((2, 2)), B=[[0], [1]], C=[[1, 0]],
                         Q=[[2.0, 0.5], [0.5, 1.0]], R=[[1.0]], dt=0.1)
        rng = np.random.default_rng(11)
        steps, samples = 4, 10000
        finals = np.empty((samples, 2))
        for i in range(samples):
            state = PlantState(x=np.zeros(2))
            for _ in range(steps):
                state = step_plant(model, state, [0.0], rng)
            finals[i] = state.x
        expected = steps * model.Q * model.dt
        np.testing.assert_allclose(np.cov(finals.T), expected, rtol=0.1, atol=0.01)

    def test_time_is_nondecreasing(self):
        rng = np.random.default_rng(0)
        state = PlantState(x=np.array([10.0, 1.0]))
        times = []
        for _ in range(5):
            state = step_plant(self.model, state, [0.0], rng)
            times.append(state.t)
        self.assertEqual(times, sorted(times))


class MeasureTests(SimpleTestCase):
    def test_noise_free_workbench_measurement(self):
        z = measure(build_workbench(), [10.0, 1.0], noise_on=False)
        np.testing.assert_allclose(z, [10.0])

    def test_noise_free_cw_measurement(self):
        x0 = [70, 30, -5, -1.7, -0.9, 0.25]
        np.testing.assert_allclose(measure(build_cw(), x0, noise_on=False), [70, 30, -5])

    def test_outlier_scale_inflates_noise(self):
        model = build_workbench()
        rng = np.random.default_rng(5)
        draws = np.array([measure(model, [0.0, 0.0], rng, outlier_scale=500.0)[0] for _ in range(4000)])
        self.assertAlmostEqual(draws.std() / (500 * np.sqrt(0.01)), 1.0, delta=0.05)

    def test_outlier_scale_below_one_is_rejected(self):
        with self.assertRaises(DomainError):
            measure(build_workbench(), [0.0, 0.0], noise_on=False, outlier_scale=0.5)


class CwScenarioTests(SimpleTestCase):
    def test_mean_motion_leo(self):
        self.assertAlmostEqual(mean_motion(CwParams()), 1.1332e-3, delta=1e-7)

    def test_mean_motion_unit(self):
        self.assertEqual(mean_motion(CwParams(mu_earth=1.0, R_o=1.0)), 1.0)

    def test_mean_motion_rejects_zero_radius(self):
        with self.assertRaises(DomainError):
            mean_motion(CwParams(R_o=0.0))

    def test_published_coupling_entries(self):
        A = build_cw(n=1e-3).A
        self.assertAlmostEqual(A[3, 5], 2e-3)
        self.assertAlmostEqual(A[5, 5], 2e-6)
        self.assertAlmostEqual(A[4, 4], -1e-6)
        self.assertAlmostEqual(A[5, 3], -2e-3)
        outside_identity = A.copy()
        outside_identity[0:3, 3:6] -= np.eye(3)
        self.assertEqual(np.count_nonzero(outside_identity), 4)

    def test_componentwise_equations(self):
        n = 1e-3
        A = build_cw(n=n).A
        x, y, z, vx, vy, vz = 1.0, 2.0, 3.0, 0.4, 0.5, 0.6
        xdot = A @ np.array([x, y, z, vx, vy, vz])
        np.testing.assert_allclose(xdot[:3], [vx, vy, vz])
        self.assertAlmostEqual(xdot[3], 2 * n * vz)
        self.assertAlmostEqual(xdot[4], -n ** 2 * vy)
        self.assertAlmostEqual(xdot[5], -2 * n * vx + 2 * n ** 2 * vz)

    def test_input_map(self):
        B = build_cw(n=1e-3).B
        np.testing.assert_array_equal(B[:3], np.zeros((3, 3)))
        np.testing.assert_array_equal(B[3:], np.eye(3))

    def test_standard_variant_uses_displacement_coupling(self):
        n = 1e-3
        A = build_cw(n=n, variant=CwVariant.STANDARD).A
        np.testing.assert_allclose(A[3], [0, 0, 0, 0, 0, 2 * n])
        np.testing.assert_allclose(A[4], [0, -n ** 2, 0, 0, 0, 0])
        np.testing.assert_allclose(A[5], [0, 0, 3 * n ** 2, -2 * n, 0, 0])

    def test_default_noise(self):
        model = build_cw()
        np.testing.assert_allclose(model.Q, 1e-12 * np.eye(6))
        np.testing.assert_allclose(model.R, 1e-2 * np.eye(3))
        self.assertEqual(model.dt, 0.1)
        self.assertTrue(is_controllable(model.A, model.B))

    def test_rejects_nonpositive_mean_motion(self):
        with self.assertRaises(DomainError):
            build_cw(n=0.0)

    def test_registry(self):
        self.assertEqual(build_scenario(Scenario.WORKBENCH).n_x, 2)
        self.assertEqual(build_scenario('cw').n_x, 6)
        with self.assertRaises(ConfigurationError):
            build_scenario('bogus')
