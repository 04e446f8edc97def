import numpy as np
from django.test import SimpleTestCase

from core.exceptions import DomainError, SolverError
from dynamics.scenarios import build_cw, build_workbench

from .lqr import (
    DesiredState, LqrDesign, care_residual, closed_loop_poles, control_law, lqr_cost, lqr_gain,
    solve_care,
)

SQRT3 = np.sqrt(3.0)


class SolveCareTests(SimpleTestCase):
    def test_scalar_oracle(self):
        S = solve_care([[0.0]], [[1.0]], [[1.0]], [[1.0]])
        self.assertAlmostEqual(S[0, 0], 1.0, places=6)

    def test_double_integrator_oracle(self):
        model = build_workbench()
        S = solve_care(model.A, model.B, np.eye(2), np.eye(1))
        np.testing.assert_allclose(S, [[SQRT3, 1.0], [1.0, SQRT3]], atol=1e-8)
        self.assertLessEqual(care_residual(model.A, model.B, np.eye(2), np.eye(1), S), 1e-8)

    def test_workbench_gain(self):
        design = LqrDesign.design(build_workbench(), np.eye(2), np.eye(1))
        np.testing.assert_allclose(design.K_c, [[1.0, 1.7321]], atol=1e-3)

    def test_closed_loop_stable_for_both_scenarios(self):
        for model, Q_c, R_c in (
            (build_workbench(), np.eye(2), np.eye(1)),
            (build_cw(), 1e-6 * np.eye(6), np.eye(3)),
        ):
            design = LqrDesign.design(model, Q_c, R_c)
            self.assertLess(closed_loop_poles(model.A, model.B, design.K_c).real.max(), 0)
            bound = 1e-8 * (1 + np.linalg.norm(design.S))
            self.assertLessEqual(care_residual(model.A, model.B, Q_c, R_c, design.S), bound)

    def test_solution_is_symmetric_psd(self):
        design = LqrDesign.design(build_cw(), 1e-6 * np.eye(6), np.eye(3))
        np.testing.assert_allclose(design.S, design.S.T)
        self.assertGreaterEqual(np.linalg.eigvalsh(design.S).min(), -1e-12)

    def test_uniform_cost_scaling(self):
        model = build_workbench()
        base = LqrDesign.design(model, np.eye(2), np.eye(1))
        for alpha in (0.1, 7.0):
            scaled = LqrDesign.design(model, alpha * np.eye(2), alpha * np.eye(1))
            np.testing.assert_allclose(scaled.S, alpha * base.S, rtol=1e-8)
            np.testing.assert_allclose(scaled.K_c, base.K_c, rtol=1e-8)

    def test_uncontrollable_printed_workbench_fails(self):
        model = build_workbench(as_printed=True)
        with self.assertRaises(SolverError):
            solve_care(model.A, model.B, np.eye(2), np.eye(1))

    def test_singular_input_weight_fails(self):
        model = build_workbench()
        with self.assertRaises(SolverError):
            solve_care(model.A, model.B, np.eye(2), np.zeros((1, 1)))


class GainAndLawTests(SimpleTestCase):
    def test_gain_from_known_solution(self):
        K = lqr_gain([[SQRT3, 1.0], [1.0, SQRT3]], [[0.0], [1.0]], [[1.0]])
        np.testing.assert_allclose(K, [[1.0, SQRT3]])

    def test_zero_cases(self):
        np.testing.assert_array_equal(lqr_gain(np.zeros((2, 2)), [[0.0], [1.0]], [[1.0]]), [[0.0, 0.0]])
        np.testing.assert_array_equal(lqr_gain(np.eye(2), np.zeros((2, 1)), [[1.0]]), [[0.0, 0.0]])

    def test_singular_gain_weight(self):
        with self.assertRaises(SolverError):
            lqr_gain(np.eye(2), [[0.0], [1.0]], [[0.0]])

    def test_control_law(self):
        desired = DesiredState.zeros(2)
        u = control_law([[1.0, 1.7321]], [10.0, 1.0], desired)
        np.testing.assert_allclose(u, [-11.7321])
        target = DesiredState(x_D=[10.0, 1.0], x_D_dot=[0.0, 0.0])
        np.testing.assert_allclose(control_law([[1.0, 1.7321]], [10.0, 1.0], target), [0.0])
        np.testing.assert_allclose(control_law(np.zeros((1, 2)), [3.0, 4.0], desired), [0.0])

    def test_desired_state_shapes_must_match(self):
        with self.assertRaises(DomainError):
            DesiredState(x_D=np.zeros(2), x_D_dot=np.zeros(3))


class LqrCostTests(SimpleTestCase):
    def test_zero_trajectory(self):
        self.assertEqual(lqr_cost(np.zeros((5, 2)), np.zeros((5, 1)), np.eye(2), np.eye(1), 0.1), 0.0)

    def test_unit_sample(self):
        self.assertEqual(lqr_cost([[1.0, 0.0]], [[0.0]], np.eye(2), np.eye(1), 1.0), 1.0)

    def test_hand_arithmetic(self):
        self.assertAlmostEqual(lqr_cost([[1.0, 1.0]], [[2.0]], np.eye(2), np.eye(1), 0.5), 3.0)

    def test_monotone_under_truncation(self):
        rng = np.random.default_rng(2)
        xs, us = rng.normal(size=(20, 2)), rng.normal(size=(20, 1))
        costs = [lqr_cost(xs[:k], us[:k], np.eye(2), np.eye(1), 0.01) for k in range(1, 21)]
        self.assertEqual(costs, sorted(costs))
