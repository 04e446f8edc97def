import numpy as np
from django.test import SimpleTestCase
from pydantic import ValidationError

from core.exceptions import DomainError, SolverError
from dynamics.plant import LtiModel
from dynamics.scenarios import build_cw, build_workbench

from .estimators import (
    FilterState, MsifConfig, Variant, estimator_step, gate_innovation, initial_filter_state,
    innovation_covariance, kf_gain, kf_riccati_step, msif_gain, pseudo_inverse, saturate, unmeasured_state_gain,
)


def scalar_model(A=0.0, B=0.0, C=1.0, Q=0.001, R=0.01, dt=0.01):
    return LtiModel(A=[[A]], B=[[B]], C=[[C]], Q=[[Q]], R=[[R]], dt=dt)


class RiccatiTests(SimpleTestCase):
    def test_scalar_fixed_point(self):
        model = scalar_model()
        P = np.array([[1e-2]])
        for _ in range(20000):
            P = kf_riccati_step(P, model, model.dt)
        self.assertAlmostEqual(P[0, 0], np.sqrt(0.001 * 0.01), delta=1e-6)

    def test_zero_stays_zero(self):
        model = scalar_model(Q=0.0)
        np.testing.assert_array_equal(kf_riccati_step(np.zeros((1, 1)), model, 0.01), [[0.0]])

    def test_stable_dynamics_contract(self):
        model = LtiModel(A=-np.eye(2), B=[[0], [1]], C=[[0.0, 0.0]], Q=np.zeros((2, 2)), R=[[1.0]], dt=0.01)
        P = np.array([[2.0, 0.3], [0.3, 1.0]])
        P_next = kf_riccati_step(P, model, 0.01)
        self.assertLessEqual(np.trace(P_next), np.trace(P))

    def test_singular_r_is_rejected(self):
        model = build_workbench().model_copy(update={'R': np.zeros((1, 1))})
        with self.assertRaises(SolverError):
            kf_riccati_step(np.eye(2), model, 0.01)

    def test_covariance_stays_symmetric_psd(self):
        model = build_cw()
        rng = np.random.default_rng(4)
        M = rng.normal(size=(6, 6))
        P = 1e-3 * M @ M.T
        for _ in range(500):
            P = kf_riccati_step(P, model, model.dt)
            np.testing.assert_array_equal(P, P.T)
            self.assertGreaterEqual(np.linalg.eigvalsh(P).min(), -1e-10)


class GainTests(SimpleTestCase):
    def test_innovation_covariance(self):
        np.testing.assert_allclose(innovation_covariance(np.eye(2), [[1, 0]], [[0.01]]), [[1.01]])
        np.testing.assert_allclose(innovation_covariance(np.zeros((2, 2)), [[1, 0]], [[0.01]]), [[0.01]])
        np.testing.assert_allclose(innovation_covariance(np.eye(2), [[0, 0]], [[0.01]]), [[0.01]])

    def test_kf_gain(self):
        np.testing.assert_allclose(kf_gain(np.eye(2), [[1, 0]], [[0.01]]), [[100.0], [0.0]])
        np.testing.assert_array_equal(kf_gain(np.zeros((2, 2)), [[1, 0]], [[0.01]]), [[0.0], [0.0]])
        P_star = np.sqrt(0.001 * 0.01)
        self.assertAlmostEqual(kf_gain([[P_star]], [[1.0]], [[0.01]])[0, 0], 0.3162, delta=1e-4)

    def test_saturate(self):
        np.testing.assert_array_equal(saturate([0.5, 2.5, 0.0]), [0.5, 1.0, 0.0])
        with self.assertRaises(DomainError):
            saturate([-0.1])

    def test_pseudo_inverse(self):
        np.testing.assert_allclose(pseudo_inverse([[1, 0]]), [[1], [0]])
        np.testing.assert_allclose(pseudo_inverse(np.eye(3)), np.eye(3))
        np.testing.assert_allclose(pseudo_inverse([[2.0]]), [[0.5]])

    def test_penrose_conditions(self):
        rng = np.random.default_rng(8)
        for shape in ((3, 6), (2, 2), (4, 3)):
            C = rng.normal(size=shape)
            X = pseudo_inverse(C)
            np.testing.assert_allclose(C @ X @ C, C, atol=1e-10)
            np.testing.assert_allclose(X @ C @ X, X, atol=1e-10)
            np.testing.assert_allclose((C @ X).T, C @ X, atol=1e-10)
            np.testing.assert_allclose((X @ C).T, X @ C, atol=1e-10)

    def test_msif_gain(self):
        np.testing.assert_allclose(msif_gain([[0.02]], [[1, 0]], 0.005), [[1.0], [0.0]])
        np.testing.assert_allclose(msif_gain([[0.002]], [[1, 0]], 0.005), [[0.4], [0.0]])
        np.testing.assert_array_equal(msif_gain([[0.0]], [[1, 0]], 0.005), [[0.0], [0.0]])

    def test_msif_gain_equals_pseudo_inverse_outside_layer(self):
        C = build_cw().C
        P_zz = np.diag([0.02, 0.5, 0.006])
        np.testing.assert_allclose(msif_gain(P_zz, C, 0.005), pseudo_inverse(C))

    def test_msif_config_requires_positive_delta(self):
        with self.assertRaises(ValidationError):
            MsifConfig(delta=0.0)


class EstimatorStepTests(SimpleTestCase):
    def test_zero_innovation_and_drift(self):
        model = scalar_model()
        fs = FilterState(x_hat=np.array([0.7]), P=np.array([[1.0]]))
        for variant in Variant:
            nxt = estimator_step(fs, model, [0.0], [0.7], variant)
            np.testing.assert_allclose(nxt.x_hat, [0.7])

    def test_open_loop_prediction_with_zero_gain(self):
        model = build_workbench()
        fs = FilterState(x_hat=np.array([1.0, 2.0]), P=np.zeros((2, 2)))
        nxt = estimator_step(fs, model, [0.5], [100.0], Variant.KF)
        expected = fs.x_hat + model.dt * (model.A @ fs.x_hat + model.B @ [0.5])
        np.testing.assert_allclose(nxt.x_hat, expected)

    def test_unit_gain_hand_step(self):
        # P_zz = 1.0 + R > delta saturates the MSIF gain at C^+ = 1
        model = scalar_model(Q=0.0, R=0.01)
        fs = FilterState(x_hat=np.array([0.0]), P=np.array([[1.0]]))
        nxt = estimator_step(fs, model, [0.0], [1.0], Variant.MSIF, MsifConfig(delta=0.005), dt=0.01)
        np.testing.assert_allclose(nxt.x_hat, [0.01])
        self.assertAlmostEqual(nxt.t, 0.01)

    def test_initial_state(self):
        fs = initial_filter_state([10.0, 1.0])
        np.testing.assert_allclose(fs.P, 1e-2 * np.eye(2))
        np.testing.assert_array_equal(fs.x_hat, [10.0, 1.0])

    def test_unknown_variant(self):
        fs = initial_filter_state([0.0, 0.0])
        with self.assertRaises(DomainError):
            estimator_step(fs, build_workbench(), [0.0], [0.0], 'ekf')

    def test_gate_clips_innovation(self):
        model = scalar_model(Q=0.0, R=0.01)
        fs = FilterState(x_hat=np.array([0.0]), P=np.array([[0.0]]))
        cfg = MsifConfig(gate=5.0)
        # sqrt(P_zz) = 0.1, so a 50.0 innovation is clipped to 0.5
        nxt = estimator_step(fs, model, [0.0], [50.0], Variant.MSIF, cfg, dt=0.01)
        np.testing.assert_allclose(nxt.x_hat, [0.005])
        nxt = estimator_step(fs, model, [0.0], [0.3], Variant.MSIF, cfg, dt=0.01)
        np.testing.assert_allclose(nxt.x_hat, [0.003])

    def test_gated_kalman_step_after_outlier(self):
        model = build_workbench()
        fs = FilterState(x_hat=np.zeros(2), P=np.diag([0.0086, 0.0027]))
        gated = estimator_step(fs, model, [0.0], [50.0], Variant.KF, MsifConfig(gate=5.0))
        free = estimator_step(fs, model, [0.0], [50.0], Variant.KF)
        self.assertLess(np.abs(gated.x_hat).max(), 0.01)
        self.assertGreater(free.x_hat[0], 0.4)


class GateTests(SimpleTestCase):
    def test_split(self):
        inside, excess = gate_innovation([3.0, -0.1, -4.0], np.diag([1.0, 1.0, 4.0]), 1.5)
        np.testing.assert_allclose(inside, [1.5, -0.1, -3.0])
        np.testing.assert_allclose(excess, [1.5, 0.0, -1.0])

    def test_no_gate(self):
        inside, excess = gate_innovation([50.0], [[0.01]], None)
        np.testing.assert_array_equal(inside, [50.0])
        np.testing.assert_array_equal(excess, [0.0])

    def test_gate_must_be_positive(self):
        with self.assertRaises(DomainError):
            gate_innovation([1.0], [[1.0]], 0.0)
        with self.assertRaises(ValidationError):
            MsifConfig(gate=-1.0)


class UnmeasuredStateGainTests(SimpleTestCase):
    def test_workbench_velocity_row(self):
        model = build_workbench()
        np.testing.assert_allclose(unmeasured_state_gain([[0.02]], model, 0.005, 0.1), [[0.0], [0.1]])
        np.testing.assert_allclose(unmeasured_state_gain([[0.002]], model, 0.005, 0.1), [[0.0], [0.04]])

    def test_scaled_model_keeps_error_poles(self):
        model = build_workbench().scaled(0.8)
        L = unmeasured_state_gain([[0.02]], model, 0.005, 0.1)
        self.assertAlmostEqual(model.A[0, 1] * L[1, 0], 0.1)

    def test_rendezvous_corrects_each_velocity_from_its_position(self):
        L = unmeasured_state_gain(0.02 * np.eye(3), build_cw(), 0.005, 0.25)
        np.testing.assert_allclose(L[:3], np.zeros((3, 3)), atol=1e-12)
        np.testing.assert_allclose(L[3:], 0.25 * np.eye(3))

    def test_error_dynamics_stable(self):
        model = build_workbench()
        P_zz = [[0.02]]
        G = msif_gain(P_zz, model.C, 0.005) + unmeasured_state_gain(P_zz, model, 0.005, 0.1)
        poles = np.linalg.eigvals(model.A - G @ model.C)
        self.assertTrue(np.all(poles.real < 0))

    def test_zero_rate_and_full_measurement(self):
        model = build_workbench()
        np.testing.assert_array_equal(unmeasured_state_gain([[0.02]], model, 0.005, 0.0), np.zeros((2, 1)))
        full = LtiModel(A=[[0.0, 1.0], [0.0, 0.0]], B=[[0.0], [1.0]], C=np.eye(2), Q=np.eye(2), R=np.eye(2), dt=0.01)
        np.testing.assert_allclose(unmeasured_state_gain(np.eye(2), full, 0.005, 0.1), np.zeros((2, 2)), atol=1e-12)

    def test_negative_rate_rejected(self):
        with self.assertRaises(DomainError):
            unmeasured_state_gain([[0.02]], build_workbench(), 0.005, -0.1)
