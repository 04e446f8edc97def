import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ConfigurationError, DomainError, InstabilityError
from dynamics.plant import LtiModel
from dynamics.scenarios import build_workbench
from regulator.lqr import DesiredState

from .decoders import DecoderPair, sample_decoder
from .network import (
    SpikeRecord, SpikingNetwork, coding_objective, decode_control, decode_state, encode_initial_state, fire,
    network_step, raster_pairs, silence_neurons, spike_cost, synthesize_static_weights, thresholds,
    update_adaptive_weights,
)

K_WORKBENCH = np.array([[1.0, np.sqrt(3.0)]])


def workbench_network(N=250, seed=0, concurrent=True, **kwargs):
    decoders = DecoderPair.sample(2, N, 0.25, 1 / 300, seed)
    params = dict(lam=0.01, mu=0.005, nu=0.005)
    params.update(kwargs)
    return SpikingNetwork.synthesize(build_workbench(), K_WORKBENCH, decoders, concurrent=concurrent, **params)


def pure_coding_network(D, nu, mu, lam):
    """Autoencoder regime: no control, no desired-state decoder, no adaptive weights"""
    N = D.shape[1]
    model = LtiModel(A=np.zeros((D.shape[0],) * 2), B=np.zeros((D.shape[0], 1)), C=np.eye(D.shape[0]),
                     Q=np.zeros((D.shape[0],) * 2), R=np.eye(D.shape[0]), dt=0.01)
    decoders = DecoderPair(D=D, D_bar=np.zeros_like(D), variance_D=1.0, variance_D_bar=1.0)
    net = SpikingNetwork.synthesize(model, np.zeros((1, D.shape[0])), decoders, lam=lam, mu=mu, nu=nu)
    net.Omega_bar_f = np.zeros((N, N))
    return net


class DecoderTests(SimpleTestCase):
    def test_same_seed_same_matrix(self):
        np.testing.assert_array_equal(sample_decoder(2, 250, 0.25, 7), sample_decoder(2, 250, 0.25, 7))

    def test_sample_variance(self):
        D = sample_decoder(2, 250, 0.25, 1)
        self.assertTrue(0.2 <= D.var() <= 0.3)

    def test_rendezvous_shape(self):
        self.assertEqual(sample_decoder(6, 350, 1 / 50, 3).shape, (6, 350))

    def test_no_degenerate_columns(self):
        D = sample_decoder(1, 5000, 0.25, 4)
        self.assertTrue(np.all(np.linalg.norm(D, axis=0) >= 1e-12))

    def test_invalid_arguments(self):
        with self.assertRaises(DomainError):
            sample_decoder(2, 10, 0.0, 1)
        with self.assertRaises(DomainError):
            sample_decoder(2, 0, 0.25, 1)

    def test_pair_shares_one_stream(self):
        a = DecoderPair.sample(2, 50, 0.25, 1 / 300, 9)
        b = DecoderPair.sample(2, 50, 0.25, 1 / 300, 9)
        np.testing.assert_array_equal(a.D_bar, b.D_bar)
        self.assertEqual(a.N, 50)


class ThresholdTests(SimpleTestCase):
    def test_hand_value(self):
        D = np.array([[0.5], [0.5]])
        self.assertAlmostEqual(thresholds(D, 0.005, 0.005, 0.01)[0], 0.25002525, places=8)

    def test_penalty_free(self):
        D = np.array([[1.0, 2.0], [0.0, 1.0]])
        np.testing.assert_allclose(thresholds(D, 0.0, 0.0, 0.01), [0.5, 2.5])

    def test_equal_columns_equal_thresholds(self):
        D = np.tile([[0.3], [-0.2]], (1, 5))
        T = thresholds(D, 0.005, 0.005, 0.01)
        self.assertTrue(np.all(T == T[0]))

    def test_domain(self):
        with self.assertRaises(DomainError):
            thresholds(np.ones((2, 2)), -1.0, 0.0, 0.01)
        with self.assertRaises(DomainError):
            thresholds(np.ones((2, 2)), 0.0, 0.0, 0.0)


class WeightSynthesisTests(SimpleTestCase):
    def setUp(self):
        self.model = LtiModel(A=[[0.0]], B=[[1.0]], C=[[1.0]], Q=[[0.0]], R=[[1.0]], dt=0.01)
        self.D = np.array([[1.0, -1.0]])

    def test_input_weights(self):
        w = synthesize_static_weights(self.model, [[0.0]], self.D, np.zeros((1, 2)), 0.01, 0.0)
        np.testing.assert_allclose(w.F, [[1.0], [-1.0]])

    def test_fast_weights(self):
        w = synthesize_static_weights(self.model, [[0.0]], self.D, np.zeros((1, 2)), 0.01, 0.0)
        np.testing.assert_allclose(w.Omega_f, -np.array([[1.0, -1.0], [-1.0, 1.0]]))

    def test_slow_weights(self):
        w = synthesize_static_weights(self.model, [[0.0]], self.D, np.zeros((1, 2)), 0.01, 0.005)
        np.testing.assert_allclose(w.Omega_s, 0.01 * np.array([[1.0, -1.0], [-1.0, 1.0]]))

    def test_control_weights(self):
        D_bar = np.array([[0.1, 0.2]])
        w = synthesize_static_weights(self.model, [[2.0]], self.D, D_bar, 0.01, 0.0)
        np.testing.assert_allclose(w.Omega_c, -2.0 * self.D.T @ self.D)
        np.testing.assert_allclose(w.Omega_bar, 2.0 * self.D.T @ D_bar)
        np.testing.assert_allclose(w.Omega_bar_f, -D_bar.T @ D_bar)


class AdaptiveWeightTests(SimpleTestCase):
    def test_saturated_gain_reads_first_row(self):
        D = np.array([[0.3, -0.4, 0.5], [0.1, 0.2, -0.6]])
        Omega_k, F_k = update_adaptive_weights([[1.0]], [[1.0, 0.0]], D, 0.005)
        np.testing.assert_allclose(F_k, D[0:1].T)

    def test_zero_innovation_covariance(self):
        D = np.ones((2, 4))
        Omega_k, F_k = update_adaptive_weights([[0.0]], [[1.0, 0.0]], D, 0.005)
        np.testing.assert_array_equal(Omega_k, np.zeros((4, 4)))
        np.testing.assert_array_equal(F_k, np.zeros((4, 1)))

    def test_identity(self):
        rng = np.random.default_rng(1)
        D = rng.normal(size=(6, 20))
        C = np.hstack([np.eye(3), np.zeros((3, 3))])
        Omega_k, F_k = update_adaptive_weights(np.diag([0.002, 0.01, 0.004]), C, D, 0.005)
        np.testing.assert_allclose(Omega_k, -F_k @ C @ D)

    def test_unmeasured_rows_added_to_gain(self):
        D = np.array([[0.3, -0.4, 0.5], [0.1, 0.2, -0.6]])
        C = [[1.0, 0.0]]
        Omega_k, F_k = update_adaptive_weights([[1.0]], C, D, 0.005, unmeasured=[[0.0], [0.1]])
        np.testing.assert_allclose(F_k, D.T @ np.array([[1.0], [0.1]]))
        np.testing.assert_allclose(Omega_k, -F_k @ np.array(C) @ D)

    def test_adapt_with_gate(self):
        net = workbench_network(N=20)
        self.assertIsNone(net.gate)
        net.adapt([[0.02]], build_workbench().C, 0.005, gate=5.0)
        self.assertEqual(net.gate, 5.0)
        np.testing.assert_allclose(net.F_post, net.D[0:1].T)
        np.testing.assert_allclose(net.F_k, net.F_post)


class NetworkStepTests(SimpleTestCase):
    def test_subthreshold_leak(self):
        net = workbench_network(N=20)
        net.sigma = 0.5 * net.T
        before = net.sigma.copy()
        _, record = network_step(net, [0.0], DesiredState.zeros(2), 0.01)
        self.assertEqual(record.neurons, ())
        np.testing.assert_allclose(net.sigma, (1 - 0.01 * 0.01) * before)

    def test_single_spike_resets_by_fast_weight_diagonal(self):
        net = workbench_network(N=20)
        net.sigma = np.full(net.N, -10.0)
        net.sigma[3] = net.T[3] + 1e-3
        before = net.sigma[3]
        fired = fire(net)
        self.assertEqual(fired, [3])
        drop = net.D[:, 3] @ net.D[:, 3] + net.D_bar[:, 3] @ net.D_bar[:, 3] + 2 * net.mu * net.lam ** 2
        self.assertAlmostEqual(before - net.sigma[3], drop)

    def test_spike_moves_decoded_estimate_by_decoder_column(self):
        net = workbench_network(N=20)
        net.sigma = np.full(net.N, -10.0)
        net.sigma[5] = net.T[5] + 1e-3
        before = decode_state(net.D, net.r)
        fire(net)
        np.testing.assert_allclose(decode_state(net.D, net.r) - before, net.D[:, 5])

    def test_lowest_index_wins_ties(self):
        D = np.array([[1.0, 1.0, 1.0]])
        net = pure_coding_network(D, 0.0, 0.0, 0.01)
        net.sigma = np.array([1.0, 1.0, 1.0])
        self.assertEqual(fire(net)[0], 0)

    def test_threshold_consistency_and_nonnegative_rates(self):
        net = workbench_network()
        rng = np.random.default_rng(0)
        encode_initial_state(net, [10.0, 1.0], DesiredState.zeros(2))
        for _ in range(200):
            network_step(net, rng.normal(10.0, 0.1, size=1), DesiredState.zeros(2), 0.01, rng)
            live = net.live
            self.assertTrue(np.all(net.sigma[live] <= net.T[live]))
            self.assertTrue(np.all(net.r >= 0))

    def test_rates_decay_geometrically_without_spikes(self):
        net = workbench_network(N=10)
        net.r = np.arange(10, dtype=float)
        net.sigma = np.full(10, -100.0)
        network_step(net, [0.0], DesiredState.zeros(2), 0.01)
        np.testing.assert_allclose(net.r, (1 - 1e-4) * np.arange(10))

    def test_overrun_raises_instability(self):
        # a self-exciting fast weight keeps the neuron above threshold forever
        net = pure_coding_network(np.array([[1.0]]), 0.0, 0.0, 0.01)
        net.Omega_f = np.array([[1.0]])
        net.sigma = np.array([5.0])
        net.step = 17
        with self.assertRaises(InstabilityError) as ctx:
            fire(net)
        self.assertEqual(ctx.exception.step, 17)

    def test_initial_encoding_represents_state(self):
        net = workbench_network()
        record = encode_initial_state(net, [10.0, 1.0], DesiredState.zeros(2))
        self.assertEqual(record.step, 0)
        self.assertGreater(record.count, 0)
        self.assertLess(np.linalg.norm(decode_state(net.D, net.r) - [10.0, 1.0]), 1.0)

    def test_determinism(self):
        records = []
        for _ in range(2):
            net = workbench_network(eta_std=0.05)
            rng = np.random.default_rng(12)
            run = [encode_initial_state(net, [10.0, 1.0], DesiredState.zeros(2))]
            for _ in range(100):
                run.append(network_step(net, [10.0], DesiredState.zeros(2), 0.01, rng)[1])
            records.append(raster_pairs(run))
        np.testing.assert_array_equal(records[0], records[1])


class GreedyOptimalityTests(SimpleTestCase):
    def test_each_spike_lowers_coding_objective(self):
        rng = np.random.default_rng(21)
        nu, mu, lam = 0.005, 0.005, 0.01
        for _ in range(200):
            n_x = int(rng.integers(1, 3))
            N = int(rng.integers(2, 11))
            D = rng.normal(0.0, 0.5, size=(n_x, N))
            x = rng.normal(0.0, 2.0, size=n_x)
            net = pure_coding_network(D, nu, mu, lam)
            r0 = rng.uniform(0.0, 2.0, size=N)
            net.r = r0.copy()
            net.sigma = D.T @ (x - D @ r0) - mu * lam ** 2 * r0
            fired = fire(net)

            # replay the spikes one at a time
            r = r0.copy()
            for i in fired:
                before = coding_objective(D, x, r, nu, mu, lam)
                r[i] += 1.0
                self.assertLess(coding_objective(D, x, r, nu, mu, lam), before)
            np.testing.assert_allclose(r, net.r)
            self.assertTrue(np.all(net.sigma <= net.T))

    def test_no_spike_when_all_below_threshold(self):
        D = np.array([[1.0, -1.0]])
        net = pure_coding_network(D, 0.005, 0.005, 0.01)
        net.sigma = D.T @ np.array([0.2])
        self.assertEqual(fire(net), [])


class InnovationExcessTests(SimpleTestCase):
    P_zz = [[0.0186]]

    def gated_network(self, gate=5.0):
        net = workbench_network()
        encode_initial_state(net, [10.0, 1.0], DesiredState.zeros(2))
        net.adapt(self.P_zz, build_workbench().C, 0.005, gate=gate)
        return net

    def test_fresh_neurons_fire_first(self):
        net = pure_coding_network(np.array([[1.0, 1.0, 1.0]]), 0.0, 0.0, 0.01)
        net.sigma = np.array([3.0, 2.0, 1.0])
        self.assertEqual(fire(net), [0, 1, 0])
        self.assertTrue(np.all(net.sigma <= net.T))

    def test_excess_loaded_in_one_step(self):
        net = self.gated_network()
        _, record = network_step(net, [60.0], DesiredState.zeros(2), 0.01)
        self.assertGreater(decode_state(net.D, net.r)[0], 55.0)
        self.assertGreaterEqual(len(set(record.neurons)), 0.3 * net.N)
        self.assertTrue(np.all(net.sigma <= net.T))

    def test_estimate_returns_after_outlier(self):
        net = self.gated_network()
        network_step(net, [60.0], DesiredState.zeros(2), 0.01)
        network_step(net, [10.0], DesiredState.zeros(2), 0.01)
        self.assertLess(abs(decode_state(net.D, net.r)[0] - 10.0), 1.0)

    def test_without_gate_outlier_enters_through_drift(self):
        net = self.gated_network(gate=None)
        network_step(net, [60.0], DesiredState.zeros(2), 0.01)
        self.assertLess(decode_state(net.D, net.r)[0], 12.0)

    def test_gate_inactive_for_small_innovations(self):
        gated, plain = self.gated_network(), self.gated_network(gate=None)
        z = decode_state(gated.D, gated.r)[:1] + 0.05
        for net in (gated, plain):
            network_step(net, z, DesiredState.zeros(2), 0.01)
        np.testing.assert_array_equal(gated.sigma, plain.sigma)
        np.testing.assert_array_equal(gated.r, plain.r)


class DecodeTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(2)
        self.D = rng.normal(size=(2, 6))
        self.D_bar = rng.normal(size=(2, 6))

    def test_decode_state(self):
        np.testing.assert_array_equal(decode_state(self.D, np.zeros(6)), np.zeros(2))
        np.testing.assert_allclose(decode_state(self.D, np.eye(6)[2]), self.D[:, 2])
        r1, r2 = np.arange(6.0), np.ones(6)
        np.testing.assert_allclose(decode_state(self.D, r1 + r2),
                                   decode_state(self.D, r1) + decode_state(self.D, r2))

    def test_decode_control(self):
        r = np.linspace(0.0, 3.0, 6)
        np.testing.assert_array_equal(decode_control(K_WORKBENCH, self.D, self.D_bar, np.zeros(6)), [0.0])
        np.testing.assert_allclose(decode_control(K_WORKBENCH, self.D, self.D, r), [0.0])
        expected = -K_WORKBENCH @ (decode_state(self.D, r) - decode_state(self.D_bar, r))
        np.testing.assert_allclose(decode_control(K_WORKBENCH, self.D, self.D_bar, r), expected)

    def test_spike_cost(self):
        self.assertEqual(spike_cost([1.0, 2.0], [1.0, 2.0], np.zeros(3), 0.005, 0.005, 0.01), 0.0)
        self.assertEqual(spike_cost([1.0, 0.0], [0.0, 0.0], np.zeros(3), 0.005, 0.005, 1.0), 1.0)
        self.assertAlmostEqual(spike_cost([0.0, 0.0], [0.0, 0.0], [1.0, 0.0], 0.005, 0.005, 1.0), 0.01)

    def test_raster_pairs(self):
        raster = [SpikeRecord(0, (1, 1, 4)), SpikeRecord(1, ()), SpikeRecord(2, (0,))]
        np.testing.assert_array_equal(raster_pairs(raster), [[0, 1], [0, 1], [0, 4], [2, 0]])
        self.assertEqual(raster_pairs([]).shape, (0, 2))


class SilencingTests(SimpleTestCase):
    def test_empty_mask_is_noop(self):
        net = workbench_network(N=20)
        net.sigma = 0.1 * net.T
        before = net.sigma.copy()
        silence_neurons(net, np.zeros(20, dtype=bool))
        np.testing.assert_array_equal(net.sigma, before)

    def test_silenced_neuron_never_fires(self):
        net = workbench_network(N=50)
        mask = np.zeros(50, dtype=bool)
        mask[:25] = True
        silence_neurons(net, mask)
        rng = np.random.default_rng(3)
        raster = [encode_initial_state(net, [10.0, 1.0], DesiredState.zeros(2))]
        for _ in range(100):
            raster.append(network_step(net, rng.normal(10.0, 0.1, size=1), DesiredState.zeros(2), 0.01, rng)[1])
        fired = raster_pairs(raster)[:, 1]
        self.assertFalse(np.any(fired < 25))
        np.testing.assert_array_equal(net.sigma[:25], 0.0)

    def test_silencing_everything_is_rejected(self):
        net = workbench_network(N=5)
        with self.assertRaises(ConfigurationError):
            silence_neurons(net, np.ones(5, dtype=bool))

    def test_mask_length_checked(self):
        net = workbench_network(N=5)
        with self.assertRaises(ConfigurationError):
            silence_neurons(net, np.zeros(4, dtype=bool))


class EstimatorNetworkTests(SimpleTestCase):
    def test_control_coupling_removed(self):
        net = workbench_network(N=30, concurrent=False)
        self.assertFalse(net.concurrent)
        np.testing.assert_array_equal(net.Omega_c, 0.0)
        np.testing.assert_array_equal(net.Omega_bar, 0.0)
        np.testing.assert_array_equal(net.D_bar, 0.0)

    def test_external_control_enters_through_input_weights(self):
        net = workbench_network(N=30, concurrent=False)
        net.sigma = np.full(30, -100.0)
        before = net.sigma.copy()
        network_step(net, [0.0], DesiredState.zeros(2), 0.01, u=[2.0])
        expected = before + 0.01 * (-net.lam * before + net.F @ [2.0])
        np.testing.assert_allclose(net.sigma, expected)
