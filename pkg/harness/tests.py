import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd
from django.test import SimpleTestCase, override_settings, tag
from pydantic import ValidationError

from core.exceptions import DomainError, InstabilityError
from core.seeding import run_streams
from dynamics.plant import PlantState, step_plant
from dynamics.scenarios import build_cw, build_workbench
from spiking.network import SpikeRecord, raster_pairs

from . import runner
from .exporters import ACTIVITY, ERRORS, RASTER, SUMMARY, TRAJECTORIES, emit_plot_data, load_run, load_summary, write_run
from .metrics import (
    active_fraction_timeseries, avg_error_after, estimation_error, max_normalized_error, outlier_recovery_steps,
    reentry_steps, spike_fraction, three_sigma_bounds,
)
from .runner import RunResult, run_experiment
from .schemas import (
    OUTLIER_PRESETS, UNCERTAIN_MODEL_SCALE, ExperimentConfig, Framework, SilenceEvent, UncertaintySpec,
)
from .sweeps import compare_frameworks, dispatch_cells, sweep_firing_params, sweep_neurons

BASELINES = (Framework.LQG, Framework.LQR_MSIF)


def workbench(**overrides):
    return ExperimentConfig.for_scenario('workbench', **overrides)


def short_workbench(**overrides):
    params = dict(duration=2.0, error_tail_start=1.0)
    params.update(overrides)
    return workbench(**params)


def series(values, dt=1.0):
    values = np.asarray(values, dtype=float).reshape(len(values), -1)
    return RunResult(t=np.arange(len(values)) * dt, x=values, x_hat=np.zeros_like(values))


class MetricTests(SimpleTestCase):
    def test_avg_error_constant(self):
        result = series(np.column_stack([np.full(11, 0.1), np.zeros(11)]))
        np.testing.assert_allclose(avg_error_after(result, 5.0), [0.1, 0.0])

    def test_avg_error_zero(self):
        np.testing.assert_array_equal(avg_error_after(series(np.zeros(11)), 3.0), [0.0])

    def test_avg_error_ramp(self):
        values = np.concatenate([np.full(10, 7.0), np.linspace(0.0, 1.0, 11)])
        self.assertAlmostEqual(avg_error_after(series(values), 10.0)[0], 0.5)

    def test_avg_error_tail_must_precede_end(self):
        with self.assertRaises(DomainError):
            avg_error_after(series(np.zeros(5)), 4.0)

    def test_spike_fraction(self):
        raster = [SpikeRecord(1, (0, 1)), SpikeRecord(7, (3, 3, 9))]
        self.assertAlmostEqual(spike_fraction(raster, 10, 100), 0.5)
        self.assertEqual(spike_fraction([], 10, 100), 0.0)
        full = [SpikeRecord(k, tuple(range(10))) for k in range(101)]
        self.assertAlmostEqual(spike_fraction(full, 10, 100), 100.0)

    def test_spike_fraction_skips_initial_encoding(self):
        raster = [SpikeRecord(0, tuple(range(10)) * 4), SpikeRecord(5, (2,))]
        self.assertAlmostEqual(spike_fraction(raster, 10, 100), 0.1)
        self.assertEqual(spike_fraction(raster[:1], 10, 100), 0.0)

    def test_active_fraction(self):
        np.testing.assert_array_equal(active_fraction_timeseries([], 100, 10, steps=20), np.zeros(21))
        active = active_fraction_timeseries([SpikeRecord(4, (7,))], 100, 1, steps=10)
        self.assertEqual(np.count_nonzero(active), 1)
        self.assertEqual(active[4], 1.0)

    def test_active_fraction_window(self):
        raster = [SpikeRecord(2, (0,)), SpikeRecord(3, (1, 1))]
        active = active_fraction_timeseries(raster, 4, 3, steps=6)
        np.testing.assert_allclose(active, [0, 0, 25, 50, 50, 25, 0])

    def test_three_sigma_bounds(self):
        np.testing.assert_allclose(three_sigma_bounds(np.stack([np.eye(2)] * 3)), np.full((3, 2), 3.0))
        np.testing.assert_array_equal(three_sigma_bounds(np.zeros((3, 2, 2))), np.zeros((3, 2)))
        np.testing.assert_allclose(three_sigma_bounds([[0.04, 0.04]]), [[0.6, 0.6]])

    def test_reentry_steps(self):
        error = np.array([[0.0], [5.0], [4.0], [0.5], [0.1]])
        bounds = np.ones((5, 1))
        self.assertEqual(reentry_steps(error, bounds, 1), 2)
        self.assertEqual(reentry_steps(error, bounds, 0), 0)
        self.assertIsNone(reentry_steps(np.full((3, 1), 9.0), np.ones((3, 1)), 0))

    def test_outlier_recovery_steps(self):
        error = np.array([[0.1, 2.0], [0.2, 2.0], [8.0, 2.5], [3.0, 2.2], [0.5, 1.9]])
        bounds = np.ones((5, 2))
        self.assertEqual(outlier_recovery_steps(error, bounds, 1), 3)
        self.assertEqual(outlier_recovery_steps(error, bounds, 1, lookback=1), 3)
        self.assertIsNone(outlier_recovery_steps(error[:4], bounds[:4], 1))

    def test_recovery_envelope_keeps_pre_injection_level(self):
        error = np.array([[0.5, 3.0], [0.5, 3.0], [6.0, 3.1], [0.4, 2.9]])
        self.assertEqual(outlier_recovery_steps(error, np.ones((4, 2)), 1), 2)

    def test_recovery_arguments_checked(self):
        with self.assertRaises(DomainError):
            outlier_recovery_steps(np.zeros((3, 1)), np.ones((3, 1)), 3)
        with self.assertRaises(DomainError):
            outlier_recovery_steps(np.zeros((3, 1)), np.ones((3, 1)), 1, lookback=0)

    def test_max_normalized_error(self):
        result = RunResult(t=np.arange(3.0), x=np.array([[0.3], [0.6], [0.0]]), x_hat=np.zeros((3, 1)),
                           P_diag=np.full((3, 1), 0.01))
        np.testing.assert_allclose(estimation_error(result), result.x)
        self.assertAlmostEqual(max_normalized_error(result), 2.0)


class ConfigTests(SimpleTestCase):
    def test_workbench_defaults(self):
        cfg = workbench()
        self.assertEqual((cfg.duration, cfg.dt, cfg.N, cfg.steps), (10.0, 0.01, 250, 1000))
        self.assertEqual((cfg.lam, cfg.mu, cfg.nu, cfg.delta), (0.01, 0.005, 0.005, 0.005))
        self.assertEqual(cfg.x0, [10.0, 1.0])
        self.assertEqual(cfg.error_tail_start, 6.0)
        self.assertEqual(cfg.P0_scale, 1e-2)
        self.assertEqual((cfg.unmeasured_gain, cfg.innovation_gate), (0.1, 5.0))

    def test_cw_defaults(self):
        cfg = ExperimentConfig.for_scenario('cw')
        self.assertEqual((cfg.duration, cfg.dt, cfg.N, cfg.steps), (360.0, 0.1, 350, 3600))
        self.assertEqual((cfg.lam, cfg.mu, cfg.nu), (0.001, 1.0, 1e-4))
        self.assertEqual(cfg.x0, [70.0, 30.0, -5.0, -1.7, -0.9, 0.25])
        self.assertAlmostEqual(cfg.variance_D, 1 / 50)
        self.assertAlmostEqual(cfg.variance_D_bar, 1 / 2500)
        self.assertEqual(cfg.error_tail_start, 300.0)

    def test_presets(self):
        self.assertEqual(OUTLIER_PRESETS['workbench'], ([3.0, 5.0, 6.0], 500.0))
        self.assertEqual(OUTLIER_PRESETS['cw'], ([100.0, 150.0, 200.0], 200.0))
        self.assertEqual(UNCERTAIN_MODEL_SCALE['workbench'], 0.8)

    def test_duration_must_be_whole_steps(self):
        with self.assertRaises(ValidationError):
            workbench(duration=1.005, error_tail_start=0.5)

    def test_outlier_time_inside_run(self):
        with self.assertRaises(ValidationError):
            short_workbench(uncertainty=UncertaintySpec(outlier_times=[3.0], outlier_scale=500.0))

    def test_unknown_keys_rejected(self):
        with self.assertRaises(ValidationError):
            workbench(gain=3.0)

    def test_gate_and_correction_rate_validated(self):
        with self.assertRaises(ValidationError):
            workbench(innovation_gate=0.0)
        with self.assertRaises(ValidationError):
            workbench(unmeasured_gain=-0.1)
        self.assertIsNone(workbench(innovation_gate=None).innovation_gate)

    def test_uncertainty_invariants(self):
        with self.assertRaises(ValidationError):
            UncertaintySpec(model_scale=0.0)
        with self.assertRaises(ValidationError):
            UncertaintySpec(outlier_scale=0.5)

    def test_silence_event_selector(self):
        with self.assertRaises(ValidationError):
            SilenceEvent(time=1.0)
        with self.assertRaises(ValidationError):
            SilenceEvent(time=1.0, neurons=[1], fraction=0.5)
        self.assertEqual(SilenceEvent(time=1.0, fraction=0.5).fraction, 0.5)

    def test_spiking_flag(self):
        self.assertTrue(Framework.SNN_LQR_MSIF.is_spiking)
        self.assertTrue(Framework.SNN_MSIF_LQR.is_spiking)
        self.assertFalse(Framework.LQG.is_spiking)


class RunnerTests(SimpleTestCase):
    def test_series_share_time_base(self):
        result = run_experiment(short_workbench(framework=Framework.LQG), seed=1)
        self.assertEqual(result.t.shape, (201,))
        for values in (result.x, result.x_hat, result.u, result.z, result.P_diag):
            self.assertEqual(len(values), 201)
        self.assertEqual(result.tail_error.shape, (2,))
        self.assertIsNone(result.spike_fraction)

    def test_seed_determinism(self):
        for framework in (Framework.LQR_MSIF, Framework.SNN_LQR_MSIF):
            cfg = short_workbench(framework=framework, eta_std=0.01)
            a, b = run_experiment(cfg, seed=4), run_experiment(cfg, seed=4)
            np.testing.assert_array_equal(a.x, b.x)
            np.testing.assert_array_equal(a.x_hat, b.x_hat)
            np.testing.assert_array_equal(raster_pairs(a.raster), raster_pairs(b.raster))

    def test_frameworks_share_measurement_noise(self):
        runs = [run_experiment(short_workbench(framework=f), seed=9) for f in Framework]
        noise = [r.z - r.x[:, :1] for r in runs]
        for other in noise[1:]:
            np.testing.assert_allclose(other, noise[0], atol=1e-9)

    def test_model_uncertainty_leaves_truth_untouched(self):
        cfg = short_workbench(framework=Framework.LQG, uncertainty=UncertaintySpec(model_scale=0.8))
        result = run_experiment(cfg, seed=2)
        streams = run_streams(2)
        truth = build_workbench()
        plant = PlantState(x=np.array(cfg.x0))
        for k in range(cfg.steps):
            plant = step_plant(truth, plant, result.u[k], streams.plant)
            np.testing.assert_array_equal(plant.x, result.x[k + 1])

    def test_spiking_run_metrics(self):
        result = run_experiment(short_workbench(framework=Framework.SNN_LQR_MSIF), seed=0)
        self.assertEqual(result.raster[0].step, 0)
        self.assertGreater(result.spike_fraction, 0.0)
        self.assertEqual(result.active_fraction.shape, (201,))
        self.assertGreaterEqual(result.J_spike, 0.0)

    def test_estimator_network_run(self):
        result = run_experiment(short_workbench(framework=Framework.SNN_MSIF_LQR), seed=0)
        self.assertTrue(np.all(np.isfinite(result.x)))

    def test_silence_schedule(self):
        events = [SilenceEvent(time=0.5, neurons=list(range(100))), SilenceEvent(time=1.0, fraction=0.2)]
        cfg = short_workbench(uncertainty=UncertaintySpec(silence_schedule=events))
        result = run_experiment(cfg, seed=3)
        pairs = raster_pairs(result.raster)
        late = pairs[pairs[:, 0] > 50]
        self.assertFalse(np.any(late[:, 1] < 100))

    def test_outlier_scaling_applied_at_instant(self):
        cfg = short_workbench(framework=Framework.LQG,
                              uncertainty=UncertaintySpec(outlier_times=[1.0], outlier_scale=500.0))
        plain = run_experiment(short_workbench(framework=Framework.LQG), seed=5)
        spiked = run_experiment(cfg, seed=5)
        np.testing.assert_array_equal(plain.z[:100], spiked.z[:100])
        noise_plain = plain.z[100, 0] - plain.x[100, 0]
        noise_spiked = spiked.z[100, 0] - spiked.x[100, 0]
        self.assertAlmostEqual(noise_spiked, 500.0 * noise_plain, delta=1e-6 * abs(noise_spiked) + 1e-9)

    def test_gated_baseline_ignores_outlier(self):
        outlier = UncertaintySpec(outlier_times=[1.0], outlier_scale=500.0)
        plain = run_experiment(short_workbench(framework=Framework.LQG), seed=5)
        gated = run_experiment(short_workbench(framework=Framework.LQG, uncertainty=outlier), seed=5)
        self.assertLess(np.abs(gated.x_hat[101] - plain.x_hat[101]).max(), 0.02)

    def test_instability_propagates(self):
        with mock.patch('harness.runner.network_step', side_effect=InstabilityError('overrun', step=3)):
            with self.assertRaises(InstabilityError) as ctx:
                run_experiment(short_workbench(), seed=0)
        self.assertEqual(ctx.exception.step, 3)

    def test_cw_dimension_mismatch(self):
        cfg = ExperimentConfig.for_scenario('cw', x0=[1.0, 2.0], x_hat0=[1.0, 2.0], duration=10.0,
                                            error_tail_start=5.0)
        with self.assertRaises(ValueError):
            run_experiment(cfg)


class SweepTests(SimpleTestCase):
    @override_settings(SPIKEREG_PROGRESS=False)
    def test_single_framework_matches_run(self):
        cfg = short_workbench(framework=Framework.LQG)
        table = compare_frameworks(cfg, [Framework.LQG], seeds=[3])
        self.assertEqual(table.mean.shape, (1, 2))
        np.testing.assert_array_equal(table.mean[0], run_experiment(cfg, seed=3).tail_error)
        self.assertIn('LQG', table.format())

    @override_settings(SPIKEREG_PROGRESS=False)
    def test_duplicate_frameworks_dropped(self):
        cfg = short_workbench()
        table = compare_frameworks(cfg, ['lqg', 'lqg', 'lqr-msif'], seeds=[0])
        self.assertEqual(table.frameworks, ['lqg', 'lqr-msif'])
        self.assertEqual(len(table.to_frame()), 4)

    @override_settings(SPIKEREG_PROGRESS=False)
    def test_cells_return_in_order(self):
        cfg = short_workbench(framework=Framework.LQG)
        payloads = dispatch_cells([(cfg, 2), (cfg, 1), (cfg, 2)])
        self.assertEqual([p['seed'] for p in payloads], [2, 1, 2])
        self.assertEqual(payloads[0], payloads[2])

    @override_settings(SPIKEREG_PROGRESS=False)
    def test_single_cell_grid_normalizes_to_one(self):
        frame = sweep_firing_params(short_workbench(), [0.005], [0.005], seeds=[0])
        self.assertEqual(len(frame), 1)
        self.assertEqual(frame['normalized_error'].iloc[0], 1.0)
        self.assertTrue(frame['preferred'].iloc[0])

    @override_settings(SPIKEREG_PROGRESS=False)
    def test_unstable_neuron_count_flagged(self):
        real = runner.run_experiment

        def overrun_small_networks(cfg, seed=None):
            if cfg.N == 50:
                raise InstabilityError('firing loop exceeded', step=12)
            return real(cfg, seed)

        with mock.patch('harness.tasks.run_experiment', side_effect=overrun_small_networks):
            frame = sweep_neurons(short_workbench(), [50, 100], seeds=[0])
        self.assertEqual(list(frame['N']), [50, 100])
        self.assertTrue(frame['diverged'].iloc[0])
        self.assertEqual(frame['unstable_seeds'].iloc[0], 1)
        self.assertFalse(frame['diverged'].iloc[1])

    def test_breakdown_against_sweep_median(self):
        payloads = [{'tail_error': error, 'unstable': False, 'spike_fraction': 1.0, 'seed': 0}
                    for error in ([3.0, 0.0], [0.1, 0.0], [0.12, 0.0])]
        with mock.patch('harness.sweeps.dispatch_cells', return_value=payloads):
            frame = sweep_neurons(short_workbench(), [50, 100, 150], seeds=[0])
        self.assertEqual(list(frame['diverged']), [True, False, False])
        with mock.patch('harness.sweeps.dispatch_cells', return_value=payloads[:2]):
            frame = sweep_neurons(short_workbench(), [50, 100], seeds=[0])
        self.assertFalse(frame['diverged'].any())

    @override_settings(SPIKEREG_PROGRESS=False)
    def test_duplicated_seeds_identical_rows(self):
        frame = sweep_neurons(short_workbench(), [250, 250], seeds=[6])
        a, b = frame.iloc[0], frame.iloc[1]
        self.assertEqual(a['error'], b['error'])

    def test_empty_sweeps_rejected(self):
        with self.assertRaises(DomainError):
            sweep_neurons(short_workbench(), [])
        with self.assertRaises(DomainError):
            sweep_firing_params(short_workbench(), [], [0.005])


class ExporterTests(SimpleTestCase):
    def test_files_round_trip(self):
        result = run_experiment(short_workbench(framework=Framework.SNN_LQR_MSIF), seed=8)
        with tempfile.TemporaryDirectory() as tmp:
            summary = write_run(result, tmp)
            for name in (TRAJECTORIES, RASTER, SUMMARY):
                self.assertTrue((Path(tmp) / name).exists())
            reloaded = load_run(tmp)
            self.assertEqual(list(reloaded.tail_error), load_summary(tmp).tail_error)
            self.assertEqual(summary.tail_error, list(result.tail_error))
            np.testing.assert_array_equal(reloaded.x, result.x)
            np.testing.assert_array_equal(raster_pairs(reloaded.raster), raster_pairs(result.raster))
            self.assertEqual(load_summary(tmp).config.model_dump(), result.config.model_dump())

    def test_plot_data(self):
        result = run_experiment(short_workbench(framework=Framework.SNN_LQR_MSIF), seed=1)
        with tempfile.TemporaryDirectory() as tmp:
            write_run(result, tmp)
            emit_plot_data(tmp)
            errors = pd.read_csv(Path(tmp) / ERRORS)
            self.assertEqual(list(errors.columns), ['t', 'e1', 'e2', 'bound1', 'bound2'])
            activity = pd.read_csv(Path(tmp) / ACTIVITY)
            np.testing.assert_allclose(activity['active_percent'], result.active_fraction)

    def test_baseline_run_has_no_raster(self):
        result = run_experiment(short_workbench(framework=Framework.LQG), seed=1)
        with tempfile.TemporaryDirectory() as tmp:
            summary = write_run(result, tmp)
            self.assertFalse((Path(tmp) / RASTER).exists())
            self.assertIsNone(summary.spike_fraction)
            self.assertEqual(len(summary.corrections), 2)


@tag('slow')
class WorkbenchPropertyTests(SimpleTestCase):
    def test_baselines_converge(self):
        for framework in BASELINES:
            converged = 0
            for seed in range(50):
                result = run_experiment(workbench(framework=framework), seed)
                norms = np.linalg.norm(result.x[result.t >= 6.0 - 1e-9], axis=1)
                converged += bool(np.all(norms < 0.05 * np.linalg.norm(result.x[0])))
            self.assertGreaterEqual(converged, 48, framework)

    def test_spiking_framework_converges(self):
        converged = 0
        for seed in range(50):
            result = run_experiment(workbench(framework=Framework.SNN_LQR_MSIF), seed)
            norms = np.linalg.norm(result.x[result.t >= 6.0 - 1e-9], axis=1)
            converged += bool(np.all(norms < 0.05 * np.linalg.norm(result.x[0])))
        self.assertGreaterEqual(converged, 48)

    def test_estimates_stay_in_three_sigma_envelope(self):
        # MSIF never corrects the unmeasured velocity, so only the measured state is checked for it
        checked_states = {Framework.LQG: [0, 1], Framework.LQR_MSIF: [0]}
        for framework, states in checked_states.items():
            fractions = []
            for seed in range(50):
                result = run_experiment(workbench(framework=framework), seed)
                tail = result.t >= 3.0 - 1e-9
                error = np.abs(estimation_error(result))[tail][:, states]
                bounds = three_sigma_bounds(result.P_diag)[tail][:, states]
                fractions.append(np.mean(np.all(error <= bounds, axis=1)))
            self.assertGreaterEqual(np.mean(fractions), 0.95, framework)

    def test_spiking_tracks_non_spiking_estimator(self):
        params = dict(noise_on=False, eta_std=0.0)
        reference = run_experiment(workbench(framework=Framework.LQR_MSIF, **params), seed=0)
        spiking = run_experiment(workbench(framework=Framework.SNN_LQR_MSIF, **params), seed=0)
        scale = np.linalg.norm(reference.x[0])
        state_gap = np.mean(np.linalg.norm(spiking.x_hat - reference.x_hat, axis=1)) / scale
        control_gap = np.mean(np.abs(spiking.u - reference.u)) / np.abs(reference.u[0]).max()
        self.assertLessEqual(state_gap, 0.05)
        self.assertLessEqual(control_gap, 0.05)

    def test_half_silenced_network_still_regulates(self):
        events = [SilenceEvent(time=5.0, fraction=0.5)]
        for seed in range(3):
            result = run_experiment(workbench(uncertainty=UncertaintySpec(silence_schedule=events)), seed)
            self.assertLess(np.linalg.norm(result.x[-1]), 1.0)

    def test_model_uncertainty_hurts_kalman_most(self):
        uncertainty = UncertaintySpec(model_scale=UNCERTAIN_MODEL_SCALE['workbench'])
        wins = 0
        seeds = range(50)
        for seed in seeds:
            scores = {}
            for framework in (Framework.LQG, Framework.LQR_MSIF, Framework.SNN_LQR_MSIF):
                result = run_experiment(workbench(framework=framework, uncertainty=uncertainty), seed)
                self.assertLess(np.linalg.norm(result.x[-1]), 1.0)
                scores[framework] = max_normalized_error(result)
            wins += scores[Framework.LQG] > max(scores[Framework.LQR_MSIF], scores[Framework.SNN_LQR_MSIF])
        self.assertGreaterEqual(wins, 0.8 * len(seeds))

    def test_outlier_recovery_and_network_response(self):
        times, scale = OUTLIER_PRESETS['workbench']
        uncertainty = UncertaintySpec(outlier_times=times, outlier_scale=scale)
        injections = [int(round(t / 0.01)) for t in times]
        for framework in list(BASELINES) + [Framework.SNN_LQR_MSIF]:
            for seed in range(10):
                result = run_experiment(workbench(framework=framework, uncertainty=uncertainty), seed)
                error = estimation_error(result)
                bounds = three_sigma_bounds(result.P_diag)
                for step in injections:
                    steps = outlier_recovery_steps(error, bounds, step)
                    self.assertIsNotNone(steps, (framework, seed, step))
                    self.assertLessEqual(steps, 100, (framework, seed, step))

        # injections at least one outlier standard deviation away from the truth
        outlier_std = scale * np.sqrt(build_workbench().R[0, 0])
        checked = 0
        for seed in range(10):
            result = run_experiment(workbench(uncertainty=uncertainty), seed)
            self.assertTrue(np.all(np.isfinite(result.x)))
            deviation = np.abs(result.z[:, 0] - result.x[:, 0])
            for step in injections:
                if deviation[step] >= outlier_std:
                    checked += 1
                    self.assertGreaterEqual(result.active_fraction[step + 1:step + 4].max(), 30.0, (seed, step))
        self.assertGreater(checked, 0)

    @override_settings(SPIKEREG_PROGRESS=False)
    def test_higher_rate_penalty_means_fewer_spikes(self):
        frame = sweep_firing_params(workbench(duration=4.0, error_tail_start=3.0), [0.005], [50.0, 5.0, 0.5],
                                    seeds=[0, 1])
        spikes = list(frame['spike_percent'])
        self.assertEqual(spikes, sorted(spikes))

    @override_settings(SPIKEREG_PROGRESS=False)
    def test_neuron_sweep_shape(self):
        frame = sweep_neurons(workbench(), range(50, 401, 50), seeds=range(10)).set_index('N')
        self.assertEqual(list(frame.index), list(range(50, 401, 50)))
        self.assertTrue(frame.loc[50, 'diverged'])
        best = frame.loc[~frame['diverged'], 'error'].min()
        self.assertLessEqual(frame.loc[[200, 250, 300], 'error'].min(), 1.25 * best)


@tag('slow')
class RendezvousPropertyTests(SimpleTestCase):
    published = {'x': 0.0223, 'y': 0.0057, 'z': 0.0048}

    @override_settings(SPIKEREG_PROGRESS=False)
    def test_baseline_tail_errors(self):
        table = compare_frameworks(ExperimentConfig.for_scenario('cw'), BASELINES, seeds=range(10))
        for row in range(2):
            x, y, z = table.mean[row, :3]
            self.assertTrue(self.published['x'] / 3 <= x <= 3 * self.published['x'], x)
            self.assertTrue(self.published['y'] / 3 <= y <= 3 * self.published['y'], y)
            self.assertLess(z, 3 * self.published['z'])
        np.testing.assert_allclose(table.mean[0, :3], table.mean[1, :3], rtol=0.2)

    def test_spiking_run(self):
        result = run_experiment(ExperimentConfig.for_scenario('cw', framework=Framework.SNN_LQR_MSIF), seed=0)
        self.assertTrue(np.all(np.isfinite(result.tail_error)))
        self.assertTrue(np.all(result.tail_error[:3] < 1.0), result.tail_error[:3])
        self.assertLessEqual(result.spike_fraction, 5.0)
        early = result.active_fraction[:300].mean()
        late = result.active_fraction[-300:].mean()
        self.assertGreater(early, late)

    @override_settings(SPIKEREG_PROGRESS=False)
    def test_uncertain_model_comparison_converges(self):
        cfg = ExperimentConfig.for_scenario(
            'cw', uncertainty=UncertaintySpec(model_scale=UNCERTAIN_MODEL_SCALE['cw']))
        table = compare_frameworks(cfg, list(BASELINES) + [Framework.SNN_LQR_MSIF], seeds=[0])
        self.assertTrue(np.all(np.isfinite(table.mean)))
        self.assertEqual(table.unstable, [0, 0, 0])

    def test_standard_coupling_variant_runs(self):
        cfg = ExperimentConfig.for_scenario('cw', framework=Framework.LQG, cw_variant='standard')
        result = run_experiment(cfg, seed=0)
        self.assertTrue(np.all(np.isfinite(result.x)))
        np.testing.assert_allclose(build_cw(variant='standard').A[5, 2], 3 * build_cw().A[5, 5] / 2)
