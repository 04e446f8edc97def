import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings
from pydantic import ValidationError

from core.exceptions import ConfigurationError, InstabilityError
from harness.exporters import ACTIVITY, ERRORS, RASTER, SUMMARY, TRAJECTORIES, load_run, load_summary
from harness.schemas import Framework

from .config import EXIT_CONFIG, EXIT_INSTABILITY, CliConfig, parse_number_list


def cli_config(command='run', **options):
    return CliConfig.from_options(command, options, frameworks=[options.get('framework', 'lqg')])


class ParseNumberListTests(SimpleTestCase):
    def test_inclusive_range(self):
        self.assertEqual(parse_number_list('50:400:50', int), [50, 100, 150, 200, 250, 300, 350, 400])

    def test_comma_list(self):
        self.assertEqual(parse_number_list('0.001,0.005', float), [0.001, 0.005])

    def test_mixed_items(self):
        self.assertEqual(parse_number_list('1, 3:5', int), [1, 3, 4, 5])

    def test_empty(self):
        self.assertEqual(parse_number_list('', int), [])

    def test_bad_range(self):
        with self.assertRaises(ConfigurationError):
            parse_number_list('5:1', int)
        with self.assertRaises(ConfigurationError):
            parse_number_list('1:2:3:4', int)


@override_settings(SPIKEREG_SEED=None, SPIKEREG_DEFAULT_SEEDS=10)
class CliConfigTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write_config(self, data):
        path = Path(self.tmp.name) / 'config.json'
        path.write_text(json.dumps(data))
        return str(path)

    def test_defaults(self):
        cfg = cli_config(scenario='workbench').experiment_config()
        self.assertEqual(cfg.N, 250)
        self.assertEqual(cfg.seeds, list(range(10)))

    def test_flags_beat_file_beat_defaults(self):
        path = self.write_config({'N': 100, 'mu': 0.01})
        cfg = cli_config(scenario='workbench', config=path, n=120).experiment_config()
        self.assertEqual(cfg.N, 120)
        self.assertEqual(cfg.mu, 0.01)
        self.assertEqual(cfg.lam, 0.01)

    def test_gate_disabled_from_file(self):
        path = self.write_config({'innovation_gate': None, 'unmeasured_gain': 0.0})
        cfg = cli_config(scenario='workbench', config=path).experiment_config()
        self.assertIsNone(cfg.innovation_gate)
        self.assertEqual(cfg.unmeasured_gain, 0.0)
        self.assertEqual(cli_config(scenario='workbench').experiment_config().innovation_gate, 5.0)

    def test_scenario_from_file(self):
        path = self.write_config({'scenario': 'cw'})
        self.assertEqual(cli_config(config=path).experiment_config().N, 350)

    def test_missing_scenario(self):
        with self.assertRaises(ConfigurationError):
            cli_config().experiment_config()

    def test_unknown_file_key(self):
        path = self.write_config({'neurons': 10})
        with self.assertRaises(ValidationError):
            cli_config(scenario='workbench', config=path).experiment_config()

    def test_bad_override_type(self):
        with self.assertRaises(ValidationError):
            cli_config(scenario='workbench', alpha=-1.0)

    def test_seed_precedence(self):
        path = self.write_config({'seeds': [3, 4]})
        self.assertEqual(cli_config(scenario='workbench', config=path, seed='7').experiment_config().seeds, [7])
        self.assertEqual(cli_config(scenario='workbench', config=path).experiment_config().seeds, [3, 4])
        with override_settings(SPIKEREG_SEED=11):
            self.assertEqual(cli_config(scenario='workbench').experiment_config().seeds, [11])

    def test_outlier_preset(self):
        cfg = cli_config(scenario='workbench', outliers='preset').experiment_config()
        self.assertEqual(cfg.uncertainty.outlier_times, [3.0, 5.0, 6.0])
        self.assertEqual(cfg.uncertainty.outlier_scale, 500.0)

    def test_explicit_outliers_and_alpha(self):
        cfg = cli_config(scenario='cw', outliers='100,200', outlier_scale=50.0, alpha=0.9).experiment_config()
        self.assertEqual(cfg.uncertainty.outlier_times, [100.0, 200.0])
        self.assertEqual(cfg.uncertainty.outlier_scale, 50.0)
        self.assertEqual(cfg.uncertainty.model_scale, 0.9)

    def test_framework_from_file(self):
        path = self.write_config({'framework': 'lqg'})
        cli = CliConfig.from_options('run', {'scenario': 'workbench', 'config': path})
        self.assertIsNone(cli.framework)
        self.assertEqual(cli.experiment_config(framework=cli.framework).framework, Framework.LQG)
        flagged = CliConfig.from_options('run', {'scenario': 'workbench', 'config': path}, frameworks=['lqr-msif'])
        self.assertEqual(flagged.experiment_config(framework=flagged.framework).framework, Framework.LQR_MSIF)

    def test_framework_scenario_default(self):
        cli = CliConfig.from_options('run', {'scenario': 'workbench'})
        self.assertEqual(cli.experiment_config(framework=cli.framework).framework, Framework.SNN_LQR_MSIF)

    def test_shortened_run_keeps_tail_share(self):
        cfg = cli_config(scenario='workbench', duration=2.0).experiment_config()
        self.assertAlmostEqual(cfg.error_tail_start, 1.2)
        cfg = cli_config(scenario='workbench', duration=2.0, tail_start=1.5).experiment_config()
        self.assertEqual(cfg.error_tail_start, 1.5)


@override_settings(SPIKEREG_SEED=None, SPIKEREG_PROGRESS=False)
class CommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)

    def call(self, *args, **options):
        stdout = StringIO()
        call_command(*args, stdout=stdout, **options)
        return stdout.getvalue()

    def assertExitCode(self, code, *args, **options):
        with self.assertRaises(CommandError) as ctx:
            self.call(*args, **options)
        self.assertEqual(ctx.exception.returncode, code)

    def test_run_writes_files(self):
        output = self.call('run', scenario='workbench', framework='snn-lqr-msif', seed='7', duration=1.0,
                           output=str(self.out))
        for name in (TRAJECTORIES, RASTER, SUMMARY):
            self.assertTrue((self.out / name).exists(), name)
        self.assertIn('x1', output)
        summary = load_summary(self.out)
        self.assertEqual(summary.seed, 7)
        self.assertEqual(summary.config.framework, Framework.SNN_LQR_MSIF)
        self.assertEqual(list(load_run(self.out).tail_error), summary.tail_error)

    def test_run_cw_summary_has_every_state(self):
        self.call('run', scenario='cw', framework='lqg', seed='0', duration=20.0, output=str(self.out))
        summary = json.loads((self.out / SUMMARY).read_text())
        self.assertEqual(summary['states'], ['x', 'y', 'z', 'vx', 'vy', 'vz'])
        self.assertEqual(len(summary['tail_error']), 6)
        self.assertFalse((self.out / RASTER).exists())

    def test_run_framework_from_config_file(self):
        path = self.out / 'config.json'
        path.write_text(json.dumps({'scenario': 'workbench', 'framework': 'lqg'}))
        self.call('run', config=str(path), seed='0', duration=1.0, output=str(self.out))
        self.assertEqual(load_summary(self.out).config.framework, Framework.LQG)
        self.assertFalse((self.out / RASTER).exists())

    def test_run_bad_scenario(self):
        self.assertExitCode(EXIT_CONFIG, 'run', scenario='bogus', output=str(self.out))

    def test_run_missing_scenario(self):
        self.assertExitCode(EXIT_CONFIG, 'run', output=str(self.out))

    def test_run_bad_framework(self):
        self.assertExitCode(EXIT_CONFIG, 'run', scenario='workbench', framework='pid', output=str(self.out))

    def test_run_bad_config_file(self):
        path = self.out / 'config.json'
        path.write_text(json.dumps({'gain': 2}))
        self.assertExitCode(EXIT_CONFIG, 'run', scenario='workbench', config=str(path), output=str(self.out))

    def test_run_invalid_parameter(self):
        self.assertExitCode(EXIT_CONFIG, 'run', scenario='workbench', n=0, output=str(self.out))

    def test_run_instability(self):
        with mock.patch('cli.management.commands.run.run_experiment',
                        side_effect=InstabilityError('firing loop exceeded', step=5)):
            self.assertExitCode(EXIT_INSTABILITY, 'run', scenario='workbench', seed='0', output=str(self.out))

    def test_compare_deduplicates(self):
        output = self.call('compare', scenario='workbench', frameworks='lqg,lqg', seed='0', duration=1.0,
                           output=str(self.out))
        self.assertIn('Duplicate', output)
        frame = pd.read_csv(self.out / 'compare.csv')
        self.assertEqual(list(frame['framework']), ['lqg', 'lqg'])
        self.assertEqual(list(frame['state']), ['x1', 'x2'])

    def test_compare_table_shape(self):
        output = self.call('compare', scenario='cw', frameworks='lqg,lqr-msif,snn-lqr-msif', seed='0',
                           duration=20.0, output=str(self.out))
        frame = pd.read_csv(self.out / 'compare.csv')
        self.assertEqual(len(frame), 18)
        for label in ('LQG', 'LQR-MSIF', 'SNN-LQR-MSIF'):
            self.assertIn(label, output)

    def test_compare_uncertain_model(self):
        self.call('compare', scenario='workbench', frameworks='lqg,lqr-msif', alpha=0.8, seed='0', duration=1.0,
                  output=str(self.out))
        self.assertEqual(len(pd.read_csv(self.out / 'compare.csv')), 4)

    def test_compare_no_frameworks(self):
        self.assertExitCode(EXIT_CONFIG, 'compare', scenario='workbench', frameworks='', output=str(self.out))

    def test_neuron_sweep(self):
        self.call('sweep', 'neurons', scenario='workbench', list='50:400:50', seed='0', duration=1.0,
                  output=str(self.out))
        frame = pd.read_csv(self.out / 'sweep_neurons.csv')
        self.assertEqual(list(frame['N']), [50, 100, 150, 200, 250, 300, 350, 400])

    def test_firing_param_grid(self):
        self.call('sweep', 'firing-params', scenario='workbench', mu='0.001,0.005,0.05', nu='0.001,0.005,0.05',
                  seed='0', duration=1.0, output=str(self.out))
        frame = pd.read_csv(self.out / 'sweep_firing_params.csv')
        self.assertEqual(len(frame), 9)
        self.assertEqual(frame['normalized_error'].max(), 1.0)
        self.assertEqual(int(frame['preferred'].sum()), 1)

    def test_single_cell_grid(self):
        self.call('sweep', 'firing-params', scenario='workbench', mu='0.005', nu='0.005', seed='0', duration=1.0,
                  output=str(self.out))
        frame = pd.read_csv(self.out / 'sweep_firing_params.csv')
        self.assertEqual(list(frame['normalized_error']), [1.0])

    def test_empty_sweep(self):
        self.assertExitCode(EXIT_CONFIG, 'sweep', 'neurons', scenario='workbench', list='', output=str(self.out))

    def test_unknown_sweep_kind(self):
        self.assertExitCode(EXIT_CONFIG, 'sweep', 'gains', scenario='workbench', output=str(self.out))

    def test_neuron_sweep_rejects_mu_list(self):
        self.assertExitCode(EXIT_CONFIG, 'sweep', 'neurons', scenario='workbench', mu='0.001,0.005',
                            output=str(self.out))

    def test_emit_plots(self):
        self.call('run', scenario='workbench', seed='1', duration=1.0, output=str(self.out))
        self.call('emit_plots', str(self.out))
        errors = pd.read_csv(self.out / ERRORS)
        self.assertEqual(len(errors), 101)
        self.assertTrue((self.out / ACTIVITY).exists())

    def test_emit_plots_without_run(self):
        self.assertExitCode(EXIT_CONFIG, 'emit_plots', str(self.out / 'missing'))
