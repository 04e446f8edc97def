"""
Django management command to run one closed-loop experiment
"""

import numpy as np
from django.core.management.base import BaseCommand

from cli.config import CliConfig, add_experiment_arguments, exit_codes
from harness.exporters import write_run
from harness.runner import run_experiment


class Command(BaseCommand):
    help = 'Run one scenario/framework closed loop and write trajectories, raster and summary'

    def add_arguments(self, parser):
        add_experiment_arguments(parser)

    def handle(self, *args, **options):
        with exit_codes():
            cli = CliConfig.from_options('run', options, frameworks=filter(None, [options.get('framework')]))
            cfg = cli.experiment_config(framework=cli.framework)
            seed = cfg.seeds[0]

            self.stdout.write(self.style.SUCCESS(
                f'Running {cfg.framework.label} on {cfg.scenario} (seed {seed}, {cfg.steps} steps)'))
            result = run_experiment(cfg, seed)
            summary = write_run(result, cli.output_dir)

        self.stdout.write(f'Tail error (mean |x_i| for t >= {cfg.error_tail_start:g} s)')
        for state, error in zip(summary.states, summary.tail_error):
            self.stdout.write(f'  {state:<4}{error:>14.6g}')
        self.stdout.write(f'  norm{float(np.linalg.norm(summary.tail_error)):>14.6g}')
        if summary.spike_fraction is not None:
            self.stdout.write(f'Spikes: {summary.spike_fraction:.3f}% of N x steps')
        self.stdout.write(self.style.SUCCESS(f'Wrote run files to {cli.output_dir}'))
