"""
Django management command to derive plot-ready CSVs from a stored run
"""

from pathlib import Path

from django.core.management.base import BaseCommand

from cli.config import exit_codes
from core.exceptions import ConfigurationError
from harness.exporters import SUMMARY, emit_plot_data


class Command(BaseCommand):
    help = 'Write errors.csv (x - x_hat with 3-sigma bounds) and activity.csv from a run directory'

    def add_arguments(self, parser):
        parser.add_argument('run_dir', help='Directory written by the run command')
        parser.add_argument('--window', type=int, help='Active-fraction window in steps')

    def handle(self, *args, **options):
        run_dir = Path(options['run_dir'])
        with exit_codes():
            if not (run_dir / SUMMARY).exists():
                raise ConfigurationError(f"{run_dir} holds no {SUMMARY}; run the experiment first")
            written = emit_plot_data(run_dir, options['window'])
        for path in written:
            self.stdout.write(self.style.SUCCESS(f'Wrote {path}'))
