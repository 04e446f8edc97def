"""
Django management command to compare frameworks under shared seeds
"""

from django.core.management.base import BaseCommand

from cli.config import CliConfig, add_experiment_arguments, exit_codes
from harness.exporters import write_csv
from harness.sweeps import compare_frameworks

COMPARE_FILE = 'compare.csv'
DEFAULT_FRAMEWORKS = 'lqg,lqr-msif,snn-lqr-msif'


class Command(BaseCommand):
    help = 'Seed-averaged tail error per framework and state, printed as a table and written to compare.csv'

    def add_arguments(self, parser):
        add_experiment_arguments(parser, framework_option=False)
        parser.add_argument('--frameworks', default=DEFAULT_FRAMEWORKS,
                            help=f'Comma-separated frameworks (default: {DEFAULT_FRAMEWORKS})')

    def handle(self, *args, **options):
        names = [name.strip() for name in options['frameworks'].split(',') if name.strip()]
        if len(set(names)) < len(names):
            self.stdout.write(self.style.WARNING('Duplicate frameworks listed; each runs once'))

        with exit_codes():
            cli = CliConfig.from_options('compare', options, frameworks=names)
            cfg = cli.experiment_config()
            self.stdout.write(self.style.SUCCESS(
                f'Comparing {len(set(names))} frameworks on {cfg.scenario} over seeds {cfg.seeds}'))
            table = compare_frameworks(cfg, cli.frameworks, seeds=cfg.seeds)
            path = write_csv(table.to_frame(), cli.output_dir / COMPARE_FILE)

        self.stdout.write(table.format())
        if any(table.unstable):
            self.stdout.write(self.style.WARNING('Some seeds went unstable and are excluded from the means'))
        self.stdout.write(self.style.SUCCESS(f'Wrote {path}'))
