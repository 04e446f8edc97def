"""
Django management command for neuron-count and firing-parameter sweeps
"""

from django.core.management.base import BaseCommand

from cli.config import CliConfig, add_experiment_arguments, exit_codes, parse_number_list
from core.exceptions import ConfigurationError
from harness.exporters import write_csv
from harness.sweeps import sweep_firing_params, sweep_neurons

SWEEP_KINDS = ('neurons', 'firing-params')


class Command(BaseCommand):
    help = 'Sweep the neuron count (neurons) or the (mu, nu) grid (firing-params) and write the grid CSV'

    def add_arguments(self, parser):
        parser.add_argument('kind', help='Sweep kind: ' + ' or '.join(SWEEP_KINDS))
        add_experiment_arguments(parser, firing_options=False)
        parser.add_argument('--list', dest='neurons', default='50:400:50',
                            help='Neuron counts for the neurons sweep, e.g. 50:400:50')
        parser.add_argument('--mu', help='mu values, e.g. 0.001,0.005,0.05 (a single value for the neurons sweep)')
        parser.add_argument('--nu', help='nu values, e.g. 0.001,0.005,0.05 (a single value for the neurons sweep)')

    def handle(self, *args, **options):
        kind = options['kind']
        with exit_codes():
            if kind not in SWEEP_KINDS:
                raise ConfigurationError(f"unknown sweep kind '{kind}', expected one of {SWEEP_KINDS}")
            mu_list = parse_number_list(options.pop('mu') or '', float)
            nu_list = parse_number_list(options.pop('nu') or '', float)

            cli = CliConfig.from_options('sweep', options, frameworks=filter(None, [options.get('framework')]))
            if kind == 'neurons':
                for name, values in (('mu', mu_list), ('nu', nu_list)):
                    if len(values) > 1:
                        raise ConfigurationError(f"the neurons sweep takes a single --{name}")
                    if values:
                        cli.overrides[name] = values[0]
            cfg = cli.experiment_config(framework=cli.framework)

            if kind == 'neurons':
                N_list = parse_number_list(options['neurons'], int)
                self.stdout.write(self.style.SUCCESS(f'Neuron sweep on {cfg.scenario}: N = {N_list}'))
                frame = sweep_neurons(cfg, N_list, seeds=cfg.seeds)
            else:
                mu_list = mu_list or [cfg.mu]
                nu_list = nu_list or [cfg.nu]
                self.stdout.write(self.style.SUCCESS(
                    f'Firing-parameter sweep on {cfg.scenario}: {len(mu_list)} x {len(nu_list)} cells'))
                frame = sweep_firing_params(cfg, mu_list, nu_list, seeds=cfg.seeds)
            path = write_csv(frame, cli.output_dir / f"sweep_{kind.replace('-', '_')}.csv")

        self.stdout.write(frame.to_string(index=False))
        if kind == 'neurons' and frame['diverged'].any():
            self.stdout.write(self.style.WARNING(f"Diverged at N = {list(frame.loc[frame['diverged'], 'N'])}"))
        self.stdout.write(self.style.SUCCESS(f'Wrote {path}'))
