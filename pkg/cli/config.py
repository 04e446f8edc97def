"""
Command-line configuration: option parsing helpers, JSON config files and
the mapping from simulation errors to exit codes.

Resolution order for every experiment parameter is
command-line flag > JSON config file > published scenario defaults.
"""

import json
import logging
import math
from contextlib import contextmanager
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from core.exceptions import ConfigurationError, DomainError, InstabilityError, SolverError
from core.seeding import resolve_seeds
from dynamics.scenarios import Scenario
from harness.schemas import OUTLIER_PRESETS, SCENARIO_DEFAULTS, ExperimentConfig, Framework

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_INSTABILITY = 3

OUTLIER_PRESET = 'preset'

# command-line option name -> ExperimentConfig field
PARAMETER_OPTIONS = {
    'n': 'N',
    'lam': 'lam',
    'mu': 'mu',
    'nu': 'nu',
    'delta': 'delta',
    'eta_std': 'eta_std',
    'duration': 'duration',
    'dt': 'dt',
    'tail_start': 'error_tail_start',
}


def parse_number_list(text: str, cast=float) -> list:
    """Parse "a,b,c" and inclusive ranges "start:stop[:step]", e.g. 50:400:50"""
    values = []
    for item in str(text).split(','):
        item = item.strip()
        if not item:
            continue
        if ':' not in item:
            values.append(cast(item))
            continue
        parts = item.split(':')
        if len(parts) not in (2, 3):
            raise ConfigurationError(f"bad range '{item}', expected start:stop[:step]")
        start, stop = cast(parts[0]), cast(parts[1])
        step = cast(parts[2]) if len(parts) == 3 else cast(1)
        if step <= 0 or stop < start:
            raise ConfigurationError(f"bad range '{item}': need step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values.extend(cast(start + i * step) for i in range(count))
    return values


def load_config_file(path) -> dict:
    """Read a JSON object of ExperimentConfig fields (plus optional 'scenario')"""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file {path} not found")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    logger.info(f"Loaded config file {path} ({len(data)} keys)")
    return data


class CliConfig(BaseModel):
    """Options of one command invocation, type-checked before anything runs"""
    model_config = ConfigDict(extra='forbid')

    command: str
    scenario: Scenario | None = None
    frameworks: list[Framework] = Field(default_factory=list)
    config_path: Path | None = None
    output_dir: Path = Field(default_factory=lambda: Path(settings.SPIKEREG_OUTPUT_DIR))
    seeds: list[int] | None = None
    overrides: dict[str, float | int] = Field(default_factory=dict)
    alpha: float | None = Field(None, gt=0)
    outliers: list[float] | str | None = None
    outlier_scale: float | None = Field(None, ge=1)

    @field_validator('outliers', mode='before')
    @classmethod
    def parse_outliers(cls, value):
        if value is None or isinstance(value, list):
            return value
        if str(value).strip().lower() == OUTLIER_PRESET:
            return OUTLIER_PRESET
        return parse_number_list(value, float)

    @classmethod
    def from_options(cls, command: str, options: dict, frameworks=()) -> 'CliConfig':
        seeds = options.get('seed')
        return cls(
            command=command,
            scenario=options.get('scenario') or None,
            frameworks=list(frameworks),
            config_path=options.get('config'),
            output_dir=options.get('output') or settings.SPIKEREG_OUTPUT_DIR,
            seeds=parse_number_list(seeds, int) if seeds not in (None, '') else None,
            overrides={field: options[name] for name, field in PARAMETER_OPTIONS.items()
                       if options.get(name) is not None},
            alpha=options.get('alpha'),
            outliers=options.get('outliers'),
            outlier_scale=options.get('outlier_scale'),
        )

    @property
    def framework(self) -> Framework | None:
        return self.frameworks[0] if self.frameworks else None

    def experiment_config(self, framework=None) -> ExperimentConfig:
        """Merge scenario defaults, the config file and the command-line flags"""
        file_values = load_config_file(self.config_path) if self.config_path else {}
        file_scenario = file_values.pop('scenario', None)
        scenario = self.scenario or file_scenario
        if scenario is None:
            raise ConfigurationError("no scenario given: pass --scenario or set 'scenario' in the config file")
        scenario = Scenario(scenario)

        params = dict(file_values)
        params.update(self.overrides)
        if 'duration' in params and 'error_tail_start' not in params:
            # keep the averaging window at the same share of a shortened or stretched run
            defaults = SCENARIO_DEFAULTS[scenario]
            params['error_tail_start'] = defaults['error_tail_start'] * params['duration'] / defaults['duration']
        if framework is not None:
            params['framework'] = Framework(framework)

        uncertainty = dict(params.pop('uncertainty', None) or {})
        if self.alpha is not None:
            uncertainty['model_scale'] = self.alpha
        if self.outliers == OUTLIER_PRESET:
            times, scale = OUTLIER_PRESETS[scenario]
            uncertainty['outlier_times'] = times
            uncertainty.setdefault('outlier_scale', scale)
        elif self.outliers is not None:
            uncertainty['outlier_times'] = self.outliers
        if self.outlier_scale is not None:
            uncertainty['outlier_scale'] = self.outlier_scale
        if uncertainty:
            params['uncertainty'] = uncertainty

        params['seeds'] = self.seeds or file_values.get('seeds') or resolve_seeds(None)
        cfg = ExperimentConfig.for_scenario(scenario, **params)
        logger.info(f"Resolved config: scenario={cfg.scenario}, framework={cfg.framework}, "
                    f"N={cfg.N}, seeds={cfg.seeds}")
        return cfg


def add_experiment_arguments(parser, framework_option: bool = True, firing_options: bool = True):
    """Scenario selection plus the per-parameter overrides shared by all experiment commands"""
    parser.add_argument('--scenario', help='Scenario name: workbench or cw')
    if framework_option:
        parser.add_argument('--framework',
                            help='Framework: ' + ', '.join(Framework.values) + ' (default: config file, then '
                                 + Framework.SNN_LQR_MSIF.value + ')')
    parser.add_argument('--config', help='JSON file of experiment parameters')
    parser.add_argument('--output', help='Output directory (default: SPIKEREG_OUTPUT_DIR)')
    parser.add_argument('--seed', help='Master seed(s), e.g. 7 or 0,1,2 or 0:9')
    parser.add_argument('--n', type=int, help='Number of neurons')
    parser.add_argument('--lam', type=float, help='Leak rate lambda')
    if firing_options:
        parser.add_argument('--mu', type=float, help='Quadratic rate penalty')
        parser.add_argument('--nu', type=float, help='Linear rate penalty')
    parser.add_argument('--delta', type=float, help='MSIF boundary-layer width')
    parser.add_argument('--eta-std', type=float, help='Membrane noise standard deviation')
    parser.add_argument('--duration', type=float, help='Simulated time [s]')
    parser.add_argument('--dt', type=float, help='Step size [s]')
    parser.add_argument('--tail-start', type=float, help='Start of the tail-error window [s]')
    parser.add_argument('--alpha', type=float, help='Design model scale, A_hat = alpha A')
    parser.add_argument('--outliers', help="Outlier times 't1,t2,...' or 'preset'")
    parser.add_argument('--outlier-scale', type=float, help='Measurement-noise multiplier at outlier times')


@contextmanager
def exit_codes():
    """Turn configuration problems into exit code 2 and network instability into 3"""
    try:
        yield
    except InstabilityError as e:
        logger.error(f"Numerical instability: {e}")
        raise CommandError(f"Numerical instability: {e}", returncode=EXIT_INSTABILITY)
    except ValidationError as e:
        raise CommandError(f"Invalid configuration:\n{e}", returncode=EXIT_CONFIG)
    except (ConfigurationError, DomainError, SolverError, ValueError) as e:
        raise CommandError(f"Invalid configuration: {e}", returncode=EXIT_CONFIG)
