"""
Parameter sweeps and framework comparisons.

Every (config, seed) cell is dispatched as a ``harness.tasks.run_cell``
Celery task; results are collected in cell order, so the output never
depends on which worker finished first.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from django.conf import settings
from tqdm import tqdm

from core.exceptions import DomainError
from core.seeding import resolve_seeds
from dynamics.scenarios import Scenario

from .schemas import ExperimentConfig, Framework
from .tasks import run_cell

logger = logging.getLogger(__name__)

STATE_LABELS = {
    Scenario.WORKBENCH: ['x1', 'x2'],
    Scenario.CW: ['x', 'y', 'z', 'vx', 'vy', 'vz'],
}

# Firing-parameter cell used as the reference setting on the workbench
PREFERRED_FIRING_PARAMS = (0.005, 0.005)

DIVERGENCE_FACTOR = 10.0
# A row whose error exceeds this multiple of the sweep median has broken down
BREAKDOWN_RATIO = 1.5


def state_labels(cfg: ExperimentConfig) -> list[str]:
    return STATE_LABELS.get(cfg.scenario, [f'x{i + 1}' for i in range(len(cfg.x0))])


def dispatch_cells(cells: list[tuple[ExperimentConfig, int]], desc: str = 'cells') -> list[dict]:
    """Run cells through Celery and return their payloads in input order"""
    pending = [run_cell.delay(cfg.model_dump(mode='json'), seed) for cfg, seed in cells]
    return [
        async_result.get()
        for async_result in tqdm(pending, desc=desc, disable=not settings.SPIKEREG_PROGRESS)
    ]


def _aggregate(payloads: list[dict], n_x: int):
    """Mean and std of tail errors over stable seeds, plus the unstable count"""
    stable = [np.asarray(p['tail_error'], dtype=float) for p in payloads if not p['unstable']]
    unstable = len(payloads) - len(stable)
    if not stable:
        nan = np.full(n_x, np.nan)
        return nan, nan, unstable, None
    errors = np.vstack(stable)
    spikes = [p['spike_fraction'] for p in payloads if not p['unstable'] and p['spike_fraction'] is not None]
    return errors.mean(axis=0), errors.std(axis=0), unstable, (float(np.mean(spikes)) if spikes else None)


def sweep_neurons(base_cfg: ExperimentConfig, N_list, seeds=None) -> pd.DataFrame:
    """
    Tail error of the spiking framework per neuron count.

    A row is flagged divergent when any seed goes unstable, the
    seed-averaged error exceeds DIVERGENCE_FACTOR * ||x(0)||, or the error
    exceeds BREAKDOWN_RATIO times the median error of the sweep (only with
    three or more rows).
    """
    N_list = list(N_list)
    if not N_list:
        raise DomainError("neuron sweep needs at least one N")
    seeds = resolve_seeds(seeds or base_cfg.seeds)
    framework = base_cfg.framework if Framework(base_cfg.framework).is_spiking else Framework.SNN_LQR_MSIF

    cells = [
        (base_cfg.model_copy(update={'N': int(N), 'framework': framework}), seed)
        for N in N_list for seed in seeds
    ]
    payloads = dispatch_cells(cells, desc='neuron sweep')

    labels = state_labels(base_cfg)
    limit = DIVERGENCE_FACTOR * float(np.linalg.norm(base_cfg.x0))
    rows = []
    for index, N in enumerate(N_list):
        chunk = payloads[index * len(seeds):(index + 1) * len(seeds)]
        mean, _, unstable, spikes = _aggregate(chunk, len(labels))
        error = float(np.linalg.norm(mean)) if unstable < len(chunk) else float('inf')
        rows.append({'N': int(N), 'error': error, **dict(zip(labels, mean)),
                     'spike_percent': spikes, 'unstable_seeds': unstable})
    frame = pd.DataFrame(rows)

    finite = frame['error'][np.isfinite(frame['error'])]
    breakdown = BREAKDOWN_RATIO * finite.median() if len(finite) >= 3 else np.inf
    frame['diverged'] = (frame['unstable_seeds'] > 0) | ~np.isfinite(frame['error']) \
        | (frame['error'] > limit) | (frame['error'] > breakdown)
    for row in frame[frame['diverged']].itertuples():
        logger.warning(f"N={row.N} diverged: error={row.error:.4g}, unstable seeds={row.unstable_seeds}")
    return frame


def sweep_firing_params(base_cfg: ExperimentConfig, mu_list, nu_list, seeds=None) -> pd.DataFrame:
    """Grid over (mu, nu): tail error normalized by the grid maximum plus spike percent"""
    mu_list, nu_list = list(mu_list), list(nu_list)
    if not mu_list or not nu_list:
        raise DomainError("firing-parameter sweep needs nonempty mu and nu lists")
    seeds = resolve_seeds(seeds or base_cfg.seeds)
    framework = base_cfg.framework if Framework(base_cfg.framework).is_spiking else Framework.SNN_LQR_MSIF

    grid = [(float(mu), float(nu)) for mu in mu_list for nu in nu_list]
    cells = [
        (base_cfg.model_copy(update={'mu': mu, 'nu': nu, 'framework': framework}), seed)
        for mu, nu in grid for seed in seeds
    ]
    payloads = dispatch_cells(cells, desc='firing-parameter sweep')

    labels = state_labels(base_cfg)
    rows = []
    for index, (mu, nu) in enumerate(grid):
        chunk = payloads[index * len(seeds):(index + 1) * len(seeds)]
        mean, _, unstable, spikes = _aggregate(chunk, len(labels))
        error = float(np.linalg.norm(mean)) if unstable < len(chunk) else float('nan')
        rows.append({'mu': mu, 'nu': nu, 'error': error, 'spike_percent': spikes,
                     'unstable_seeds': unstable,
                     'preferred': bool(np.isclose(mu, PREFERRED_FIRING_PARAMS[0])
                                       and np.isclose(nu, PREFERRED_FIRING_PARAMS[1]))})
    frame = pd.DataFrame(rows)
    peak = frame['error'].max(skipna=True)
    frame.insert(3, 'normalized_error', frame['error'] / peak if peak and np.isfinite(peak) else np.nan)
    return frame


@dataclass
class ComparisonTable:
    """Seed-averaged tail error per framework and state, with dispersion"""
    frameworks: list[str]
    states: list[str]
    mean: np.ndarray
    std: np.ndarray
    unstable: list[int] = field(default_factory=list)
    spike_percent: list = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for i, framework in enumerate(self.frameworks):
            for j, state in enumerate(self.states):
                rows.append({'framework': framework, 'state': state,
                             'mean_error': self.mean[i, j], 'std_error': self.std[i, j],
                             'unstable_seeds': self.unstable[i] if self.unstable else 0})
        return pd.DataFrame(rows)

    def format(self) -> str:
        """Aligned text table: states as rows, frameworks as columns"""
        headers = [Framework(f).label for f in self.frameworks]
        width = max(18, *(len(h) + 2 for h in headers))
        lines = ['State'.ljust(8) + ''.join(h.rjust(width) for h in headers)]
        for j, state in enumerate(self.states):
            cells = [f'{self.mean[i, j]:.4g} ± {self.std[i, j]:.2g}' for i in range(len(self.frameworks))]
            lines.append(state.ljust(8) + ''.join(c.rjust(width) for c in cells))
        if any(self.unstable):
            lines.append('Unstable'.ljust(8) + ''.join(str(u).rjust(width) for u in self.unstable))
        return '\n'.join(lines)


def compare_frameworks(cfg_base: ExperimentConfig, frameworks, seeds=None) -> ComparisonTable:
    """Per framework x state mean tail error over seeds; every framework sees the same seeds"""
    ordered = []
    for framework in frameworks:
        framework = Framework(framework)
        if framework in ordered:
            logger.warning(f"Duplicate framework {framework} dropped from comparison")
            continue
        ordered.append(framework)
    if not ordered:
        raise DomainError("comparison needs at least one framework")
    seeds = resolve_seeds(seeds or cfg_base.seeds)

    cells = [(cfg_base.model_copy(update={'framework': f}), seed) for f in ordered for seed in seeds]
    payloads = dispatch_cells(cells, desc='comparison')

    labels = state_labels(cfg_base)
    means, stds, unstable, spikes = [], [], [], []
    for index in range(len(ordered)):
        mean, std, bad, spike = _aggregate(payloads[index * len(seeds):(index + 1) * len(seeds)], len(labels))
        means.append(mean)
        stds.append(std)
        unstable.append(bad)
        spikes.append(spike)
    return ComparisonTable(
        frameworks=[f.value for f in ordered], states=labels,
        mean=np.vstack(means), std=np.vstack(stds), unstable=unstable, spike_percent=spikes, seeds=seeds,
    )
