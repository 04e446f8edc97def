"""
Celery tasks for sweep and comparison cells.

Cells take and return plain JSON so they can run on a worker pool; with
CELERY_TASK_ALWAYS_EAGER (the default) they run in-process.
"""

import logging

from celery import shared_task

from core.exceptions import InstabilityError

from .runner import run_experiment
from .schemas import ExperimentConfig

logger = logging.getLogger(__name__)


@shared_task(name='harness.tasks.run_cell')
def run_cell(config: dict, seed: int) -> dict:
    """Run one (config, seed) cell and return its metrics"""
    cfg = ExperimentConfig.model_validate(config)
    try:
        result = run_experiment(cfg, seed)
    except InstabilityError as e:
        logger.warning(f"Cell unstable: framework={cfg.framework}, N={cfg.N}, seed={seed}: {e}")
        return {'seed': seed, 'unstable': True, 'step': e.step, 'tail_error': None, 'spike_fraction': None}
    return {
        'seed': seed,
        'unstable': False,
        'step': None,
        'tail_error': result.tail_error.tolist(),
        'spike_fraction': result.spike_fraction,
    }
