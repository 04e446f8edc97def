"""
Per-run random streams derived from one master seed.

Streams are keyed by purpose only, so two frameworks run under the same
master seed see identical process and measurement noise.
"""

import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings

logger = logging.getLogger(__name__)

STREAM_NAMES = ('plant', 'measurement', 'decoder', 'membrane', 'silence')


@dataclass
class RunStreams:
    """Independent generators for one run"""
    seed: int
    plant: np.random.Generator
    measurement: np.random.Generator
    decoder: np.random.Generator
    membrane: np.random.Generator
    silence: np.random.Generator


def run_streams(seed: int) -> RunStreams:
    """Spawn the named child streams of ``seed``"""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    generators = {name: np.random.default_rng(child) for name, child in zip(STREAM_NAMES, children)}
    return RunStreams(seed=seed, **generators)


def resolve_seeds(seeds=None) -> list[int]:
    """
    Seeds for a run or sweep.

    Explicit seeds win, then the SPIKEREG_SEED setting, then
    range(SPIKEREG_DEFAULT_SEEDS).
    """
    if seeds:
        return [int(s) for s in seeds]
    if settings.SPIKEREG_SEED is not None:
        logger.info(f"Using master seed from SPIKEREG_SEED: {settings.SPIKEREG_SEED}")
        return [int(settings.SPIKEREG_SEED)]
    return list(range(settings.SPIKEREG_DEFAULT_SEEDS))
