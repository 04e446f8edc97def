"""
Random Gaussian decoders for the spiking network.

D maps filtered spike trains to the state estimate; D_bar maps them to the
desired state. Neither is learned.
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.exceptions import DomainError

logger = logging.getLogger(__name__)

DEGENERATE_COLUMN_NORM = 1e-12


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_decoder(n_x: int, N: int, variance: float, seed=None) -> np.ndarray:
    """
    n_x x N matrix of i.i.d. N(0, variance) entries.

    ``seed`` may be an int, a SeedSequence or a Generator. Columns whose
    norm is below DEGENERATE_COLUMN_NORM are redrawn.
    """
    if not variance > 0:
        raise DomainError(f"decoder variance must be positive, got {variance}")
    if N < 1 or n_x < 1:
        raise DomainError(f"decoder needs n_x >= 1 and N >= 1, got {n_x}x{N}")

    rng = _as_generator(seed)
    std = np.sqrt(variance)
    D = rng.normal(0.0, std, size=(n_x, N))
    degenerate = np.linalg.norm(D, axis=0) < DEGENERATE_COLUMN_NORM
    while degenerate.any():
        logger.debug(f"Resampling {degenerate.sum()} degenerate decoder columns")
        D[:, degenerate] = rng.normal(0.0, std, size=(n_x, int(degenerate.sum())))
        degenerate = np.linalg.norm(D, axis=0) < DEGENERATE_COLUMN_NORM
    return D


@dataclass
class DecoderPair:
    D: np.ndarray
    D_bar: np.ndarray
    variance_D: float
    variance_D_bar: float

    @property
    def N(self) -> int:
        return self.D.shape[1]

    @classmethod
    def sample(cls, n_x: int, N: int, variance_D: float, variance_D_bar: float, seed=None) -> 'DecoderPair':
        """Draw D then D_bar from one stream"""
        rng = _as_generator(seed)
        return cls(
            D=sample_decoder(n_x, N, variance_D, rng),
            D_bar=sample_decoder(n_x, N, variance_D_bar, rng),
            variance_D=variance_D,
            variance_D_bar=variance_D_bar,
        )
