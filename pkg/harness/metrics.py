"""
Metrics over stored run series. Everything here is recomputable from the
CSV files a run emits.
"""

import logging

import numpy as np

from core.exceptions import DomainError

logger = logging.getLogger(__name__)

TIME_TOL = 1e-9


def avg_error_after(result, t_start: float) -> np.ndarray:
    """Mean |x_i - 0| over samples with t >= t_start, per state"""
    t = np.asarray(result.t, dtype=float)
    if t_start >= t[-1]:
        raise DomainError(f"t_start {t_start} must precede the last sample at {t[-1]}")
    tail = t >= t_start - TIME_TOL
    return np.mean(np.abs(np.asarray(result.x)[tail]), axis=0)


def _spike_matrix(raster, N: int, steps: int) -> np.ndarray:
    counts = np.zeros((steps + 1, N), dtype=np.int64)
    for record in raster:
        if record.neurons and 0 <= record.step <= steps:
            np.add.at(counts[record.step], np.asarray(record.neurons, dtype=np.int64), 1)
    return counts


def spike_fraction(raster, N: int, steps: int) -> float:
    """Percent of the N * steps possible spikes emitted over steps 1..steps

    Step 0 holds the initial-state encoding, which is not counted.
    """
    if N * steps == 0:
        return 0.0
    total = sum(len(record.neurons) for record in raster if record.step > 0)
    return 100.0 * total / (N * steps)


def active_fraction_timeseries(raster, N: int, window: int, steps: int | None = None) -> np.ndarray:
    """Percent of neurons with at least one spike in (k - window, k], for k = 0..steps"""
    if window < 1:
        raise DomainError(f"window must be >= 1, got {window}")
    if steps is None:
        steps = max((record.step for record in raster), default=0)
    fired = _spike_matrix(raster, N, steps) > 0
    cumulative = np.vstack([np.zeros((1, N), dtype=np.int64), np.cumsum(fired, axis=0)])
    k = np.arange(steps + 1)
    lower = np.maximum(k + 1 - window, 0)
    in_window = cumulative[k + 1] - cumulative[lower]
    return 100.0 * np.count_nonzero(in_window, axis=1) / N


def three_sigma_bounds(P_series) -> np.ndarray:
    """3 sqrt(diag P) per step; accepts covariance stacks or stored diagonals"""
    P_series = np.asarray(P_series, dtype=float)
    diag = np.diagonal(P_series, axis1=-2, axis2=-1) if P_series.ndim == 3 else P_series
    return 3.0 * np.sqrt(np.clip(diag, 0.0, None))


def estimation_error(result) -> np.ndarray:
    return np.asarray(result.x) - np.asarray(result.x_hat)


def reentry_steps(error, bounds, start_step: int) -> int | None:
    """Steps after ``start_step`` until every |error_i| is back inside its bound"""
    inside = np.all(np.abs(np.asarray(error)[start_step:]) <= np.asarray(bounds)[start_step:], axis=1)
    hits = np.flatnonzero(inside)
    return int(hits[0]) if hits.size else None


def max_normalized_error(result, start_step: int = 0) -> float:
    """max over time and states of |x - x_hat| / (3 sigma)"""
    error = np.abs(estimation_error(result))[start_step:]
    bounds = three_sigma_bounds(result.P_diag)[start_step:]
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(bounds > 0, error / bounds, np.where(error > 0, np.inf, 0.0))
    return float(ratio.max())


def outlier_recovery_steps(error, bounds, injection_step: int, lookback: int = 10) -> int | None:
    """
    Steps after an injection at ``injection_step`` until every |error_i| is
    back within its envelope, where the envelope of a state is the larger of
    its bound and its worst |error_i| over the ``lookback`` samples before
    the injection.
    """
    error = np.abs(np.asarray(error, dtype=float))
    bounds = np.asarray(bounds, dtype=float)
    if not 0 <= injection_step < len(error):
        raise DomainError(f"injection step {injection_step} outside 0..{len(error) - 1}")
    if lookback < 1:
        raise DomainError(f"lookback must be >= 1, got {lookback}")
    before = error[max(injection_step - lookback, 0):injection_step + 1].max(axis=0)
    after = slice(injection_step + 1, None)
    inside = np.all(error[after] <= np.maximum(bounds[after], before), axis=1)
    hits = np.flatnonzero(inside)
    return int(hits[0]) + 1 if hits.size else None
