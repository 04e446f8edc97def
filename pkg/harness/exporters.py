"""
File emission for runs and sweeps.

A run directory holds:
    trajectories.csv   t, x*, xhat*, u*, z*, P* (diag of P) per sample
    raster.csv         step, neuron per spike (spiking frameworks)
    summary.json       resolved config, seed and metrics
Plot-ready files (errors.csv, activity.csv) are derived from those.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from spiking.network import SpikeRecord, raster_pairs

from .metrics import active_fraction_timeseries, avg_error_after, estimation_error, three_sigma_bounds
from .runner import RunResult
from .schemas import ExperimentConfig
from .sweeps import state_labels

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'

TRAJECTORIES = 'trajectories.csv'
RASTER = 'raster.csv'
SUMMARY = 'summary.json'
ERRORS = 'errors.csv'
ACTIVITY = 'activity.csv'


class RunSummary(BaseModel):
    model_config = ConfigDict(extra='forbid')

    config: ExperimentConfig
    seed: int
    states: list[str]
    tail_error: list[float]
    spike_fraction: float | None = None
    J_c: float
    J_spike: float | None = None
    steps: int
    corrections: list[str]

    @classmethod
    def from_result(cls, result: RunResult) -> 'RunSummary':
        return cls(
            config=result.config,
            seed=result.seed,
            states=state_labels(result.config),
            tail_error=[float(v) for v in result.tail_error],
            spike_fraction=result.spike_fraction,
            J_c=result.J_c,
            J_spike=result.J_spike,
            steps=result.steps,
            corrections=list(result.corrections),
        )


def _columns(prefix: str, count: int) -> list[str]:
    return [f'{prefix}{i + 1}' for i in range(count)]


def trajectories_frame(result: RunResult) -> pd.DataFrame:
    n_x, n_u, n_z = result.x.shape[1], result.u.shape[1], result.z.shape[1]
    blocks = [
        pd.DataFrame({'t': result.t}),
        pd.DataFrame(result.x, columns=_columns('x', n_x)),
        pd.DataFrame(result.x_hat, columns=_columns('xhat', n_x)),
        pd.DataFrame(result.u, columns=_columns('u', n_u)),
        pd.DataFrame(result.z, columns=_columns('z', n_z)),
        pd.DataFrame(result.P_diag, columns=_columns('P', n_x)),
    ]
    return pd.concat(blocks, axis=1)


def write_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {path} ({len(frame)} rows)")
    return path


def read_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision='round_trip')


def write_run(result: RunResult, out_dir) -> RunSummary:
    """Write trajectories, raster (spiking runs) and summary into ``out_dir``"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(trajectories_frame(result), out_dir / TRAJECTORIES)
    if result.N:
        write_csv(pd.DataFrame(raster_pairs(result.raster), columns=['step', 'neuron']), out_dir / RASTER)
    summary = RunSummary.from_result(result)
    (out_dir / SUMMARY).write_text(summary.model_dump_json(indent=2))
    logger.info(f"Wrote {out_dir / SUMMARY}")
    return summary


def load_summary(run_dir) -> RunSummary:
    return RunSummary.model_validate_json((Path(run_dir) / SUMMARY).read_text())


def load_run(run_dir) -> RunResult:
    """Rebuild the stored series of a run directory"""
    run_dir = Path(run_dir)
    summary = load_summary(run_dir)
    frame = read_csv(run_dir / TRAJECTORIES)

    def block(prefix):
        columns = [c for c in frame.columns if c.startswith(prefix) and c[len(prefix):].isdigit()]
        return frame[sorted(columns, key=lambda c: int(c[len(prefix):]))].to_numpy()

    raster = []
    raster_path = run_dir / RASTER
    if raster_path.exists():
        pairs = read_csv(raster_path)
        for step, group in pairs.groupby('step', sort=True):
            raster.append(SpikeRecord(step=int(step), neurons=tuple(int(n) for n in group['neuron'])))

    result = RunResult(
        t=frame['t'].to_numpy(), x=block('x'), x_hat=block('xhat'), u=block('u'), z=block('z'),
        P_diag=block('P'), raster=raster, N=summary.config.N if raster_path.exists() else 0,
        seed=summary.seed, config=summary.config, J_c=summary.J_c, J_spike=summary.J_spike,
        spike_fraction=summary.spike_fraction, corrections=tuple(summary.corrections),
    )
    result.tail_error = avg_error_after(result, summary.config.error_tail_start)
    return result


def emit_plot_data(run_dir, window: int | None = None) -> list[Path]:
    """Derive errors.csv (x - x_hat with 3-sigma bounds) and activity.csv from a run directory"""
    run_dir = Path(run_dir)
    result = load_run(run_dir)
    error = estimation_error(result)
    bounds = three_sigma_bounds(result.P_diag)
    n_x = error.shape[1]

    errors = pd.concat([
        pd.DataFrame({'t': result.t}),
        pd.DataFrame(error, columns=_columns('e', n_x)),
        pd.DataFrame(bounds, columns=_columns('bound', n_x)),
    ], axis=1)
    written = [write_csv(errors, run_dir / ERRORS)]

    if result.N:
        window = window or result.config.metrics_window
        active = active_fraction_timeseries(result.raster, result.N, window, result.steps)
        activity = pd.DataFrame({'step': np.arange(result.steps + 1), 't': result.t, 'active_percent': active})
        written.append(write_csv(activity, run_dir / ACTIVITY))
    return written
