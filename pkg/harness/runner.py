"""
Closed-loop experiment runner.

Per sample k = 0..steps:

    z_k  measured from the true state (outlier-scaled at injection instants)
    u_k  from the estimator (baselines) or decoded from the network
    record x_k, x_hat_k, u_k, z_k, diag P_k
    truth plant steps with the true A; estimator or network steps on A_hat

P_k follows the Riccati ODE of the design model for every framework; the
spiking frameworks read it through the adaptive weights only. Every
framework gates its innovations at ``innovation_gate`` standard deviations.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import ConfigurationError, InstabilityError
from core.seeding import run_streams
from dynamics.plant import PlantState, measure, step_plant
from dynamics.scenarios import Scenario, build_scenario
from filters.estimators import (
    MODEL_CORRECTIONS, FilterState, MsifConfig, Variant, estimator_step, initial_filter_state,
    innovation_covariance, kf_riccati_step, unmeasured_state_gain,
)
from regulator.lqr import DesiredState, LqrDesign, control_law, lqr_cost
from spiking.decoders import DecoderPair
from spiking.network import (
    SpikingNetwork, decode_control, decode_state, encode_initial_state, network_step, silence_neurons,
    spike_cost,
)

from .metrics import active_fraction_timeseries, avg_error_after, spike_fraction
from .schemas import ExperimentConfig, Framework

logger = logging.getLogger(__name__)

FILTER_VARIANTS = {
    Framework.LQG: Variant.KF,
    Framework.LQR_MSIF: Variant.MSIF,
}


@dataclass
class RunResult:
    """Series on one time base t = k dt plus the metrics derived from them"""
    t: np.ndarray
    x: np.ndarray
    x_hat: np.ndarray
    u: np.ndarray = None
    z: np.ndarray = None
    P_diag: np.ndarray = None
    raster: list = field(default_factory=list)
    N: int = 0
    tail_error: np.ndarray = None
    spike_fraction: float | None = None
    active_fraction: np.ndarray = None
    J_c: float = 0.0
    J_spike: float | None = None
    seed: int | None = None
    config: ExperimentConfig | None = None
    corrections: tuple = MODEL_CORRECTIONS

    @property
    def steps(self) -> int:
        return len(self.t) - 1


def _build_models(cfg: ExperimentConfig):
    kwargs = {'variant': cfg.cw_variant, 'dt': cfg.dt} if cfg.scenario == Scenario.CW else {}
    true_model = build_scenario(cfg.scenario, **kwargs)
    if cfg.scenario == Scenario.WORKBENCH and not np.isclose(true_model.dt, cfg.dt):
        true_model = true_model.model_copy(update={'dt': cfg.dt})
    if len(cfg.x0) != true_model.n_x:
        raise ConfigurationError(f"x0 has {len(cfg.x0)} entries, {cfg.scenario} has {true_model.n_x} states")
    alpha = cfg.uncertainty.model_scale
    design_model = true_model if alpha == 1.0 else true_model.scaled(alpha)
    return true_model, design_model


def _silence_masks(cfg: ExperimentConfig, rng: np.random.Generator) -> dict[int, np.ndarray]:
    masks = {}
    for event in sorted(cfg.uncertainty.silence_schedule, key=lambda e: e.time):
        mask = np.zeros(cfg.N, dtype=bool)
        if event.neurons is not None:
            mask[event.neurons] = True
        else:
            count = max(1, int(round(event.fraction * cfg.N)))
            mask[rng.choice(cfg.N, size=count, replace=False)] = True
        step = cfg.step_of(event.time)
        masks[step] = masks.get(step, np.zeros(cfg.N, dtype=bool)) | mask
    return masks


def run_experiment(cfg: ExperimentConfig, seed: int | None = None) -> RunResult:
    """
    Run one closed loop of ``cfg.framework`` on ``cfg.scenario``.

    ``seed`` defaults to the first configured seed. Raises InstabilityError
    when the network's firing loop overruns or any series turns non-finite.
    """
    seed = cfg.seeds[0] if seed is None else seed
    started = time.time()
    streams = run_streams(seed)
    framework = Framework(cfg.framework)
    spiking = framework.is_spiking
    logger.info(f"Run start: scenario={cfg.scenario}, framework={framework}, seed={seed}, "
                f"alpha={cfg.uncertainty.model_scale}, steps={cfg.steps}")

    true_model, design_model = _build_models(cfg)
    design = LqrDesign.design(design_model, cfg.Q_c, cfg.R_c)
    desired = DesiredState.zeros(true_model.n_x)
    C, R, dt, steps = design_model.C, design_model.R, cfg.dt, cfg.steps

    fs = initial_filter_state(cfg.x_hat0, cfg.P0_scale)
    plant = PlantState(x=np.asarray(cfg.x0, dtype=float))
    msif = MsifConfig(delta=cfg.delta, gate=cfg.innovation_gate)

    net = None
    raster = []
    silence_at = {}
    if spiking:
        decoders = DecoderPair.sample(true_model.n_x, cfg.N, cfg.variance_D, cfg.variance_D_bar, streams.decoder)
        net = SpikingNetwork.synthesize(design_model, design.K_c, decoders, cfg.lam, cfg.mu, cfg.nu,
                                        eta_std=cfg.eta_std, concurrent=framework == Framework.SNN_LQR_MSIF)
        silence_at = _silence_masks(cfg, streams.silence)
        if 0 in silence_at:
            silence_neurons(net, silence_at.pop(0))
        raster.append(encode_initial_state(net, cfg.x_hat0, desired))
    elif cfg.uncertainty.silence_schedule:
        logger.debug("Silence schedule ignored for a non-spiking framework")

    outlier_steps = {cfg.step_of(t) for t in cfg.uncertainty.outlier_times}

    xs = np.empty((steps + 1, true_model.n_x))
    x_hats = np.empty_like(xs)
    us = np.empty((steps + 1, true_model.n_u))
    zs = np.empty((steps + 1, true_model.n_z))
    P_diag = np.empty_like(xs)
    J_spike = 0.0

    for k in range(steps + 1):
        if k in silence_at:
            silence_neurons(net, silence_at[k])

        scale = cfg.uncertainty.outlier_scale if k in outlier_steps else 1.0
        z = measure(true_model, plant.x, streams.measurement, cfg.noise_on, scale)

        if framework == Framework.SNN_LQR_MSIF:
            x_hat = decode_state(net.D, net.r)
            u = decode_control(design.K_c, net.D, net.D_bar, net.r)
        elif framework == Framework.SNN_MSIF_LQR:
            x_hat = decode_state(net.D, net.r)
            u = control_law(design.K_c, x_hat, desired)
        else:
            x_hat = fs.x_hat
            u = control_law(design.K_c, x_hat, desired)

        xs[k], x_hats[k], us[k], zs[k], P_diag[k] = plant.x, x_hat, u, z, np.diag(fs.P)
        if spiking:
            J_spike += spike_cost(plant.x, x_hat, net.r, cfg.nu, cfg.mu, dt)

        if not (np.all(np.isfinite(x_hat)) and np.all(np.isfinite(plant.x))):
            logger.error(f"Non-finite state at step {k}")
            raise InstabilityError("non-finite state or estimate", step=k)
        if k == steps:
            break

        plant = step_plant(true_model, plant, u, streams.plant, cfg.noise_on)
        if spiking:
            P_zz = innovation_covariance(fs.P, C, R)
            unmeasured = unmeasured_state_gain(P_zz, design_model, cfg.delta, cfg.unmeasured_gain)
            net.adapt(P_zz, C, cfg.delta, unmeasured, gate=cfg.innovation_gate)
            _, record = network_step(net, z, desired, dt, streams.membrane,
                                     u=None if net.concurrent else u)
            raster.append(record)
            fs = FilterState(x_hat=decode_state(net.D, net.r), P=kf_riccati_step(fs.P, design_model, dt),
                             t=fs.t + dt)
        else:
            fs = estimator_step(fs, design_model, u, z, FILTER_VARIANTS[framework], msif, dt)

    result = RunResult(
        t=np.arange(steps + 1) * dt, x=xs, x_hat=x_hats, u=us, z=zs, P_diag=P_diag,
        raster=raster, N=cfg.N if spiking else 0, seed=seed, config=cfg,
        J_c=lqr_cost(xs, us, design.Q_c, design.R_c, dt),
        J_spike=J_spike if spiking else None,
    )
    result.tail_error = avg_error_after(result, cfg.error_tail_start)
    if spiking:
        result.spike_fraction = spike_fraction(raster, cfg.N, steps)
        result.active_fraction = active_fraction_timeseries(raster, cfg.N, cfg.metrics_window, steps)

    logger.info(f"Run finished in {time.time() - started:.2f}s: tail error "
                f"{np.array2string(result.tail_error, precision=4)}"
                + (f", spikes {result.spike_fraction:.3f}%" if spiking else ""))
    return result
