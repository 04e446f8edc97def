"""
Leaky integrate-and-fire network that estimates the state and produces the
control input concurrently.

Membrane potentials track the decoding error

    sigma = D^T (x_hat - D r) + D_bar^T (x_D - D_bar r) - mu lam^2 r

and a neuron fires only when its spike lowers that error. All weights are
synthesized in closed form from the design model, the LQR gain and the
decoders; the two adaptive weight matrices follow the MSIF gain of the
innovation covariance, optionally completed with a correction rate for the
unmeasured states.

With an innovation gate, the part of an innovation beyond the gate skips the
dt-scaled drive and is loaded into the membranes in one step through the
measured-state gain. The population absorbs it at once and the following
measurement takes it out again.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from django.conf import settings

from core.exceptions import ConfigurationError, DomainError, InstabilityError
from dynamics.plant import LtiModel
from filters.estimators import gate_innovation, msif_gain
from regulator.lqr import DesiredState

from .decoders import DecoderPair

logger = logging.getLogger(__name__)


class StaticWeights(NamedTuple):
    F: np.ndarray
    Omega_s: np.ndarray
    Omega_f: np.ndarray
    Omega_c: np.ndarray
    Omega_bar: np.ndarray
    Omega_bar_f: np.ndarray


@dataclass
class SpikeRecord:
    """Neurons (with multiplicity, in firing order) that spiked at ``step``"""
    step: int
    neurons: tuple = ()

    @property
    def count(self) -> int:
        return len(self.neurons)


def thresholds(D, nu: float, mu: float, lam: float) -> np.ndarray:
    """T_i = (||D_i||^2 + nu lam + mu lam^2) / 2"""
    if nu < 0 or mu < 0:
        raise DomainError(f"nu and mu must be nonnegative, got nu={nu}, mu={mu}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    D = np.atleast_2d(D)
    return 0.5 * (np.sum(D * D, axis=0) + nu * lam + mu * lam ** 2)


def synthesize_static_weights(model_hat: LtiModel, K_c, D, D_bar, lam: float, mu: float) -> StaticWeights:
    D = np.atleast_2d(D)
    D_bar = np.atleast_2d(D_bar)
    K_c = np.atleast_2d(K_c)
    N = D.shape[1]
    cost = mu * lam ** 2 * np.eye(N)
    BK = model_hat.B @ K_c
    return StaticWeights(
        F=D.T @ model_hat.B,
        Omega_s=D.T @ (model_hat.A + lam * np.eye(model_hat.n_x)) @ D,
        Omega_f=-(D.T @ D + cost),
        Omega_c=-D.T @ BK @ D,
        Omega_bar=D.T @ BK @ D_bar,
        Omega_bar_f=-(D_bar.T @ D_bar + cost),
    )


def update_adaptive_weights(P_zz, C, D, delta: float, unmeasured=None) -> tuple[np.ndarray, np.ndarray]:
    """
    Omega_k = -D^T G C D and F_k = D^T G with G the MSIF gain, plus the
    ``unmeasured`` gain rows when given
    """
    G = msif_gain(P_zz, C, delta)
    if unmeasured is not None:
        G = G + np.atleast_2d(unmeasured)
    F_k = np.atleast_2d(D).T @ G
    Omega_k = -F_k @ (np.atleast_2d(C) @ D)
    return Omega_k, F_k


@dataclass
class SpikingNetwork:
    D: np.ndarray
    D_bar: np.ndarray
    K_c: np.ndarray
    T: np.ndarray
    F: np.ndarray
    Omega_s: np.ndarray
    Omega_f: np.ndarray
    Omega_c: np.ndarray
    Omega_bar: np.ndarray
    Omega_bar_f: np.ndarray
    Omega_k: np.ndarray
    F_k: np.ndarray
    C: np.ndarray
    lam: float
    mu: float
    nu: float
    eta_std: float = 0.0
    concurrent: bool = True
    sigma: np.ndarray = field(default=None)
    r: np.ndarray = field(default=None)
    silenced: np.ndarray = field(default=None)
    F_post: np.ndarray = field(default=None)
    s_zz: np.ndarray = field(default=None)
    gate: float | None = None
    step: int = 0

    def __post_init__(self):
        if self.sigma is None:
            self.sigma = np.zeros(self.N)
        if self.r is None:
            self.r = np.zeros(self.N)
        if self.silenced is None:
            self.silenced = np.zeros(self.N, dtype=bool)

    @property
    def N(self) -> int:
        return self.D.shape[1]

    @property
    def live(self) -> np.ndarray:
        return ~self.silenced

    @classmethod
    def synthesize(cls, model_hat: LtiModel, K_c, decoders: DecoderPair, lam: float, mu: float, nu: float,
                   eta_std: float = 0.0, concurrent: bool = True) -> 'SpikingNetwork':
        """
        Build a network at rest (sigma = r = 0, adaptive weights zero).

        With ``concurrent=False`` the network is a pure estimator: control
        coupling and the desired-state decoder are switched off and the
        control input reaches the network through F u instead.
        """
        if eta_std < 0:
            raise DomainError(f"eta_std must be nonnegative, got {eta_std}")
        D, D_bar = decoders.D, decoders.D_bar
        N = D.shape[1]
        if not concurrent:
            D_bar = np.zeros_like(D_bar)
        weights = synthesize_static_weights(model_hat, K_c, D, D_bar, lam, mu)
        if not concurrent:
            weights = weights._replace(Omega_c=np.zeros((N, N)), Omega_bar=np.zeros((N, N)),
                                       Omega_bar_f=np.zeros((N, N)))
        net = cls(
            D=D, D_bar=D_bar, K_c=np.atleast_2d(K_c), T=thresholds(D, nu, mu, lam),
            **weights._asdict(),
            Omega_k=np.zeros((N, N)), F_k=np.zeros((N, model_hat.n_z)), C=model_hat.C,
            lam=lam, mu=mu, nu=nu, eta_std=eta_std, concurrent=concurrent,
        )
        logger.info(f"Synthesized {'concurrent' if concurrent else 'estimator'} network: N={N}, "
                    f"lambda={lam}, mu={mu}, nu={nu}, mean threshold={net.T.mean():.4g}")
        return net

    def adapt(self, P_zz, C, delta: float, unmeasured=None, gate: float | None = None):
        """Refresh the adaptive weights from P_zz; ``gate`` enables the one-step excess update"""
        self.Omega_k, self.F_k = update_adaptive_weights(P_zz, C, self.D, delta, unmeasured)
        self.C = np.atleast_2d(C)
        self.gate = gate
        if gate is not None:
            self.F_post = self.D.T @ msif_gain(P_zz, C, delta)
            self.s_zz = np.atleast_2d(P_zz)


def fire(net: SpikingNetwork) -> list[int]:
    """
    Greedy firing loop: while a live neuron is above threshold, the one
    with the largest margin (lowest index on ties) spikes and its fast
    weights act immediately.

    Neurons that have not spiked yet in this call go first; a neuron fires
    again only once no fresh neuron is above threshold.
    """
    fast = net.Omega_f + net.Omega_bar_f
    limit = net.N * settings.SPIKEREG_FIRING_KMAX
    fired = []
    fresh = net.live.copy()
    margin = net.sigma - net.T
    margin[net.silenced] = -np.inf
    while True:
        candidates = np.where(fresh & (margin > 0), margin, -np.inf)
        i = int(np.argmax(candidates))
        if candidates[i] == -np.inf:
            i = int(np.argmax(margin))
        if margin[i] <= 0:
            break
        if len(fired) >= limit:
            logger.error(f"Firing loop exceeded {limit} spikes at step {net.step}")
            raise InstabilityError(f"firing loop exceeded {limit} spikes", step=net.step)
        net.sigma += fast[:, i]
        net.r[i] += 1.0
        fresh[i] = False
        fired.append(i)
        margin = net.sigma - net.T
        margin[net.silenced] = -np.inf
    net.sigma[net.silenced] = 0.0
    return fired


def encode_initial_state(net: SpikingNetwork, x_hat0, desired: DesiredState) -> SpikeRecord:
    """Load x_hat0 into a resting network so that D r approximates it with r >= 0"""
    net.r = np.zeros(net.N)
    net.sigma = net.D.T @ np.asarray(x_hat0, dtype=float)
    if net.concurrent:
        net.sigma += net.D_bar.T @ desired.x_D
    net.sigma[net.silenced] = 0.0
    fired = fire(net)
    logger.debug(f"Initial encoding fired {len(fired)} spikes")
    return SpikeRecord(step=net.step, neurons=tuple(fired))


def network_step(net: SpikingNetwork, z, desired: DesiredState, dt: float, rng: np.random.Generator | None = None,
                 u=None) -> tuple[SpikingNetwork, SpikeRecord]:
    """
    Advance the network by one step: drift, rate decay, greedy firing, clamp.

    ``u`` is only used by the estimator-only network, which receives the
    externally computed control through F u. When the network carries a
    gate, the innovation z - C D r beyond it is taken out of the drift and
    applied to the membranes as a single update through F_post.
    """
    net.step += 1
    z = np.atleast_1d(np.asarray(z, dtype=float))

    excess = None
    if net.gate is not None:
        _, excess = gate_innovation(z - net.C @ (net.D @ net.r), net.s_zz, net.gate)
        if not np.any(excess):
            excess = None

    recurrent = net.Omega_c + net.Omega_bar + net.Omega_s + net.Omega_k
    drive = -net.lam * net.sigma + recurrent @ net.r + net.F_k @ z
    if excess is not None:
        drive -= net.F_k @ excess
    if net.concurrent:
        drive += net.D_bar.T @ (desired.x_D_dot + net.lam * desired.x_D)
    if u is not None and not net.concurrent:
        drive += net.F @ np.atleast_1d(np.asarray(u, dtype=float))
    net.sigma = net.sigma + dt * drive
    if excess is not None:
        net.sigma += net.F_post @ excess
        logger.debug(f"Step {net.step}: innovation excess {np.array2string(excess, precision=3)}")
    if net.eta_std > 0:
        net.sigma += rng.normal(0.0, net.eta_std * np.sqrt(dt), size=net.N)

    net.r = (1.0 - net.lam * dt) * net.r

    if not np.all(np.isfinite(net.sigma)):
        logger.error(f"Non-finite membrane potential at step {net.step}")
        raise InstabilityError("non-finite membrane potential", step=net.step)

    fired = fire(net)
    if fired:
        logger.debug(f"Step {net.step}: {len(fired)} spikes")
    return net, SpikeRecord(step=net.step, neurons=tuple(fired))


def decode_state(D, r) -> np.ndarray:
    return np.atleast_2d(D) @ np.asarray(r, dtype=float)


def decode_control(K_c, D, D_bar, r) -> np.ndarray:
    """u = -K_c (D - D_bar) r"""
    return -np.atleast_2d(K_c) @ ((np.atleast_2d(D) - np.atleast_2d(D_bar)) @ np.asarray(r, dtype=float))


def spike_cost(x_true, x_hat, r, nu: float, mu: float, dt: float) -> float:
    """dt (||x - x_hat||^2 + nu ||r||_1 + mu ||r||^2)"""
    err = np.asarray(x_true, dtype=float) - np.asarray(x_hat, dtype=float)
    r = np.asarray(r, dtype=float)
    return float(dt * (err @ err + nu * np.abs(r).sum() + mu * r @ r))


def coding_objective(D, x, r, nu: float, mu: float, lam: float) -> float:
    """||x - D r||^2 + nu lam ||r||_1 + mu lam^2 ||r||^2"""
    r = np.asarray(r, dtype=float)
    err = np.asarray(x, dtype=float) - np.atleast_2d(D) @ r
    return float(err @ err + nu * lam * np.abs(r).sum() + mu * lam ** 2 * r @ r)


def silence_neurons(net: SpikingNetwork, mask) -> SpikingNetwork:
    """Permanently remove the masked neurons from firing; their rates keep decaying"""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (net.N,):
        raise ConfigurationError(f"silence mask must have length {net.N}, got {mask.shape}")
    silenced = net.silenced | mask
    if silenced.all():
        raise ConfigurationError("cannot silence every neuron")
    if mask.any():
        logger.info(f"Silencing {int(mask.sum())} neurons at step {net.step} "
                    f"({int(silenced.sum())}/{net.N} now silent)")
    net.silenced = silenced
    net.sigma[silenced] = 0.0
    return net


def raster_pairs(raster) -> np.ndarray:
    """(step, neuron) rows, one per spike"""
    pairs = [(record.step, neuron) for record in raster for neuron in record.neurons]
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)
