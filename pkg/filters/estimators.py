"""
Continuous-time Kalman filter and modified sliding innovation filter (MSIF).

Both variants share one covariance pipeline: P follows the Riccati ODE of
the design model, and MSIF only reads it through the innovation covariance

    P_zz  = C P C^T + R
    K_msif = C^+ diag(sat(diag(P_zz) / delta))

The same gain feeds the spiking network's adaptive weights, optionally
completed with a correction for the states C does not see

    L = rate (C A Pi)^+ diag(sat(diag(P_zz) / delta)),   Pi = I - C^+ C

which gives every unmeasured state integral action through the
measurement. Innovations can be gated at a multiple of sqrt(diag(P_zz)).
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from django.db import models
from pydantic import BaseModel, ConfigDict, Field

from core.exceptions import DomainError, SolverError
from dynamics.plant import LtiModel

logger = logging.getLogger(__name__)

DEFAULT_P0_SCALE = 1e-2

# Echoed into every run summary
MODEL_CORRECTIONS = (
    "innovation covariance computed as C P C^T + R",
    "estimator drift uses +B u so the closed loop matches u = -K_c (x_hat - x_D)",
)


class Variant(models.TextChoices):
    KF = 'kf', 'Kalman filter'
    MSIF = 'msif', 'Modified sliding innovation filter'


class MsifConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    delta: float = Field(0.005, gt=0, description="Sliding boundary layer width")
    gate: float | None = Field(None, gt=0, description="Innovation gate in innovation standard deviations")


@dataclass
class FilterState:
    x_hat: np.ndarray
    P: np.ndarray
    t: float = 0.0


def initial_filter_state(x_hat0, scale: float = DEFAULT_P0_SCALE) -> FilterState:
    """x_hat(0) with P(0) = scale * I"""
    x_hat0 = np.asarray(x_hat0, dtype=float)
    if scale < 0:
        raise DomainError(f"initial covariance scale must be nonnegative, got {scale}")
    return FilterState(x_hat=x_hat0.copy(), P=scale * np.eye(x_hat0.size))


def _symmetrize(P):
    return 0.5 * (P + P.T)


def _solve_r(R, M):
    """R^-1 M, raising SolverError for singular R"""
    try:
        return np.linalg.solve(np.atleast_2d(R), M)
    except np.linalg.LinAlgError as e:
        raise SolverError(f"measurement covariance R is singular: {e}") from e


def kf_riccati_step(P, model_hat: LtiModel, dt: float) -> np.ndarray:
    """Euler step of P_dot = A P + P A^T + Q - P C^T R^-1 C P on the design model"""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    A, C = model_hat.A, model_hat.C
    P_dot = A @ P + P @ A.T + model_hat.Q - P @ C.T @ _solve_r(model_hat.R, C @ P)
    return _symmetrize(P + dt * P_dot)


def innovation_covariance(P, C, R) -> np.ndarray:
    P, C, R = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (P, C, R))
    return C @ P @ C.T + R


def kf_gain(P, C, R) -> np.ndarray:
    """K = P C^T R^-1"""
    P, C = np.atleast_2d(P), np.atleast_2d(C)
    return _solve_r(R, C @ P).T


def saturate(v) -> np.ndarray:
    """Clamp nonnegative entries to at most one"""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise DomainError(f"saturate expects nonnegative entries, got min {v.min()}")
    return np.minimum(v, 1.0)


def pseudo_inverse(C) -> np.ndarray:
    return scipy.linalg.pinv(np.atleast_2d(np.asarray(C, dtype=float)))


def msif_gain(P_zz, C, delta: float) -> np.ndarray:
    """C^+ diag(sat(diag(P_zz) / delta))"""
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    weights = saturate(np.diag(np.atleast_2d(P_zz)) / delta)
    return pseudo_inverse(C) @ np.diag(weights)


def unmeasured_state_gain(P_zz, model_hat: LtiModel, delta: float, rate: float) -> np.ndarray:
    """
    Gain rows for the states outside the row space of C.

    Each measured channel corrects the states that drive its derivative
    through A, at ``rate`` (1/s) times the channel's MSIF weight. With a
    saturated unit position gain this places the error poles of a
    position/velocity pair at s^2 + s + rate.
    """
    if rate < 0:
        raise DomainError(f"unmeasured-state rate must be nonnegative, got {rate}")
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    C = model_hat.C
    weights = saturate(np.diag(np.atleast_2d(P_zz)) / delta)
    unseen = np.eye(model_hat.n_x) - pseudo_inverse(C) @ C
    return rate * pseudo_inverse(C @ model_hat.A @ unseen) @ np.diag(weights)


def gate_innovation(innovation, P_zz, gate: float | None) -> tuple[np.ndarray, np.ndarray]:
    """Split an innovation into its part inside +-gate sqrt(diag(P_zz)) and the excess"""
    innovation = np.atleast_1d(np.asarray(innovation, dtype=float))
    if gate is None:
        return innovation, np.zeros_like(innovation)
    if not gate > 0:
        raise DomainError(f"innovation gate must be positive, got {gate}")
    bound = gate * np.sqrt(np.diag(np.atleast_2d(P_zz)))
    inside = np.clip(innovation, -bound, bound)
    return inside, innovation - inside


def estimator_step(fs: FilterState, model_hat: LtiModel, u, z, variant: str = Variant.KF,
                   cfg: MsifConfig | None = None, dt: float | None = None) -> FilterState:
    """
    One Euler step of x_hat_dot = A_hat x_hat + B u + K (z - C x_hat).

    The gain is evaluated from the current P, then P is propagated with
    ``kf_riccati_step`` for either variant. With ``cfg.gate`` set the
    innovation is clipped to +-gate sqrt(diag(P_zz)) first.
    """
    dt = model_hat.dt if dt is None else dt
    u = np.atleast_1d(np.asarray(u, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    C = model_hat.C

    cfg = cfg or MsifConfig()
    P_zz = innovation_covariance(fs.P, C, model_hat.R)
    if variant == Variant.KF:
        K = kf_gain(fs.P, C, model_hat.R)
    elif variant == Variant.MSIF:
        K = msif_gain(P_zz, C, cfg.delta)
    else:
        raise DomainError(f"Unknown filter variant: {variant}")

    innovation, excess = gate_innovation(z - C @ fs.x_hat, P_zz, cfg.gate)
    if np.any(excess):
        logger.debug(f"Innovation gated at t={fs.t:.4g}: excess {np.array2string(excess, precision=3)}")
    x_hat = fs.x_hat + dt * (model_hat.A @ fs.x_hat + model_hat.B @ u + K @ innovation)
    P = kf_riccati_step(fs.P, model_hat, dt)
    return FilterState(x_hat=x_hat, P=P, t=fs.t + dt)
