"""
Scenario builders for the two case studies.

- workbench: double-integrator regulation problem (2 states, position measured)
- cw: Clohessy-Wiltshire rendezvous about a circular target orbit (6 states)
"""

import logging

import numpy as np
from django.db import models
from pydantic import BaseModel

from core.exceptions import ConfigurationError, DomainError

from .plant import LtiModel

logger = logging.getLogger(__name__)

MU_EARTH = 3.986004418e14   # m^3/s^2
LEO_RADIUS = 6.771e6        # m, 400 km altitude


class Scenario(models.TextChoices):
    WORKBENCH = 'workbench', 'Linear workbench'
    CW = 'cw', 'Clohessy-Wiltshire rendezvous'


class CwVariant(models.TextChoices):
    PUBLISHED = 'published', 'Velocity coupling (as published)'
    STANDARD = 'standard', 'Textbook displacement coupling'


class CwParams(BaseModel):
    """Target orbit parameters; ``n`` is derived"""
    mu_earth: float = MU_EARTH
    R_o: float = LEO_RADIUS

    @property
    def n(self) -> float:
        return mean_motion(self)


def mean_motion(params: CwParams) -> float:
    """n = sqrt(mu_earth / R_o^3) in rad/s"""
    if params.mu_earth <= 0 or params.R_o <= 0:
        raise DomainError(f"mean motion needs mu_earth > 0 and R_o > 0, got {params.mu_earth}, {params.R_o}")
    return float(np.sqrt(params.mu_earth / params.R_o ** 3))


def build_workbench(as_printed: bool = False) -> LtiModel:
    """
    Workbench double integrator with Q = I/1000, R = I/100, dt = 0.01.

    ``as_printed`` swaps in the dynamics matrix [[0, 0], [0, 1]], which is not
    stabilizable from B = [0, 1]^T; it is kept for documentation only.
    """
    if as_printed:
        A = [[0.0, 0.0], [0.0, 1.0]]
    else:
        A = [[0.0, 1.0], [0.0, 0.0]]
    return LtiModel(
        A=A,
        B=[[0.0], [1.0]],
        C=[[1.0, 0.0]],
        Q=np.eye(2) / 1000,
        R=np.eye(1) / 100,
        dt=0.01,
    )


def cw_dynamics(n: float, variant: str = CwVariant.PUBLISHED) -> np.ndarray:
    """6x6 dynamics matrix for state [x, y, z, vx, vy, vz]"""
    A = np.zeros((6, 6))
    A[0:3, 3:6] = np.eye(3)
    if variant == CwVariant.PUBLISHED:
        A[3, 5] = 2 * n
        A[4, 4] = -n ** 2
        A[5, 3] = -2 * n
        A[5, 5] = 2 * n ** 2
    elif variant == CwVariant.STANDARD:
        A[3, 5] = 2 * n
        A[4, 1] = -n ** 2
        A[5, 3] = -2 * n
        A[5, 2] = 3 * n ** 2
    else:
        raise ConfigurationError(f"Unknown CW variant: {variant}")
    return A


def build_cw(n: float | None = None, dt: float = 0.1, Q=None, R=None, C=None,
             variant: str = CwVariant.PUBLISHED) -> LtiModel:
    """
    Rendezvous model; thrust accelerations [f_x, f_y, f_z] drive the velocities.

    Defaults: n from a 400 km circular orbit, Q = 1e-12 I6, position-only
    measurement C = [I3 | 0] with R = 1e-2 I3.
    """
    if n is None:
        n = CwParams().n
    if n <= 0:
        raise DomainError(f"mean motion must be positive, got {n}")
    if C is None:
        C = np.hstack([np.eye(3), np.zeros((3, 3))])
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if Q is None:
        Q = 1e-12 * np.eye(6)
    if R is None:
        R = 1e-2 * np.eye(C.shape[0])
    return LtiModel(
        A=cw_dynamics(n, variant),
        B=np.vstack([np.zeros((3, 3)), np.eye(3)]),
        C=C,
        Q=Q,
        R=R,
        dt=dt,
    )


SCENARIO_BUILDERS = {
    Scenario.WORKBENCH: build_workbench,
    Scenario.CW: build_cw,
}


def build_scenario(name: str, **kwargs) -> LtiModel:
    """Look up a scenario builder by name ("workbench", "cw")"""
    try:
        builder = SCENARIO_BUILDERS[Scenario(name)]
    except ValueError:
        raise ConfigurationError(f"Unknown scenario: {name!r}") from None
    model = builder(**kwargs)
    logger.info(f"Built scenario {name}: n_x={model.n_x}, n_u={model.n_u}, n_z={model.n_z}, dt={model.dt}")
    return model


def is_controllable(A, B) -> bool:
    """Rank test on the controllability matrix [B, AB, ..., A^(n-1) B]"""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.linalg.matrix_rank(np.hstack(blocks)) == A.shape[0]
