"""
Continuous-time linear plant models and their noisy propagation.

    x_dot = A x + B u + w,    w ~ N(0, Q)
    z     = C x + d,          d ~ N(0, R)

The truth plant is stepped with Euler-Maruyama; the design model used by
estimators and controllers is a separate LtiModel (see ``LtiModel.scaled``).
"""

import logging
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from core.exceptions import DomainError

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10


class LtiModel(BaseModel):
    """Linear time-invariant plant shared by truth simulation and designs"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    dt: float

    @field_validator('A', 'B', 'C', 'Q', 'R', mode='before')
    @classmethod
    def as_matrix(cls, value):
        return np.atleast_2d(np.asarray(value, dtype=float))

    @model_validator(mode='after')
    def check_consistency(self):
        n_x = self.A.shape[0]
        if self.A.shape != (n_x, n_x):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n_x:
            raise ValueError(f"B has {self.B.shape[0]} rows, expected {n_x}")
        if self.C.shape[1] != n_x:
            raise ValueError(f"C has {self.C.shape[1]} columns, expected {n_x}")
        n_z = self.C.shape[0]
        if self.Q.shape != (n_x, n_x):
            raise ValueError(f"Q must be {n_x}x{n_x}, got {self.Q.shape}")
        if self.R.shape != (n_z, n_z):
            raise ValueError(f"R must be {n_z}x{n_z}, got {self.R.shape}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        for name in ('Q', 'R'):
            matrix = getattr(self, name)
            if not np.allclose(matrix, matrix.T, atol=SYMMETRY_TOL):
                raise ValueError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(self.Q).min() < -SYMMETRY_TOL:
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(self.R).min() <= 0:
            raise ValueError("R must be positive definite")
        return self

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_z(self) -> int:
        return self.C.shape[0]

    def scaled(self, alpha: float) -> 'LtiModel':
        """Design model with A_hat = alpha * A; B, C, Q, R and dt unchanged"""
        if not alpha > 0:
            raise DomainError(f"model scale must be positive, got {alpha}")
        return self.model_copy(update={'A': alpha * self.A})


@dataclass
class PlantState:
    """True plant state at time t"""
    x: np.ndarray
    t: float = 0.0


def step_plant(model: LtiModel, state: PlantState, u, rng: np.random.Generator | None = None,
               noise_on: bool = True) -> PlantState:
    """
    One Euler-Maruyama step of the truth plant.

    Process noise is w_k ~ N(0, Q dt). ``model`` must be the true model;
    uncertainty injection only ever touches the design copy.
    """
    x = np.asarray(state.x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    x_next = x + model.dt * (model.A @ x + model.B @ u)
    if noise_on:
        x_next = x_next + rng.multivariate_normal(np.zeros(model.n_x), model.Q * model.dt, method='eigh')
    return PlantState(x=x_next, t=state.t + model.dt)


def measure(model: LtiModel, x, rng: np.random.Generator | None = None, noise_on: bool = True,
            outlier_scale: float = 1.0) -> np.ndarray:
    """z = C x + outlier_scale * d with d ~ N(0, R)"""
    if outlier_scale < 1:
        raise DomainError(f"outlier_scale must be >= 1, got {outlier_scale}")
    z = model.C @ np.asarray(x, dtype=float)
    if noise_on:
        d = rng.multivariate_normal(np.zeros(model.n_z), model.R, method='eigh')
        z = z + outlier_scale * d
    return z
