"""
Continuous-time LQR design.

Gains are computed once per scenario from the design model and never
updated during a run.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from django.conf import settings
from pydantic import BaseModel, ConfigDict

from core.exceptions import DomainError, SolverError
from dynamics.plant import LtiModel

logger = logging.getLogger(__name__)

NEWTON_KLEINMAN_STEPS = 5


def care_residual(A, B, Q_c, R_c, S) -> float:
    """Frobenius norm of A^T S + S A - S B R_c^-1 B^T S + Q_c"""
    A, B, Q_c, R_c, S = (np.atleast_2d(m) for m in (A, B, Q_c, R_c, S))
    lhs = A.T @ S + S @ A - S @ B @ np.linalg.solve(R_c, B.T @ S) + Q_c
    return float(np.linalg.norm(lhs, 'fro'))


def closed_loop_poles(A, B, K_c) -> np.ndarray:
    return np.linalg.eigvals(np.atleast_2d(A) - np.atleast_2d(B) @ np.atleast_2d(K_c))


def _newton_kleinman(A, B, Q_c, R_c, S):
    K = np.linalg.solve(R_c, B.T @ S)
    A_cl = A - B @ K
    S_next = scipy.linalg.solve_continuous_lyapunov(A_cl.T, -(Q_c + K.T @ R_c @ K))
    return 0.5 * (S_next + S_next.T)


def solve_care(A, B, Q_c, R_c) -> np.ndarray:
    """
    Stabilizing solution S of the continuous algebraic Riccati equation.

    The residual must satisfy ||CARE(S)|| <= tol * (1 + ||S||) with tol from
    SPIKEREG_CARE_TOLERANCE; when the direct solve misses it, a few
    Newton-Kleinman steps are taken before giving up.

    Raises:
        SolverError: singular R_c, non-stabilizable pair, or residual
            contract not met.
    """
    A, B, Q_c, R_c = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, Q_c, R_c))
    tolerance = settings.SPIKEREG_CARE_TOLERANCE

    if np.linalg.matrix_rank(R_c) < R_c.shape[0]:
        raise SolverError("R_c is singular")

    try:
        S = scipy.linalg.solve_continuous_are(A, B, Q_c, R_c)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SolverError(f"CARE solve failed: {e}") from e

    S = 0.5 * (S + S.T)
    residual = care_residual(A, B, Q_c, R_c, S)
    bound = tolerance * (1 + np.linalg.norm(S))

    steps = 0
    while residual > bound and steps < NEWTON_KLEINMAN_STEPS:
        logger.warning(f"CARE residual {residual:.3e} above {bound:.3e}, Newton-Kleinman step {steps + 1}")
        try:
            S = _newton_kleinman(A, B, Q_c, R_c, S)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise SolverError(f"Newton-Kleinman refinement failed: {e}", residual=residual) from e
        residual = care_residual(A, B, Q_c, R_c, S)
        bound = tolerance * (1 + np.linalg.norm(S))
        steps += 1

    if not np.isfinite(residual) or residual > bound:
        raise SolverError(f"CARE residual {residual:.3e} exceeds {bound:.3e}", residual=residual)

    K_c = np.linalg.solve(R_c, B.T @ S)
    worst = closed_loop_poles(A, B, K_c).real.max()
    if worst >= 0:
        raise SolverError(f"(A, B) not stabilizable: closed-loop pole at real part {worst:.3e}",
                          residual=residual)
    return S


def lqr_gain(S, B, R_c) -> np.ndarray:
    """K_c = R_c^-1 B^T S"""
    S, B, R_c = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (S, B, R_c))
    try:
        return np.linalg.solve(R_c, B.T @ S)
    except np.linalg.LinAlgError as e:
        raise SolverError(f"R_c is singular: {e}") from e


@dataclass
class DesiredState:
    """Regulation target x_D and its derivative"""
    x_D: np.ndarray
    x_D_dot: np.ndarray

    def __post_init__(self):
        self.x_D = np.asarray(self.x_D, dtype=float)
        self.x_D_dot = np.asarray(self.x_D_dot, dtype=float)
        if self.x_D.shape != self.x_D_dot.shape:
            raise DomainError(f"x_D {self.x_D.shape} and x_D_dot {self.x_D_dot.shape} differ")

    @classmethod
    def zeros(cls, n_x: int) -> 'DesiredState':
        return cls(x_D=np.zeros(n_x), x_D_dot=np.zeros(n_x))


def control_law(K_c, x_hat, desired: DesiredState) -> np.ndarray:
    """u = -K_c (x_hat - x_D)"""
    return -np.atleast_2d(K_c) @ (np.asarray(x_hat, dtype=float) - desired.x_D)


def lqr_cost(xs, us, Q_c, R_c, dt: float) -> float:
    """J_c = sum dt (x^T Q_c x + u^T R_c u) over aligned samples"""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    us = np.asarray(us, dtype=float).reshape(len(xs), -1)
    Q_c = np.atleast_2d(Q_c)
    R_c = np.atleast_2d(R_c)
    state_term = np.einsum('ki,ij,kj->k', xs, Q_c, xs)
    input_term = np.einsum('ki,ij,kj->k', us, R_c, us)
    return float(dt * np.sum(state_term + input_term))


class LqrDesign(BaseModel):
    """Cost weights, Riccati solution and gain for one design model"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    Q_c: np.ndarray
    R_c: np.ndarray
    S: np.ndarray
    K_c: np.ndarray

    @classmethod
    def design(cls, model: LtiModel, Q_c, R_c) -> 'LqrDesign':
        Q_c = np.atleast_2d(np.asarray(Q_c, dtype=float))
        R_c = np.atleast_2d(np.asarray(R_c, dtype=float))
        S = solve_care(model.A, model.B, Q_c, R_c)
        K_c = lqr_gain(S, model.B, R_c)
        poles = closed_loop_poles(model.A, model.B, K_c)
        logger.info(f"LQR gain {np.array2string(K_c, precision=4)}; closed-loop poles {np.round(poles, 6)}")
        return cls(Q_c=Q_c, R_c=R_c, S=S, K_c=K_c)
