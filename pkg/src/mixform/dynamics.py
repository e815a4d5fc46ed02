"""Euler-Lagrange model of a planar two-link arm moving in a horizontal plane.

No gravity, no friction. The inertial structure is carried by three lumped
parameters ``alpha1, alpha2, alpha3`` from which the mass and Coriolis
matrices follow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericInputError, ParameterError

__all__ = [
    "ManipulatorParams",
    "AlphaParams",
    "JointState",
    "alphas",
    "mass_matrix",
    "mass_matrix_derivative",
    "coriolis_matrix",
    "forward_dynamics",
    "skew_residual",
    "kinetic_energy",
]


@dataclass(frozen=True)
class ManipulatorParams:
    """Physical constants of one arm (SI units).

    ``l1``/``l2`` are the distances from each joint to the centre of mass of
    its link; ``I1``/``I2`` are inertias about those centres of mass.
    """

    m1: float
    m2: float
    I1: float
    I2: float
    L1: float
    L2: float
    l1: float
    l2: float

    def __post_init__(self):
        values = {k: getattr(self, k) for k in ("m1", "m2", "I1", "I2", "L1", "L2", "l1", "l2")}
        for name, value in values.items():
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        for name in ("I1", "I2", "L1", "L2", "l1", "l2"):
            if values[name] <= 0:
                raise ParameterError(f"{name} must be > 0, got {values[name]!r}")
        # massless links are allowed so the decoupled limit can be represented
        for name in ("m1", "m2"):
            if values[name] < 0:
                raise ParameterError(f"{name} must be >= 0, got {values[name]!r}")
        if self.l1 > self.L1:
            raise ParameterError(f"l1={self.l1} exceeds link length L1={self.L1}")
        if self.l2 > self.L2:
            raise ParameterError(f"l2={self.l2} exceeds link length L2={self.L2}")
        # alpha1*alpha2 > alpha3**2 holds for any physical arm, but check anyway
        alphas(self)

    @property
    def alpha(self) -> AlphaParams:
        return alphas(self)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("m1", "m2", "I1", "I2", "L1", "L2", "l1", "l2")}


@dataclass(frozen=True)
class AlphaParams:
    alpha1: float
    alpha2: float
    alpha3: float

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0 and self.alpha3 >= 0):
            raise ParameterError(f"need alpha1, alpha2 > 0 and alpha3 >= 0, got {self}")
        if self.alpha1 * self.alpha2 <= self.alpha3**2:
            raise ParameterError(
                f"mass matrix not positive definite: alpha1*alpha2={self.alpha1 * self.alpha2!r}"
                f" <= alpha3**2={self.alpha3**2!r}"
            )

    @property
    def min_det(self) -> float:
        """Smallest value of ``det M(q2)`` over all ``q2``."""
        return self.alpha1 * self.alpha2 - self.alpha3**2


@dataclass(frozen=True)
class JointState:
    """Joint angles ``q`` (rad) and rates ``qdot`` (rad/s) of one arm."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(2)
        qdot = np.array(self.qdot, dtype=float).reshape(2)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
            raise NumericInputError(f"joint state must be finite, got q={q}, qdot={qdot}")
        q.flags.writeable = False
        qdot.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)

    @property
    def at_rest(self) -> bool:
        return bool(self.qdot[0] == 0.0 and self.qdot[1] == 0.0)


def alphas(params: ManipulatorParams) -> AlphaParams:
    p = params
    return AlphaParams(
        alpha1=p.m1 * p.l1**2 + p.m2 * p.L1**2 + p.I1,
        alpha2=p.m2 * p.l2**2 + p.I2,
        alpha3=p.m2 * p.L1 * p.l2,
    )


def mass_matrix(alpha: AlphaParams, q2: float) -> np.ndarray:
    c2 = math.cos(q2)
    m12 = alpha.alpha2 + alpha.alpha3 * c2
    return np.array(
        [[alpha.alpha1 + alpha.alpha2 + 2.0 * alpha.alpha3 * c2, m12], [m12, alpha.alpha2]]
    )


def mass_matrix_derivative(alpha: AlphaParams, q2: float, q2dot: float) -> np.ndarray:
    """Time derivative of the mass matrix, ``(dM/dq2) * q2dot``."""
    d = -alpha.alpha3 * math.sin(q2) * q2dot
    return np.array([[2.0 * d, d], [d, 0.0]])


def coriolis_matrix(alpha: AlphaParams, state: JointState) -> np.ndarray:
    h = alpha.alpha3 * math.sin(state.q[1])
    qd1, qd2 = state.qdot
    return h * np.array([[-qd2, -qd1 - qd2], [qd1, 0.0]])


def forward_dynamics(alpha: AlphaParams, state: JointState, u) -> np.ndarray:
    """Joint accelerations solving ``M(q) qddot = u - C(q, qdot) qdot``.

    Uses the closed-form inverse of the 2x2 mass matrix, whose determinant
    ``alpha1*alpha2 - alpha3**2 cos(q2)**2`` is bounded away from zero.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (2,) or not np.all(np.isfinite(u)):
        raise NumericInputError(f"torque must be a finite 2-vector, got {u!r}")
    a1, a2, a3 = alpha.alpha1, alpha.alpha2, alpha.alpha3
    c2 = math.cos(state.q[1])
    h = a3 * math.sin(state.q[1])
    qd1, qd2 = state.qdot
    m11 = a1 + a2 + 2.0 * a3 * c2
    m12 = a2 + a3 * c2
    r1 = u[0] + h * (2.0 * qd1 + qd2) * qd2
    r2 = u[1] - h * qd1 * qd1
    det = m11 * a2 - m12 * m12
    return np.array([(a2 * r1 - m12 * r2) / det, (m11 * r2 - m12 * r1) / det])


def skew_residual(alpha: AlphaParams, state: JointState) -> float:
    """Frobenius norm of ``S + S^T`` with ``S = Mdot - 2C``; zero for a consistent model."""
    s = mass_matrix_derivative(alpha, state.q[1], state.qdot[1]) - 2.0 * coriolis_matrix(alpha, state)
    return float(np.linalg.norm(s + s.T))


def kinetic_energy(alpha: AlphaParams, state: JointState) -> float:
    return 0.5 * float(state.qdot @ mass_matrix(alpha, state.q[1]) @ state.qdot)
