"""Forward kinematics, Jacobians and the passive-active holonomy.

An arm whose first joint is passive and which starts at rest keeps the
generalised momentum of that joint at zero, ``M11 qdot1 + M12 qdot2 = 0``.
The constraint integrates in closed form to ``q1 = f(q2)``, so the end
effector moves along a curve parametrised by the actuated angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .dynamics import AlphaParams, JointState, ManipulatorParams
from .errors import AssumptionViolation, BranchDomainError

__all__ = [
    "BasePose",
    "HolonomicBranch",
    "fk",
    "jacobian",
    "holonomic_branch",
    "f_of_q2",
    "continuous_arctan",
    "reduced_jacobian",
    "augmented_jacobian",
    "singularity_function",
    "find_singularities",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class BasePose:
    x0: np.ndarray

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(2)
        if not np.all(np.isfinite(x0)):
            raise ValueError(f"base position must be finite, got {x0}")
        x0.flags.writeable = False
        object.__setattr__(self, "x0", x0)


@dataclass(frozen=True)
class HolonomicBranch:
    """Constants of the curve ``q1 = f(q2)`` for one passive-active arm."""

    gamma: float
    rho: float
    eta: float
    q0: JointState
    k: int = 0

    def branch_index(self, q2: float) -> int:
        return math.floor((q2 + math.pi) / TWO_PI)


def fk(params: ManipulatorParams, q, base: BasePose | None = None) -> np.ndarray:
    """End-effector position; the arm points along +y at ``q = (0, 0)``."""
    q1, q2 = q
    x = np.array(
        [
            -params.L1 * math.sin(q1) - params.L2 * math.sin(q1 + q2),
            params.L1 * math.cos(q1) + params.L2 * math.cos(q1 + q2),
        ]
    )
    if base is not None:
        x += base.x0
    return x


def jacobian(params: ManipulatorParams, q) -> np.ndarray:
    q1, q2 = q
    c1, s1 = math.cos(q1), math.sin(q1)
    c12, s12 = math.cos(q1 + q2), math.sin(q1 + q2)
    L1, L2 = params.L1, params.L2
    return np.array(
        [
            [-L1 * c1 - L2 * c12, -L2 * c12],
            [-L1 * s1 - L2 * s12, -L2 * s12],
        ]
    )


def continuous_arctan(rho: float, q2: float) -> float:
    """``arctan(rho * tan(q2/2))`` continued through the poles of tan.

    Equals the principal value on ``(-pi, pi)`` and gains ``pi`` per period,
    which is the ``k*pi`` correction of the per-branch closed form.
    """
    k = math.floor((q2 + math.pi) / TWO_PI)
    r = q2 - k * TWO_PI
    return math.atan2(rho * math.sin(0.5 * r), math.cos(0.5 * r)) + k * math.pi


def holonomic_branch(alpha: AlphaParams, q0: JointState) -> HolonomicBranch:
    if not q0.at_rest:
        raise AssumptionViolation(
            f"passive-active arm must start at rest (stationary start), got qdot0={q0.qdot.tolist()}"
        )
    if abs(q0.q[1]) > math.pi:
        raise BranchDomainError(f"initial actuated angle q2={q0.q[1]!r} outside [-pi, pi]")
    a1, a2, a3 = alpha.alpha1, alpha.alpha2, alpha.alpha3
    s = a1 + a2
    gamma = (a2 - a1) / math.sqrt(s * s - 4.0 * a3 * a3)
    rho = math.sqrt((s - 2.0 * a3) / (s + 2.0 * a3))
    q1_0, q2_0 = float(q0.q[0]), float(q0.q[1])
    eta = 0.5 * q2_0 + q1_0 + gamma * continuous_arctan(rho, q2_0)
    return HolonomicBranch(gamma=gamma, rho=rho, eta=eta, q0=q0)


def f_of_q2(branch: HolonomicBranch, q2: float) -> float:
    """Passive angle on the holonomy curve through the branch's start state."""
    return -0.5 * q2 - branch.gamma * continuous_arctan(branch.rho, q2) + branch.eta


def reduced_jacobian(alpha: AlphaParams, params: ManipulatorParams, q) -> np.ndarray:
    """End-effector velocity per unit actuated rate along the holonomy curve."""
    c2 = math.cos(q[1])
    m11 = alpha.alpha1 + alpha.alpha2 + 2.0 * alpha.alpha3 * c2
    m12 = alpha.alpha2 + alpha.alpha3 * c2
    J = jacobian(params, q)
    ratio = m12 / m11
    return np.array([J[0, 1] - J[0, 0] * ratio, J[1, 1] - J[1, 0] * ratio])


def augmented_jacobian(alpha: AlphaParams, params: ManipulatorParams, q) -> np.ndarray:
    """Square completion of the reduced Jacobian; singular iff ``Jb1 * Jb2 == 0``."""
    jb1, jb2 = reduced_jacobian(alpha, params, q)
    return np.array([[jb1, jb2], [jb1, -jb2]])


def singularity_function(alpha: AlphaParams, params: ManipulatorParams, branch: HolonomicBranch):
    """``g(q2) = Jb1 * Jb2`` evaluated on the holonomy curve."""

    def g(q2: float) -> float:
        jb = reduced_jacobian(alpha, params, (f_of_q2(branch, q2), q2))
        return float(jb[0] * jb[1])

    return g


def find_singularities(
    alpha: AlphaParams,
    params: ManipulatorParams,
    branch: HolonomicBranch,
    interval=(-math.pi, math.pi),
    step: float = 1e-3,
    xtol: float = 1e-9,
) -> list[float]:
    """Roots of ``Jb1 * Jb2`` on the holonomy curve inside ``interval``.

    Scans a uniform grid for sign changes and refines each bracket by
    bisection. Grid points where ``g`` is exactly zero are returned as is.
    Roots of even multiplicity (no sign change) are not detected.
    """
    lo, hi = map(float, interval)
    if not hi > lo:
        raise ValueError(f"empty interval {interval}")
    g = singularity_function(alpha, params, branch)
    n = max(1, math.ceil((hi - lo) / step))
    grid = np.linspace(lo, hi, n + 1)
    values = [g(q2) for q2 in grid]
    roots: list[float] = []
    for i in range(n):
        a, b = grid[i], grid[i + 1]
        ga, gb = values[i], values[i + 1]
        if ga == 0.0:
            if i > 0:
                roots.append(float(a))
            continue
        if ga * gb < 0.0:
            roots.append(float(bisect(g, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)))
    return roots
