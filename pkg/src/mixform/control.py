"""Distributed end-effector formation control and its Lyapunov certificate.

Fully-actuated arms apply ``u = -kp J^T ehat_i - kd qdot``. Passive-active
arms only drive the second joint, projecting the local formation gradient
through the reduced Jacobian of their holonomy curve.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dynamics import JointState, mass_matrix
from .formation import EdgeState, edge_state, gradient, potential
from .kinematics import augmented_jacobian, fk, jacobian, reduced_jacobian
from .network import Network

__all__ = [
    "Gains",
    "NetworkState",
    "control_fa",
    "control_pa",
    "agent_torque",
    "network_torques",
    "lyapunov",
    "stationarity_residuals",
]


@dataclass(frozen=True)
class Gains:
    """Shared proportional and damping gains.

    Convergence needs both strictly positive; zero gains are accepted so the
    open-loop plant can be simulated through the same machinery.
    """

    kp: float
    kd: float

    def __post_init__(self):
        for name in ("kp", "kd"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"gain {name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class NetworkState:
    network: Network
    q: np.ndarray  # (N, 2)
    qdot: np.ndarray  # (N, 2)
    t: float = 0.0

    def __post_init__(self):
        n = self.network.n
        object.__setattr__(self, "q", np.array(self.q, dtype=float).reshape(n, 2))
        object.__setattr__(self, "qdot", np.array(self.qdot, dtype=float).reshape(n, 2))

    @classmethod
    def initial(cls, network: Network) -> NetworkState:
        return cls(network, network.initial_q(), network.initial_qdot())

    def joint_state(self, i: int) -> JointState:
        return JointState(self.q[i], self.qdot[i])

    @cached_property
    def x(self) -> np.ndarray:
        """Stacked end-effector positions, length ``2N``."""
        return np.concatenate(
            [fk(a.params, self.q[i], a.base) for i, a in enumerate(self.network.agents)]
        )

    @cached_property
    def edges(self) -> EdgeState:
        return edge_state(self.network.formation, self.x)

    @cached_property
    def e_hat(self) -> np.ndarray:
        """Stacked formation gradient, reshaped to ``(N, 2)``."""
        return gradient(self.network.formation, self.x).reshape(-1, 2)

    @property
    def xi(self) -> np.ndarray:
        parts = [self.qdot[i, 1:] if a.is_pa else self.qdot[i] for i, a in enumerate(self.network.agents)]
        return np.concatenate(parts)


def control_fa(gains: Gains, J, e_hat_i, qdot) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    return -gains.kp * (J.T @ np.asarray(e_hat_i, dtype=float)) - gains.kd * np.asarray(qdot, dtype=float)


def control_pa(gains: Gains, J_bar, e_hat_i, qdot2: float) -> np.ndarray:
    J_bar = np.asarray(J_bar, dtype=float)
    u2 = -gains.kp * float(J_bar @ np.asarray(e_hat_i, dtype=float)) - gains.kd * qdot2
    return np.array([0.0, u2])


def agent_torque(gains: Gains, network: Network, i: int, z, e, q_i, qdot_i) -> np.ndarray:
    """Torque of agent ``i`` from its own joints and its incident edges only.

    ``z`` and ``e`` hold displacement and error for the edges returned by
    ``network.formation.incident_edges(i)``, in that order.
    """
    agent = network.agents[i]
    f = network.formation
    e_hat_i = np.zeros(2)
    for zk, ek, k in zip(z, e, f.incident_edges(i)):
        sign = 1.0 if f.edges[k][0] == i + 1 else -1.0
        e_hat_i += sign * 2.0 * np.asarray(zk) * ek
    if agent.is_pa:
        jb = reduced_jacobian(agent.alpha, agent.params, q_i)
        return control_pa(gains, jb, e_hat_i, qdot_i[1])
    return control_fa(gains, jacobian(agent.params, q_i), e_hat_i, qdot_i)


def network_torques(gains: Gains, state: NetworkState) -> np.ndarray:
    """All agents' torques, shape ``(N, 2)``, evaluated agent by agent."""
    es = state.edges
    out = []
    for i in range(state.network.n):
        idx = state.network.formation.incident_edges(i)
        out.append(agent_torque(gains, state.network, i, es.z[idx], es.e[idx], state.q[i], state.qdot[i]))
    return np.array(out)


def lyapunov(gains: Gains, state: NetworkState) -> float:
    """``kp * V(e) + 0.5 * qdot^T M(q) qdot`` summed over the network."""
    kinetic = 0.0
    for i, agent in enumerate(state.network.agents):
        qd = state.qdot[i]
        kinetic += 0.5 * float(qd @ mass_matrix(agent.alpha, state.q[i, 1]) @ qd)
    return gains.kp * potential(state.edges.e) + kinetic


def stationarity_residuals(state: NetworkState) -> np.ndarray:
    """Per-agent norm that vanishes iff the local formation gradient does.

    Uses ``J^T ehat_i`` for fully-actuated arms and the augmented Jacobian
    for passive-active arms (the reduced Jacobian alone is rank one).
    """
    out = np.empty(state.network.n)
    for i, agent in enumerate(state.network.agents):
        eh = state.e_hat[i]
        if agent.is_pa:
            out[i] = np.linalg.norm(augmented_jacobian(agent.alpha, agent.params, state.q[i]) @ eh)
        else:
            out[i] = np.linalg.norm(jacobian(agent.params, state.q[i]).T @ eh)
    return out
