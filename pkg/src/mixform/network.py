"""A group of arms sharing one formation graph, plus batched model kernels.

:class:`Network` is the validated description. :class:`NetworkModel`
evaluates kinematics, control and dynamics of all agents at once on
``(N, 2)`` arrays; every per-agent quantity is computed elementwise so an
agent's numbers never depend on its position in the declaration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dynamics import AlphaParams, JointState, ManipulatorParams, alphas
from .errors import AssumptionViolation, BranchDomainError, ScenarioError
from .formation import FormationSpec
from .kinematics import BasePose, HolonomicBranch, holonomic_branch

__all__ = ["FA", "PA", "Agent", "Network", "NetworkModel"]

FA = "fa"
PA = "pa"


@dataclass(frozen=True)
class Agent:
    mode: str
    params: ManipulatorParams
    base: BasePose
    q0: JointState

    def __post_init__(self):
        if self.mode not in (FA, PA):
            raise ScenarioError(f"agent mode must be 'fa' or 'pa', got {self.mode!r}")
        if not isinstance(self.base, BasePose):
            object.__setattr__(self, "base", BasePose(self.base))

    @property
    def alpha(self) -> AlphaParams:
        return alphas(self.params)

    @property
    def is_pa(self) -> bool:
        return self.mode == PA

    @cached_property
    def branch(self) -> HolonomicBranch | None:
        return holonomic_branch(self.alpha, self.q0) if self.is_pa else None


@dataclass(frozen=True)
class Network:
    agents: tuple
    formation: FormationSpec

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if len(self.agents) != self.formation.n_agents:
            raise ScenarioError(
                f"formation declares {self.formation.n_agents} agents, network has {len(self.agents)}"
            )
        for i, agent in enumerate(self.agents, start=1):
            if agent.is_pa:
                if not agent.q0.at_rest:
                    raise AssumptionViolation(
                        f"agent {i}: passive-active arms must start at rest (stationary start);"
                        f" got qdot0={agent.q0.qdot.tolist()}"
                    )
                if abs(agent.q0.q[1]) > math.pi:
                    raise BranchDomainError(
                        f"agent {i}: initial q2={agent.q0.q[1]!r} outside [-pi, pi]"
                    )

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def pa_mask(self) -> np.ndarray:
        return np.array([a.is_pa for a in self.agents])

    @property
    def n_actuated(self) -> int:
        return sum(1 if a.is_pa else 2 for a in self.agents)

    def initial_q(self) -> np.ndarray:
        return np.array([a.q0.q for a in self.agents])

    def initial_qdot(self) -> np.ndarray:
        return np.array([a.q0.qdot for a in self.agents])


@dataclass
class ControlOutput:
    u: np.ndarray  # (N, 2)
    x: np.ndarray  # (N, 2)
    e: np.ndarray  # (|E|,)
    ehat: np.ndarray  # (N, 2)
    margin: np.ndarray  # (N,) |det J| for FA, |Jb1*Jb2| for PA


class NetworkModel:
    """Batched kernels for a fixed :class:`Network`."""

    def __init__(self, network: Network):
        self.network = network
        agents = network.agents
        al = [a.alpha for a in agents]
        self.a1 = np.array([a.alpha1 for a in al])
        self.a2 = np.array([a.alpha2 for a in al])
        self.a3 = np.array([a.alpha3 for a in al])
        self.L1 = np.array([a.params.L1 for a in agents])
        self.L2 = np.array([a.params.L2 for a in agents])
        self.base = np.array([a.base.x0 for a in agents])
        self.pa = network.pa_mask
        self.fa = ~self.pa
        self.any_pa = bool(self.pa.any())
        f = network.formation
        self.tails = f.tails
        self.heads = f.heads
        self.d2 = np.square(np.asarray(f.d_star, dtype=float))
        # padded incident-edge table: agent i sums sign * g[edge] over its own
        # edges in edge order; padding points at an all-zero row
        incident = [f.incident_edges(i) for i in range(network.n)]
        width = max((len(ks) for ks in incident), default=0)
        self.inc_edge = np.full((network.n, width), f.n_edges, dtype=int)
        self.inc_sign = np.zeros((network.n, width, 1))
        for i, ks in enumerate(incident):
            for j, k in enumerate(ks):
                self.inc_edge[i, j] = k
                self.inc_sign[i, j, 0] = 1.0 if f.edges[k][0] == i + 1 else -1.0
        nan = float("nan")
        self.gamma = np.array([a.branch.gamma if a.is_pa else nan for a in agents])
        self.rho = np.array([a.branch.rho if a.is_pa else nan for a in agents])
        self.eta = np.array([a.branch.eta if a.is_pa else nan for a in agents])

    @property
    def n(self) -> int:
        return self.network.n

    def end_effectors(self, q):
        q1 = q[:, 0]
        q12 = q1 + q[:, 1]
        s1, c1 = np.sin(q1), np.cos(q1)
        s12, c12 = np.sin(q12), np.cos(q12)
        x = np.empty_like(q)
        x[:, 0] = -self.L1 * s1 - self.L2 * s12 + self.base[:, 0]
        x[:, 1] = self.L1 * c1 + self.L2 * c12 + self.base[:, 1]
        return x, (s1, c1, s12, c12)

    def edge_errors(self, x):
        z = x[self.tails] - x[self.heads]
        e = z[:, 0] * z[:, 0] + z[:, 1] * z[:, 1] - self.d2
        return z, e

    def gradient(self, z, e):
        g = np.zeros((len(e) + 1, 2))
        g[:-1] = 2.0 * z * e[:, None]
        terms = self.inc_sign * g[self.inc_edge]  # (N, width, 2)
        ehat = np.zeros((self.n, 2))
        for j in range(terms.shape[1]):
            ehat += terms[:, j]
        return ehat

    def _torque(self, q, qd, kp, kd):
        q1 = q[:, 0]
        q12 = q1 + q[:, 1]
        s1, c1 = np.sin(q1), np.cos(q1)
        s12, c12 = np.sin(q12), np.cos(q12)
        J12 = -self.L2 * c12
        J22 = -self.L2 * s12
        J11 = J12 - self.L1 * c1
        J21 = J22 - self.L1 * s1
        x = np.empty_like(q)
        x[:, 0] = J22 + self.base[:, 0] - self.L1 * s1
        x[:, 1] = self.base[:, 1] - J12 + self.L1 * c1
        z, e = self.edge_errors(x)
        ehat = self.gradient(z, e)
        ex, ey = ehat[:, 0], ehat[:, 1]
        u = np.empty_like(q)
        u[:, 0] = -kp * (J11 * ex + J21 * ey) - kd * qd[:, 0]
        u[:, 1] = -kp * (J12 * ex + J22 * ey) - kd * qd[:, 1]
        jb = None
        if self.any_pa:
            c2 = np.cos(q[:, 1])
            ratio = (self.a2 + self.a3 * c2) / (self.a1 + self.a2 + 2.0 * self.a3 * c2)
            jb1 = J12 - J11 * ratio
            jb2 = J22 - J21 * ratio
            pa = self.pa
            u[pa, 0] = 0.0
            u[pa, 1] = (-kp * (jb1 * ex + jb2 * ey) - kd * qd[:, 1])[pa]
            jb = (jb1, jb2)
        return u, x, e, ehat, (J11, J12, J21, J22), jb

    def control(self, q, qd, kp: float, kd: float) -> ControlOutput:
        u, x, e, ehat, (J11, J12, J21, J22), jb = self._torque(q, qd, kp, kd)
        margin = np.abs(J11 * J22 - J12 * J21)
        if jb is not None:
            margin[self.pa] = np.abs(jb[0] * jb[1])[self.pa]
        return ControlOutput(u=u, x=x, e=e, ehat=ehat, margin=margin)

    def accel(self, q, qd, u):
        c2 = np.cos(q[:, 1])
        h = self.a3 * np.sin(q[:, 1])
        qd1, qd2 = qd[:, 0], qd[:, 1]
        m11 = self.a1 + self.a2 + 2.0 * self.a3 * c2
        m12 = self.a2 + self.a3 * c2
        r1 = u[:, 0] + h * (2.0 * qd1 + qd2) * qd2
        r2 = u[:, 1] - h * qd1 * qd1
        det = m11 * self.a2 - m12 * m12
        out = np.empty_like(q)
        out[:, 0] = (self.a2 * r1 - m12 * r2) / det
        out[:, 1] = (m11 * r2 - m12 * r1) / det
        return out

    def momentum(self, q, qd):
        """Generalised momenta ``M(q) qdot``, shape ``(N, 2)``."""
        c2 = np.cos(q[:, 1])
        m11 = self.a1 + self.a2 + 2.0 * self.a3 * c2
        m12 = self.a2 + self.a3 * c2
        out = np.empty_like(qd)
        out[:, 0] = m11 * qd[:, 0] + m12 * qd[:, 1]
        out[:, 1] = m12 * qd[:, 0] + self.a2 * qd[:, 1]
        return out

    def velocity(self, q, p):
        """Joint rates ``M(q)^-1 p``."""
        c2 = np.cos(q[:, 1])
        m11 = self.a1 + self.a2 + 2.0 * self.a3 * c2
        m12 = self.a2 + self.a3 * c2
        det = m11 * self.a2 - m12 * m12
        out = np.empty_like(p)
        out[:, 0] = (self.a2 * p[:, 0] - m12 * p[:, 1]) / det
        out[:, 1] = (m11 * p[:, 1] - m12 * p[:, 0]) / det
        return out

    def momentum_rate(self, q, qd, u):
        """``dp/dt = u - dH/dq``; the first component has no configuration term."""
        h = self.a3 * np.sin(q[:, 1])
        out = np.empty_like(qd)
        out[:, 0] = u[:, 0]
        out[:, 1] = u[:, 1] - h * qd[:, 0] * (qd[:, 0] + qd[:, 1])
        return out

    def kinetic_energy(self, q, qd):
        """Per-agent kinetic energy; leading sample axes broadcast."""
        c2 = np.cos(q[..., 1])
        m11 = self.a1 + self.a2 + 2.0 * self.a3 * c2
        m12 = self.a2 + self.a3 * c2
        qd1, qd2 = qd[..., 0], qd[..., 1]
        return 0.5 * (m11 * qd1 * qd1 + 2.0 * m12 * qd1 * qd2 + self.a2 * qd2 * qd2)

    def passive_momentum(self, q, qd):
        """``M11 qdot1 + M12 qdot2`` per agent (zero along a PA holonomy curve)."""
        c2 = np.cos(q[..., 1])
        return (self.a1 + self.a2 + 2.0 * self.a3 * c2) * qd[..., 0] + (self.a2 + self.a3 * c2) * qd[..., 1]

    def margins(self, q):
        """``|det J|`` for FA agents and ``|Jb1 * Jb2|`` for PA agents; leading axes broadcast."""
        q1 = q[..., 0]
        q12 = q1 + q[..., 1]
        s1, c1 = np.sin(q1), np.cos(q1)
        s12, c12 = np.sin(q12), np.cos(q12)
        J11 = -self.L1 * c1 - self.L2 * c12
        J12 = -self.L2 * c12
        J21 = -self.L1 * s1 - self.L2 * s12
        J22 = -self.L2 * s12
        c2 = np.cos(q[..., 1])
        ratio = (self.a2 + self.a3 * c2) / (self.a1 + self.a2 + 2.0 * self.a3 * c2)
        pa_margin = np.abs((J12 - J11 * ratio) * (J22 - J21 * ratio))
        return np.where(self.pa, pa_margin, np.abs(J11 * J22 - J12 * J21))

    def holonomy_curve(self, q2):
        """Passive angle on each agent's holonomy curve (NaN for FA agents)."""
        k = np.floor((q2 + math.pi) / (2.0 * math.pi))
        r = q2 - 2.0 * math.pi * k
        arc = np.arctan2(self.rho * np.sin(0.5 * r), np.cos(0.5 * r)) + k * math.pi
        return -0.5 * q2 - self.gamma * arc + self.eta

    def actuated_velocity(self, qd):
        """Stacked actuated joint rates: both joints of FA agents, the second of PA agents."""
        parts = [qd[i] if not p else qd[i, 1:] for i, p in enumerate(self.pa)]
        return np.concatenate(parts) if parts else np.zeros(0)
