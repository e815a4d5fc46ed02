"""Distance-based formation graph: incidence matrix, edge errors, potential.

Vertices are numbered from 1 in :class:`FormationSpec` to match the usual
graph notation; all arrays returned here are zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ScenarioError

__all__ = [
    "FormationSpec",
    "EdgeState",
    "incidence_matrix",
    "edge_state",
    "potential",
    "gradient",
    "rigidity_matrix",
    "rigidity_rank",
]


@dataclass(frozen=True)
class FormationSpec:
    """Ordered edges ``(tail, head)`` and one desired distance per edge."""

    n_agents: int
    edges: tuple
    d_star: tuple

    def __post_init__(self):
        edges = tuple((int(t), int(h)) for t, h in self.edges)
        d_star = tuple(float(d) for d in self.d_star)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "d_star", d_star)
        if self.n_agents < 1:
            raise ScenarioError(f"need at least one agent, got n_agents={self.n_agents}")
        if len(edges) != len(d_star):
            raise ScenarioError(f"{len(edges)} edges but {len(d_star)} desired distances")
        for k, (t, h) in enumerate(edges, start=1):
            if t == h:
                raise ScenarioError(f"edge {k} is a self-loop on vertex {t}")
            for v in (t, h):
                if not 1 <= v <= self.n_agents:
                    raise ScenarioError(f"edge {k} references vertex {v}, not in [1, {self.n_agents}]")
        for k, d in enumerate(d_star, start=1):
            if not (np.isfinite(d) and d > 0):
                raise ScenarioError(f"desired distance of edge {k} must be > 0, got {d}")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def tails(self) -> np.ndarray:
        return np.array([t - 1 for t, _ in self.edges], dtype=int)

    @property
    def heads(self) -> np.ndarray:
        return np.array([h - 1 for _, h in self.edges], dtype=int)

    def incident_edges(self, agent: int) -> list[int]:
        """Zero-based indices of edges touching the zero-based ``agent``."""
        return [k for k, (t, h) in enumerate(self.edges) if agent + 1 in (t, h)]

    def neighbours(self, agent: int) -> set[int]:
        out = set()
        for t, h in self.edges:
            if t == agent + 1:
                out.add(h - 1)
            elif h == agent + 1:
                out.add(t - 1)
        return out


@dataclass(frozen=True)
class EdgeState:
    z: np.ndarray  # (|E|, 2) relative displacements x_tail - x_head
    e: np.ndarray  # (|E|,) squared-distance errors


def incidence_matrix(spec: FormationSpec) -> np.ndarray:
    B = np.zeros((spec.n_agents, spec.n_edges))
    for k, (t, h) in enumerate(spec.edges):
        B[t - 1, k] = 1.0
        B[h - 1, k] = -1.0
    return B


def _positions(spec: FormationSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(spec.n_agents, 2)


def edge_state(spec: FormationSpec, x) -> EdgeState:
    """Relative displacements and errors for a stacked ``2N`` (or ``(N, 2)``) position."""
    p = _positions(spec, x)
    z = p[spec.tails] - p[spec.heads]
    d2 = np.square(np.asarray(spec.d_star))
    e = np.einsum("ij,ij->i", z, z) - d2
    return EdgeState(z=z, e=e)


def potential(e) -> float:
    e = np.asarray(e, dtype=float)
    return 0.5 * float(e @ e)


def gradient(spec: FormationSpec, x) -> np.ndarray:
    """Stacked gradient of the potential with respect to every end-effector position.

    Agent ``i`` only accumulates terms of its incident edges, in edge order.
    """
    es = edge_state(spec, x)
    g = 2.0 * es.z * es.e[:, None]
    out = np.zeros((spec.n_agents, 2))
    np.add.at(out, spec.tails, g)
    np.subtract.at(out, spec.heads, g)
    return out.reshape(-1)


def rigidity_matrix(spec: FormationSpec, x) -> np.ndarray:
    """Jacobian of the squared-length edge function, shape ``(|E|, 2N)``."""
    es = edge_state(spec, x)
    R = np.zeros((spec.n_edges, 2 * spec.n_agents))
    for k, (t, h) in enumerate(spec.edges):
        R[k, 2 * (t - 1) : 2 * t] = 2.0 * es.z[k]
        R[k, 2 * (h - 1) : 2 * h] = -2.0 * es.z[k]
    return R


def rigidity_rank(spec: FormationSpec, x, rtol: float = 1e-9) -> int:
    """Numerical rank of the rigidity matrix; ``2N - 3`` means infinitesimally rigid."""
    R = rigidity_matrix(spec, x)
    if R.size == 0:
        return 0
    s = np.linalg.svd(R, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))
