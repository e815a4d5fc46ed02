"""SVG plots of a run: end-effector paths, edge errors, Lyapunov value, joints."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .kinematics import f_of_q2, fk
from .sim import TrajectoryLog


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_svg_plots(log: TrajectoryLog, out_dir) -> list[Path]:
    plt = _pyplot()
    out = Path(out_dir)
    net = log.scenario.network
    paths = []

    fig, ax = plt.subplots(figsize=(6, 5))
    for i, agent in enumerate(net.agents):
        (line,) = ax.plot(log.x[:, i, 0], log.x[:, i, 1], lw=1.2, label=f"arm {i + 1} ({agent.mode})")
        ax.plot(*log.x[0, i], "x", color=line.get_color())
        ax.plot(*log.x[-1, i], "o", mfc="none", color=line.get_color())
        if agent.is_pa:
            q2 = log.q[:, i, 1]
            grid = np.linspace(q2.min() - 0.3, q2.max() + 0.3, 200)
            curve = np.array([fk(agent.params, (f_of_q2(agent.branch, s), s), agent.base) for s in grid])
            ax.plot(curve[:, 0], curve[:, 1], "--", lw=0.8, color=line.get_color())
    for t, h in net.formation.edges:
        ax.plot(*zip(log.x[-1, t - 1], log.x[-1, h - 1]), ":", color="0.5", lw=0.8)
    ax.set_xlabel("X (m)")
    ax.set_ylabel("Y (m)")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=8)
    paths.append(out / "paths.svg")
    fig.savefig(paths[-1])
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 3.5))
    for k in range(log.e.shape[1]):
        t, h = net.formation.edges[k]
        ax.plot(log.t, log.e[:, k], label=f"e_{k + 1} ({t},{h})")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("e (m²)")
    ax.legend(fontsize=8)
    paths.append(out / "edge_errors.svg")
    fig.savefig(paths[-1])
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(log.t, np.maximum(log.U, 1e-300))
    ax.set_xlabel("t (s)")
    ax.set_ylabel("U")
    paths.append(out / "lyapunov.svg")
    fig.savefig(paths[-1])
    plt.close(fig)

    fig, (a1, a2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    for i in range(net.n):
        for j in range(2):
            a1.plot(log.t, log.q[:, i, j], label=f"q{i + 1},{j + 1}")
            a2.plot(log.t, log.qdot[:, i, j])
    a1.set_ylabel("q (rad)")
    a2.set_ylabel("dq (rad/s)")
    a2.set_xlabel("t (s)")
    a1.legend(fontsize=7, ncol=4)
    paths.append(out / "joints.svg")
    fig.savefig(paths[-1])
    plt.close(fig)
    return paths
