"""Fixed-step closed-loop simulation with per-step verification monitors.

The plant is integrated with classical RK4 in joint angles and generalised
momenta ``p = M(q) qdot``. By default the feedback law is
re-evaluated at every RK4 stage, so the scheme integrates the continuous
closed loop. ``hold="step"`` instead samples the torque once per step and
holds it over the four stages, like a digital controller running at
``1/dt``; the held damping term is then only stable while
``dt * kd / inertia < 2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .control import Gains, NetworkState
from .errors import DivergenceError, ScenarioError
from .network import Network, NetworkModel

__all__ = [
    "SimConfig",
    "Scenario",
    "TrajectoryLog",
    "Tolerances",
    "MonitorResult",
    "VerificationReport",
    "step",
    "run",
    "verify_run",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    gains: Gains
    dt: float = 1e-3
    t_final: float = 30.0
    log_stride: int = 1
    monitors: bool = True
    hold: str = "stage"

    def __post_init__(self):
        if self.hold not in ("stage", "step"):
            raise ScenarioError(f"hold must be 'stage' or 'step', got {self.hold!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ScenarioError(f"dt must be > 0, got {self.dt!r}")
        if not (math.isfinite(self.t_final) and self.t_final >= self.dt):
            raise ScenarioError(f"t_final must be >= dt, got t_final={self.t_final!r}, dt={self.dt!r}")
        if int(self.log_stride) != self.log_stride or self.log_stride < 1:
            raise ScenarioError(f"log_stride must be an integer >= 1, got {self.log_stride!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def replace(self, **changes) -> SimConfig:
        fields = dict(
            gains=self.gains, dt=self.dt, t_final=self.t_final,
            log_stride=self.log_stride, monitors=self.monitors, hold=self.hold,
        )
        fields.update(changes)
        return SimConfig(**fields)


@dataclass(frozen=True)
class Scenario:
    network: Network
    config: SimConfig
    name: str = "custom"


@dataclass
class TrajectoryLog:
    """Sampled closed-loop signals of one run.

    Sample ``n`` holds the state at ``t[n]`` and the torque computed from it.
    ``step_*`` arrays are extrema over every integration step (not only the
    logged samples); they are ``None`` when monitors were disabled or the
    log was read back from CSV.
    """

    scenario: Scenario
    t: np.ndarray
    q: np.ndarray  # (S, N, 2)
    qdot: np.ndarray  # (S, N, 2)
    x: np.ndarray  # (S, N, 2)
    u: np.ndarray  # (S, N, 2)
    e: np.ndarray  # (S, |E|)
    xi_norm: np.ndarray  # (S,)
    U: np.ndarray  # (S,)
    step_min_margin: np.ndarray | None = None
    step_max_drift: np.ndarray | None = None
    step_max_momentum: np.ndarray | None = None

    def __len__(self):
        return len(self.t)

    @property
    def n_agents(self) -> int:
        return self.scenario.network.n

    @property
    def n_edges(self) -> int:
        return self.scenario.network.formation.n_edges

    def truncated(self, n: int) -> TrajectoryLog:
        return TrajectoryLog(
            self.scenario, self.t[:n], self.q[:n], self.qdot[:n], self.x[:n], self.u[:n],
            self.e[:n], self.xi_norm[:n], self.U[:n],
            self.step_min_margin, self.step_max_drift, self.step_max_momentum,
        )


def _rk4(model: NetworkModel, q, p, u, dt, gains: Gains | None = None):
    """One RK4 step of ``(q, p)`` with ``p = M(q) qdot``.

    ``u`` is the torque at the step start; with ``gains`` given, stages 2-4
    re-evaluate the feedback, otherwise ``u`` is held. Integrating momenta
    keeps a passive joint's momentum exactly constant, since its rate is
    the (zero) applied torque.
    """
    def rates(q, p, first=False):
        qd = model.velocity(q, p)
        if first or gains is None:
            uu = u
        else:
            uu = model._torque(q, qd, gains.kp, gains.kd)[0]
        return qd, model.momentum_rate(q, qd, uu)

    k1q, k1p = rates(q, p, first=True)
    k2q, k2p = rates(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
    k3q, k3p = rates(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
    k4q, k4p = rates(q + dt * k3q, p + dt * k3p)
    q_new = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    p_new = p + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return q_new, p_new


def _stage_gains(config: SimConfig):
    return config.gains if config.hold == "stage" else None


def _check_finite(q, qd, t):
    ok = np.isfinite(q).all(axis=1) & np.isfinite(qd).all(axis=1)
    if not ok.all():
        raise DivergenceError(int(np.argmin(ok)), t)


def step(state: NetworkState, config: SimConfig, model: NetworkModel | None = None) -> NetworkState:
    """Advance the closed loop by one ``config.dt``."""
    model = model or NetworkModel(state.network)
    out = model.control(state.q, state.qdot, config.gains.kp, config.gains.kd)
    p = model.momentum(state.q, state.qdot)
    q, p = _rk4(model, state.q, p, out.u, config.dt, _stage_gains(config))
    t = state.t + config.dt
    _check_finite(q, p, t)
    qd = model.velocity(q, p)
    return NetworkState(state.network, q, qd, t)


def _zoh_stability(model: NetworkModel, q, config: SimConfig) -> float:
    """``dt * kd / smallest effective inertia`` at ``q``; above 2 the held damping term is unstable."""
    c2 = np.cos(q[:, 1])
    m11 = model.a1 + model.a2 + 2.0 * model.a3 * c2
    m12 = model.a2 + model.a3 * c2
    m22 = model.a2
    tr = m11 + m22
    det = m11 * m22 - m12 * m12
    lam_min = 0.5 * (tr - np.sqrt(tr * tr - 4.0 * det))
    lam_min = np.where(model.pa, det / m11, lam_min)
    return float(config.dt * config.gains.kd / lam_min.min())


def run(scenario: Scenario) -> TrajectoryLog:
    """Simulate ``scenario`` from its initial state to ``t_final``.

    Raises :class:`DivergenceError` (with the partial log attached as
    ``.log``) if the state stops being finite.
    """
    network = scenario.network
    cfg = scenario.config
    model = NetworkModel(network)
    kp, kd, dt = cfg.gains.kp, cfg.gains.kd, cfg.dt
    n_steps = cfg.n_steps
    stride = int(cfg.log_stride)
    n_samples = n_steps // stride + 1 + (1 if n_steps % stride else 0)
    N, E = network.n, network.formation.n_edges

    q = network.initial_q()
    qd = network.initial_qdot()
    p = model.momentum(q, qd)
    ratio = _zoh_stability(model, q, cfg)
    if cfg.hold == "step" and ratio > 2.0:
        logger.warning("dt*kd/inertia = %.3g > 2 at t=0: held damping may be unstable; reduce dt", ratio)

    t_log = np.empty(n_samples)
    q_log = np.empty((n_samples, N, 2))
    qd_log = np.empty((n_samples, N, 2))
    x_log = np.empty((n_samples, N, 2))
    u_log = np.empty((n_samples, N, 2))
    e_log = np.empty((n_samples, E))
    xi_log = np.empty(n_samples)
    U_log = np.empty(n_samples)

    actuated = np.ones((N, 2), dtype=bool)
    actuated[:, 0] = model.fa
    pa = model.pa
    monitors = cfg.monitors
    min_margin = np.full(N, np.inf)
    max_drift = np.where(pa, 0.0, np.nan)
    max_mom = np.where(pa, 0.0, np.nan)

    def record(slot, n, out):
        t_log[slot] = n * dt
        q_log[slot] = q
        qd_log[slot] = qd
        x_log[slot] = out.x
        u_log[slot] = out.u
        e_log[slot] = out.e
        xi_log[slot] = math.sqrt(float(np.sum(qd[actuated] ** 2)))
        U_log[slot] = kp * 0.5 * float(out.e @ out.e) + float(model.kinetic_energy(q, qd).sum())

    def make_log(n_filled):
        return TrajectoryLog(
            scenario, t_log[:n_filled], q_log[:n_filled], qd_log[:n_filled], x_log[:n_filled],
            u_log[:n_filled], e_log[:n_filled], xi_log[:n_filled], U_log[:n_filled],
            min_margin if monitors else None,
            max_drift if monitors else None,
            max_mom if monitors else None,
        )

    stage_gains = _stage_gains(cfg)
    slot = 0
    # overflow on the way to divergence is reported by _check_finite
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_steps + 1):
            out = model.control(q, qd, kp, kd)
            if monitors:
                np.minimum(min_margin, out.margin, out=min_margin)
                if model.any_pa:
                    drift = np.abs(q[:, 0] - model.holonomy_curve(q[:, 1]))
                    mom = np.abs(model.passive_momentum(q, qd))
                    max_drift[pa] = np.maximum(max_drift[pa], drift[pa])
                    max_mom[pa] = np.maximum(max_mom[pa], mom[pa])
            if n % stride == 0 or n == n_steps:
                record(slot, n, out)
                slot += 1
            if n == n_steps:
                break
            q, p = _rk4(model, q, p, out.u, dt, stage_gains)
            try:
                _check_finite(q, p, (n + 1) * dt)
            except DivergenceError as exc:
                exc.log = make_log(slot)
                raise
            qd = model.velocity(q, p)
    return make_log(slot)


@dataclass(frozen=True)
class Tolerances:
    lyapunov_slack: float = 1e-6
    momentum: float = 1e-4
    drift: float = 1e-4
    margin: float = 1e-6
    terminal_xi: float = 1e-3
    terminal_error: float = 1e-3


@dataclass
class MonitorResult:
    name: str
    passed: bool
    value: float
    threshold: float
    index: int | None = None
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        where = f" (first violation at sample {self.index})" if self.index is not None else ""
        extra = f" {self.detail}" if self.detail else ""
        return f"{verdict} {self.name}: {self.value:.3e} vs {self.threshold:.1e}{where}{extra}"


@dataclass
class VerificationReport:
    monitors: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.monitors)

    def __getitem__(self, name) -> MonitorResult:
        for m in self.monitors:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "monitors": {
                m.name: {
                    "passed": m.passed,
                    "value": m.value,
                    "threshold": m.threshold,
                    "index": m.index,
                    "detail": m.detail,
                }
                for m in self.monitors
            },
        }


def log_margins(log: TrajectoryLog) -> np.ndarray:
    """Assumption margins at every sample, shape ``(S, N)``."""
    return NetworkModel(log.scenario.network).margins(log.q)


def verify_run(log: TrajectoryLog, tol: Tolerances = Tolerances()) -> VerificationReport:
    model = NetworkModel(log.scenario.network)
    pa = model.pa
    report = VerificationReport()
    m = report.monitors

    U = log.U
    if len(U) > 1:
        excess = U[1:] - U[:-1] - tol.lyapunov_slack * (1.0 + U[:-1])
        bad = np.flatnonzero(excess > 0)
        idx = int(bad[0]) + 1 if bad.size else None
        worst = float(np.max((U[1:] - U[:-1]) / (1.0 + U[:-1])))
    else:
        idx, worst = None, 0.0
    m.append(MonitorResult("lyapunov_monotone", idx is None and bool(np.all(np.isfinite(U))), worst, tol.lyapunov_slack, idx))

    if pa.any():
        mom = np.abs(model.passive_momentum(log.q, log.qdot))[:, pa]
        drift = np.abs(log.q[..., 0] - model.holonomy_curve(log.q[..., 1]))[:, pa]
        mom_max = float(mom.max()) if mom.size else 0.0
        drift_max = float(drift.max()) if drift.size else 0.0
        if log.step_max_momentum is not None:
            mom_max = max(mom_max, float(np.nanmax(log.step_max_momentum[pa])))
            drift_max = max(drift_max, float(np.nanmax(log.step_max_drift[pa])))
        m.append(MonitorResult("passive_momentum", mom_max <= tol.momentum, mom_max, tol.momentum))
        m.append(MonitorResult("holonomy_drift", drift_max <= tol.drift, drift_max, tol.drift))
    else:
        m.append(MonitorResult("passive_momentum", True, 0.0, tol.momentum, detail="no passive-active agents"))
        m.append(MonitorResult("holonomy_drift", True, 0.0, tol.drift, detail="no passive-active agents"))

    margins = log_margins(log).min(axis=0) if len(log) else np.full(log.n_agents, np.inf)
    if log.step_min_margin is not None:
        margins = np.minimum(margins, log.step_min_margin)
    worst_agent = int(np.argmin(margins)) if margins.size else 0
    m.append(
        MonitorResult(
            "singularity_margin",
            bool(np.all(margins >= tol.margin)),
            float(margins.min()) if margins.size else math.inf,
            tol.margin,
            detail=f"agent {worst_agent + 1}",
        )
    )

    xi_T = float(log.xi_norm[-1]) if len(log) else math.inf
    m.append(MonitorResult("terminal_xi", xi_T <= tol.terminal_xi, xi_T, tol.terminal_xi))
    e_T = float(np.max(np.abs(log.e[-1]))) if len(log) and log.e.shape[1] else 0.0
    m.append(MonitorResult("terminal_error", e_T <= tol.terminal_error, e_T, tol.terminal_error))
    return report


def summary(log: TrajectoryLog, report: VerificationReport | None = None) -> dict:
    """Terminal values and monitor verdicts as plain JSON-serialisable data."""
    report = report or verify_run(log)
    net = log.scenario.network
    margins = log_margins(log).min(axis=0)
    if log.step_min_margin is not None:
        margins = np.minimum(margins, log.step_min_margin)
    pa_margins = {str(i + 1): float(margins[i]) for i, a in enumerate(net.agents) if a.is_pa}
    fa_margins = {str(i + 1): float(margins[i]) for i, a in enumerate(net.agents) if not a.is_pa}
    U = log.U
    violations = 0
    if len(U) > 1:
        violations = int(np.sum(U[1:] - U[:-1] > 1e-6 * (1.0 + U[:-1])))
    return {
        "scenario": log.scenario.name,
        "t_final": float(log.t[-1]),
        "samples": len(log),
        "final_e": log.e[-1].tolist(),
        "final_q": log.q[-1].tolist(),
        "final_x": log.x[-1].tolist(),
        "final_xi_norm": float(log.xi_norm[-1]),
        "final_U": float(U[-1]),
        "lyapunov_violations": violations,
        "min_pa_margin": pa_margins,
        "min_fa_det_jacobian": fa_margins,
        "singularity_flagged": bool(np.any(margins < 1e-6)),
        "verification": report.to_dict(),
    }
