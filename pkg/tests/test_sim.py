import logging
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from mixform import builtin_case, run
from mixform.control import Gains, NetworkState, network_torques
from mixform.dynamics import JointState, forward_dynamics, mass_matrix
from mixform.errors import DivergenceError, ScenarioError
from mixform.formation import FormationSpec
from mixform.network import FA, Agent, Network, NetworkModel
from mixform.scenario import ARM_PARAMS
from mixform.sim import Scenario, SimConfig, step, verify_run


def short(name, **changes):
    sc = builtin_case(name)
    changes.setdefault("t_final", 0.5)
    return Scenario(sc.network, sc.config.replace(**changes), sc.name)


def free_arms(qdot0, kp=0.0, kd=0.0, edges=(), d=()):
    agents = [
        Agent(FA, ARM_PARAMS, (3.0 * i, 0.0), JointState((0.2 * i, 0.7 + 0.1 * i), qd))
        for i, qd in enumerate(qdot0)
    ]
    return Network(agents, FormationSpec(len(agents), edges, d)), Gains(kp, kd)


def test_config_validation():
    g = Gains(1.0, 1.0)
    for kwargs in ({"dt": 0.0}, {"t_final": 1e-5}, {"log_stride": 0}, {"hold": "zoh"}):
        with pytest.raises(ScenarioError):
            SimConfig(g, **kwargs)
    assert SimConfig(g, dt=1e-3, t_final=30.0).n_steps == 30000


def test_equilibrium_is_fixed():
    net, gains = free_arms([(0.0, 0.0), (0.0, 0.0)])
    s0 = NetworkState.initial(net)
    s = s0
    for _ in range(100):
        s = step(s, SimConfig(gains, dt=1e-3, t_final=1.0))
    np.testing.assert_array_equal(s.q, s0.q)
    np.testing.assert_array_equal(s.qdot, 0.0)
    assert s.t == pytest.approx(0.1)


def test_zero_gain_run_keeps_end_effectors_still():
    log = run(short("case1", gains=Gains(0.0, 0.0), t_final=1.0))
    np.testing.assert_array_equal(log.u, 0.0)
    np.testing.assert_array_equal(log.x, np.broadcast_to(log.x[0], log.x.shape))


def test_runs_are_deterministic():
    a = run(short("case2"))
    b = run(short("case2"))
    for name in ("t", "q", "qdot", "x", "u", "e", "xi_norm", "U"):
        assert np.array_equal(getattr(a, name), getattr(b, name)), name


def test_agent_relabelling_permutes_trajectory_bitwise():
    sc = short("case1")
    net = sc.network
    perm = [2, 0, 3, 1]  # new position -> old agent
    new_index = {old + 1: new + 1 for new, old in enumerate(perm)}
    f = net.formation
    relabelled = Network(
        [net.agents[i] for i in perm],
        FormationSpec(4, tuple((new_index[t], new_index[h]) for t, h in f.edges), f.d_star),
    )
    a = run(sc)
    b = run(Scenario(relabelled, sc.config, "relabelled"))
    assert np.array_equal(b.q, a.q[:, perm])
    assert np.array_equal(b.u, a.u[:, perm])
    assert np.array_equal(b.e, a.e)


def test_log_stride():
    log = run(short("case1", t_final=0.1, log_stride=7))
    assert log.t[0] == 0.0
    assert log.t[-1] == pytest.approx(0.1)
    assert np.allclose(np.diff(log.t)[:-1], 7e-3)


def test_energy_conserved_without_control():
    net, gains = free_arms([(0.8, -0.5), (-0.3, 1.1), (0.5, 0.4)])
    log = run(Scenario(net, SimConfig(gains, dt=1e-3, t_final=10.0), "free"))
    drift = np.abs(log.U - log.U[0]).max() / log.U[0]
    assert drift <= 1e-8


def _reference_rhs(net, gains):
    def rhs(t, y):
        n = net.n
        q = y[: 2 * n].reshape(n, 2)
        qd = y[2 * n :].reshape(n, 2)
        state = NetworkState(net, q, qd)
        u = network_torques(gains, state)
        acc = [forward_dynamics(a.alpha, state.joint_state(i), u[i]) for i, a in enumerate(net.agents)]
        return np.concatenate([qd.ravel(), np.ravel(acc)])

    return rhs


def rk4_errors(name, dts, T=0.2):
    sc = builtin_case(name)
    net = sc.network
    y0 = np.concatenate([net.initial_q().ravel(), net.initial_qdot().ravel()])
    ref = solve_ivp(_reference_rhs(net, sc.config.gains), (0, T), y0, method="DOP853", rtol=1e-13, atol=1e-14)
    model = NetworkModel(net)
    errs = []
    for dt in dts:
        cfg = sc.config.replace(dt=dt)
        s = NetworkState.initial(net)
        for _ in range(int(round(T / dt))):
            s = step(s, cfg, model)
        errs.append(np.abs(np.concatenate([s.q.ravel(), s.qdot.ravel()]) - ref.y[:, -1]).max())
    return np.array(errs)


def single_arm_errors(dts, T=1.0):
    """Unforced arm started with large rates against a DOP853 reference."""
    net, gains = free_arms([(1.5, -2.0)])
    agent = net.agents[0]

    def rhs(t, y):
        return np.concatenate([y[2:], forward_dynamics(agent.alpha, JointState(y[:2], y[2:]), (0.0, 0.0))])

    y0 = np.concatenate([agent.q0.q, agent.q0.qdot])
    ref = solve_ivp(rhs, (0, T), y0, method="DOP853", rtol=1e-13, atol=1e-14).y[:, -1]
    errs = []
    for dt in dts:
        log = run(Scenario(net, SimConfig(gains, dt=dt, t_final=T, monitors=False), "arm"))
        errs.append(np.abs(np.concatenate([log.q[-1, 0], log.qdot[-1, 0]]) - ref).max())
    return np.array(errs)


def observed_orders(errs):
    return np.log2(errs[:-1] / errs[1:])


def test_rk4_order_single_arm():
    errs = single_arm_errors((4e-3, 2e-3, 1e-3))
    assert np.all(observed_orders(errs) >= 3.5), errs


@pytest.mark.parametrize("name", ["case1", "case3"])
def test_rk4_order_closed_loop(name):
    errs = rk4_errors(name, (1e-3, 5e-4, 2.5e-4))
    assert np.all(observed_orders(errs) >= 3.5), errs


def test_linearised_single_arm():
    """Small rates, damping only: M(q2_0) qdd = -kd qd has a matrix-exponential solution."""
    qd0 = np.array([2e-3, -3e-3])
    kd = 5.0
    net, gains = free_arms([tuple(qd0)], kp=0.0, kd=kd)
    log = run(Scenario(net, SimConfig(gains, dt=1e-3, t_final=0.1), "lin"))
    q0 = net.agents[0].q0.q
    A = kd * np.linalg.inv(mass_matrix(net.agents[0].alpha, q0[1]))
    worst = 0.0
    for t, q, qd in zip(log.t[::10], log.q[::10, 0], log.qdot[::10, 0]):
        E = expm(-A * t)
        qd_lin = E @ qd0
        q_lin = q0 + np.linalg.solve(A, (np.eye(2) - E) @ qd0)
        scale = np.abs(qd0).max()
        worst = max(worst, np.abs(qd - qd_lin).max() / scale, np.abs(q - q_lin).max() / (scale * 0.1))
    assert worst <= 1e-3


def test_passive_momentum_conserved_exactly(runs):
    log = runs("case1")
    model = NetworkModel(log.scenario.network)
    assert np.abs(model.passive_momentum(log.q, log.qdot)[:, 3]).max() <= 1e-14


def test_dt_halving_case1(runs):
    assert np.abs(runs("case1").x[-1] - runs("case1", dt=5e-4).x[-1]).max() <= 1e-5


def test_batched_accel_matches_forward_dynamics(rng):
    net = builtin_case("case2").network
    model = NetworkModel(net)
    for _ in range(50):
        q = rng.uniform(-math.pi, math.pi, (4, 2))
        qd = rng.normal(0, 2, (4, 2))
        u = rng.normal(0, 50, (4, 2))
        acc = model.accel(q, qd, u)
        for i, a in enumerate(net.agents):
            np.testing.assert_allclose(acc[i], forward_dynamics(a.alpha, JointState(q[i], qd[i]), u[i]), rtol=1e-12, atol=1e-10)
        np.testing.assert_allclose(model.velocity(q, model.momentum(q, qd)), qd, rtol=1e-12, atol=1e-12)


def test_divergence_raises_with_partial_log():
    with pytest.raises(DivergenceError) as info:
        run(short("case1", dt=0.05, t_final=20.0))
    exc = info.value
    assert exc.time > 0
    assert 0 < len(exc.log) < 400
    assert np.all(np.isfinite(exc.log.q))


def test_zoh_hold_warns_when_unstable(caplog):
    with caplog.at_level(logging.WARNING, logger="mixform"):
        try:
            run(short("case1", dt=2e-3, t_final=0.01, hold="step"))
        except DivergenceError:
            pass
    assert any("held damping" in r.message for r in caplog.records)


def test_zoh_hold_close_to_stage_hold():
    a = run(short("case1", t_final=0.5))
    b = run(short("case1", t_final=0.5, hold="step"))
    assert np.abs(a.x[-1] - b.x[-1]).max() < 1e-4


def test_corrupted_lyapunov_log_flagged():
    log = run(short("case1", t_final=0.2))
    assert verify_run(log)["lyapunov_monotone"].passed
    log.U = log.U.copy()
    log.U[57] = log.U[56] * (1 + 1e-3) + 1e-3
    result = verify_run(log)["lyapunov_monotone"]
    assert not result.passed
    assert result.index == 57


@pytest.mark.parametrize("kd", [300.0, 600.0, 1200.0])
def test_lyapunov_monotone_across_damping(kd):
    log = run(short("case1", gains=Gains(800.0, kd), dt=2.5e-4, t_final=2.0))
    rep = verify_run(log)
    assert rep["lyapunov_monotone"].passed, rep["lyapunov_monotone"].line()
    assert rep["holonomy_drift"].passed
    assert rep["passive_momentum"].passed


def test_monitors_on_case1(runs):
    rep = verify_run(runs("case1"))
    assert rep.passed, "\n".join(m.line() for m in rep.monitors)


def test_terminal_xi_case1(runs):
    assert runs("case1").xi_norm[-1] <= 1e-3


def test_holonomy_kept_by_pa_arms(runs):
    log = runs("case1")
    model = NetworkModel(log.scenario.network)
    drift = np.abs(log.q[:, 3, 0] - model.holonomy_curve(log.q[:, :, 1])[:, 3])
    assert drift.max() <= 1e-4
    assert math.isnan(model.holonomy_curve(log.q[0, :, 1])[0])
