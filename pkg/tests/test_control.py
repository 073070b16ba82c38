import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pipebot.control import (CombinedController, PidState, combined_step, pid_step,
                             quadratic_cost, trajectory_generator)
from pipebot.sim import design, make_controller

finite = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.fixture(scope="module")
def designed(cfg):
    return design(cfg)


def test_pid_zero_error_zero_output():
    u, _ = pid_step(PidState(1.0, 2.0, 3.0), 0.0, 0.01)
    assert u == 0.0


def test_p_only():
    u, new = pid_step(PidState(2.5, 0.0, 0.0), 0.4, 0.01)
    assert u == 2.5 * 0.4
    u, _ = pid_step(new, -1.2, 0.01)
    assert u == 2.5 * -1.2


@given(st.lists(finite, min_size=1, max_size=50), st.floats(1e-4, 1.0))
def test_zero_gains_output_zero(errors, dt):
    pid = PidState(0.0, 0.0, 0.0)
    for e in errors:
        u, pid = pid_step(pid, e, dt)
        assert u == 0.0


def test_derivative_term():
    pid = PidState(0.0, 0.0, 0.5)
    u, pid = pid_step(pid, 1.0, 0.1)
    assert u == 0.0
    u, pid = pid_step(pid, 2.0, 0.1)
    assert u == pytest.approx(5.0)


@given(st.lists(finite, min_size=1, max_size=100))
def test_integral_clamp(errors):
    pid = PidState(0.0, 4.0, 0.0, integral_limit=2.0)
    for e in errors:
        _, pid = pid_step(pid, e, 0.05)
        assert abs(pid.ki * pid.integral) <= 2.0 + 1e-12


def test_output_saturation():
    u, _ = pid_step(PidState(100.0, 0.0, 0.0, output_limit=12.0), 1.0, 0.01)
    assert u == 12.0


def test_freeze_keeps_integral():
    pid = PidState(1.0, 1.0, 0.0, integral=0.3)
    _, new = pid_step(pid, 5.0, 0.01, freeze=True)
    assert new.integral == 0.3


def test_bad_dt():
    with pytest.raises(ValueError):
        pid_step(PidState(1, 1, 1), 0.0, 0.0)


def test_integral_invariant_checked():
    with pytest.raises(ValueError):
        PidState(1.0, 2.0, 0.0, integral=5.0, integral_limit=1.0)


def _settle_time(y, dt, band=0.02):
    outside = np.nonzero(np.abs(y - 1.0) > band)[0]
    return 0.0 if len(outside) == 0 else (outside[-1] + 1) * dt


def test_first_order_loop_settle_matches_oracle():
    tau, dt, kp, ki = 0.5, 0.01, 2.0, 4.0
    n = 1000
    a = math.exp(-dt / tau)

    # PID loop around an exactly discretised first-order lag
    pid, y = PidState(kp, ki, 0.0), 0.0
    ys = []
    for _ in range(n):
        u, pid = pid_step(pid, 1.0 - y, dt)
        y = a * y + (1 - a) * u
        ys.append(y)

    # oracle: closed-loop state-space recursion z = (y, integral)
    Acl = np.array([[a - (1 - a) * (kp + ki * dt), (1 - a) * ki],
                    [-dt, 1.0]])
    bcl = np.array([(1 - a) * (kp + ki * dt), dt])
    z = np.zeros(2)
    ref = []
    for _ in range(n):
        z = Acl @ z + bcl
        ref.append(z[0])
    t_sim, t_ref = _settle_time(np.array(ys), dt), _settle_time(np.array(ref), dt)
    assert t_ref > 0
    assert t_sim == pytest.approx(t_ref, rel=0.05)


def test_trajectory_generator(geom):
    w, x2, clamped = trajectory_generator(0.0, geom)
    assert np.array_equal(w, np.zeros(3)) and np.array_equal(x2, np.zeros(4)) and not clamped
    w, x2, clamped = trajectory_generator(0.35, geom, 0.5)
    assert w == pytest.approx([7.0] * 3, rel=1e-12)
    assert np.array_equal(x2, np.zeros(4)) and not clamped


def test_trajectory_generator_clamps(geom):
    w, _, clamped = trajectory_generator(-0.8, geom, 0.5)
    assert clamped
    assert w == pytest.approx([-10.0] * 3)


def test_toe_reduces_wheel_reference(geom):
    w, _, _ = trajectory_generator(0.35, geom, toe_angles=[0.1, -0.1, 0.0])
    assert w == pytest.approx([7 * math.cos(0.1), 7 * math.cos(0.1), 7.0])


def test_quiescent_output_is_trim_feedforward(cfg, designed):
    _, lin, gain = designed
    ctl = make_controller(cfg, lin, gain)
    out = combined_step(ctl, np.zeros(4), np.zeros(3), 0.0, 0.01)
    from pipebot.plant import static_voltage
    assert np.array_equal(out.u_pid, np.zeros(3))
    assert out.u_total == pytest.approx(static_voltage(lin.trim_input_u0, 0.0, cfg.motor))
    assert not out.saturated_flags.any()


def test_saturated_channel_integral_non_increasing(cfg, designed):
    _, lin, gain = designed
    ctl = make_controller(cfg, lin, gain)
    ctl.v_cmd = 0.4
    prev = [abs(p.integral) for p in ctl.pids]
    # stalled wheels far below reference keep every channel saturated
    for _ in range(50):
        out = ctl.step(np.array([0.3, 0.0, 0.3, 0.0]), np.full(3, -40.0), 0.4, 0.01)
        now = [abs(p.integral) for p in ctl.pids]
        for i in range(3):
            if out.saturated_flags[i]:
                assert now[i] <= prev[i]
        prev = now
    assert out.saturated_flags.any()


def test_slew_limits_reference(cfg, designed):
    _, lin, gain = designed
    ctl = make_controller(cfg, lin, gain)
    assert ctl.slew(0.35, 0.01) == pytest.approx(0.0025)
    for _ in range(1000):
        ctl.slew(0.35, 0.01)
    assert ctl.v_cmd == 0.35


@settings(max_examples=200, deadline=None)
@given(x2=st.lists(st.floats(-3, 3), min_size=4, max_size=4),
       w=st.lists(st.floats(-200, 200), min_size=3, max_size=3),
       v=st.floats(-2, 2), steps=st.integers(1, 5))
def test_output_within_voltage_limit(cfg, designed, x2, w, v, steps):
    _, lin, gain = designed
    ctl = CombinedController(gain, lin.trim_input_u0, cfg.motor, cfg.geometry,
                             pid_gains=(8.0, 20.0, 0.05), velocity_limit=0.5)
    for _ in range(steps):
        out = ctl.step(np.array(x2), np.array(w), v, 0.01)
        assert np.all(np.abs(out.u_total) <= cfg.motor.voltage_limit)
        assert np.array_equal(out.u_total, np.clip(out.u_lqr + out.u_pid, -12, 12))


def test_closed_loop_cost_below_open_loop(cfg, designed):
    plant, lin, gain = designed
    Q = np.diag(cfg.control.Q)
    R = np.diag(cfg.control.R)
    dt, n = 1e-3, 3000
    x0 = np.radians([-14.0, 0.0, -11.0, 0.0])

    def run(closed):
        x = x0.copy()
        xs, us = [x.copy()], []
        for _ in range(n):
            u2 = -gain.K @ x if closed else np.zeros(3)
            us.append(u2)

            def f(z):
                return plant.f2(z, lin.trim_input_u0 + u2)

            k1 = f(x)
            k2 = f(x + 0.5 * dt * k1)
            k3 = f(x + 0.5 * dt * k2)
            k4 = f(x + dt * k3)
            x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            xs.append(x.copy())
        us.append(us[-1])
        return quadratic_cost(xs, us, Q, R, dt)

    assert run(True) < run(False)


def test_quadratic_cost_constant():
    x = np.ones((11, 2))
    u = np.zeros((11, 1))
    assert quadratic_cost(x, u, np.eye(2), np.eye(1), 0.1) == pytest.approx(1.0)
