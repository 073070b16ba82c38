"""Velocity PID loops, trajectory generator and the combined LQR + PID controller."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .lqr import LqrGain, lqr_control
from .params import MotorParams, RobotGeometry
from .plant import static_voltage


@dataclass(frozen=True)
class PidState:
    kp: float
    ki: float
    kd: float
    integral: float = 0.0
    prev_error: float | None = None
    output_limit: float = math.inf
    integral_limit: float = math.inf

    def __post_init__(self):
        if self.ki != 0 and abs(self.integral * self.ki) > self.integral_limit * (1 + 1e-12):
            raise ValueError("integral term exceeds integral_limit")


def _clamp_integral(pid: PidState, integral: float) -> float:
    if pid.ki == 0 or math.isinf(pid.integral_limit):
        return integral
    bound = pid.integral_limit / abs(pid.ki)
    return max(-bound, min(bound, integral))


def pid_step(pid: PidState, error: float, dt: float, freeze: bool = False) -> tuple[float, PidState]:
    """``u = kp e + ki int(e) + kd de/dt``, integral clamped, output saturated.

    ``freeze`` leaves the integral untouched for this step (conditional
    anti-windup). The derivative is zero on the first call.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    integral = pid.integral if freeze else _clamp_integral(pid, pid.integral + error * dt)
    deriv = 0.0 if pid.prev_error is None else (error - pid.prev_error) / dt
    u = pid.kp * error + pid.ki * integral + pid.kd * deriv
    u = max(-pid.output_limit, min(pid.output_limit, u))
    return u, replace(pid, integral=integral, prev_error=error)


def trajectory_generator(V_d: float, geom: RobotGeometry, velocity_limit: float = math.inf,
                         toe_angles=None) -> tuple[np.ndarray, np.ndarray, bool]:
    """Wheel speed references and stabilising-state reference for a straight pipe.

    Returns ``(omega_ref, x2_ref, clamped)``. Each wheel turns at
    ``V_d cos(toe_i) / R``, which is ``V_d / R`` for untoed wheels.
    """
    clamped = abs(V_d) > velocity_limit
    if clamped:
        V_d = math.copysign(velocity_limit, V_d)
    toe = np.zeros(3) if toe_angles is None else np.asarray(toe_angles, dtype=float)
    omega_ref = V_d * np.cos(toe) / geom.wheel_radius_R
    return omega_ref, np.zeros(4), clamped


@dataclass(frozen=True)
class ControllerOutput:
    u_lqr: np.ndarray
    u_pid: np.ndarray
    u_total: np.ndarray
    saturated_flags: np.ndarray


class CombinedController:
    """LQR stabiliser plus one PID velocity loop per wheel.

    The LQR works in wheel torques; they are turned into voltages through the
    motor's static map with back-EMF feedforward at the reference wheel speed.
    The PID voltages are added and the sum is clipped at the voltage limit.
    A channel whose sum would exceed the limit does not integrate on that tick.
    The commanded speed ``V_d`` is slewed at ``acceleration_limit`` before it
    reaches the trajectory generator.
    """

    def __init__(self, gain: LqrGain, trim_u0, motor: MotorParams, geometry: RobotGeometry,
                 pid_gains=(0.6, 1.5, 0.0), integral_limit: float = 6.0,
                 velocity_limit: float = math.inf, toe_angles=None,
                 acceleration_limit: float = math.inf):
        self.gain = gain
        self.u0 = np.asarray(trim_u0, dtype=float)
        self.motor = motor
        self.geometry = geometry
        self.velocity_limit = velocity_limit
        self.acceleration_limit = acceleration_limit
        self.toe_angles = toe_angles
        self.v_cmd = 0.0
        kp, ki, kd = pid_gains
        self.pids = [PidState(kp, ki, kd, output_limit=motor.voltage_limit,
                              integral_limit=integral_limit) for _ in range(3)]
        self.saturated = np.zeros(3, dtype=bool)
        self.reference_clamped = False

    def reference(self, V_d: float):
        omega_ref, x2_ref, clamped = trajectory_generator(
            V_d, self.geometry, self.velocity_limit, self.toe_angles)
        self.reference_clamped = clamped
        return omega_ref, x2_ref

    def slew(self, V_d: float, dt: float) -> float:
        dv = self.acceleration_limit * dt
        self.v_cmd = min(max(V_d, self.v_cmd - dv), self.v_cmd + dv)
        return self.v_cmd

    def step(self, x2_hat, omega_hat, V_d: float, dt: float) -> ControllerOutput:
        omega_ref, x2_ref = self.reference(self.slew(V_d, dt))
        tau = self.u0 + lqr_control(self.gain, np.asarray(x2_hat) - x2_ref)
        u_lqr = static_voltage(tau, omega_ref, self.motor)
        err = omega_ref - np.asarray(omega_hat, dtype=float)

        lim = self.motor.voltage_limit
        u_pid = np.empty(3)
        for i in range(3):
            u, new = pid_step(self.pids[i], float(err[i]), dt)
            if abs(u_lqr[i] + u) > lim:
                # clipped channel: keep the old integral
                u, new = pid_step(self.pids[i], float(err[i]), dt, freeze=True)
            self.pids[i] = new
            u_pid[i] = u
        raw = u_lqr + u_pid
        total = np.clip(raw, -lim, lim)
        self.saturated = np.abs(raw) > lim
        return ControllerOutput(u_lqr, u_pid, total, self.saturated.copy())


def combined_step(ctl: CombinedController, x2_hat, v_hat, V_d: float, dt: float) -> ControllerOutput:
    return ctl.step(x2_hat, v_hat, V_d, dt)


def quadratic_cost(x2_traj, u_traj, Q, R, dt: float) -> float:
    """Trapezoidal ``1/2 int x'Qx + u'Ru dt`` over sampled trajectories."""
    x = np.asarray(x2_traj, dtype=float)
    u = np.asarray(u_traj, dtype=float)
    integrand = np.einsum("ti,ij,tj->t", x, Q, x) + np.einsum("ti,ij,tj->t", u, R, u)
    return 0.5 * float(np.trapezoid(integrand, dx=dt))
