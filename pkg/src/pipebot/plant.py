"""Simulated robot: rigid-body tilt dynamics, gear-motors, traction and drag.

Generalised coordinates are ``q = (s, phi, psi)``: axial position, roll about
the pipe axis and pitch about the horizontal transverse axis. Body orientation
is ``R = R_y(psi) @ R_x(phi)`` (yaw is held at zero by the wheels).

The wheels roll without slip, so wheel ``i`` turns at ``(W.T @ qdot)[i] / R``
where column ``i`` of ``W`` is the velocity of its contact point along the
rolling direction per unit generalised velocity. By virtual work the same
matrix maps wheel tractions to generalised forces, which gives

    M qddot = W tau / R + Q_gravity(phi, psi) - D qdot + e_s (F_drag - m g sin(incline))

with the constant mass matrix ``M = diag(m, I_phi, I_psi) + J_w/R^2 W W^T``.
The system is Lagrangian, so with ``tau = 0`` and no flow the total energy can
only decrease through the joint damping ``D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .params import BodyParams, DragModel, FrictionModel, MotorParams, RobotGeometry

# state vector layout
S, V, PHI, PHI_DOT, PSI, PSI_DOT = range(6)
WHEELS = slice(6, 9)
CURRENTS = slice(9, 12)
STATE_SIZE = 12

C2 = np.array([[0.0, 1.0, 0.0, 0.0],
               [0.0, 0.0, 1.0, 0.0]])


class DivergenceError(RuntimeError):
    def __init__(self, message: str, last_state: "PlantState"):
        super().__init__(message)
        self.last_state = last_state


class NoEquilibriumError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlantState:
    axial_position_s: float = 0.0
    axial_velocity_v: float = 0.0
    phi: float = 0.0
    phi_dot: float = 0.0
    psi: float = 0.0
    psi_dot: float = 0.0
    wheel_speeds: tuple[float, float, float] = (0.0, 0.0, 0.0)
    motor_currents: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def to_array(self) -> np.ndarray:
        return np.array([self.axial_position_s, self.axial_velocity_v, self.phi,
                         self.phi_dot, self.psi, self.psi_dot,
                         *self.wheel_speeds, *self.motor_currents], dtype=float)

    @classmethod
    def from_array(cls, x) -> "PlantState":
        x = np.asarray(x, dtype=float)
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]), float(x[4]),
                   float(x[5]), tuple(float(w) for w in x[WHEELS]),
                   tuple(float(i) for i in x[CURRENTS]))

    @property
    def x2(self) -> np.ndarray:
        return np.array([self.phi, self.phi_dot, self.psi, self.psi_dot])


@dataclass(frozen=True)
class LinearizedSystem:
    A2: np.ndarray
    B2: np.ndarray
    C2: np.ndarray
    D2: np.ndarray
    trim_input_u0: np.ndarray


@dataclass
class Derivative:
    """State derivative plus per-wheel slip flags."""

    xdot: np.ndarray
    slip: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=bool))

    @property
    def slipping(self) -> bool:
        return bool(np.any(self.slip))


def drag_force(robot_v: float, drag: DragModel) -> float:
    """Signed quadratic drag on the robot along the pipe axis."""
    v_rel = drag.flow_velocity - robot_v
    return drag.drag_coefficient_c * abs(v_rel) * v_rel


def drag_coefficient_from_point(force: float, v_rel: float) -> float:
    """Coefficient that reproduces one (relative velocity, force) pair."""
    return force / v_rel**2


def motor_current_rate(current, shaft_speed, v_co, params: MotorParams):
    return (v_co - params.back_emf_constant_Kv * shaft_speed
            - params.terminal_resistance * current) / params.terminal_inductance


def motor_step(current: float, shaft_speed: float, v_co: float, params: MotorParams,
               dt: float) -> tuple[float, float]:
    """Advance one motor's armature current by ``dt`` at fixed shaft speed.

    Returns the new current and the torque at the gearbox output,
    ``n * K_v * i``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")

    def f(i):
        return motor_current_rate(i, shaft_speed, v_co, params)

    k1 = f(current)
    k2 = f(current + 0.5 * dt * k1)
    k3 = f(current + 0.5 * dt * k2)
    k4 = f(current + dt * k3)
    i_new = current + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return i_new, params.gear_ratio_n * params.back_emf_constant_Kv * i_new


def free_shaft_acceleration(current: float, params: MotorParams) -> float:
    """Shaft acceleration of an unloaded gear-motor from its torque (inertia reflection)."""
    n = params.gear_ratio_n
    return n**2 / (params.load_inertia_Il + n**2 * params.rotor_inertia_IR) \
        * params.back_emf_constant_Kv * current


def static_voltage(torque_at_wheel, wheel_speed, params: MotorParams):
    """Voltage that holds ``torque_at_wheel`` at ``wheel_speed`` in steady state."""
    n, kv = params.gear_ratio_n, params.back_emf_constant_Kv
    shaft_torque = np.asarray(torque_at_wheel) / n
    return params.terminal_resistance * shaft_torque / kv + kv * n * np.asarray(wheel_speed)


class Plant:
    """Parameterised plant; all methods are pure functions of their arguments."""

    def __init__(self, geometry: RobotGeometry, motor: MotorParams, friction: FrictionModel,
                 body: BodyParams | None = None, drag: DragModel | None = None):
        self.geometry = geometry
        self.motor = motor
        self.friction = friction
        self.body = body or BodyParams()
        self.drag = drag or DragModel()

        b = self.body
        H = b.pipe_radius
        toe = b.toe()
        gam = np.asarray(b.wheel_angles, dtype=float)
        self.W = np.vstack([np.cos(toe), H * np.sin(toe), H * np.cos(toe) * np.sin(gam)])
        if abs(np.linalg.det(self.W)) < 1e-12:
            raise ValueError("wheel layout gives no independent control of (s, phi, psi)")
        R = geometry.wheel_radius_R
        self.M = (np.diag([geometry.robot_mass_m, b.roll_inertia, b.pitch_inertia])
                  + motor.wheel_inertia / R**2 * self.W @ self.W.T)
        self.M_inv = np.linalg.inv(self.M)
        self.D = np.diag([0.0, b.roll_damping, b.pitch_damping])

    def with_flow(self, flow_velocity: float) -> "Plant":
        return Plant(self.geometry, self.motor, self.friction, self.body,
                     replace(self.drag, flow_velocity=flow_velocity))

    # -- forces ---------------------------------------------------------

    def gravity_forces(self, phi, psi):
        """Generalised gravity forces on (s, phi, psi)."""
        m, g = self.geometry.robot_mass_m, self.body.gravity
        cx, cy, cz = self.body.com_offset
        mg = m * g
        q_s = -mg * math.sin(self.body.pipe_incline)
        q_phi = -mg * np.cos(psi) * (cy * np.cos(phi) - cz * np.sin(phi))
        q_psi = mg * (cx * np.cos(psi) + np.sin(psi) * (cy * np.sin(phi) + cz * np.cos(phi)))
        return q_s, q_phi, q_psi

    def potential_energy(self, x) -> float:
        m, g = self.geometry.robot_mass_m, self.body.gravity
        cx, cy, cz = self.body.com_offset
        s, phi, psi = x[S], x[PHI], x[PSI]
        z = -math.sin(psi) * cx + math.cos(psi) * (math.sin(phi) * cy + math.cos(phi) * cz)
        return m * g * (z + s * math.sin(self.body.pipe_incline))

    def kinetic_energy(self, x) -> float:
        qd = np.array([x[V], x[PHI_DOT], x[PSI_DOT]])
        return 0.5 * float(qd @ self.M @ qd)

    def energy(self, x) -> float:
        return self.kinetic_energy(x) + self.potential_energy(x)

    def rim_speeds(self, x) -> np.ndarray:
        """Wheel angular speeds implied by pure rolling."""
        qd = np.array([x[V], x[PHI_DOT], x[PSI_DOT]])
        return self.W.T @ qd / self.geometry.wheel_radius_R

    def saturate_traction(self, tau):
        """Clip wheel torques to the friction limit; returns (torques, slip flags)."""
        limit = self.friction.traction_limit * self.geometry.wheel_radius_R
        tau = np.asarray(tau, dtype=float)
        slip = np.abs(tau) > limit
        return np.clip(tau, -limit, limit), slip

    def accelerations(self, x, tau):
        """Generalised accelerations (vdot, phiddot, psiddot) for wheel torques ``tau``.

        No saturation is applied, and ``x``/``tau`` may be complex for
        complex-step differentiation.
        """
        R = self.geometry.wheel_radius_R
        q_s, q_phi, q_psi = self.gravity_forces(x[PHI], x[PSI])
        v = x[V]
        if np.iscomplexobj(v):
            v_rel = self.drag.flow_velocity - v
            f_d = self.drag.drag_coefficient_c * abs(v_rel.real) * v_rel
        else:
            f_d = drag_force(v, self.drag)
        qd = np.array([v, x[PHI_DOT], x[PSI_DOT]])
        forces = (self.W @ tau) / R + np.array([q_s + f_d, q_phi, q_psi]) - self.D @ qd
        return self.M_inv @ forces

    # -- derivatives ----------------------------------------------------

    def plant_derivative(self, x: PlantState | np.ndarray, u) -> Derivative:
        """Mechanical state derivative for imposed wheel torques ``u``.

        Motor currents are treated as held (zero derivative). Torques beyond
        the friction limit are saturated and flagged as slip.
        """
        xa = x.to_array() if isinstance(x, PlantState) else np.asarray(x, dtype=float)
        tau, slip = self.saturate_traction(u)
        return Derivative(self._mechanical(xa, tau), slip)

    def _mechanical(self, xa, tau):
        acc = self.accelerations(xa, tau)
        xdot = np.zeros(STATE_SIZE)
        xdot[S] = xa[V]
        xdot[V] = acc[0]
        xdot[PHI] = xa[PHI_DOT]
        xdot[PHI_DOT] = acc[1]
        xdot[PSI] = xa[PSI_DOT]
        xdot[PSI_DOT] = acc[2]
        xdot[WHEELS] = self.W.T @ acc / self.geometry.wheel_radius_R
        return xdot

    def electromechanical_derivative(self, xa: np.ndarray, voltages) -> Derivative:
        mp = self.motor
        currents = xa[CURRENTS]
        tau_cmd = mp.gear_ratio_n * mp.back_emf_constant_Kv * currents
        tau, slip = self.saturate_traction(tau_cmd)
        xdot = self._mechanical(xa, tau)
        shaft = mp.gear_ratio_n * xa[WHEELS]
        xdot[CURRENTS] = motor_current_rate(currents, shaft, np.asarray(voltages), mp)
        return Derivative(xdot, slip)

    def f2(self, x2, u, v: float = 0.0):
        """Stabilising-state derivative at axial speed ``v`` (complex-safe)."""
        x2 = np.asarray(x2)
        dtype = np.result_type(x2, np.asarray(u), float)
        xa = np.zeros(STATE_SIZE, dtype=dtype)
        xa[V] = v
        xa[[PHI, PHI_DOT, PSI, PSI_DOT]] = x2
        acc = self.accelerations(xa, np.asarray(u, dtype=dtype))
        return np.array([x2[1], acc[1], x2[3], acc[2]])

    # -- trim and linearisation -------------------------------------------

    def trim(self, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
        """Wheel torques that hold the body level and at rest.

        Damped Newton on the generalised accelerations at ``x = 0``, starting
        from an equal split (zero net axial force).
        """
        xa = np.zeros(STATE_SIZE)
        u = np.zeros(3)

        def residual(u):
            return self.accelerations(xa, u)

        r = residual(u)
        for _ in range(max_iter):
            if np.linalg.norm(r) <= tol:
                return u
            J = np.empty((3, 3))
            for j in range(3):
                h = 1e-6 * max(1.0, abs(u[j]))
                e = np.zeros(3)
                e[j] = h
                J[:, j] = (residual(u + e) - residual(u - e)) / (2 * h)
            step = np.linalg.solve(J, -r)
            lam = 1.0
            while lam > 1e-4:
                trial = u + lam * step
                r_trial = residual(trial)
                if np.linalg.norm(r_trial) < np.linalg.norm(r):
                    break
                lam *= 0.5
            u, r = trial, r_trial
        if np.linalg.norm(r) <= 1e-9:
            return u
        raise NoEquilibriumError(f"trim did not converge, residual {np.linalg.norm(r):.3e}")

    def linearize(self, u0=None) -> LinearizedSystem:
        """Central-difference Jacobians of ``f2`` about ``(x2 = 0, u0)``."""
        if u0 is None:
            u0 = self.trim()
        x0 = np.zeros(4)
        A2 = np.empty((4, 4))
        for j in range(4):
            h = 1e-6 * max(1.0, abs(x0[j]))
            e = np.zeros(4)
            e[j] = h
            A2[:, j] = (self.f2(x0 + e, u0) - self.f2(x0 - e, u0)) / (2 * h)
        B2 = np.empty((4, 3))
        for j in range(3):
            h = 1e-6 * max(1.0, abs(u0[j]))
            e = np.zeros(3)
            e[j] = h
            B2[:, j] = (self.f2(x0, u0 + e) - self.f2(x0, u0 - e)) / (2 * h)
        return LinearizedSystem(A2, B2, C2.copy(), np.zeros((2, 3)), np.asarray(u0, float))

    def linearize_complex_step(self, u0) -> tuple[np.ndarray, np.ndarray]:
        """Jacobians of ``f2`` by complex-step differentiation (second method)."""
        h = 1e-30
        x0 = np.zeros(4)
        u0 = np.asarray(u0, dtype=float)
        A2 = np.empty((4, 4))
        for j in range(4):
            xc = x0.astype(complex)
            xc[j] += 1j * h
            A2[:, j] = self.f2(xc, u0.astype(complex)).imag / h
        B2 = np.empty((4, 3))
        for j in range(3):
            uc = u0.astype(complex)
            uc[j] += 1j * h
            B2[:, j] = self.f2(x0.astype(complex), uc).imag / h
        return A2, B2

    # -- integration ------------------------------------------------------

    def substeps(self, dt: float) -> int:
        return 1 if self.motor.electrical_time_constant >= 2 * dt else 10

    def step(self, x: PlantState | np.ndarray, u_voltages, dt: float,
             substeps: int | None = None):
        """One RK4 step of the electromechanical system under held voltages.

        Returns ``(new_state_array, slip_flags)``. Voltages are saturated at
        the motor voltage limit first.
        """
        if not 0 < dt <= 0.01 + 1e-15:
            raise ValueError("dt must be in (0, 10 ms]")
        xa = x.to_array() if isinstance(x, PlantState) else np.asarray(x, dtype=float)
        lim = self.motor.voltage_limit
        volts = np.clip(np.asarray(u_voltages, dtype=float), -lim, lim)
        n_sub = substeps or self.substeps(dt)
        h = dt / n_sub
        slip = np.zeros(3, dtype=bool)
        for _ in range(n_sub):
            d1 = self.electromechanical_derivative(xa, volts)
            d2 = self.electromechanical_derivative(xa + 0.5 * h * d1.xdot, volts)
            d3 = self.electromechanical_derivative(xa + 0.5 * h * d2.xdot, volts)
            d4 = self.electromechanical_derivative(xa + h * d3.xdot, volts)
            new = xa + h / 6.0 * (d1.xdot + 2 * d2.xdot + 2 * d3.xdot + d4.xdot)
            slip |= d1.slip | d2.slip | d3.slip | d4.slip
            if not np.all(np.isfinite(new)):
                raise DivergenceError("plant state became non-finite",
                                      PlantState.from_array(xa))
            xa = new
        return xa, slip

    def initial_state(self, phi: float = 0.0, psi: float = 0.0, v: float = 0.0) -> np.ndarray:
        xa = np.zeros(STATE_SIZE)
        xa[V], xa[PHI], xa[PSI] = v, phi, psi
        xa[WHEELS] = self.rim_speeds(xa)
        return xa
