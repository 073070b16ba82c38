"""Immutable parameter records shared by every module.

All values are SI (metres, radians, seconds, newtons, volts...). Battery
charge is kept in amp-hours and durations of the power study in hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """A config document could not be parsed; the message names the key."""


class ValidationError(ValueError):
    """A parameter record violates one of its invariants."""


def _require(cond: bool, invariant: str) -> None:
    if not cond:
        raise ValidationError(f"invariant violated: {invariant}")


@dataclass(frozen=True)
class RobotGeometry:
    """Arm mechanism and body dimensions.

    ``contact_arm_L``, ``wheel_radius_R`` and ``robot_mass_m`` are assumed
    values in the shipped defaults; only ``a`` and ``t`` and the pipe range are
    published.
    """

    arm_length_a: float
    pivot_offset_t: float
    contact_arm_L: float
    wheel_radius_R: float
    robot_mass_m: float
    pipe_radius_H_min: float
    pipe_radius_H_max: float

    def __post_init__(self):
        for name in ("arm_length_a", "contact_arm_L", "wheel_radius_R",
                     "robot_mass_m", "pipe_radius_H_min", "pipe_radius_H_max"):
            _require(getattr(self, name) > 0, f"{name} > 0")
        _require(self.pivot_offset_t >= 0, "pivot_offset_t >= 0")
        _require(self.pipe_radius_H_min < self.pipe_radius_H_max, "H_min < H_max")
        _require(self.pivot_offset_t < self.arm_length_a, "pivot_offset_t < arm_length_a")


@dataclass(frozen=True)
class MotorParams:
    terminal_resistance: float
    terminal_inductance: float
    back_emf_constant_Kv: float
    gear_ratio_n: float
    load_inertia_Il: float
    rotor_inertia_IR: float
    nominal_voltage_Vn: float
    rated_power_P: float
    voltage_limit: float

    def __post_init__(self):
        for name, value in self.__dict__.items():
            _require(value > 0, f"{name} > 0")

    @property
    def electrical_time_constant(self) -> float:
        return self.terminal_inductance / self.terminal_resistance

    @property
    def wheel_inertia(self) -> float:
        """Load plus gear-reflected rotor inertia seen at the wheel axle."""
        return self.load_inertia_Il + self.gear_ratio_n**2 * self.rotor_inertia_IR


@dataclass(frozen=True)
class FrictionModel:
    mu_s: float
    normal_force_FN: float

    def __post_init__(self):
        _require(0 < self.mu_s <= 2, "0 < mu_s <= 2")
        _require(self.normal_force_FN > 0, "normal_force_FN > 0")

    @property
    def traction_limit(self) -> float:
        return self.mu_s * self.normal_force_FN


@dataclass(frozen=True)
class BodyParams:
    """Rigid-body data for the simulated plant (all assumed values).

    The body frame has x along the pipe axis, z up. ``com_offset`` is the
    centre of mass relative to the rotation centre on the pipe axis. Wheel
    ``i`` touches the wall at angle ``wheel_angles[i]`` (measured from +y
    towards +z) and its rolling direction is yawed from the pipe axis by
    ``toe_angle * toe_signs[i]``; the tangential share of traction is what
    gives the wheels authority over roll.
    """

    com_offset: tuple[float, float, float] = (0.004, 0.003, 0.008)
    roll_inertia: float = 4.0e-3
    pitch_inertia: float = 6.0e-3
    roll_damping: float = 2.0e-3
    pitch_damping: float = 2.0e-3
    pipe_radius: float = 7 * 0.0254
    toe_angle: float = math.radians(10.0)
    toe_signs: tuple[float, float, float] = (1.0, -1.0, 1.0)
    wheel_angles: tuple[float, float, float] = (
        math.pi / 2, math.pi / 2 + 2 * math.pi / 3, math.pi / 2 + 4 * math.pi / 3)
    gravity: float = 9.81
    pipe_incline: float = 0.0

    def __post_init__(self):
        _require(len(self.com_offset) == 3, "com_offset has 3 components")
        _require(self.roll_inertia > 0 and self.pitch_inertia > 0, "body inertias > 0")
        _require(self.roll_damping >= 0 and self.pitch_damping >= 0, "damping >= 0")
        _require(self.pipe_radius > 0, "pipe_radius > 0")
        _require(0 <= self.toe_angle < math.pi / 2, "0 <= toe_angle < pi/2")
        _require(self.gravity >= 0, "gravity >= 0")

    def toe(self) -> np.ndarray:
        return self.toe_angle * np.asarray(self.toe_signs, dtype=float)


@dataclass(frozen=True)
class DragModel:
    drag_coefficient_c: float = 12.5
    flow_velocity: float = 0.0

    def __post_init__(self):
        _require(self.drag_coefficient_c >= 0, "drag_coefficient_c >= 0")


@dataclass(frozen=True)
class BatteryModel:
    """Battery pack; ``discharge_curve`` maps current draw (A) to usable fraction."""

    capacity_C: float
    nominal_voltage: float
    discharge_curve: tuple[tuple[float, float], ...] = ((1.0, 1.0),)

    def __post_init__(self):
        _require(self.capacity_C > 0, "capacity_C > 0")
        _require(self.nominal_voltage > 0, "nominal_voltage > 0")
        _require(len(self.discharge_curve) >= 1, "discharge_curve non-empty")
        currents = [c for c, _ in self.discharge_curve]
        fractions = [f for _, f in self.discharge_curve]
        _require(all(b > a for a, b in zip(currents, currents[1:])),
                 "discharge_curve currents strictly increasing")
        _require(all(0 < f <= 1 for f in fractions), "usable_fraction in (0, 1]")
        _require(all(b <= a for a, b in zip(fractions, fractions[1:])),
                 "usable_fraction non-increasing with current")


@dataclass(frozen=True)
class EstimatorParams:
    mahony_kp: float = 1.0
    mahony_ki: float = 0.1
    pulses_per_rev: int = 16
    median_window: int = 5
    gyro_sigma: float = 0.005
    accel_sigma: float = 0.05
    gyro_bias: tuple[float, float, float] = (0.002, -0.002, 0.001)

    def __post_init__(self):
        _require(self.mahony_kp > 0 and self.mahony_ki >= 0, "kp > 0, ki >= 0")
        _require(self.pulses_per_rev >= 1, "pulses_per_rev >= 1")
        _require(self.median_window >= 1, "median_window >= 1")
        _require(self.gyro_sigma >= 0 and self.accel_sigma >= 0, "noise sigma >= 0")


@dataclass(frozen=True)
class ControlParams:
    Q: tuple[float, ...] = (1000.0, 1.0, 1000.0, 1.0)
    R: tuple[float, ...] = (1000.0, 1000.0, 1000.0)
    pid_gains: tuple[float, float, float] = (0.1, 0.5, 0.0)
    integral_limit: float = 6.0
    velocity_limit: float = 0.5
    control_period: float = 0.01
    acceleration_limit: float = 0.25

    def __post_init__(self):
        _require(len(self.Q) == 4, "Q diagonal has 4 entries")
        _require(len(self.R) == 3, "R diagonal has 3 entries")
        _require(all(q >= 0 for q in self.Q), "Q >= 0")
        _require(all(r > 0 for r in self.R), "R > 0")
        _require(self.integral_limit > 0, "integral_limit > 0")
        _require(self.velocity_limit > 0, "velocity_limit > 0")
        _require(self.control_period > 0, "control_period > 0")
        _require(self.acceleration_limit > 0, "acceleration_limit > 0")


@dataclass(frozen=True)
class PowerParams:
    n_motors: int = 3
    extreme_traction_total: float = 18.0
    h_initial: float = 8.0
    tolerance: float = 1e-3
    max_iterations: int = 100

    def __post_init__(self):
        _require(self.n_motors >= 1, "n_motors >= 1")
        _require(self.h_initial > 0, "h_initial > 0")
        _require(self.tolerance > 0, "tolerance > 0")


@dataclass(frozen=True)
class SimScenario:
    """Closed-loop run description.

    ``desired_velocity_profile`` is a piecewise-constant list of
    ``(t_start, V_d)``; each value takes effect at the first control tick at or
    after ``t_start``.
    """

    name: str = "custom"
    duration: float = 6.0
    dt: float = 1e-3
    desired_velocity_profile: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    initial_phi: float = 0.0
    initial_psi: float = 0.0
    flow_velocity: float = 0.0
    sensor_noise: bool = True
    seed: int = 0
    ideal_sensors: bool = False

    def __post_init__(self):
        _require(0 < self.dt <= 0.01, "dt in (0, 10 ms]")
        _require(self.duration > 0, "duration > 0")
        times = [t for t, _ in self.desired_velocity_profile]
        _require(len(times) >= 1, "velocity profile non-empty")
        _require(all(b >= a for a, b in zip(times, times[1:])),
                 "profile times non-decreasing")

    def desired_velocity(self, t: float) -> float:
        v = self.desired_velocity_profile[0][1]
        for t_start, v_d in self.desired_velocity_profile:
            if t >= t_start - 1e-12:
                v = v_d
        return v


@dataclass(frozen=True)
class Config:
    geometry: RobotGeometry
    motor: MotorParams
    friction: FrictionModel
    scenario: SimScenario = field(default_factory=SimScenario)
    body: BodyParams = field(default_factory=BodyParams)
    drag: DragModel = field(default_factory=DragModel)
    battery: BatteryModel = field(default_factory=lambda: BatteryModel(15.0, 12.0))
    power: PowerParams = field(default_factory=PowerParams)
    estimator: EstimatorParams = field(default_factory=EstimatorParams)
    control: ControlParams = field(default_factory=ControlParams)
    traction_fs: float = 6.0
    spring_grid: int = 512

    def __iter__(self):
        # (geometry, motor, friction, scenario) unpacking
        return iter((self.geometry, self.motor, self.friction, self.scenario))
