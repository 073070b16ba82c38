"""Battery capacity and operation-duration sizing.

The loop alternates between the capacity the motors need for an assumed
duration and the time the size-limited battery actually lasts at the
extreme-condition current draw, until the two durations agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import BatteryModel, MotorParams


@dataclass(frozen=True)
class PowerPlan:
    capacity_C: float
    operation_hours: float
    iterations: int
    converged: bool
    tolerance: float
    discharge_hours: float


def min_capacity(h: float, motors: MotorParams, n_motors: int = 3) -> float:
    """Capacity in A*h that ``n_motors`` motors at rated power need for ``h`` hours."""
    if h < 0:
        raise ValueError("operation duration must be non-negative")
    return n_motors * motors.rated_power_P * h / motors.nominal_voltage_Vn


def usable_fraction(battery: BatteryModel, current_draw: float) -> float:
    currents = [c for c, _ in battery.discharge_curve]
    fractions = [f for _, f in battery.discharge_curve]
    # np.interp clamps to the end values outside the table
    return float(np.interp(current_draw, currents, fractions))


def discharge_time(battery: BatteryModel, current_draw: float) -> float:
    """Hours the battery lasts at a constant ``current_draw`` (A)."""
    if current_draw <= 0:
        raise ValueError("current_draw must be positive")
    return usable_fraction(battery, current_draw) * battery.capacity_C / current_draw


def peak_wheel_torque(total_traction: float, wheel_radius: float, n_motors: int = 3) -> float:
    """Axle torque each wheel needs when the traction is shared evenly."""
    return total_traction / n_motors * wheel_radius


def extreme_current_draw(motors: MotorParams, peak_torque_per_wheel: float,
                         n_motors: int = 3) -> float:
    """Battery current when every motor delivers ``peak_torque_per_wheel`` at its wheel.

    The wheel torque is divided down by the gearbox to the motor shaft, then
    converted with ``T_m = K_v * i``.
    """
    shaft_torque = peak_torque_per_wheel / motors.gear_ratio_n
    return n_motors * abs(shaft_torque) / motors.back_emf_constant_Kv


def size_battery(motors: MotorParams, battery_family: BatteryModel, h_initial: float,
                 tolerance: float, current_draw: float, n_motors: int = 3,
                 max_iterations: int = 100) -> PowerPlan:
    """Find the operation duration the battery supports and the capacity it implies.

    ``battery_family`` is the largest pack that fits the hull: its capacity,
    nominal voltage and discharge curve. Each iteration compares the duration
    guess with how long that pack lasts at ``current_draw`` and moves the guess
    halfway towards it. The returned capacity is the minimum capacity the
    motors need for the converged duration; it fits the hull when it does not
    exceed ``battery_family.capacity_C``.
    """
    if h_initial <= 0:
        raise ValueError("h_initial must be positive")
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")

    h = float(h_initial)
    t_d = discharge_time(battery_family, current_draw)
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        if abs(h - t_d) <= tolerance:
            converged = True
            break
        h = 0.5 * (h + t_d)

    return PowerPlan(
        capacity_C=min_capacity(h, motors, n_motors),
        operation_hours=h,
        iterations=iterations,
        converged=converged,
        tolerance=tolerance if math.isfinite(tolerance) else math.inf,
        discharge_hours=t_d,
    )
