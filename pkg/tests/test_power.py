import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pipebot.params import BatteryModel
from pipebot.power import (discharge_time, extreme_current_draw, min_capacity,
                           peak_wheel_torque, size_battery, usable_fraction)

PACK = BatteryModel(15.0, 12.0)


def test_min_capacity_zero(motor):
    assert min_capacity(0.0, motor) == 0.0


def test_min_capacity_three_hours(motor):
    # 3 motors * 20 W * 3 h / 12 V
    assert min_capacity(3.0, motor) == pytest.approx(15.0, rel=1e-12)


def test_min_capacity_negative_rejected(motor):
    with pytest.raises(ValueError):
        min_capacity(-1.0, motor)


@given(h=st.floats(0.0, 100.0), k=st.floats(0.01, 100.0))
def test_min_capacity_linear(motor, h, k):
    assert min_capacity(k * h, motor) == pytest.approx(k * min_capacity(h, motor), rel=1e-12, abs=1e-12)
    m2 = replace(motor, rated_power_P=k * motor.rated_power_P)
    assert min_capacity(h, m2) == pytest.approx(k * min_capacity(h, motor), rel=1e-12, abs=1e-12)


def test_discharge_time_flat_curve():
    assert discharge_time(PACK, 5.0) == pytest.approx(3.0, rel=1e-12)


def test_discharge_time_derated():
    pack = BatteryModel(15.0, 12.0, ((1.0, 1.0), (10.0, 0.8)))
    assert discharge_time(pack, 10.0) == pytest.approx(1.2, rel=1e-12)
    assert usable_fraction(pack, 5.5) == pytest.approx(0.9, rel=1e-12)
    # clamped beyond the table
    assert usable_fraction(pack, 50.0) == 0.8


def test_discharge_time_needs_current():
    with pytest.raises(ValueError):
        discharge_time(PACK, 0.0)


def test_extreme_current_chain(motor):
    tau = peak_wheel_torque(18.0, 0.05)
    assert tau == pytest.approx(0.3, rel=1e-12)
    draw = extreme_current_draw(motor, tau)
    assert draw == pytest.approx(3 * (6.0 * 0.05 / 26) / (0.9 / 130), rel=1e-12)
    assert extreme_current_draw(motor, 2 * tau) == pytest.approx(2 * draw, rel=1e-12)
    assert extreme_current_draw(motor, 0.0) == 0.0


def test_size_battery_reference(motor):
    draw = extreme_current_draw(motor, peak_wheel_torque(18.0, 0.05))
    plan = size_battery(motor, PACK, 8.0, 1e-3, draw)
    assert plan.converged
    assert plan.iterations <= 100
    assert plan.capacity_C == pytest.approx(15.0, rel=0.01)
    assert plan.operation_hours == pytest.approx(3.0, rel=0.01)
    # one more substitution barely moves the fixed point
    assert abs(0.5 * (plan.operation_hours + plan.discharge_hours) - plan.operation_hours) <= 1e-3


def test_size_battery_infinite_tolerance(motor):
    plan = size_battery(motor, PACK, 8.0, math.inf, 5.0)
    assert plan.iterations == 1
    assert plan.converged
    assert plan.operation_hours == 8.0


def test_size_battery_iteration_cap(motor):
    plan = size_battery(motor, PACK, 8.0, 1e-30, 5.0, max_iterations=3)
    assert not plan.converged
    assert plan.iterations == 3


def test_size_battery_bad_inputs(motor):
    with pytest.raises(ValueError):
        size_battery(motor, PACK, 0.0, 1e-3, 5.0)
    with pytest.raises(ValueError):
        size_battery(motor, PACK, 1.0, 0.0, 5.0)


def test_capacity_monotone_in_power(motor):
    caps = [size_battery(replace(motor, rated_power_P=p), PACK, 8.0, 1e-6, 5.0).capacity_C
            for p in np.linspace(5, 40, 8)]
    assert all(b > a for a, b in zip(caps, caps[1:]))
