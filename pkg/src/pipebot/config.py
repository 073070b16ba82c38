"""Config loading.

A config is a TOML document with ``[geometry]``, ``[motor]``, ``[friction]``
and ``[scenario]`` sections plus optional ``[spring]``, ``[body]``,
``[drag]``, ``[battery]``, ``[power]``, ``[estimation]`` and ``[control]``.
Dimensional values are strings with a unit suffix (``"103 mm"``,
``"4.5 inch"``); keys missing from a file fall back to the packaged defaults
in ``data/default.toml``.
"""

from __future__ import annotations

import copy
import math
import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .params import (BatteryModel, BodyParams, Config, ConfigError, ControlParams, DragModel,
                     EstimatorParams, FrictionModel, MotorParams, PowerParams, RobotGeometry,
                     SimScenario, ValidationError)
from .plant import drag_coefficient_from_point
from .units import UnitError, parse_quantity


def default_config_text() -> str:
    return resources.files("pipebot").joinpath("data/default.toml").read_text(encoding="utf-8")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


class _Section:
    def __init__(self, name: str, data: dict):
        self.name = name
        self.data = data

    def _raw(self, key):
        if key not in self.data:
            raise ConfigError(f"missing key [{self.name}] {key}")
        return self.data[key]

    def q(self, key: str, dim: str | None = None) -> float:
        try:
            return parse_quantity(self._raw(key), dim)
        except (UnitError, TypeError) as exc:
            raise ConfigError(f"[{self.name}] {key}: {exc}") from None

    def num(self, key: str, kind=float):
        value = self._raw(key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{self.name}] {key}: expected a number, got {value!r}")
        return kind(value)

    def flag(self, key: str) -> bool:
        value = self._raw(key)
        if not isinstance(value, bool):
            raise ConfigError(f"[{self.name}] {key}: expected true/false, got {value!r}")
        return value

    def qlist(self, key: str, dim: str | None = None) -> tuple[float, ...]:
        value = self._raw(key)
        if not isinstance(value, list):
            raise ConfigError(f"[{self.name}] {key}: expected a list")
        try:
            return tuple(parse_quantity(v, dim) for v in value)
        except (UnitError, TypeError) as exc:
            raise ConfigError(f"[{self.name}] {key}: {exc}") from None

    def pairs(self, key: str, dims: tuple[str | None, str | None]) -> tuple[tuple[float, float], ...]:
        value = self._raw(key)
        if not isinstance(value, list) or not all(isinstance(p, list) and len(p) == 2 for p in value):
            raise ConfigError(f"[{self.name}] {key}: expected a list of pairs")
        try:
            return tuple((parse_quantity(a, dims[0]), parse_quantity(b, dims[1])) for a, b in value)
        except (UnitError, TypeError) as exc:
            raise ConfigError(f"[{self.name}] {key}: {exc}") from None


def scenario_from_table(table: dict, base: SimScenario | None = None) -> SimScenario:
    """Build a scenario from a ``[scenario]``-style table; absent keys keep ``base``."""
    base = base or SimScenario()
    sec = _Section("scenario", table)
    kw = {}
    if "name" in table:
        kw["name"] = str(table["name"])
    for key, dim in (("duration", "time"), ("dt", "time"), ("initial_phi", "angle"),
                     ("initial_psi", "angle"), ("flow_velocity", "velocity")):
        if key in table:
            kw[key] = sec.q(key, dim)
    if "desired_velocity_profile" in table:
        kw["desired_velocity_profile"] = sec.pairs("desired_velocity_profile", ("time", "velocity"))
    for key in ("sensor_noise", "ideal_sensors"):
        if key in table:
            kw[key] = sec.flag(key)
    if "seed" in table:
        kw["seed"] = sec.num("seed", int)
    fields = {**base.__dict__, **kw}
    return SimScenario(**fields)


def parse_config(doc: dict) -> Config:
    """Turn a parsed TOML document (already merged with defaults) into a Config."""
    g = _Section("geometry", doc.get("geometry", {}))
    m = _Section("motor", doc.get("motor", {}))
    f = _Section("friction", doc.get("friction", {}))
    b = _Section("body", doc.get("body", {}))
    d = _Section("drag", doc.get("drag", {}))
    bat = _Section("battery", doc.get("battery", {}))
    pw = _Section("power", doc.get("power", {}))
    est = _Section("estimation", doc.get("estimation", {}))
    ctl = _Section("control", doc.get("control", {}))
    spr = _Section("spring", doc.get("spring", {}))

    geometry = RobotGeometry(
        arm_length_a=g.q("arm_length", "length"),
        pivot_offset_t=g.q("pivot_offset", "length"),
        contact_arm_L=g.q("contact_arm_L", "length"),
        wheel_radius_R=g.q("wheel_radius", "length"),
        robot_mass_m=g.q("robot_mass", "mass"),
        pipe_radius_H_min=g.q("pipe_radius_min", "length"),
        pipe_radius_H_max=g.q("pipe_radius_max", "length"),
    )
    motor = MotorParams(
        terminal_resistance=m.q("terminal_resistance", "resistance"),
        terminal_inductance=m.q("terminal_inductance", "inductance"),
        back_emf_constant_Kv=m.q("back_emf_constant", "emf_constant"),
        gear_ratio_n=m.q("gear_ratio", "dimensionless"),
        load_inertia_Il=m.q("load_inertia", "inertia"),
        rotor_inertia_IR=m.q("rotor_inertia", "inertia"),
        nominal_voltage_Vn=m.q("nominal_voltage", "voltage"),
        rated_power_P=m.q("rated_power", "power"),
        voltage_limit=m.q("voltage_limit", "voltage"),
    )
    friction = FrictionModel(mu_s=f.q("mu_s", "dimensionless"),
                             normal_force_FN=f.q("normal_force", "force"))
    traction_fs = f.q("traction_fs", "force")

    body = BodyParams(
        com_offset=(b.q("com_offset_x", "length"), b.q("com_offset_y", "length"),
                    b.q("com_offset_z", "length")),
        roll_inertia=b.q("roll_inertia", "inertia"),
        pitch_inertia=b.q("pitch_inertia", "inertia"),
        roll_damping=b.q("roll_damping", "rotational_damping"),
        pitch_damping=b.q("pitch_damping", "rotational_damping"),
        pipe_radius=b.q("pipe_radius", "length"),
        toe_angle=b.q("toe_angle", "angle"),
        gravity=b.q("gravity", "acceleration"),
        pipe_incline=b.q("pipe_incline", "angle"),
    )
    if "coefficient" in d.data:
        c_drag = d.q("coefficient", "drag_coefficient")
    else:
        c_drag = drag_coefficient_from_point(d.q("calibration_force", "force"),
                                             d.q("calibration_relative_velocity", "velocity"))

    battery = BatteryModel(
        capacity_C=bat.q("capacity", "charge"),
        nominal_voltage=bat.q("nominal_voltage", "voltage"),
        discharge_curve=bat.pairs("discharge_curve", ("current", "dimensionless")),
    )
    power = PowerParams(
        n_motors=pw.num("n_motors", int),
        extreme_traction_total=pw.q("extreme_traction_total", "force"),
        h_initial=pw.q("h_initial", "time") / 3600.0,
        tolerance=pw.q("tolerance", "time") / 3600.0,
        max_iterations=pw.num("max_iterations", int),
    )
    estimator = EstimatorParams(
        mahony_kp=est.num("mahony_kp"),
        mahony_ki=est.num("mahony_ki"),
        pulses_per_rev=est.num("pulses_per_rev", int),
        median_window=est.num("median_window", int),
        gyro_sigma=est.q("gyro_sigma", "angular_velocity"),
        accel_sigma=est.q("accel_sigma", "acceleration"),
        gyro_bias=est.qlist("gyro_bias", "angular_velocity"),
    )
    control = ControlParams(
        Q=ctl.qlist("Q"),
        R=ctl.qlist("R"),
        pid_gains=ctl.qlist("pid_gains"),
        integral_limit=ctl.q("integral_limit", "voltage"),
        velocity_limit=ctl.q("velocity_limit", "velocity"),
        control_period=ctl.q("control_period", "time"),
        acceleration_limit=(ctl.q("acceleration_limit", "acceleration")
                            if "acceleration_limit" in ctl.data else math.inf),
    )
    scenario = scenario_from_table(doc.get("scenario", {}))
    drag = DragModel(drag_coefficient_c=c_drag, flow_velocity=scenario.flow_velocity)
    return Config(geometry=geometry, motor=motor, friction=friction, scenario=scenario,
                  body=body, drag=drag, battery=battery, power=power, estimator=estimator,
                  control=control, traction_fs=traction_fs,
                  spring_grid=spr.num("grid_points", int))


def loads_config(text: str, use_defaults: bool = True) -> Config:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if use_defaults:
        doc = _merge(tomllib.loads(default_config_text()), doc)
    return parse_config(doc)


def load_config(path: str | Path | None = None, use_defaults: bool = True) -> Config:
    """Read a config file (or the packaged defaults when ``path`` is None).

    Raises ``ConfigError`` naming the offending key on parse or unit problems,
    and ``ValidationError`` naming the invariant when a value is out of range.
    """
    if path is None:
        return loads_config(default_config_text(), use_defaults=False)
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not UTF-8: {exc}") from None
    return loads_config(text, use_defaults=use_defaults)


__all__ = ["load_config", "loads_config", "parse_config", "scenario_from_table",
           "ConfigError", "ValidationError", "default_config_text"]
