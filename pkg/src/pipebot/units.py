"""Unit-suffixed quantities and conversion to SI.

Config values are written as strings such as ``"103 mm"`` or ``"4.5 inch"``.
Everything inside the package works in SI units and radians; this module is
the only place where other units appear.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass


class UnitError(ValueError):
    """Raised for unknown units or dimensionally incompatible conversions."""


# unit -> (dimension, factor to the SI unit of that dimension)
_UNITS: dict[str, tuple[str, float]] = {
    # length
    "m": ("length", 1.0),
    "mm": ("length", 1e-3),
    "cm": ("length", 1e-2),
    "inch": ("length", 0.0254),
    "in": ("length", 0.0254),
    # angle
    "rad": ("angle", 1.0),
    "deg": ("angle", math.pi / 180.0),
    # time
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "hour": ("time", 3600.0),
    "h": ("time", 3600.0),
    # mechanics
    "kg": ("mass", 1.0),
    "N": ("force", 1.0),
    "N/m": ("stiffness", 1.0),
    "N*m": ("torque", 1.0),
    "N.m": ("torque", 1.0),
    "m/s": ("velocity", 1.0),
    "cm/s": ("velocity", 1e-2),
    "rad/s": ("angular_velocity", 1.0),
    "deg/s": ("angular_velocity", math.pi / 180.0),
    "rpm": ("angular_velocity", 2.0 * math.pi / 60.0),
    "m/s^2": ("acceleration", 1.0),
    "kg*m^2": ("inertia", 1.0),
    "N*s^2/m^2": ("drag_coefficient", 1.0),
    "N*m*s/rad": ("rotational_damping", 1.0),
    # electrical
    "V": ("voltage", 1.0),
    "A": ("current", 1.0),
    "A*h": ("charge", 1.0),
    "A.h": ("charge", 1.0),
    "Ah": ("charge", 1.0),
    "ohm": ("resistance", 1.0),
    "H": ("inductance", 1.0),
    "mH": ("inductance", 1e-3),
    "W": ("power", 1.0),
    "V*s/rad": ("emf_constant", 1.0),
    # dimensionless
    "1": ("dimensionless", 1.0),
    "": ("dimensionless", 1.0),
}

# Charge stays in A*h: the battery formulas are written in amp-hours and hours.
_SI = {
    "length": "m",
    "angle": "rad",
    "time": "s",
    "mass": "kg",
    "force": "N",
    "stiffness": "N/m",
    "torque": "N*m",
    "velocity": "m/s",
    "angular_velocity": "rad/s",
    "acceleration": "m/s^2",
    "inertia": "kg*m^2",
    "drag_coefficient": "N*s^2/m^2",
    "rotational_damping": "N*m*s/rad",
    "voltage": "V",
    "current": "A",
    "charge": "A*h",
    "resistance": "ohm",
    "inductance": "H",
    "power": "W",
    "emf_constant": "V*s/rad",
    "dimensionless": "1",
}


def _normalise(unit: str) -> str:
    u = unit.strip().replace("·", "*").replace("²", "^2")
    if u in ("inches", '"'):
        return "inch"
    if u in ("degree", "degrees", "°"):
        return "deg"
    if u in ("Ω", "ohms"):
        return "ohm"
    if u in ("hours", "hr"):
        return "hour"
    return u


def dimension(unit: str) -> str:
    try:
        return _UNITS[_normalise(unit)][0]
    except KeyError:
        raise UnitError(f"unknown unit {unit!r}") from None


@dataclass(frozen=True)
class UnitValue:
    magnitude: float
    unit: str

    def __post_init__(self):
        object.__setattr__(self, "unit", _normalise(self.unit))
        dimension(self.unit)

    def si(self) -> float:
        """Magnitude in the SI unit of this value's dimension."""
        return self.magnitude * _UNITS[self.unit][1]


def convert_unit(v: UnitValue, target: str) -> UnitValue:
    """Rescale ``v`` into ``target``.

    The result is computed as ``magnitude * (f_src / f_dst)`` so that
    converting to and from the same unit is exact.
    """
    target = _normalise(target)
    src_dim = dimension(v.unit)
    dst_dim = dimension(target)
    if src_dim != dst_dim:
        raise UnitError(f"cannot convert {v.unit!r} ({src_dim}) to {target!r} ({dst_dim})")
    f_src = _UNITS[v.unit][1]
    f_dst = _UNITS[target][1]
    if f_src == f_dst:
        return UnitValue(v.magnitude, target)
    if f_dst == 1.0:
        return UnitValue(v.magnitude * f_src, target)
    if f_src == 1.0:
        return UnitValue(v.magnitude / f_dst, target)
    return UnitValue(v.magnitude * (f_src / f_dst), target)


_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def parse_quantity(text: str | float | int, expected: str | None = None) -> float:
    """Parse ``"103 mm"`` style strings into an SI magnitude.

    Bare numbers are taken to be SI already. ``expected`` is a dimension name
    (``"length"``, ``"angle"``...) checked against the parsed unit.
    """
    if isinstance(text, bool):
        raise UnitError(f"expected a quantity, got {text!r}")
    if isinstance(text, (int, float)):
        return float(text)
    m = _QUANTITY.match(str(text))
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}")
    value = UnitValue(float(m.group(1)), m.group(2))
    if expected is not None and dimension(value.unit) != expected:
        raise UnitError(f"{text!r} is a {dimension(value.unit)}, expected {expected}")
    return value.si()


def si_unit(dim: str) -> str:
    return _SI[dim]
