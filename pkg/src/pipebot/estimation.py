"""Simulated IMU and encoders, Mahony attitude filter, pulse-timing velocity.

Frames follow the plant: body x along the pipe axis, z up, orientation
``R_y(psi) R_x(phi)``. The simulated accelerometer reports the gravity vector
in the body frame, so a level body reads ``(0, 0, -g)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .plant import PHI, PHI_DOT, PSI, PSI_DOT, WHEELS, PlantState


@dataclass(frozen=True)
class ImuSample:
    gyro: tuple[float, float, float]
    accel: tuple[float, float, float]
    timestamp: float


@dataclass(frozen=True)
class ImuNoise:
    gyro_sigma: float = 0.0
    accel_sigma: float = 0.0
    gyro_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.gyro_sigma < 0 or self.accel_sigma < 0:
            raise ValueError("noise sigma must be non-negative")


def _as_array(x) -> np.ndarray:
    return x.to_array() if isinstance(x, PlantState) else np.asarray(x, dtype=float)


def body_rates(x) -> np.ndarray:
    xa = _as_array(x)
    phi, phid, psid = xa[PHI], xa[PHI_DOT], xa[PSI_DOT]
    return np.array([phid, psid * math.cos(phi), -psid * math.sin(phi)])


def gravity_in_body(x, g: float = 9.81) -> np.ndarray:
    xa = _as_array(x)
    phi, psi = xa[PHI], xa[PSI]
    return np.array([g * math.sin(psi), -g * math.cos(psi) * math.sin(phi),
                     -g * math.cos(psi) * math.cos(phi)])


def imu_sense(x, noise: ImuNoise, rng: np.random.Generator | int | None,
              timestamp: float = 0.0, g: float = 9.81) -> ImuSample:
    """Gyro and accelerometer reading for state ``x``.

    ``rng`` may be a generator (consumed in place) or an integer seed.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    gyro = body_rates(x) + np.asarray(noise.gyro_bias, dtype=float)
    accel = gravity_in_body(x, g)
    if noise.gyro_sigma > 0:
        gyro = gyro + rng.normal(0.0, noise.gyro_sigma, 3)
    if noise.accel_sigma > 0:
        accel = accel + rng.normal(0.0, noise.accel_sigma, 3)
    return ImuSample(tuple(float(v) for v in gyro), tuple(float(v) for v in accel),
                     float(timestamp))


# -- Mahony filter -----------------------------------------------------------

@dataclass(frozen=True)
class AttitudeEstimate:
    quaternion: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    integral: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def phi_hat(self) -> float:
        w, x, y, z = self.quaternion
        return math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))

    @property
    def psi_hat(self) -> float:
        w, x, y, z = self.quaternion
        s = 2.0 * (w * y - z * x)
        return math.asin(max(-1.0, min(1.0, s)))

    @classmethod
    def from_euler(cls, phi: float, psi: float) -> "AttitudeEstimate":
        cr, sr = math.cos(phi / 2), math.sin(phi / 2)
        cp, sp = math.cos(psi / 2), math.sin(psi / 2)
        return cls((cr * cp, sr * cp, cr * sp, -sr * sp))

    @classmethod
    def from_accel(cls, accel) -> "AttitudeEstimate":
        """Level the estimate on a single gravity reading."""
        ax, ay, az = accel
        phi = math.atan2(-ay, -az)
        psi = math.atan2(ax, math.hypot(ay, az))
        return cls.from_euler(phi, psi)


def mahony_update(est: AttitudeEstimate, s: ImuSample, gains: tuple[float, float],
                  dt: float) -> AttitudeEstimate:
    """One Mahony complementary-filter step.

    The innovation is the cross product of the measured and the predicted
    "up" directions; the gyro is corrected by ``kp * e + ki * integral(e)``.
    A zero accelerometer vector skips the correction.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    kp, ki = gains
    qw, qx, qy, qz = est.quaternion
    ix, iy, iz = est.integral
    gx, gy, gz = s.gyro
    ax, ay, az = s.accel

    norm = math.sqrt(ax * ax + ay * ay + az * az)
    if norm > 0.0:
        # accelerometer reads gravity (down); flip to "up"
        ax, ay, az = -ax / norm, -ay / norm, -az / norm
        vx = 2.0 * (qx * qz - qw * qy)
        vy = 2.0 * (qw * qx + qy * qz)
        vz = qw * qw - qx * qx - qy * qy + qz * qz
        ex = ay * vz - az * vy
        ey = az * vx - ax * vz
        ez = ax * vy - ay * vx
        if ki > 0.0:
            ix += ki * ex * dt
            iy += ki * ey * dt
            iz += ki * ez * dt
        gx += kp * ex + ix
        gy += kp * ey + iy
        gz += kp * ez + iz

    half = 0.5 * dt
    dw = (-qx * gx - qy * gy - qz * gz) * half
    dx = (qw * gx + qy * gz - qz * gy) * half
    dy = (qw * gy - qx * gz + qz * gx) * half
    dz = (qw * gz + qx * gy - qy * gx) * half
    qw, qx, qy, qz = qw + dw, qx + dx, qy + dy, qz + dz
    n = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
    return AttitudeEstimate((qw / n, qx / n, qy / n, qz / n), (ix, iy, iz))


def corrected_rates(est: AttitudeEstimate, s: ImuSample) -> tuple[float, float]:
    """(phi_dot, psi_dot) from the gyro, less the filter's bias estimate."""
    gx, gy, gz = (g + b for g, b in zip(s.gyro, est.integral))
    phi = est.phi_hat
    return gx, gy * math.cos(phi) - gz * math.sin(phi)


# -- encoders ----------------------------------------------------------------

@dataclass(frozen=True)
class EncoderStream:
    """Pulse bookkeeping for three incremental encoders.

    ``last_pulse_times`` and ``T_c`` are NaN until a channel has produced one
    and two pulses respectively. ``direction`` is the sign of the last
    crossing; a reversal clears ``T_c`` until the next same-direction pulse.
    """

    pulses_per_rev_N: int
    last_pulse_times: tuple[float, float, float] = (math.nan,) * 3
    T_c: tuple[float, float, float] = (math.nan,) * 3
    angles: tuple[float, float, float] = (0.0, 0.0, 0.0)
    speeds: tuple[float, float, float] = (0.0, 0.0, 0.0)
    counts: tuple[int, int, int] = (0, 0, 0)
    direction: tuple[float, float, float] = (1.0, 1.0, 1.0)
    time: float = 0.0
    pulse_log: tuple[tuple[float, ...], ...] = field(default=((), (), ()), repr=False)
    keep_log: bool = False

    def __post_init__(self):
        if self.pulses_per_rev_N < 1:
            raise ValueError("pulses_per_rev_N must be >= 1")


def encoder_sense(x, stream: EncoderStream, t: float) -> EncoderStream:
    """Advance the encoders to time ``t`` using the wheel speeds in ``x``.

    Wheel angles are integrated with the trapezoid rule since the previous
    call; a pulse fires whenever an angle crosses a multiple of 2*pi/N and its
    time is found by linear interpolation inside the interval.
    """
    if t < stream.time:
        raise ValueError("encoder time must be non-decreasing")
    xa = _as_array(x)
    speeds_now = xa[WHEELS] if xa.shape[0] > 3 else xa
    dt = t - stream.time
    step = 2.0 * math.pi / stream.pulses_per_rev_N
    angles, counts, last, tc, dirs = [], [], [], [], []
    logs = []
    for i in range(3):
        a0 = stream.angles[i]
        a1 = a0 + 0.5 * (stream.speeds[i] + float(speeds_now[i])) * dt
        c0 = stream.counts[i]
        c1 = math.floor(a1 / step)
        last_t, period, direction = stream.last_pulse_times[i], stream.T_c[i], stream.direction[i]
        log = list(stream.pulse_log[i]) if stream.keep_log else []
        if c1 != c0 and a1 != a0:
            sgn = 1 if c1 > c0 else -1
            # boundaries crossed, in order of crossing
            marks = range(c0 + 1, c1 + 1) if sgn > 0 else range(c0, c1, -1)
            for k in marks:
                frac = (k * step - a0) / (a1 - a0)
                tp = stream.time + frac * dt
                if sgn != direction:
                    # a reversal says nothing about speed
                    period = math.nan
                elif not math.isnan(last_t):
                    period = tp - last_t
                last_t = tp
                direction = float(sgn)
                if stream.keep_log:
                    log.append(tp)
        angles.append(a1)
        counts.append(c1)
        last.append(last_t)
        tc.append(period)
        dirs.append(direction)
        logs.append(tuple(log))
    return EncoderStream(stream.pulses_per_rev_N, tuple(last), tuple(tc), tuple(angles),
                         tuple(float(w) for w in speeds_now[:3]), tuple(counts), tuple(dirs),
                         float(t), tuple(logs) if stream.keep_log else ((), (), ()),
                         stream.keep_log)


def encoder_velocity(stream: EncoderStream, R: float, t: float | None = None) -> np.ndarray:
    """Rim speed per wheel, ``2 pi R / (N T_c)``; NaN where unavailable.

    When ``t`` is given and more time than ``T_c`` has passed since the last
    pulse, the elapsed time is used instead, so a stopping wheel reads a
    decaying speed rather than its last value.
    """
    out = np.full(3, np.nan)
    for i in range(3):
        period = stream.T_c[i]
        if math.isnan(period) or period <= 0:
            continue
        if t is not None:
            period = max(period, t - stream.last_pulse_times[i])
        out[i] = stream.direction[i] * 2.0 * math.pi * R / (stream.pulses_per_rev_N * period)
    return out


class MedianFilter:
    """Moving median over the last ``window`` samples, per channel."""

    def __init__(self, window: int = 5, channels: int = 3):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self._buf = [deque(maxlen=window) for _ in range(channels)]

    def __call__(self, values) -> np.ndarray:
        out = np.empty(len(self._buf))
        for i, v in enumerate(values):
            self._buf[i].append(float(v))
            out[i] = float(np.median(self._buf[i]))
        return out

