"""Arm geometry and minimum spring stiffness for pure rolling.

For a pipe radius ``H`` the arm angle ``theta`` solves

    -theta + asin((t/a) cos theta) + pi/2 = asin(H/L)

The spring must then balance the moment about the arm pivot when the wheel
transmits the design traction ``f_s``. Dividing the required spring force by
the spring extension gives a stiffness ``G(theta)``; the design stiffness is
the largest ``G`` over the pipe range.

Sign convention: the moment balance returns a signed force. With the published
parameter set it is negative everywhere, i.e. the spring is loaded in tension,
which is what an extended linear spring provides. The stiffness is therefore
``G = -F_spring / U``, so ``K * U`` is the spring tension.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .params import FrictionModel, RobotGeometry

THETA_TOL = 1e-10
THETA_MAX = math.pi / 2 - 1e-6
THETA_MIN_FOR_STIFFNESS = 1e-4


class InfeasibleGeometryError(ValueError):
    """The requested pipe radius is outside the arm's reach."""


class SingularConfigurationError(ValueError):
    """cos(theta) vanishes and the spring lever arm collapses."""


@dataclass(frozen=True)
class ArmConfiguration:
    theta: float
    alpha: float
    beta: float
    spring_moment_arm_chi: float


@dataclass(frozen=True)
class StiffnessResult:
    K_required: float
    theta_at_max: float
    H_at_max: float
    curve: tuple[tuple[float, float, float], ...]

    @property
    def at_endpoint(self) -> bool:
        """True when the maximum sits on the first or last grid point."""
        H = [c[0] for c in self.curve]
        return self.H_at_max in (H[0], H[-1])


def alpha_of(theta: float, geom: RobotGeometry) -> float:
    return math.asin(geom.pivot_offset_t / geom.arm_length_a * math.cos(theta))


def beta_of(theta: float, geom: RobotGeometry) -> float:
    return -theta + alpha_of(theta, geom) + math.pi / 2


def arm_configuration(theta: float, geom: RobotGeometry) -> ArmConfiguration:
    alpha = alpha_of(theta, geom)
    return ArmConfiguration(
        theta=theta,
        alpha=alpha,
        beta=-theta + alpha + math.pi / 2,
        spring_moment_arm_chi=geom.pivot_offset_t * math.cos(theta),
    )


def theta_residual(theta: float, H: float, geom: RobotGeometry) -> float:
    return beta_of(theta, geom) - math.asin(H / geom.contact_arm_L)


def solve_theta(H: float, geom: RobotGeometry) -> float:
    """Arm angle that places the wheel on a pipe wall at radius ``H``.

    Bisection on the bracket ``[0, pi/2 - 1e-6]`` followed by one secant step
    on the final bracket. The residual is monotone decreasing in theta.
    """
    ratio = H / geom.contact_arm_L
    if not 0 < ratio <= 1:
        raise InfeasibleGeometryError(
            f"H/L = {ratio:.6g} outside (0, 1]: pipe radius {H:.6g} m is out of arm reach")

    lo, hi = 0.0, THETA_MAX
    f_lo = theta_residual(lo, H, geom)
    f_hi = theta_residual(hi, H, geom)
    if f_lo == 0.0:
        return lo
    if f_lo * f_hi > 0:
        raise InfeasibleGeometryError(f"no arm angle in [0, pi/2) reaches H = {H:.6g} m")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = theta_residual(mid, H, geom)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo < 1e-13:
            break

    # secant refinement inside the bracket
    theta = lo - f_lo * (hi - lo) / (f_hi - f_lo)
    if not lo <= theta <= hi:
        theta = 0.5 * (lo + hi)
    best = min((theta, lo, hi), key=lambda x: abs(theta_residual(x, H, geom)))
    if abs(theta_residual(best, H, geom)) > THETA_TOL:
        raise InfeasibleGeometryError(f"arm angle did not converge for H = {H:.6g} m")
    return best


def spring_force(theta: float, geom: RobotGeometry, fric: FrictionModel,
                 traction_fs: float, gravity: float = 9.81) -> float:
    """Signed spring force from the moment balance about the arm pivot.

    ``H`` is recovered from the arm angle as ``L sin(beta(theta))``.
    """
    cos_t = math.cos(theta)
    if theta >= math.pi / 2 or cos_t < 1e-12 or geom.pivot_offset_t == 0:
        raise SingularConfigurationError(f"spring lever arm vanishes at theta = {theta}")
    H = geom.contact_arm_L * math.sin(beta_of(theta, geom))
    load = fric.normal_force_FN - geom.robot_mass_m * gravity
    moment = load * geom.arm_length_a * math.cos(theta + alpha_of(theta, geom)) - traction_fs * H
    return moment / (geom.pivot_offset_t * cos_t)


def spring_extension_U(theta: float, geom: RobotGeometry) -> float:
    """Extension of the spring between its anchors, zero at theta = 0."""
    a, t = geom.arm_length_a, geom.pivot_offset_t
    b = beta_of(theta, geom)
    anchor_distance = math.hypot(t + a * math.cos(b), a * math.sin(b))
    return anchor_distance * (1.0 - math.cos(theta))


def stiffness_G(theta: float, geom: RobotGeometry, fric: FrictionModel,
                traction_fs: float, gravity: float = 9.81) -> float:
    U = spring_extension_U(theta, geom)
    if U == 0.0:
        raise SingularConfigurationError("spring extension is zero at theta = 0")
    return -spring_force(theta, geom, fric, traction_fs, gravity) / U


def check_pure_rolling(traction_F: float, fric: FrictionModel) -> bool:
    return traction_F <= fric.mu_s * fric.normal_force_FN


def default_H_grid(geom: RobotGeometry, n: int = 512) -> np.ndarray:
    return np.linspace(geom.pipe_radius_H_min, geom.pipe_radius_H_max, n)


def stiffness_curve(geom: RobotGeometry, fric: FrictionModel, traction_fs: float,
                    H_grid=None, gravity: float = 9.81) -> StiffnessResult:
    """Stiffness over a pipe-radius grid and its maximum.

    Arm angles below 1e-4 rad are skipped when searching for the maximum
    (0/0 limit at zero extension). Ties go to the smallest H.
    """
    if H_grid is None:
        H_grid = default_H_grid(geom)
    H_grid = [float(h) for h in H_grid]
    if not H_grid:
        raise ValueError("H grid is empty")
    span = geom.pipe_radius_H_max - geom.pipe_radius_H_min
    slack = 1e-12 * span
    for H in H_grid:
        if not geom.pipe_radius_H_min - slack <= H <= geom.pipe_radius_H_max + slack:
            raise ValueError(f"H = {H} outside [{geom.pipe_radius_H_min}, {geom.pipe_radius_H_max}]")

    curve = []
    best = None
    for H in H_grid:
        try:
            theta = solve_theta(H, geom)
        except InfeasibleGeometryError as exc:
            raise InfeasibleGeometryError(f"at H = {H:.6g} m: {exc}") from exc
        if theta < THETA_MIN_FOR_STIFFNESS:
            curve.append((H, theta, math.nan))
            continue
        G = stiffness_G(theta, geom, fric, traction_fs, gravity)
        curve.append((H, theta, G))
        if best is None or G > best[2] or (G == best[2] and H < best[0]):
            best = (H, theta, G)
    if best is None:
        raise ValueError("every grid point is inside the theta -> 0 exclusion zone")
    return StiffnessResult(K_required=best[2], theta_at_max=best[1], H_at_max=best[0],
                           curve=tuple(curve))


def write_curve_csv(result: StiffnessResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["H_m", "theta_rad", "G_N_per_m"])
        for H, theta, G in result.curve:
            w.writerow([f"{H:.9g}", f"{theta:.9g}", f"{G:.9g}"])
