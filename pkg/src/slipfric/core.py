"""Domain types and the closed-form vehicle formulas.

Everything here is a pure function of its arguments. Angles are radians,
everything else SI.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import InputDomainError, UndefinedSlipError

isfinite = math.isfinite

G_DEFAULT = 9.81
HALF_PI = math.pi / 2


def _finite(name: str, *values: float) -> None:
    for value in values:
        if not math.isfinite(value):
            raise InputDomainError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True, slots=True)
class VehicleGeometry:
    """Single-track geometry: axle distances, tire radius and mass.

    ``l_w`` is derived from ``l_f + l_r``; passing an inconsistent value raises.
    """

    l_f: float
    l_r: float
    r_e: float = 0.05
    m: float = 3.5
    l_w: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        _finite("geometry", self.l_f, self.l_r, self.r_e, self.m)
        for name in ("l_f", "l_r", "r_e", "m"):
            if getattr(self, name) <= 0:
                raise InputDomainError(f"{name} must be positive, got {getattr(self, name)!r}")
        wheelbase = self.l_f + self.l_r
        if math.isnan(self.l_w):
            object.__setattr__(self, "l_w", wheelbase)
        elif self.l_w != wheelbase:
            raise InputDomainError(f"l_w={self.l_w!r} differs from l_f + l_r = {wheelbase!r}")

    def as_dict(self) -> dict:
        return {"l_f": self.l_f, "l_r": self.l_r, "r_e": self.r_e, "m": self.m}


# 1:10 scale racing platform
DEFAULT_GEOMETRY = VehicleGeometry(l_f=0.165, l_r=0.165, r_e=0.05, m=3.5)


@dataclass(slots=True)
class ControlAction:
    v: float
    delta: float

    def __post_init__(self) -> None:
        if not isfinite(self.v + self.delta):
            _finite("control action", self.v, self.delta)
        if abs(self.delta) >= HALF_PI:
            raise InputDomainError(f"|delta| must be < pi/2, got {self.delta!r}")


@dataclass(slots=True)
class Observation:
    a_x_hat: float
    a_y_hat: float
    v_x_hat: float
    v_y_hat: float
    w_psi_hat: float

    def __post_init__(self) -> None:
        # a finite sum implies finite terms; otherwise find the culprit
        if not isfinite(self.a_x_hat + self.a_y_hat + self.v_x_hat + self.v_y_hat + self.w_psi_hat):
            _finite("observation", self.a_x_hat, self.a_y_hat, self.v_x_hat, self.v_y_hat, self.w_psi_hat)


@dataclass(slots=True)
class TelemetryRecord:
    t: float
    u: ControlAction
    y: Observation
    surface: Optional[str] = None
    slip_label: Optional[bool] = None

    def __post_init__(self) -> None:
        if not isfinite(self.t):
            raise InputDomainError(f"timestamp must be finite, got {self.t!r}")


@dataclass(frozen=True, slots=True)
class TireState:
    v_wx: float
    v_wy: float
    omega: float

    def __post_init__(self) -> None:
        _finite("tire state", self.v_wx, self.v_wy, self.omega)


@dataclass(frozen=True, slots=True)
class PlanarForce:
    f_x: float
    f_y: float
    f_z: float


def geometric_slip_angle(delta: float, geom: VehicleGeometry) -> float:
    """Angle between vehicle velocity and heading implied by the steering."""
    _finite("delta", delta)
    if abs(delta) >= HALF_PI:
        raise InputDomainError(f"|delta| must be < pi/2, got {delta!r}")
    return math.atan(geom.l_r / (geom.l_f + geom.l_r) * math.tan(delta))


def expected_yaw_rate(u: ControlAction, geom: VehicleGeometry) -> float:
    """Yaw rate the commanded inputs should produce: ``v * tan(delta) / l_w``.

    This is the small-angle simplification of ``(v / l_r) * sin(beta)``; the
    two agree to first order in ``delta`` only, and this form is kept on
    purpose because the detector thresholds are calibrated against it.
    """
    _finite("control action", u.v, u.delta)
    if abs(u.delta) >= HALF_PI:
        raise InputDomainError(f"|delta| must be < pi/2, got {u.delta!r}")
    return u.v * math.tan(u.delta) / geom.l_w


def kinematic_step(
    state: tuple[float, float, float], u: ControlAction, geom: VehicleGeometry, dt: float
) -> tuple[float, float, float]:
    """One explicit-Euler step of the kinematic bicycle model."""
    x, y, psi = state
    _finite("state", x, y, psi, dt)
    if dt <= 0:
        raise InputDomainError(f"dt must be positive, got {dt!r}")
    beta = geometric_slip_angle(u.delta, geom)
    heading = psi + beta
    return (
        x + u.v * math.cos(heading) * dt,
        y + u.v * math.sin(heading) * dt,
        psi + (u.v / geom.l_r) * math.sin(beta) * dt,
    )


def slip_ratio(w: TireState, r_e: float) -> float:
    _finite("r_e", r_e)
    circumferential = r_e * w.omega
    denom = max(circumferential, w.v_wx)
    if denom <= 0 or circumferential < 0 or w.v_wx < 0:
        raise UndefinedSlipError(
            f"slip ratio undefined for r_e*omega={circumferential!r}, V_wx={w.v_wx!r}"
        )
    return (circumferential - w.v_wx) / denom


def slip_angle(w: TireState) -> float:
    if w.v_wx <= 0:
        raise UndefinedSlipError(f"slip angle undefined for V_wx={w.v_wx!r}")
    return math.atan(w.v_wy / w.v_wx)


def is_pure_rolling(w: TireState, r_e: float, tol: float = 0.0) -> bool:
    if not tol >= 0:
        raise InputDomainError(f"tol must be >= 0, got {tol!r}")
    return abs(slip_ratio(w, r_e)) <= tol and abs(slip_angle(w)) <= tol


def traction_coefficient(f: PlanarForce) -> float:
    """Planar force magnitude normalized by the normal force."""
    _finite("force", f.f_x, f.f_y, f.f_z)
    if f.f_z <= 0:
        raise InputDomainError(f"normal force must be positive, got {f.f_z!r}")
    return math.hypot(f.f_x, f.f_y) / f.f_z


def traction_from_accel(y: Observation, g: float = G_DEFAULT) -> float:
    """Traction coefficient from measured planar accelerations.

    With ``F = m a`` and ``F_z = m g`` the mass cancels.
    """
    return traction_from_components(y.a_x_hat, y.a_y_hat, g)


def traction_from_components(a_x: float, a_y: float, g: float = G_DEFAULT) -> float:
    _finite("acceleration", a_x, a_y, g)
    if g <= 0:
        raise InputDomainError(f"g must be positive, got {g!r}")
    return math.hypot(a_x, a_y) / g
