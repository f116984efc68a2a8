"""Friction-limited single-track simulator used as a ground-truth oracle.

The slip model is deliberately minimal: demanded accelerations come from a
proportional speed controller and the kinematic yaw rate; whenever their
magnitude exceeds ``mu * g`` they are scaled radially back onto the friction
circle, the yaw rate is scaled by the same factor, and the unrealized
lateral acceleration feeds a first-order decaying lateral velocity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    DEFAULT_GEOMETRY,
    G_DEFAULT,
    ControlAction,
    Observation,
    TelemetryRecord,
    VehicleGeometry,
)
from .errors import ConfigError

SIM_SURFACE = "sim"


@dataclass(frozen=True)
class NoiseSpec:
    sigma_accel: float = 0.05
    sigma_vel: float = 0.02
    sigma_yaw_rate: float = 0.01

    def __post_init__(self) -> None:
        for name in ("sigma_accel", "sigma_vel", "sigma_yaw_rate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"{name} must be >= 0, got {value!r}")


NOISELESS = NoiseSpec(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Segment:
    """Control held (or linearly ramped) over ``[start, start + duration)``.

    ``v`` and ``delta`` are the values reached at the end of the segment; the
    segment ramps from the previous segment's end values over ``ramp``
    seconds, then holds.
    """

    start: float
    v: float
    delta: float
    ramp: float = 0.0


@dataclass(frozen=True)
class SurfacePatch:
    """Surface tag and friction in effect from ``start`` onward."""

    start: float
    surface: str
    mu: float


@dataclass(frozen=True)
class SimConfig:
    mu_true: float = 0.7
    geom: VehicleGeometry = DEFAULT_GEOMETRY
    dt: float = 0.025
    duration: float = 30.0
    speed_controller_gain: float = 2.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    maneuver: tuple[Segment, ...] = (Segment(0.0, 3.0, 0.0),)
    seed: int = 0
    g: float = G_DEFAULT
    relaxation: float = 0.3
    v0: Optional[float] = None
    surfaces: tuple[SurfacePatch, ...] = ()

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.mu_true) and self.mu_true > 0):
            raise ConfigError(f"mu_true must be positive, got {self.mu_true!r}")
        if not self.duration >= self.dt:
            raise ConfigError(f"duration {self.duration!r} shorter than dt {self.dt!r}")
        if not self.speed_controller_gain > 0 or not self.relaxation > 0 or not self.g > 0:
            raise ConfigError("gain, relaxation and g must be positive")
        if not self.maneuver:
            raise ConfigError("maneuver needs at least one segment")
        starts = [s.start for s in self.maneuver]
        if starts != sorted(starts) or starts[0] > 0:
            raise ConfigError("maneuver segments must be sorted and start at t <= 0")
        for seg in self.maneuver:
            if abs(seg.delta) >= math.pi / 2 or seg.ramp < 0:
                raise ConfigError(f"invalid segment {seg!r}")
        for patch in self.surfaces:
            if not patch.mu > 0:
                raise ConfigError(f"invalid surface patch {patch!r}")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def with_(self, **changes) -> "SimConfig":
        from dataclasses import replace

        return replace(self, **changes)


def command_at(maneuver: Sequence[Segment], t: float) -> ControlAction:
    """Commanded (v, delta) at time ``t`` under the piecewise maneuver."""
    prev = current = maneuver[0]
    for seg in maneuver[1:]:
        if seg.start > t:
            break
        prev, current = current, seg
    if current.ramp > 0 and t < current.start + current.ramp:
        frac = (t - current.start) / current.ramp
        return ControlAction(prev.v + frac * (current.v - prev.v), prev.delta + frac * (current.delta - prev.delta))
    return ControlAction(current.v, current.delta)


def surface_at(cfg: SimConfig, t: float) -> tuple[str, float]:
    tag, mu = SIM_SURFACE, cfg.mu_true
    for patch in cfg.surfaces:
        if patch.start <= t:
            tag, mu = patch.surface, patch.mu
    return tag, mu


def clip_to_circle(a_x: float, a_y: float, limit: float, g: float) -> tuple[float, float]:
    """Scale ``(a_x, a_y)`` radially so its magnitude is at most ``limit``.

    The result is nudged toward zero until ``hypot(a_x, a_y) / g`` no longer
    exceeds ``limit / g`` in floating point, so the traction computed from the
    emitted accelerations never lands above the true friction.
    """
    mag = math.hypot(a_x, a_y)
    scale = limit / mag
    a_x, a_y = a_x * scale, a_y * scale
    mu = limit / g
    while math.hypot(a_x, a_y) > limit or math.hypot(a_x, a_y) / g > mu:
        a_x = math.nextafter(a_x, 0.0)
        a_y = math.nextafter(a_y, 0.0)
    return a_x, a_y


def command_schedule(maneuver: Sequence[Segment], times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`command_at` over an array of times."""
    v = np.full(len(times), maneuver[0].v)
    delta = np.full(len(times), maneuver[0].delta)
    for prev, seg in zip(maneuver, maneuver[1:]):
        active = times >= seg.start
        v[active] = seg.v
        delta[active] = seg.delta
        if seg.ramp > 0:
            ramping = active & (times < seg.start + seg.ramp)
            frac = (times[ramping] - seg.start) / seg.ramp
            v[ramping] = prev.v + frac * (seg.v - prev.v)
            delta[ramping] = prev.delta + frac * (seg.delta - prev.delta)
    return v, delta


def simulate_run(cfg: SimConfig) -> list[TelemetryRecord]:
    """Integrate the vehicle and emit one labeled record per step.

    The record at step ``k`` carries the command at ``t_k`` and the
    accelerations and yaw rate that command produces, with velocities taken
    before the step is integrated. Noise is drawn up front from a PCG64
    generator seeded with ``cfg.seed`` (standard normal via numpy's ziggurat),
    so the draw for a given step depends only on the seed and step index.
    """
    geom, dt, g = cfg.geom, cfg.dt, cfg.g
    n = cfg.steps
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    z = rng.standard_normal((n, 5))
    sig = np.array(
        [cfg.noise.sigma_accel, cfg.noise.sigma_accel, cfg.noise.sigma_vel, cfg.noise.sigma_vel, cfg.noise.sigma_yaw_rate]
    )
    noise = (z * sig).tolist()

    times = np.arange(n) * dt
    v_cmd, d_cmd = command_schedule(cfg.maneuver, times)
    tags = [SIM_SURFACE] * n
    limits = np.full(n, cfg.mu_true * g)
    for patch in cfg.surfaces:
        on = times >= patch.start
        limits[on] = patch.mu * g
        for k in np.flatnonzero(on):
            tags[k] = patch.surface
    tan_d = np.tan(d_cmd).tolist()
    times, v_cmd, d_cmd, limits = times.tolist(), v_cmd.tolist(), d_cmd.tolist(), limits.tolist()

    v_x = v_cmd[0] if cfg.v0 is None else cfg.v0
    v_y = 0.0
    decay = dt / cfg.relaxation
    gain = cfg.speed_controller_gain
    l_w = geom.l_w
    hypot = math.hypot
    out = []
    for k in range(n):
        yaw_kin = v_x * tan_d[k] / l_w
        a_x = gain * (v_cmd[k] - v_x)
        a_y = a_y_dem = v_x * yaw_kin
        limit = limits[k]
        slip = hypot(a_x, a_y) > limit
        if slip:
            a_x, a_y = clip_to_circle(a_x, a_y, limit, g)
            yaw = yaw_kin * (a_y / a_y_dem) if a_y_dem != 0.0 else yaw_kin
        else:
            yaw = yaw_kin
        e = noise[k]
        out.append(
            TelemetryRecord(
                t=times[k],
                u=ControlAction(v_cmd[k], d_cmd[k]),
                y=Observation(a_x + e[0], a_y + e[1], v_x + e[2], v_y + e[3], yaw + e[4]),
                surface=tags[k],
                slip_label=slip,
            )
        )
        if slip:
            v_y += ((a_y_dem - a_y) - v_y / cfg.relaxation) * dt
        else:
            v_y -= v_y * decay
        v_x += a_x * dt
    return out


def demanded_accel(cfg: SimConfig, records: Sequence[TelemetryRecord]) -> list[float]:
    """Recompute the demanded acceleration magnitude of a noiseless run.

    Uses the emitted commanded inputs and longitudinal velocity, so it is an
    independent check on the slip labels.
    """
    return [
        math.hypot(
            cfg.speed_controller_gain * (r.u.v - r.y.v_x_hat),
            r.y.v_x_hat * r.y.v_x_hat * math.tan(r.u.delta) / cfg.geom.l_w,
        )
        for r in records
    ]


# maneuver parameters shared by the standard scenarios
CRUISE_SPEED = 3.5
DRIFT_STEER = 0.4
DRIFT_HOLD = 1.0
DRIFT_UNWIND = 2.0
LAUNCH_FROM = 1.0
LAUNCH_TO = 7.0


def cruise(mu_true: float = 0.7, seed: int = 0, noise: NoiseSpec | None = None, duration: float = 30.0) -> SimConfig:
    """Constant speed with gentle weaving, far inside the friction circle."""
    weave = []
    t = 2.0
    sign = 1.0
    while t < duration:
        weave.append(Segment(t, CRUISE_SPEED, sign * 0.02, ramp=1.5))
        t += 3.0
        sign = -sign
    return SimConfig(
        mu_true=mu_true,
        duration=duration,
        noise=noise if noise is not None else NoiseSpec(),
        maneuver=(Segment(0.0, CRUISE_SPEED, 0.0), *weave),
        seed=seed,
    )


def _drift(start: float, sign: float = 1.0) -> list[Segment]:
    # step into the turn, hold, then unwind the steering back to straight
    return [
        Segment(start, CRUISE_SPEED, sign * DRIFT_STEER),
        Segment(start + DRIFT_HOLD, CRUISE_SPEED, 0.0, ramp=DRIFT_UNWIND),
    ]


def drift_turn(mu_true: float = 0.7, seed: int = 0, noise: NoiseSpec | None = None, duration: float = 30.0) -> SimConfig:
    """Cruise, then a step steering input that saturates the lateral grip."""
    return SimConfig(
        mu_true=mu_true,
        duration=duration,
        noise=noise if noise is not None else NoiseSpec(),
        maneuver=(Segment(0.0, CRUISE_SPEED, 0.0), *_drift(duration / 3)),
        seed=seed,
    )


def hard_launch(mu_true: float = 0.7, seed: int = 0, noise: NoiseSpec | None = None, duration: float = 30.0) -> SimConfig:
    """Step in commanded speed that saturates the longitudinal grip."""
    return SimConfig(
        mu_true=mu_true,
        duration=duration,
        noise=noise if noise is not None else NoiseSpec(),
        maneuver=(Segment(0.0, LAUNCH_FROM, 0.0), Segment(duration / 3, LAUNCH_TO, 0.0)),
        seed=seed,
    )


def two_surface(
    mu_first: float = 0.69,
    mu_second: float = 1.03,
    seed: int = 0,
    noise: NoiseSpec | None = None,
    duration: float = 30.0,
) -> SimConfig:
    """One drift on tile, then one on cardboard, with the friction switching mid-run."""
    half = duration / 2
    return SimConfig(
        mu_true=mu_first,
        duration=duration,
        noise=noise if noise is not None else NoiseSpec(),
        maneuver=(Segment(0.0, CRUISE_SPEED, 0.0), *_drift(half / 2), *_drift(half + half / 2, -1.0)),
        seed=seed,
        surfaces=(SurfacePatch(0.0, "tile", mu_first), SurfacePatch(half, "cardboard", mu_second)),
    )


SCENARIOS = {
    "cruise": cruise,
    "drift-turn": drift_turn,
    "hard-launch": hard_launch,
    "two-surface": two_surface,
}


def standard_scenarios(seed: int = 0) -> dict[str, SimConfig]:
    return {name: build(seed=seed) for name, build in SCENARIOS.items()}
