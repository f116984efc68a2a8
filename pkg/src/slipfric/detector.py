"""Residual-threshold slip detection and event extraction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import ControlAction, Observation, TelemetryRecord, VehicleGeometry, expected_yaw_rate
from .errors import InputDomainError, OrderingError

DEFAULT_REFRACTORY = 0.5

LINEAR = "linear"
ANGULAR = "angular"
BOTH = "both"


@dataclass(frozen=True, slots=True)
class Thresholds:
    delta_lin: float
    delta_ang: float

    def __post_init__(self) -> None:
        for name in ("delta_lin", "delta_ang"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InputDomainError(f"{name} must be finite and positive, got {value!r}")


@dataclass(slots=True)
class SlipFlags:
    """Per-sample slip indicators.

    The residuals that produced the flags ride along so event extraction can
    report peak magnitudes.
    """

    d_lin: bool
    d_ang: bool
    lin_residual: float = 0.0
    ang_residual: float = 0.0

    @property
    def no_slip(self) -> bool:
        return not self.d_lin and not self.d_ang


@dataclass(frozen=True, slots=True)
class SlipEvent:
    """A detected (kind set) or labeled (kind None) slip interval.

    ``peak_residual`` is in the unit of the indicator that opened the event:
    m/s when the linear one fired first (or together), rad/s otherwise.
    """

    onset_t: float
    end_t: float
    kind: Optional[str] = None
    peak_residual: Optional[float] = None
    peak_lin: Optional[float] = None
    peak_ang: Optional[float] = None
    surface: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            "onset_t": self.onset_t,
            "end_t": self.end_t,
            "kind": self.kind,
            "peak_residual": self.peak_residual,
            "peak_lin": self.peak_lin,
            "peak_ang": self.peak_ang,
            "surface": self.surface,
        }


def linear_residual(u: ControlAction, y: Observation) -> float:
    return abs(u.v - y.v_x_hat)


def angular_residual(u: ControlAction, y: Observation, geom: VehicleGeometry) -> float:
    return abs(expected_yaw_rate(u, geom) - y.w_psi_hat)


def flags_from_residuals(lin: float, ang: float, th: Thresholds) -> SlipFlags:
    # inclusive comparison: a residual equal to its threshold is slip
    return SlipFlags(lin >= th.delta_lin, ang >= th.delta_ang, lin, ang)


def detect_step(rec: TelemetryRecord, th: Thresholds, geom: VehicleGeometry) -> SlipFlags:
    return flags_from_residuals(
        linear_residual(rec.u, rec.y), angular_residual(rec.u, rec.y, geom), th
    )


def check_order(records: Sequence[TelemetryRecord]) -> None:
    for i in range(1, len(records)):
        if not records[i].t > records[i - 1].t:
            raise OrderingError(
                f"timestamps not strictly increasing at index {i}: "
                f"{records[i - 1].t!r} then {records[i].t!r}"
            )


def residuals(records: Sequence[TelemetryRecord], geom: VehicleGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Linear and angular residual series for a stream."""
    l_w, tan = geom.l_w, math.tan
    lin = np.fromiter((abs(r.u.v - r.y.v_x_hat) for r in records), float, len(records))
    ang = np.fromiter((abs(r.u.v * tan(r.u.delta) / l_w - r.y.w_psi_hat) for r in records), float, len(records))
    return lin, ang


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; the first samples average what is available."""
    if window <= 1 or len(values) == 0:
        return values
    csum = np.cumsum(np.concatenate(([0.0], values)))
    idx = np.arange(1, len(values) + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def debounce(flags: Sequence[bool], count: int) -> list[bool]:
    """Keep a flag only once ``count`` consecutive samples have been flagged."""
    if count <= 1:
        return list(flags)
    out = []
    run = 0
    for f in flags:
        run = run + 1 if f else 0
        out.append(run >= count)
    return out


def detect_stream(
    records: Sequence[TelemetryRecord],
    th: Thresholds,
    geom: VehicleGeometry,
    smoothing: int = 0,
    consecutive: int = 1,
) -> list[SlipFlags]:
    """Flags for every record of a stream.

    With the defaults (no smoothing, single-sample triggering) this equals
    ``detect_step`` applied record by record.
    """
    check_order(records)
    if smoothing <= 1 and consecutive <= 1:
        # same arithmetic as detect_step, without per-record revalidation
        l_w, tan = geom.l_w, math.tan
        d_lin, d_ang = th.delta_lin, th.delta_ang
        out = []
        for r in records:
            u, y = r.u, r.y
            lin = abs(u.v - y.v_x_hat)
            ang = abs(u.v * tan(u.delta) / l_w - y.w_psi_hat)
            out.append(SlipFlags(lin >= d_lin, ang >= d_ang, lin, ang))
        return out
    lin, ang = residuals(records, geom)
    lin = moving_average(lin, smoothing)
    ang = moving_average(ang, smoothing)
    d_lin = debounce([x >= th.delta_lin for x in lin], consecutive)
    d_ang = debounce([x >= th.delta_ang for x in ang], consecutive)
    return [
        SlipFlags(dl, da, float(rl), float(ra))
        for dl, da, rl, ra in zip(d_lin, d_ang, lin, ang)
    ]


def extract_events(
    stream: Iterable[tuple[TelemetryRecord, SlipFlags]], refractory: float = DEFAULT_REFRACTORY
) -> list[SlipEvent]:
    """Group flagged samples into events.

    A flagged sample joins the open event when it lies within ``refractory``
    seconds of that event's last flagged sample, otherwise it opens a new one.
    """
    if not refractory >= 0:
        raise InputDomainError(f"refractory must be >= 0, got {refractory!r}")
    events: list[SlipEvent] = []
    current: Optional[dict] = None
    prev_t = -math.inf
    for i, (rec, flags) in enumerate(stream):
        if not rec.t > prev_t:
            raise OrderingError(f"timestamps not strictly increasing at index {i}: {prev_t!r} then {rec.t!r}")
        prev_t = rec.t
        if flags.no_slip:
            continue
        if current is not None and rec.t - current["end_t"] <= refractory:
            current["end_t"] = rec.t
        else:
            if current is not None:
                events.append(_close(current))
            current = {
                "onset_t": rec.t,
                "end_t": rec.t,
                "opener": LINEAR if flags.d_lin else ANGULAR,
                "peak_lin": None,
                "peak_ang": None,
                "surface": rec.surface,
            }
        if flags.d_lin:
            current["peak_lin"] = max(current["peak_lin"] or 0.0, flags.lin_residual)
        if flags.d_ang:
            current["peak_ang"] = max(current["peak_ang"] or 0.0, flags.ang_residual)
    if current is not None:
        events.append(_close(current))
    return events


def _close(state: dict) -> SlipEvent:
    lin, ang = state["peak_lin"], state["peak_ang"]
    kind = BOTH if lin is not None and ang is not None else (LINEAR if lin is not None else ANGULAR)
    peak = lin if state["opener"] == LINEAR else ang
    return SlipEvent(
        onset_t=state["onset_t"],
        end_t=state["end_t"],
        kind=kind,
        peak_residual=peak,
        peak_lin=lin,
        peak_ang=ang,
        surface=state["surface"],
    )


def label_events(records: Sequence[TelemetryRecord], refractory: float = DEFAULT_REFRACTORY) -> list[SlipEvent]:
    """Ground-truth events from the ``slip_label`` column, grouped like detections."""
    if not refractory >= 0:
        raise InputDomainError(f"refractory must be >= 0, got {refractory!r}")
    check_order(records)
    events: list[SlipEvent] = []
    onset = end = None
    surface = None
    for rec in records:
        if not rec.slip_label:
            continue
        if onset is not None and rec.t - end <= refractory:
            end = rec.t
            continue
        if onset is not None:
            events.append(SlipEvent(onset, end, surface=surface))
        onset = end = rec.t
        surface = rec.surface
    if onset is not None:
        events.append(SlipEvent(onset, end, surface=surface))
    return events
