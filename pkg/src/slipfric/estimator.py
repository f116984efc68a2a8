"""Friction coefficient as the running maximum of no-slip traction."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import G_DEFAULT, TelemetryRecord, VehicleGeometry, traction_from_accel
from .detector import SlipFlags, Thresholds, check_order, detect_stream
from .telemetry import atomic_write_text

DEFAULT_SURFACE = "default"

STATUS_OK = "ok"
STATUS_NO_ESTIMATE = "no_valid_estimate"


@dataclass(frozen=True, slots=True)
class FrictionEstimate:
    """Running-max friction estimate with provenance.

    ``mu_hat`` is None until a no-slip sample has been consumed; an all-slip
    stream therefore never reports a numeric friction value.
    """

    mu_hat: Optional[float] = None
    argmax_t: Optional[float] = None
    argmax_accel: Optional[tuple[float, float]] = None
    n_samples: int = 0
    surface: Optional[str] = None

    @property
    def valid(self) -> bool:
        return self.mu_hat is not None

    @property
    def status(self) -> str:
        return STATUS_OK if self.valid else STATUS_NO_ESTIMATE

    def as_dict(self) -> dict:
        return {
            "surface": self.surface,
            "status": self.status,
            "mu_hat": self.mu_hat,
            "argmax_t": self.argmax_t,
            "argmax_accel": list(self.argmax_accel) if self.argmax_accel else None,
            "n_samples": self.n_samples,
        }


def update(est: FrictionEstimate, rec: TelemetryRecord, flags: SlipFlags, g: float = G_DEFAULT) -> FrictionEstimate:
    if not flags.no_slip:
        return est
    rho = traction_from_accel(rec.y, g)
    if est.mu_hat is None or rho > est.mu_hat:
        return replace(
            est,
            mu_hat=rho,
            argmax_t=rec.t,
            argmax_accel=(rec.y.a_x_hat, rec.y.a_y_hat),
            n_samples=est.n_samples + 1,
        )
    return replace(est, n_samples=est.n_samples + 1)


def surface_of(rec: TelemetryRecord) -> str:
    return rec.surface if rec.surface is not None else DEFAULT_SURFACE


def estimate_from_flags(
    records: Sequence[TelemetryRecord],
    flags: Sequence[SlipFlags],
    g: float = G_DEFAULT,
    cap_quantile: Optional[float] = None,
) -> dict[str, FrictionEstimate]:
    """Per-surface fold of :func:`update` over precomputed flags.

    ``cap_quantile`` drops no-slip samples whose traction exceeds that
    quantile of the surface's no-slip traction values (off by default).
    """
    caps: dict[str, float] = {}
    if cap_quantile is not None:
        pooled: dict[str, list[float]] = {}
        for rec, fl in zip(records, flags):
            if fl.no_slip:
                pooled.setdefault(surface_of(rec), []).append(traction_from_accel(rec.y, g))
        caps = {s: float(np.quantile(v, cap_quantile)) for s, v in pooled.items()}

    # local accumulators; equivalent to folding update() record by record
    if not g > 0:
        raise ValueError(f"g must be positive, got {g!r}")
    hypot = math.hypot
    acc: dict[str, list] = {}
    for rec, fl in zip(records, flags):
        s = rec.surface if rec.surface is not None else DEFAULT_SURFACE
        state = acc.get(s)
        if state is None:
            state = acc[s] = [None, None, None, 0]
        if not fl.no_slip:
            continue
        rho = hypot(rec.y.a_x_hat, rec.y.a_y_hat) / g
        if s in caps and rho > caps[s]:
            continue
        if state[0] is None or rho > state[0]:
            state[0], state[1], state[2] = rho, rec.t, (rec.y.a_x_hat, rec.y.a_y_hat)
        state[3] += 1
    return {s: FrictionEstimate(mu, t, accel, n, s) for s, (mu, t, accel, n) in acc.items()}


def estimate_stream(
    stream: Sequence[TelemetryRecord],
    th: Thresholds,
    geom: VehicleGeometry,
    g: float = G_DEFAULT,
    cap_quantile: Optional[float] = None,
) -> dict[str, FrictionEstimate]:
    """Detect, then fold the running max per surface tag."""
    check_order(stream)
    flags = detect_stream(stream, th, geom)
    return estimate_from_flags(stream, flags, g, cap_quantile)


def pooled_max(estimates: Iterable[Mapping[str, FrictionEstimate]]) -> dict[str, FrictionEstimate]:
    """Combine per-stream estimates by taking the per-surface maximum."""
    out: dict[str, FrictionEstimate] = {}
    for per_stream in estimates:
        for s, est in per_stream.items():
            best = out.get(s)
            if best is None:
                out[s] = est
                continue
            n = best.n_samples + est.n_samples
            if est.valid and (not best.valid or est.mu_hat > best.mu_hat):
                best = est
            out[s] = replace(best, n_samples=n)
    return out


@dataclass(frozen=True)
class CirclePoint:
    t: float
    ax_g: float
    ay_g: float
    no_slip: bool


@dataclass(frozen=True)
class CircleExport:
    surface: str
    points: list[CirclePoint]
    estimate: FrictionEstimate

    @property
    def radius(self) -> float:
        return self.estimate.mu_hat if self.estimate.valid else 0.0

    @property
    def status(self) -> str:
        return self.estimate.status


def friction_circle_points(
    stream: Sequence[TelemetryRecord],
    th: Thresholds,
    geom: VehicleGeometry,
    g: float = G_DEFAULT,
) -> dict[str, CircleExport]:
    check_order(stream)
    flags = detect_stream(stream, th, geom)
    estimates = estimate_from_flags(stream, flags, g)
    points: dict[str, list[CirclePoint]] = {s: [] for s in estimates}
    for rec, fl in zip(stream, flags):
        points[surface_of(rec)].append(CirclePoint(rec.t, rec.y.a_x_hat / g, rec.y.a_y_hat / g, fl.no_slip))
    return {s: CircleExport(s, points[s], estimates[s]) for s in estimates}


def write_circle_export(export: CircleExport, path: str | Path) -> None:
    """Tab-separated points preceded by a ``#`` JSON summary line."""
    est = export.estimate
    summary = {
        "surface": export.surface,
        "status": export.status,
        "mu_hat": est.mu_hat,
        "argmax_t": est.argmax_t,
        "n_samples": est.n_samples,
    }
    lines = ["# " + json.dumps(summary, sort_keys=True), "t\tax_g\tay_g\tno_slip"]
    lines += [f"{p.t!r}\t{p.ax_g!r}\t{p.ay_g!r}\t{int(p.no_slip)}" for p in export.points]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_circle_export(path: str | Path) -> CircleExport:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    summary = json.loads(lines[0][2:])
    points = []
    for line in lines[2:]:
        if line.strip():
            t, ax, ay, ns = line.split("\t")
            points.append(CirclePoint(float(t), float(ax), float(ay), ns == "1"))
    est = FrictionEstimate(
        mu_hat=summary["mu_hat"],
        argmax_t=summary["argmax_t"],
        n_samples=summary["n_samples"],
        surface=summary["surface"],
    )
    return CircleExport(summary["surface"], points, est)
