"""Threshold calibration, k-fold cross-validation and pull-test friction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import G_DEFAULT, TelemetryRecord, VehicleGeometry
from .detector import DEFAULT_REFRACTORY, Thresholds, detect_stream, extract_events, label_events, residuals
from .errors import CalibrationError, FoldError, InputDomainError, LabelingError
from .estimator import FrictionEstimate, estimate_from_flags, pooled_max
from .metrics import DEFAULT_WINDOW, PRF, EventMatchReport, match_events, precision_recall_f1

SIGMA_MULTIPLIER = 2.0

DIRECTIONS = ("lateral", "longitudinal", "diagonal")


@dataclass(frozen=True)
class ResidualMoments:
    mean: float
    std: float
    n: int

    @property
    def threshold(self) -> float:
        return self.mean + SIGMA_MULTIPLIER * self.std


def residual_moments(values: np.ndarray) -> ResidualMoments:
    """Two-pass mean and population standard deviation."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise CalibrationError("no residuals to calibrate from")
    mean = float(np.mean(values))
    std = float(np.sqrt(np.mean((values - mean) ** 2)))
    return ResidualMoments(mean, std, int(values.size))


def threshold_from_residuals(values: Sequence[float]) -> float:
    return residual_moments(np.asarray(values, dtype=float)).threshold


@dataclass(frozen=True)
class Calibration:
    thresholds: Thresholds
    linear: ResidualMoments
    angular: ResidualMoments
    n_streams: int

    def as_dict(self) -> dict:
        return {
            "delta_lin": self.thresholds.delta_lin,
            "delta_ang": self.thresholds.delta_ang,
            "linear": {"mean": self.linear.mean, "std": self.linear.std},
            "angular": {"mean": self.angular.mean, "std": self.angular.std},
            "n_samples": self.linear.n,
            "n_streams": self.n_streams,
        }


def calibrate(training_streams: Sequence[Sequence[TelemetryRecord]], geom: VehicleGeometry) -> Calibration:
    """Mean plus two standard deviations of each residual, pooled over all samples.

    Labels are ignored: slip intervals in the training data contribute like
    any other sample.
    """
    if not training_streams:
        raise CalibrationError("no training streams")
    lin_parts, ang_parts = [], []
    for stream in training_streams:
        lin, ang = residuals(stream, geom)
        lin_parts.append(lin)
        ang_parts.append(ang)
    lin = np.concatenate(lin_parts)
    ang = np.concatenate(ang_parts)
    if lin.size < 2:
        raise CalibrationError(f"need at least 2 samples, got {lin.size}")
    lin_m, ang_m = residual_moments(lin), residual_moments(ang)
    for name, m in (("linear", lin_m), ("angular", ang_m)):
        if not m.threshold > 0:
            raise CalibrationError(f"degenerate {name} residuals (all zero); threshold would be 0")
    return Calibration(Thresholds(lin_m.threshold, ang_m.threshold), lin_m, ang_m, len(training_streams))


def compute_thresholds(training_streams: Sequence[Sequence[TelemetryRecord]], geom: VehicleGeometry) -> Thresholds:
    return calibrate(training_streams, geom).thresholds


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    assignment: dict[str, int]

    def fold(self, index: int) -> list[str]:
        return [sid for sid, f in self.assignment.items() if f == index]

    def folds(self) -> list[list[str]]:
        return [self.fold(i) for i in range(self.k)]


def kfold_split(stream_ids: Sequence[str], k: int, seed: int) -> FoldAssignment:
    """Shuffle ids with a seeded PCG64 generator and deal them round-robin into k folds."""
    ids = list(stream_ids)
    if len(set(ids)) != len(ids):
        raise FoldError("stream ids must be unique")
    if k < 2:
        raise FoldError(f"k must be at least 2, got {k}")
    if k > len(ids):
        raise FoldError(f"k={k} exceeds the number of streams ({len(ids)})")
    order = np.random.Generator(np.random.PCG64(seed)).permutation(len(ids))
    assignment = {ids[int(j)]: pos % k for pos, j in enumerate(order)}
    return FoldAssignment(k, {sid: assignment[sid] for sid in ids})


@dataclass
class FoldResult:
    index: int
    train_ids: list[str]
    test_ids: list[str]
    calibration: Calibration
    report: EventMatchReport
    prf: PRF
    estimates: dict[str, dict[str, FrictionEstimate]]  # stream id -> surface -> estimate
    events: dict[str, list] = field(default_factory=dict)  # stream id -> (labeled, detected)


@dataclass
class CrossValidation:
    assignment: FoldAssignment
    seed: int
    folds: list[FoldResult]
    pooled: EventMatchReport
    pooled_prf: PRF

    def per_stream_estimates(self) -> dict[str, dict[str, FrictionEstimate]]:
        out = {}
        for fold in self.folds:
            out.update(fold.estimates)
        return out

    def pooled_estimates(self) -> dict[str, FrictionEstimate]:
        per = self.per_stream_estimates()
        return pooled_max(per[sid] for sid in sorted(per))


def evaluate_streams(
    streams: Mapping[str, Sequence[TelemetryRecord]],
    th: Thresholds,
    geom: VehicleGeometry,
    g: float = G_DEFAULT,
    window: float = DEFAULT_WINDOW,
    refractory: float = DEFAULT_REFRACTORY,
):
    """Detection report and friction estimates for labeled streams under fixed thresholds."""
    report = EventMatchReport(0, 0, 0)
    estimates = {}
    events = {}
    for sid in streams:
        records = streams[sid]
        flags = detect_stream(records, th, geom)
        labeled = label_events(records, refractory)
        detected = extract_events(zip(records, flags), refractory)
        report = report + match_events(labeled, detected, window)
        estimates[sid] = estimate_from_flags(records, flags, g)
        events[sid] = (labeled, detected)
    return report, estimates, events


def cross_validate(
    streams: Mapping[str, Sequence[TelemetryRecord]],
    k: int,
    seed: int,
    geom: VehicleGeometry,
    g: float = G_DEFAULT,
    window: float = DEFAULT_WINDOW,
    refractory: float = DEFAULT_REFRACTORY,
) -> CrossValidation:
    """K-fold protocol: calibrate on k-1 folds, evaluate on the held-out fold.

    Event counts are pooled across folds before computing precision, recall
    and F1.
    """
    for sid, records in streams.items():
        if any(r.slip_label is None for r in records):
            raise LabelingError(f"stream {sid!r} has records without slip labels", stream_id=sid)
    assignment = kfold_split(list(streams), k, seed)
    folds = []
    pooled = EventMatchReport(0, 0, 0)
    for index, test_ids in enumerate(assignment.folds()):
        train_ids = [sid for sid in streams if assignment.assignment[sid] != index]
        cal = calibrate([streams[sid] for sid in train_ids], geom)
        report, estimates, events = evaluate_streams(
            {sid: streams[sid] for sid in test_ids}, cal.thresholds, geom, g, window, refractory
        )
        folds.append(
            FoldResult(index, train_ids, test_ids, cal, report, precision_recall_f1(report), estimates, events)
        )
        pooled = pooled + report
    return CrossValidation(assignment, seed, folds, pooled, precision_recall_f1(pooled))


@dataclass(frozen=True)
class PullTrial:
    direction: str
    f_pull: float
    f_normal: float

    def __post_init__(self) -> None:
        if self.direction not in DIRECTIONS:
            raise InputDomainError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        for name in ("f_pull", "f_normal"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InputDomainError(f"{name} must be positive, got {value!r}")

    @property
    def mu(self) -> float:
        return self.f_pull / self.f_normal


@dataclass(frozen=True)
class PullTestResult:
    by_direction: dict[str, float]
    overall: float
    n: int


def normal_force(mass: float, g: float = G_DEFAULT) -> float:
    return mass * g


def pull_test_mu(trials: Sequence[PullTrial]) -> PullTestResult:
    """Static friction as pull force over normal force, averaged per direction and overall."""
    if not trials:
        raise InputDomainError("no pull trials")
    groups: dict[str, list[float]] = {}
    for trial in trials:
        groups.setdefault(trial.direction, []).append(trial.mu)
    by_direction = {d: math.fsum(v) / len(v) for d, v in groups.items()}
    ratios = [t.mu for t in trials]
    return PullTestResult(by_direction, math.fsum(ratios) / len(ratios), len(ratios))
