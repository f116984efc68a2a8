"""Event matching, precision/recall/F1, onset delay and friction error statistics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .detector import SlipEvent
from .errors import SlipFricError

DEFAULT_WINDOW = 1.0


@dataclass(frozen=True)
class Match:
    labeled: SlipEvent
    detected: SlipEvent
    delay: float  # |detected onset - labeled onset|, seconds


@dataclass
class EventMatchReport:
    tp: int
    fp: int
    fn: int
    matches: list[Match] = field(default_factory=list)

    def __add__(self, other: "EventMatchReport") -> "EventMatchReport":
        return EventMatchReport(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.matches + other.matches
        )


@dataclass(frozen=True)
class PRF:
    """Precision, recall and F1; ``None`` marks an undefined ratio."""

    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    n: int

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": self.n}


class MissingGroundTruthError(SlipFricError, KeyError):
    def __init__(self, surface: str):
        self.surface = surface
        super().__init__(f"no ground-truth friction for surface {surface!r}")

    def __str__(self) -> str:
        return self.args[0]


def match_events(
    labeled: Sequence[SlipEvent], detected: Sequence[SlipEvent], window: float = DEFAULT_WINDOW
) -> EventMatchReport:
    """Greedy one-to-one matching of onsets, closest pairs first.

    Only pairs whose onsets differ by at most ``window`` seconds are eligible.
    Ties in distance go to the earlier labeled event, then the earlier
    detection.
    """
    if not window > 0:
        raise ValueError(f"window must be positive, got {window!r}")
    candidates = []
    for i, lab in enumerate(labeled):
        for j, det in enumerate(detected):
            d = abs(det.onset_t - lab.onset_t)
            if d <= window:
                candidates.append((d, i, j))
    candidates.sort()
    used_l: set[int] = set()
    used_d: set[int] = set()
    pairs = []
    for d, i, j in candidates:
        if i in used_l or j in used_d:
            continue
        used_l.add(i)
        used_d.add(j)
        pairs.append((i, j, d))
    pairs.sort()
    matches = [Match(labeled[i], detected[j], d) for i, j, d in pairs]
    tp = len(matches)
    return EventMatchReport(tp, len(detected) - tp, len(labeled) - tp, matches)


def precision_recall_f1(report: EventMatchReport) -> PRF:
    tp, fp, fn = report.tp, report.fp, report.fn
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return PRF(precision, recall, f1)


def summarize(values: Sequence[float]) -> SummaryStats:
    """Mean and population standard deviation (two-pass)."""
    n = len(values)
    if n == 0:
        raise ValueError("cannot summarize an empty sample")
    mean = math.fsum(values) / n
    var = math.fsum((x - mean) ** 2 for x in values) / n
    return SummaryStats(mean, math.sqrt(var), n)


def delay_stats(report: EventMatchReport, surfaces: Optional[Sequence[str]] = None) -> dict[str, SummaryStats]:
    """Absolute onset delay statistics per surface of the labeled event.

    Surfaces listed in ``surfaces`` without any match are omitted with a
    warning.
    """
    groups: dict[str, list[float]] = {}
    for m in report.matches:
        groups.setdefault(m.labeled.surface or "default", []).append(m.delay)
    for s in surfaces or ():
        if s not in groups:
            warnings.warn(f"no matched events on surface {s!r}; omitted from delay statistics")
    return {s: summarize(groups[s]) for s in sorted(groups)}


def mae_stats(
    estimates: Mapping[str, Sequence[float]], ground_truth: Mapping[str, float]
) -> dict[str, SummaryStats]:
    """Mean and std of ``|mu_hat - mu*|`` over per-stream estimates, per surface."""
    out = {}
    for surface in sorted(estimates):
        values = estimates[surface]
        if not values:
            continue
        if surface not in ground_truth:
            raise MissingGroundTruthError(surface)
        truth = ground_truth[surface]
        out[surface] = summarize([abs(mu - truth) for mu in values])
    return out
