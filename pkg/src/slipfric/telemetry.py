"""Telemetry log reading, writing and channel alignment.

Logs are UTF-8 JSON lines, one record per line, with an optional header
line of the form ``{"header": {...}}``. A comma-separated variant with the
fixed column order of :data:`CSV_COLUMNS` is accepted on read.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .core import ControlAction, Observation, TelemetryRecord, VehicleGeometry
from .errors import AlignmentError, InputDomainError, OrderingError, ParseError

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_RATE = 40.0

MANDATORY = ("t", "v", "delta", "ax", "ay", "vx", "vy", "wpsi")
OPTIONAL = ("surface", "slip")
CSV_COLUMNS = MANDATORY + OPTIONAL

# unit name -> factor to SI, per channel
_UNIT_FACTORS: dict[str, dict[str, float]] = {
    "t": {"s": 1.0, "ms": 1e-3},
    "v": {"m/s": 1.0, "km/h": 1 / 3.6},
    "vx": {"m/s": 1.0, "km/h": 1 / 3.6},
    "vy": {"m/s": 1.0, "km/h": 1 / 3.6},
    "delta": {"rad": 1.0, "deg": math.pi / 180},
    "wpsi": {"rad/s": 1.0, "deg/s": math.pi / 180},
    "ax": {"m/s^2": 1.0},
    "ay": {"m/s^2": 1.0},
}
SI_UNITS = {name: next(iter(units)) for name, units in _UNIT_FACTORS.items()}


@dataclass
class LogHeader:
    version: int = FORMAT_VERSION
    rate_hint: float = DEFAULT_RATE
    units: dict[str, str] = field(default_factory=lambda: dict(SI_UNITS))
    geometry: Optional[VehicleGeometry] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.version != FORMAT_VERSION:
            raise ParseError(f"unsupported format version {self.version!r}", field="version")
        for channel, unit in self.units.items():
            if channel not in _UNIT_FACTORS or unit not in _UNIT_FACTORS[channel]:
                raise ParseError(f"unit {unit!r} not convertible for channel {channel!r}", field="units")

    def factors(self) -> dict[str, float]:
        return {ch: _UNIT_FACTORS[ch][self.units.get(ch, SI_UNITS[ch])] for ch in _UNIT_FACTORS}

    def as_dict(self) -> dict:
        return {
            "version": self.version,
            "rate_hint": self.rate_hint,
            "units": dict(sorted(self.units.items())),
            "geometry": self.geometry.as_dict() if self.geometry else None,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], line: int | None = None) -> "LogHeader":
        try:
            geom = data.get("geometry")
            return cls(
                version=int(data.get("version", FORMAT_VERSION)),
                rate_hint=float(data.get("rate_hint", DEFAULT_RATE)),
                units={**SI_UNITS, **dict(data.get("units") or {})},
                geometry=VehicleGeometry(**geom) if geom else None,
                metadata=dict(data.get("metadata") or {}),
            )
        except ParseError as exc:
            raise ParseError(str(exc), line=line, field="header") from exc
        except (TypeError, ValueError, InputDomainError) as exc:
            raise ParseError(f"invalid header: {exc}", line=line, field="header") from exc


def _number(obj: Mapping[str, Any], key: str, line: int | None, factor: float) -> float:
    if key not in obj:
        raise ParseError("missing mandatory field", line=line, field=key)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                raise ParseError(f"not a number: {value!r}", line=line, field=key) from None
        else:
            raise ParseError(f"not a number: {value!r}", line=line, field=key)
    value = float(value)
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {value!r}", line=line, field=key)
    return value * factor if factor != 1.0 else value


def _bool(value: Any, line: int | None) -> Optional[bool]:
    if value is None or value == "":
        return None
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str) and value.strip().lower() in ("true", "false", "1", "0"):
        return value.strip().lower() in ("true", "1")
    raise ParseError(f"not a boolean: {value!r}", line=line, field="slip")


def record_from_mapping(obj: Mapping[str, Any], line: int | None = None, header: LogHeader | None = None) -> TelemetryRecord:
    factors = (header or _SI_HEADER).factors()
    t, v, delta, ax, ay, vx, vy, wpsi = (_number(obj, k, line, factors[k]) for k in MANDATORY)
    surface = obj.get("surface")
    if surface is not None and not isinstance(surface, str):
        raise ParseError(f"not a string: {surface!r}", line=line, field="surface")
    try:
        u = ControlAction(v, delta)
    except InputDomainError as exc:
        raise ParseError(str(exc), line=line, field="delta") from exc
    return TelemetryRecord(
        t=t,
        u=u,
        y=Observation(ax, ay, vx, vy, wpsi),
        surface=surface or None,
        slip_label=_bool(obj.get("slip"), line),
    )


def parse_record(line: str, line_no: int | None = None, header: LogHeader | None = None) -> TelemetryRecord:
    """Parse one JSON-lines record into SI units."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=line_no) from None
    if not isinstance(obj, dict):
        raise ParseError("record must be a JSON object", line=line_no)
    return record_from_mapping(obj, line_no, header)


def format_record(rec: TelemetryRecord) -> str:
    obj: dict[str, Any] = {
        "t": rec.t,
        "v": rec.u.v,
        "delta": rec.u.delta,
        "ax": rec.y.a_x_hat,
        "ay": rec.y.a_y_hat,
        "vx": rec.y.v_x_hat,
        "vy": rec.y.v_y_hat,
        "wpsi": rec.y.w_psi_hat,
    }
    if rec.surface is not None:
        obj["surface"] = rec.surface
    if rec.slip_label is not None:
        obj["slip"] = rec.slip_label
    # json emits repr() floats: shortest string that round-trips exactly
    return json.dumps(obj, separators=(",", ":"))


_SI_HEADER = LogHeader()


@dataclass
class LoadedStream:
    records: list[TelemetryRecord]
    header: LogHeader
    warnings: int = 0

    @property
    def count(self) -> int:
        return len(self.records)


def _iter_jsonl(text: str):
    header = None
    for i, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=i) from None
        if not isinstance(obj, dict):
            raise ParseError("record must be a JSON object", line=i)
        if "header" in obj:
            if header is not None:
                raise ParseError("duplicate header", line=i, field="header")
            header = LogHeader.from_dict(obj["header"], line=i)
            yield i, header
            continue
        yield i, obj


def _iter_csv(text: str):
    reader = csv.reader(io.StringIO(text))
    for i, row in enumerate(reader, start=1):
        if not row or not any(cell.strip() for cell in row):
            continue
        if row[0].strip() == "t":
            continue
        if len(row) < len(MANDATORY) or len(row) > len(CSV_COLUMNS):
            raise ParseError(f"expected {len(MANDATORY)}-{len(CSV_COLUMNS)} columns, got {len(row)}", line=i)
        obj: dict[str, Any] = dict(zip(CSV_COLUMNS, (c.strip() for c in row)))
        if not obj.get("surface"):
            obj.pop("surface", None)
        yield i, obj


def load_stream(path: str | Path, mode: str = "strict") -> LoadedStream:
    """Read a log file and return its records in strictly increasing time.

    In ``strict`` mode any non-increasing timestamp is an :class:`OrderingError`.
    In ``lenient`` mode records are sorted and duplicate timestamps keep the
    last occurrence; each repair counts as one warning.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown validation mode {mode!r}")
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    is_csv = path.suffix.lower() == ".csv"
    header = _SI_HEADER
    records: list[TelemetryRecord] = []
    for line_no, item in (_iter_csv(text) if is_csv else _iter_jsonl(text)):
        if isinstance(item, LogHeader):
            if records:
                raise ParseError("header must precede records", line=line_no, field="header")
            header = item
            continue
        records.append(record_from_mapping(item, line_no, header))

    warnings = 0
    if mode == "strict":
        for i in range(1, len(records)):
            if not records[i].t > records[i - 1].t:
                raise OrderingError(
                    f"{path}: timestamp at index {i} ({records[i].t!r}) does not follow "
                    f"index {i - 1} ({records[i - 1].t!r})"
                )
    else:
        ordered = sorted(range(len(records)), key=lambda i: (records[i].t, i))
        warnings += sum(1 for a, b in zip(ordered, ordered[1:]) if b < a)
        deduped: list[TelemetryRecord] = []
        for i in ordered:
            rec = records[i]
            if deduped and deduped[-1].t == rec.t:
                deduped[-1] = rec
                warnings += 1
            else:
                deduped.append(rec)
        records = deduped
        if warnings:
            log.warning("%s: %d ordering repairs in lenient mode", path, warnings)
    return LoadedStream(records, header, warnings)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temporary sibling file and rename over the target."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_stream(records: Sequence[TelemetryRecord], header: LogHeader | None = None) -> str:
    lines = []
    if header is not None:
        lines.append(json.dumps({"header": header.as_dict()}, sort_keys=True, separators=(",", ":")))
    lines.extend(format_record(r) for r in records)
    return "\n".join(lines) + "\n"


def write_stream(path: str | Path, records: Sequence[TelemetryRecord], header: LogHeader | None = None) -> None:
    atomic_write_text(path, dumps_stream(records, header))


@dataclass
class AlignmentReport:
    records: list[TelemetryRecord]
    slots: int
    dropped: int
    missing: dict[str, int]


def _grid(t: float, rate: float, up: bool) -> int:
    x = t * rate
    nearest = round(x)
    if abs(x - nearest) <= 1e-9 * max(1.0, abs(x)):
        return int(nearest)
    return math.ceil(x) if up else math.floor(x)


def align_channels(
    channels: Mapping[str, tuple[Sequence[float], Sequence[Any]]],
    rate: float = DEFAULT_RATE,
) -> AlignmentReport:
    """Resample per-channel series onto the clock ``n / rate``.

    Each slot takes, per channel, the nearest sample no more than half a
    period away (the earlier one on an exact tie). Slots missing any
    mandatory channel are dropped and counted.
    """
    if not rate > 0:
        raise AlignmentError(f"target rate must be positive, got {rate!r}")
    mandatory = [c for c in MANDATORY if c != "t"]
    series: dict[str, tuple[np.ndarray, list]] = {}
    for name, (times, values) in channels.items():
        if name not in mandatory and name not in OPTIONAL:
            raise AlignmentError(f"unknown channel {name!r}")
        ts = np.asarray(times, dtype=float)
        if len(ts) != len(values):
            raise AlignmentError(f"channel {name!r}: {len(ts)} timestamps but {len(values)} values")
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise OrderingError(f"channel {name!r} is not strictly time-ordered")
        series[name] = (ts, list(values))
    for name in mandatory:
        if name not in series or len(series[name][0]) == 0:
            raise AlignmentError(f"mandatory channel {name!r} is empty")

    start = min(series[c][0][0] for c in mandatory)
    stop = max(series[c][0][-1] for c in mandatory)
    n0, n1 = _grid(start, rate, up=True), _grid(stop, rate, up=False)
    half = 0.5 / rate

    slot_times = np.arange(n0, n1 + 1) / rate
    picks: dict[str, np.ndarray] = {}
    for name, (ts, _) in series.items():
        right = np.clip(np.searchsorted(ts, slot_times), 0, len(ts) - 1)
        left = np.clip(right - 1, 0, len(ts) - 1)
        d_left = np.abs(slot_times - ts[left])
        d_right = np.abs(ts[right] - slot_times)
        idx = np.where(d_left <= d_right, left, right)
        dist = np.minimum(d_left, d_right)
        picks[name] = np.where(dist <= half + 1e-12, idx, -1)

    missing = {name: int(np.sum(picks[name] < 0)) for name in mandatory}
    records = []
    for k, t in enumerate(slot_times):
        if any(picks[c][k] < 0 for c in mandatory):
            continue
        obj: dict[str, Any] = {"t": float(t)}
        for name, (_, values) in series.items():
            j = picks[name][k]
            if j >= 0:
                obj[name] = values[j]
        records.append(record_from_mapping(obj))
    dropped = len(slot_times) - len(records)
    if dropped:
        log.info("alignment dropped %d of %d slots", dropped, len(slot_times))
    return AlignmentReport(records, len(slot_times), dropped, missing)


def channels_from_records(records: Sequence[TelemetryRecord]) -> dict[str, tuple[list[float], list]]:
    """Split a stream into per-channel series (inverse of :func:`align_channels`)."""
    ts = [r.t for r in records]
    out = {
        "v": (ts, [r.u.v for r in records]),
        "delta": (ts, [r.u.delta for r in records]),
        "ax": (ts, [r.y.a_x_hat for r in records]),
        "ay": (ts, [r.y.a_y_hat for r in records]),
        "vx": (ts, [r.y.v_x_hat for r in records]),
        "vy": (ts, [r.y.v_y_hat for r in records]),
        "wpsi": (ts, [r.y.w_psi_hat for r in records]),
    }
    surf = [(r.t, r.surface) for r in records if r.surface is not None]
    if surf:
        out["surface"] = ([t for t, _ in surf], [s for _, s in surf])
    slip = [(r.t, r.slip_label) for r in records if r.slip_label is not None]
    if slip:
        out["slip"] = ([t for t, _ in slip], [s for _, s in slip])
    return out
