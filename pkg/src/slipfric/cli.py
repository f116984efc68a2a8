"""Command-line entry point: ``slipfric {calibrate,detect,estimate,simulate,evaluate}``.

Exit codes: 0 success (warnings included), 1 usage, 2 data or parse
errors, 3 domain or calibration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .calibration import PullTrial, calibrate, cross_validate, kfold_split, pull_test_mu
from .config import RunConfig, resolve_config
from .detector import Thresholds, detect_stream, extract_events, residuals
from .errors import (
    AlignmentError,
    CalibrationError,
    ConfigError,
    FoldError,
    InputDomainError,
    LabelingError,
    OrderingError,
    ParseError,
    SlipFricError,
    UndefinedSlipError,
)
from .estimator import estimate_from_flags, friction_circle_points, pooled_max, write_circle_export
from .metrics import delay_stats, mae_stats
from .simulator import NOISELESS, SCENARIOS, simulate_run
from .telemetry import LogHeader, atomic_write_text, load_stream, write_stream

log = logging.getLogger("slipfric")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DOMAIN = 0, 1, 2, 3


class UsageError(SlipFricError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; usage errors are 1 here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def dumps_report(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_json(path: str | Path, obj: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(path, dumps_report(obj))


def _stream_ids(paths: Sequence[str]) -> list[str]:
    ids = [Path(p).stem for p in paths]
    if len(set(ids)) != len(ids):
        ids = [str(Path(p)) for p in paths]
    return ids


def _load_all(paths: Sequence[str], cfg: RunConfig) -> dict[str, list]:
    streams = {}
    for sid, path in zip(_stream_ids(paths), paths):
        if not Path(path).is_file():
            raise FileNotFoundError(f"input file not found: {path}")
        streams[sid] = load_stream(path, cfg.mode).records
    return streams


def _thresholds(args, cfg: RunConfig, streams: dict[str, list]) -> tuple[Thresholds, str]:
    """Thresholds from a calibration report, explicit values, or the inputs themselves."""
    if getattr(args, "thresholds", None):
        path = Path(args.thresholds)
        if not path.is_file():
            raise FileNotFoundError(f"thresholds file not found: {path}")
        data = json.loads(path.read_text(encoding="utf-8"))
        try:
            th = data["thresholds"]
            return Thresholds(float(th["delta_lin"]), float(th["delta_ang"])), str(path)
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: no thresholds in calibration report ({exc})") from None
    if cfg.thresholds is not None:
        return cfg.thresholds, "config"
    return calibrate(list(streams.values()), cfg.geometry).thresholds, "calibrated-on-input"


def _thresholds_dict(th: Thresholds) -> dict:
    return {"delta_lin": th.delta_lin, "delta_ang": th.delta_ang}


# -- subcommands -------------------------------------------------------------


def cmd_calibrate(args, cfg: RunConfig) -> int:
    streams = _load_all(args.inputs, cfg)
    cal = calibrate(list(streams.values()), cfg.geometry)
    folds = None
    if len(streams) >= max(cfg.k, 2):
        assignment = kfold_split(list(streams), cfg.k, cfg.seed)
        folds = {"k": cfg.k, "assignment": assignment.assignment}
    report = {
        "kind": "calibration",
        "config": cfg.as_dict(),
        "thresholds": _thresholds_dict(cal.thresholds),
        "residuals": {
            "linear": {"mean": cal.linear.mean, "std": cal.linear.std},
            "angular": {"mean": cal.angular.mean, "std": cal.angular.std},
            "std_flavor": "population",
            "sigma_multiplier": 2.0,
        },
        "n_samples": cal.linear.n,
        "streams": {sid: {"path": p, "n_samples": len(streams[sid])} for sid, p in zip(streams, args.inputs)},
        "seed": cfg.seed,
        "folds": folds,
    }
    _write_json(args.out, report)
    log.info("thresholds delta_lin=%.6g delta_ang=%.6g", cal.thresholds.delta_lin, cal.thresholds.delta_ang)
    return EXIT_OK


def cmd_detect(args, cfg: RunConfig) -> int:
    streams = _load_all([args.input], cfg)
    records = next(iter(streams.values()))
    th, source = _thresholds(args, cfg, streams)
    geom = cfg.geometry
    flags = detect_stream(records, th, geom, smoothing=args.smoothing, consecutive=args.consecutive)
    events = extract_events(zip(records, flags), cfg.refractory)

    lines = [
        json.dumps(
            {"header": {"thresholds": _thresholds_dict(th), "thresholds_source": source, "refractory": cfg.refractory}},
            sort_keys=True,
        )
    ]
    lines += [json.dumps(e.as_dict(), sort_keys=True) for e in events]
    Path(args.events).parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(args.events, "\n".join(lines) + "\n")

    if args.annotated:
        ann = []
        for rec, fl in zip(records, flags):
            ann.append(
                json.dumps(
                    {
                        "t": rec.t,
                        "lin_residual": fl.lin_residual,
                        "ang_residual": fl.ang_residual,
                        "d_lin": fl.d_lin,
                        "d_ang": fl.d_ang,
                        "no_slip": fl.no_slip,
                        "slip": rec.slip_label,
                        "surface": rec.surface,
                    },
                    separators=(",", ":"),
                )
            )
        atomic_write_text(args.annotated, "\n".join(ann) + ("\n" if ann else ""))
    log.info("%d events", len(events))
    return EXIT_OK


def cmd_estimate(args, cfg: RunConfig) -> int:
    streams = _load_all(args.inputs, cfg)
    th, source = _thresholds(args, cfg, streams)
    geom = cfg.geometry
    per_stream = {}
    circle_files = {}
    warnings = []
    if args.circle_dir:
        Path(args.circle_dir).mkdir(parents=True, exist_ok=True)
    for sid, records in streams.items():
        exports = friction_circle_points(records, th, geom, cfg.g)
        per_stream[sid] = {s: e.estimate for s, e in exports.items()}
        for surface, export in exports.items():
            if not export.estimate.valid:
                warnings.append(f"{sid}/{surface}: no valid estimate (every sample flagged as slip)")
            if args.circle_dir:
                path = Path(args.circle_dir) / f"{sid}__{surface}.tsv"
                write_circle_export(export, path)
                circle_files[f"{sid}/{surface}"] = str(path)
    pooled = pooled_max(per_stream[sid] for sid in sorted(per_stream))
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    report = {
        "kind": "friction",
        "config": cfg.as_dict(),
        "thresholds": _thresholds_dict(th),
        "thresholds_source": source,
        "per_stream": {sid: {s: e.as_dict() for s, e in ests.items()} for sid, ests in per_stream.items()},
        "pooled_max": {s: e.as_dict() for s, e in pooled.items()},
        "circle_exports": circle_files,
        "warnings": warnings,
    }
    _write_json(args.out, report)
    return EXIT_OK


def cmd_simulate(args, cfg: RunConfig) -> int:
    if args.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.scenario!r}; available: {', '.join(sorted(SCENARIOS))}")
    build = SCENARIOS[args.scenario]
    kwargs: dict[str, Any] = {"seed": cfg.seed}
    if args.duration is not None:
        kwargs["duration"] = args.duration
    if args.noiseless:
        kwargs["noise"] = NOISELESS
    if args.mu is not None:
        if args.scenario == "two-surface":
            kwargs["mu_first"] = args.mu
        else:
            kwargs["mu_true"] = args.mu
    sim_cfg = build(**kwargs).with_(dt=1.0 / cfg.rate, geom=cfg.geometry, g=cfg.g)
    records = simulate_run(sim_cfg)
    header = LogHeader(
        rate_hint=cfg.rate,
        geometry=cfg.geometry,
        metadata={
            "scenario": args.scenario,
            "seed": cfg.seed,
            "mu_true": sim_cfg.mu_true,
            "surfaces": {p.surface: p.mu for p in sim_cfg.surfaces},
            "noise": {
                "sigma_accel": sim_cfg.noise.sigma_accel,
                "sigma_vel": sim_cfg.noise.sigma_vel,
                "sigma_yaw_rate": sim_cfg.noise.sigma_yaw_rate,
            },
        },
    )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_stream(args.out, records, header)
    return EXIT_OK


def load_ground_truth(path: str | Path) -> tuple[dict[str, float], dict[str, Any]]:
    """``{surface: mu}`` or ``{surface: [{direction, f_pull, f_normal}, ...]}``."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"ground-truth file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected an object keyed by surface")
    truth, detail = {}, {}
    for surface, value in data.items():
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            truth[surface] = float(value)
        elif isinstance(value, list):
            try:
                trials = [PullTrial(t["direction"], float(t["f_pull"]), float(t["f_normal"])) for t in value]
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}: bad pull trial for {surface!r}: {exc}") from None
            result = pull_test_mu(trials)
            truth[surface] = result.overall
            detail[surface] = {"by_direction": dict(sorted(result.by_direction.items())), "overall": result.overall, "n": result.n}
        else:
            raise ParseError(f"{path}: bad ground truth for surface {surface!r}")
    return truth, detail


def cmd_evaluate(args, cfg: RunConfig) -> int:
    streams = _load_all(args.inputs, cfg)
    geom = cfg.geometry
    cv = cross_validate(streams, cfg.k, cfg.seed, geom, cfg.g, cfg.window, cfg.refractory)

    folds = []
    for fold in cv.folds:
        folds.append(
            {
                "index": fold.index,
                "test_ids": fold.test_ids,
                "train_ids": fold.train_ids,
                "thresholds": _thresholds_dict(fold.calibration.thresholds),
                "n_train_samples": fold.calibration.linear.n,
                "tp": fold.report.tp,
                "fp": fold.report.fp,
                "fn": fold.report.fn,
                **fold.prf.as_dict(),
            }
        )
    surfaces = sorted({r.surface or "default" for recs in streams.values() for r in recs if r.slip_label})
    delays = delay_stats(cv.pooled, surfaces)
    per_stream = cv.per_stream_estimates()
    pooled = cv.pooled_estimates()

    report: dict[str, Any] = {
        "kind": "evaluation",
        "config": cfg.as_dict(),
        "streams": {sid: p for sid, p in zip(streams, args.inputs)},
        "seed": cfg.seed,
        "k": cfg.k,
        "std_flavor": "population",
        "folds": folds,
        "detection": {"tp": cv.pooled.tp, "fp": cv.pooled.fp, "fn": cv.pooled.fn, **cv.pooled_prf.as_dict()},
        "delay": {s: st.as_dict() for s, st in delays.items()},
        "friction": {
            "per_stream": {sid: {s: e.as_dict() for s, e in per_stream[sid].items()} for sid in sorted(per_stream)},
            "pooled_max": {s: e.as_dict() for s, e in pooled.items()},
        },
    }

    by_surface: dict[str, list[float]] = {}
    for sid in sorted(per_stream):
        for s, e in per_stream[sid].items():
            if e.valid:
                by_surface.setdefault(s, []).append(e.mu_hat)
    truth: dict[str, float] = {}
    if args.ground_truth:
        truth, detail = load_ground_truth(args.ground_truth)
        mae = mae_stats(by_surface, truth)
        report["ground_truth"] = {"mu": truth, "pull_tests": detail}
        report["mae"] = {
            "per_stream": {s: st.as_dict() for s, st in mae.items()},
            "pooled_max": {
                s: {"estimate": e.mu_hat, "ground_truth": truth[s], "abs_error": abs(e.mu_hat - truth[s])}
                for s, e in pooled.items()
                if e.valid and s in truth
            },
        }

    if args.plots:
        from .plots import Comparison, ResidualTrace, emit_plots

        exports = []
        traces = []
        fold_of = cv.assignment.assignment
        for sid in sorted(streams):
            th = cv.folds[fold_of[sid]].calibration.thresholds
            for export in friction_circle_points(streams[sid], th, geom, cfg.g).values():
                exports.append(type(export)(f"{sid}__{export.surface}", export.points, export.estimate))
            lin, ang = residuals(streams[sid], geom)
            traces.append(ResidualTrace(sid, [r.t for r in streams[sid]], lin.tolist(), ang.tolist(), th.delta_lin, th.delta_ang))
        comparisons = [Comparison(s, truth.get(s), by_surface.get(s, [])) for s in sorted(set(by_surface) | set(truth))]
        written = emit_plots(exports, traces, comparisons, args.plots)
        report["plots"] = sorted(p.name for p in written)

    _write_json(args.out, report)
    prf = cv.pooled_prf
    log.info("precision=%s recall=%s f1=%s", prf.precision, prf.recall, prf.f1)
    return EXIT_OK


# -- wiring ------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file ([slipfric] section); default from $SLIPFRIC_CONFIG")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, help="cross-validation folds")
    p.add_argument("--delta-lin", type=float, help="linear residual threshold [m/s]")
    p.add_argument("--delta-ang", type=float, help="angular residual threshold [rad/s]")
    p.add_argument("--window", type=float, help="event matching window [s]")
    p.add_argument("--refractory", type=float, help="event merge gap [s]")
    p.add_argument("--rate", type=float, help="sample rate [Hz]")
    p.add_argument("--g", type=float, help="gravitational acceleration [m/s^2]")
    p.add_argument("--mode", choices=("strict", "lenient"), help="log validation mode")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slipfric", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("calibrate", help="thresholds from training logs")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="flag slip and extract events")
    p.add_argument("input")
    p.add_argument("--events", required=True, help="events output (JSON lines)")
    p.add_argument("--annotated", help="per-record flags output (JSON lines)")
    p.add_argument("--thresholds", help="calibration report to take thresholds from")
    p.add_argument("--smoothing", type=int, default=0, help="moving-average window in samples (off by default)")
    p.add_argument("--consecutive", type=int, default=1, help="samples required to trigger")
    _common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("estimate", help="friction coefficient per surface")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--circle-dir", help="directory for friction-circle exports")
    p.add_argument("--thresholds", help="calibration report to take thresholds from")
    _common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="write a synthetic labeled log")
    p.add_argument("scenario", help=f"one of: {', '.join(sorted(SCENARIOS))}")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--mu", type=float, help="ground-truth friction (first surface for two-surface)")
    p.add_argument("--duration", type=float)
    p.add_argument("--noiseless", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="cross-validated detection and friction report")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--ground-truth", help="JSON: surface -> mu or list of pull trials")
    p.add_argument("--plots", help="directory for SVG plots and tables")
    _common(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


_OVERRIDES = ("seed", "k", "delta_lin", "delta_ang", "window", "refractory", "rate", "g", "mode")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args.config, {k: getattr(args, k) for k in _OVERRIDES})
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"slipfric: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, OrderingError, AlignmentError, LabelingError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"slipfric: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InputDomainError, UndefinedSlipError, CalibrationError, FoldError, ConfigError, SlipFricError) as exc:
        print(f"slipfric: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"slipfric: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
