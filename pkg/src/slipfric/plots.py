"""Static SVG figures, each written next to the tab-separated table it draws."""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .estimator import CircleExport, FrictionEstimate, read_circle_export  # noqa: E402
from .telemetry import atomic_write_text  # noqa: E402

_RC = {
    "svg.hashsalt": "slipfric",
    "svg.fonttype": "path",
    "path.simplify": False,
}


@dataclass
class ResidualTrace:
    name: str
    t: Sequence[float]
    lin: Sequence[float]
    ang: Sequence[float]
    delta_lin: float
    delta_ang: float


@dataclass
class Comparison:
    surface: str
    ground_truth: Optional[float]
    estimates: Sequence[float]


def _save(fig, path: Path) -> None:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    atomic_write_text(path, buf.getvalue())


def _table(path: Path, header: Sequence[str], rows) -> None:
    lines = ["\t".join(header)]
    lines += ["\t".join(repr(v) if isinstance(v, float) else str(v) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def plot_friction_circle(export: CircleExport, out_dir: Path) -> list[Path]:
    stem = out_dir / f"friction_circle_{_safe(export.surface)}"
    fig, ax = plt.subplots(figsize=(5, 5))
    pts = export.points
    if pts:
        xs = np.array([p.ay_g for p in pts])
        ys = np.array([p.ax_g for p in pts])
        ok = np.array([p.no_slip for p in pts])
        ax.scatter(xs[ok], ys[ok], s=4, color="tab:blue", label="no slip")
        ax.scatter(xs[~ok], ys[~ok], s=4, color="tab:red", alpha=0.5, label="slip")
    else:
        ax.text(0.5, 0.5, "no data", transform=ax.transAxes, ha="center", va="center")
    est = export.estimate
    if est.valid:
        theta = np.linspace(0.0, 2 * np.pi, 361)
        ax.plot(export.radius * np.cos(theta), export.radius * np.sin(theta), color="black", lw=1)
        star = next((p for p in pts if p.t == est.argmax_t), None)
        if star is not None:
            ax.plot([star.ay_g], [star.ax_g], marker="*", markersize=14, color="gold", mec="black")
        ax.set_title(f"{export.surface}: mu_hat = {est.mu_hat:.3f}")
    else:
        ax.set_title(f"{export.surface}: no valid estimate")
    ax.set_xlabel("lateral acceleration [g]")
    ax.set_ylabel("longitudinal acceleration [g]")
    ax.set_aspect("equal")
    if pts:
        ax.legend(loc="upper right")
    svg = stem.with_suffix(".svg")
    _save(fig, svg)
    tsv = stem.with_suffix(".tsv")
    _table(tsv, ["t", "ax_g", "ay_g", "no_slip"], [(p.t, p.ax_g, p.ay_g, int(p.no_slip)) for p in pts])
    return [svg, tsv]


def plot_residuals(trace: ResidualTrace, out_dir: Path) -> list[Path]:
    stem = out_dir / f"residuals_{_safe(trace.name)}"
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    if len(trace.t):
        ax1.plot(trace.t, trace.lin, lw=0.8)
        ax2.plot(trace.t, trace.ang, lw=0.8)
    else:
        ax1.text(0.5, 0.5, "no data", transform=ax1.transAxes, ha="center", va="center")
    ax1.axhline(trace.delta_lin, color="tab:red", ls="--", lw=1)
    ax2.axhline(trace.delta_ang, color="tab:red", ls="--", lw=1)
    ax1.set_ylabel("|v - vx| [m/s]")
    ax2.set_ylabel("|w - w_hat| [rad/s]")
    ax2.set_xlabel("t [s]")
    ax1.set_title(trace.name)
    svg = stem.with_suffix(".svg")
    _save(fig, svg)
    tsv = stem.with_suffix(".tsv")
    rows = [(float(t), float(a), float(b)) for t, a, b in zip(trace.t, trace.lin, trace.ang)]
    _table(tsv, ["t", "lin_residual", "ang_residual"], rows)
    return [svg, tsv]


def plot_comparison(items: Sequence[Comparison], out_dir: Path) -> list[Path]:
    stem = out_dir / "friction_comparison"
    fig, ax = plt.subplots(figsize=(6, 4))
    if items:
        positions = np.arange(len(items))
        for pos, item in zip(positions, items):
            if item.estimates:
                ax.boxplot([list(item.estimates)], positions=[pos + 0.15], widths=0.25,
                           boxprops={"color": "tab:blue"}, medianprops={"color": "tab:blue"})
            if item.ground_truth is not None:
                ax.plot([pos - 0.3, pos], [item.ground_truth] * 2, color="gray", lw=3)
        ax.set_xticks(positions, [i.surface for i in items])
        ax.set_xlim(-0.6, len(items) - 0.4)
    else:
        ax.text(0.5, 0.5, "no data", transform=ax.transAxes, ha="center", va="center")
    ax.set_ylabel("friction coefficient")
    ax.set_title("ground truth (gray) vs estimates (blue)")
    svg = stem.with_suffix(".svg")
    _save(fig, svg)
    tsv = stem.with_suffix(".tsv")
    rows = []
    for item in items:
        gt = item.ground_truth if item.ground_truth is not None else "nan"
        rows += [(item.surface, gt, float(mu)) for mu in item.estimates] or [(item.surface, gt, "nan")]
    _table(tsv, ["surface", "ground_truth", "estimate"], rows)
    return [svg, tsv]


def emit_plots(
    exports: Sequence[CircleExport],
    traces: Sequence[ResidualTrace],
    comparisons: Sequence[Comparison],
    out_dir: str | Path,
) -> list[Path]:
    """Write every figure and its table under ``out_dir``; returns the paths written.

    Output bytes depend only on the inputs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    with matplotlib.rc_context(_RC):
        if exports:
            for export in exports:
                written += plot_friction_circle(export, out_dir)
        else:
            written += plot_friction_circle(CircleExport("none", [], FrictionEstimate(surface="none")), out_dir)
        for trace in traces:
            written += plot_residuals(trace, out_dir)
        written += plot_comparison(comparisons, out_dir)
    return written


def exports_from_paths(paths: Sequence[Path]) -> list[CircleExport]:
    return [read_circle_export(p) for p in paths]
