"""Output writers: convergence CSV, weight CSV, attractor SVG and JSON report."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import quoteattr

import numpy as np

from ..model import InvalidArgumentError

FLOAT_FMT = "{:.17g}"


class OutputError(OSError):
    pass


def _fmt(v: float) -> str:
    return FLOAT_FMT.format(float(v))


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from None


def write_convergence_csv(report, path, dim: int | None = None) -> None:
    """Header ``step,w1,...,wd,ess,residual`` then one row per step.

    ``dim`` is only needed for a report with zero steps.
    """
    path = Path(path)
    est = np.asarray(report.estimates, dtype=float)
    d = est.shape[1] if est.ndim == 2 and est.shape[0] else dim
    if d is None:
        d = len(report.final_std)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", *(f"w{i + 1}" for i in range(d)), "ess", "residual"])
        for t in range(est.shape[0] if est.ndim == 2 else 0):
            w.writerow([t, *map(_fmt, est[t]), _fmt(report.ess[t]), _fmt(report.residuals[t])])


def read_convergence_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: cols[:, i] for i, name in enumerate(header)}


def write_weights_csv(x, path) -> None:
    with _open_for_write(Path(path)) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"w{i + 1}" for i in range(len(x))])
        w.writerow([_fmt(v) for v in x])


def read_weights_csv(path) -> np.ndarray:
    """Final weights from a weights or convergence CSV (last row, ``w*`` columns).

    A header-less file is read as a single comma-separated row of weights.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise InvalidArgumentError(f"{path} is empty")
    header = rows[0]
    wcols = [i for i, h in enumerate(header) if h.strip().startswith("w")]
    try:
        if wcols:
            if len(rows) < 2:
                raise InvalidArgumentError(f"{path} has a header but no data rows")
            return np.array([float(rows[-1][i]) for i in wcols])
        return np.array([float(v) for v in rows[-1]])
    except (ValueError, IndexError):
        raise InvalidArgumentError(f"{path} does not contain numeric weights") from None


def write_attractor_svg(points: Sequence[tuple[float, float]], path, size: int = 600) -> None:
    """Scatter plot of delay-embedding points, scaled to their bounding box + 5%.

    The viewBox is in data units with the vertical axis flipped (``y`` is drawn
    at ``-y``) so larger values appear higher up.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise InvalidArgumentError("no points to plot")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    span = np.where(span > 0, span, 1.0)
    margin = 0.05 * span
    x0, x1 = lo[0] - margin[0], hi[0] + margin[0]
    y0, y1 = lo[1] - margin[1], hi[1] + margin[1]
    width, height = x1 - x0, y1 - y0
    radius = 0.002 * max(width, height)
    stroke = 0.002 * max(width, height)
    view = f"{x0:.9g} {-y1:.9g} {width:.9g} {height:.9g}"
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox={quoteattr(view)} preserveAspectRatio="none">',
        f'<rect x="{x0:.9g}" y="{-y1:.9g}" width="{width:.9g}" height="{height:.9g}" '
        f'fill="white" stroke="black" stroke-width="{stroke:.3g}"/>',
    ]
    if x0 < 0 < x1:
        lines.append(f'<line class="axis" x1="0" y1="{-y1:.9g}" x2="0" y2="{-y0:.9g}" stroke="gray" stroke-width="{stroke:.3g}"/>')
    if y0 < 0 < y1:
        lines.append(f'<line class="axis" x1="{x0:.9g}" y1="0" x2="{x1:.9g}" y2="0" stroke="gray" stroke-width="{stroke:.3g}"/>')
    lines.append('<g class="points" fill="navy">')
    lines.extend(f'<circle cx="{x:.9g}" cy="{-y:.9g}" r="{radius:.3g}"/>' for x, y in pts)
    lines += ["</g>", "</svg>", ""]
    path = Path(path)
    with _open_for_write(path) as fh:
        fh.write("\n".join(lines))


def _num(v):
    if v is None:
        return None
    if isinstance(v, np.ndarray):
        return [_num(x) for x in v.tolist()]
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def report_dict(report) -> dict:
    return {
        "filter": report.filter,
        "num_steps": report.num_steps,
        "final_estimate": _num(report.final_estimate),
        "final_std": _num(report.final_std),
        "true_weights": _num(report.true_weights),
        "final_error_per_weight": _num(report.final_error_per_weight),
        "final_dataset_mse": report.final_dataset_mse,
        "mean_squared_estimation_error": (
            None if report.mse_trajectory is None else float(np.mean(report.mse_trajectory))
        ),
        "mse_trajectory": _num(report.mse_trajectory),
        "ess": _num(report.ess) if report.filter == "pf" else None,
        "wall_time_seconds": report.wall_time_seconds,
    }


def write_outputs(result, out_dir) -> dict[str, Path]:
    """Write every artifact for ``result`` into ``out_dir`` and return their paths."""
    from .experiment import replay_points

    out = Path(out_dir)
    files: dict[str, Path] = {}
    primary = result.primary
    files["convergence"] = out / "convergence.csv"
    write_convergence_csv(primary, files["convergence"])
    if primary.filter == "pf" and "kf" in result.reports:
        files["convergence_kf"] = out / "convergence_kf.csv"
        write_convergence_csv(result.reports["kf"], files["convergence_kf"])
    files["weights"] = out / "weights.csv"
    write_weights_csv(primary.final_estimate, files["weights"])
    if result.replay is not None:
        files["attractor"] = out / "attractor.svg"
        write_attractor_svg(replay_points(result.replay), files["attractor"])
    cfg = result.config
    doc = {
        "problem": cfg.problem,
        "filter": cfg.filter,
        "seed": cfg.seed,
        "num_examples": len(result.examples),
        "tunings": {"q": cfg.tunings.q, "r": cfg.tunings.r},
        "reports": {name: report_dict(rep) for name, rep in result.reports.items()},
    }
    if result.replay is not None:
        doc["replay"] = {
            "steps": int(result.replay.states.shape[0]),
            "diverged_at": result.replay.diverged_at,
            "max_abs": float(np.nanmax(np.abs(result.replay.states))),
        }
    files["report"] = out / "report.json"
    with _open_for_write(files["report"]) as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return files
