# -*- coding: utf-8 -*-
"""
Run artifacts and reports.

Writers turn a ``RunResult`` into ``epoch_log.csv`` / ``per_class.csv`` /
``summary.txt``; the report reads those files back (never recomputing
anything) and renders SVG plots plus a combined CSV.
"""
import logging
import math
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from .config import settings
from .errors import ArtifactIOError, InvalidArgumentError, LogFormatError, MissingArtifactError
from .jinja_env import render_svg
from .mlp import STUDENT_ID
from .trainer import PerClassGain, RunResult, gain_from_accuracies

logger = logging.getLogger(__name__)

EPOCH_LOG = "epoch_log.csv"
PER_CLASS = "per_class.csv"
SUMMARY = "summary.txt"

EPOCH_COLUMNS = [
    "epoch",
    "split",
    "top1",
    "top5",
    "model_id",
    "rank",
    "temperature",
    "active_fraction",
    "weight",
    "lr",
    "task_loss",
    "distill_loss",
    "total_loss",
    "teacher_above_fraction",
]
# split value of the per-model ranking rows
CLASSROOM_SPLIT = "classroom"

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


# =============================================================================
# Writers
# =============================================================================


def epoch_log_frame(result: RunResult) -> pd.DataFrame:
    """Long format: train/test rows for the student, one classroom row per model."""
    rows = []
    for log in result.logs:
        shared = {
            "epoch": log.epoch,
            "model_id": STUDENT_ID,
            "lr": log.lr,
            "task_loss": log.task_loss,
            "distill_loss": log.distill_loss,
            "total_loss": log.total_loss,
            "teacher_above_fraction": log.teacher_above_fraction,
        }
        for split, acc in (("train", log.train), ("test", log.test)):
            rows.append({**shared, "split": split, "top1": acc.top1, "top5": acc.top5})
        for stats in log.models:
            if stats.rank is None:
                continue
            rows.append(
                {
                    "epoch": log.epoch,
                    "split": CLASSROOM_SPLIT,
                    "model_id": stats.model_id,
                    "rank": stats.rank,
                    "temperature": stats.temperature,
                    "active_fraction": stats.active_fraction,
                    "weight": stats.weight,
                }
            )
    return pd.DataFrame(rows, columns=EPOCH_COLUMNS)


def write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as e:
        raise ArtifactIOError(f"cannot write {path}: {e}") from e
    return path


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    return write_text(path, frame.to_csv(index=False, lineterminator="\n"))


def write_epoch_log(result: RunResult, path: Path | str) -> Path:
    return write_frame(epoch_log_frame(result), Path(path))


def write_per_class(accuracy: np.ndarray, counts: np.ndarray, path: Path | str) -> Path:
    frame = pd.DataFrame(
        {"class": np.arange(len(accuracy)), "accuracy": accuracy, "count": counts}
    )
    return write_frame(frame, Path(path))


def summary_lines(result: RunResult, **extra) -> list[str]:
    """``key = value`` lines; wall-clock only when timestamps are embedded."""
    values = {
        **extra,
        "mode": result.mode,
        "epochs": len(result.logs),
        "param_count": result.params.param_count,
        "final_train_top1": result.final_train.top1,
        "final_test_top1": result.final_test.top1,
        "final_test_top5": result.final_test.top5,
        "best_epoch": result.best_epoch,
        "best_test_top1": result.best_test.top1,
    }
    if settings.EMBED_TIMESTAMP:
        values["wall_seconds"] = round(result.wall_seconds, 3)
    return [f"{k} = {'' if v is None else v}" for k, v in values.items()]


def write_summary(lines: list[str], path: Path | str) -> Path:
    return write_text(Path(path), "\n".join(lines) + "\n")


# =============================================================================
# Readers
# =============================================================================


def read_summary(path: Path | str) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"{path}: summary not found")
    values = {}
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise LogFormatError(f"{path}: line {number}: expected 'key = value'")
        values[key.strip()] = value.strip()
    return values


def _read_csv(path: Path, columns: list[str], numeric: list[str]) -> pd.DataFrame:
    if not path.is_file():
        raise MissingArtifactError(f"{path}: not found")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise LogFormatError(f"{path}: {e}") from None
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise LogFormatError(f"{path}: missing columns {missing}")
    for column in numeric:
        converted = pd.to_numeric(frame[column].mask(frame[column] == ""), errors="coerce")
        bad = converted.isna() & (frame[column] != "")
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise LogFormatError(
                f"{path}: line {row + 2}: column '{column}' is not numeric: {frame[column].iloc[row]!r}"
            )
        frame[column] = converted
    return frame


def read_epoch_log(path: Path | str) -> pd.DataFrame:
    """Load ``epoch_log.csv``; a malformed value is reported with its line number."""
    numeric = [c for c in EPOCH_COLUMNS if c not in ("split", "model_id")]
    return _read_csv(Path(path), EPOCH_COLUMNS, numeric)


def read_per_class(path: Path | str) -> pd.DataFrame:
    return _read_csv(Path(path), ["class", "accuracy", "count"], ["class", "accuracy", "count"])


# =============================================================================
# SVG plots
# =============================================================================


@dataclass(frozen=True)
class PlotArea:
    left: float = 60.0
    right: float = 560.0
    top: float = 40.0
    bottom: float = 300.0


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _linear(lo: float, hi: float, out_lo: float, out_hi: float):
    span = hi - lo if hi > lo else 1.0
    return lambda v: out_lo + (v - lo) / span * (out_hi - out_lo)


def _ticks(lo: float, hi: float, to_pos, count: int = 5) -> list[dict]:
    if hi <= lo:
        return [{"pos": _fmt(to_pos(lo)), "label": f"{lo:.3g}"}]
    return [
        {"pos": _fmt(to_pos(v)), "label": f"{v:.3g}"}
        for v in np.linspace(lo, hi, count)
    ]


def line_chart_svg(
        title: str,
        series: dict[str, list[tuple[float, float]]],
        x_label: str,
        y_label: str,
) -> str:
    """One polyline per series; points with NaN y are dropped."""
    plot = PlotArea()
    clean = {
        name: [(x, y) for x, y in points if not math.isnan(y)] for name, points in series.items()
    }
    xs = [x for pts in clean.values() for x, _ in pts] or [0.0]
    ys = [y for pts in clean.values() for _, y in pts] or [0.0]
    to_x = _linear(min(xs), max(xs), plot.left, plot.right)
    to_y = _linear(min(ys), max(ys), plot.bottom, plot.top)
    series_list = [
        {
            "name": name,
            "color": PALETTE[i % len(PALETTE)],
            "points": " ".join(f"{_fmt(to_x(x))},{_fmt(to_y(y))}" for x, y in pts),
        }
        for i, (name, pts) in enumerate(clean.items())
    ]
    return render_svg(
        "line_chart.svg.j2",
        title=title,
        width=680,
        height=340,
        plot=plot,
        x_ticks=_ticks(min(xs), max(xs), to_x),
        y_ticks=_ticks(min(ys), max(ys), to_y),
        x_label=x_label,
        y_label=y_label,
        series_list=series_list,
        generated_at=_timestamp(),
    )


def bar_chart_svg(title: str, gain: PerClassGain, x_label: str = "class") -> str:
    plot = PlotArea(top=50.0)
    deltas = gain.deltas
    bound = max(float(np.max(np.abs(deltas))) if deltas.size else 0.0, 1e-9)
    to_y = _linear(-bound, bound, plot.bottom, plot.top)
    zero = to_y(0.0)
    slot = (plot.right - plot.left) / max(len(deltas), 1)
    bars = []
    for i, delta in enumerate(deltas):
        y = to_y(float(delta))
        bars.append(
            {
                "label": i,
                "delta": _fmt(float(delta)),
                "x": _fmt(plot.left + i * slot + 0.1 * slot),
                "y": _fmt(min(y, zero)),
                "width": _fmt(0.8 * slot),
                "height": _fmt(abs(zero - y)),
                "color": "#2ca02c" if delta > 0 else "#d62728" if delta < 0 else "#999999",
            }
        )
    return render_svg(
        "bar_chart.svg.j2",
        title=title,
        width=680,
        height=340,
        plot=plot,
        zero=_fmt(zero),
        y_ticks=_ticks(-bound, bound, to_y),
        bars=bars,
        improved=gain.improved,
        degraded=gain.degraded,
        unchanged=gain.unchanged,
        x_label=x_label,
        generated_at=_timestamp(),
    )


def _timestamp() -> str | None:
    if not settings.EMBED_TIMESTAMP:
        return None
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# =============================================================================
# Report
# =============================================================================


@dataclass(frozen=True)
class RunArtifacts:
    name: str
    directory: Path
    epoch_log: pd.DataFrame
    summary: dict[str, str]
    per_class: pd.DataFrame | None


@dataclass(frozen=True)
class ReportResult:
    out_dir: Path
    files: list[Path]
    gains: dict[str, PerClassGain]


def load_run(directory: Path | str) -> RunArtifacts:
    directory = Path(directory)
    if not (directory / EPOCH_LOG).is_file():
        raise MissingArtifactError(f"{directory / EPOCH_LOG}: not found")
    per_class = read_per_class(directory / PER_CLASS) if (directory / PER_CLASS).is_file() else None
    return RunArtifacts(
        name=directory.name,
        directory=directory,
        epoch_log=read_epoch_log(directory / EPOCH_LOG),
        summary=read_summary(directory / SUMMARY) if (directory / SUMMARY).is_file() else {},
        per_class=per_class,
    )


def _trajectories(runs: list[RunArtifacts], column: str, mentors_only: bool) -> dict:
    series = {}
    for run in runs:
        rows = run.epoch_log[run.epoch_log["split"] == CLASSROOM_SPLIT]
        for model_id, group in rows.groupby("model_id", sort=False):
            if mentors_only and model_id == STUDENT_ID:
                continue
            name = model_id if len(runs) == 1 else f"{run.name}:{model_id}"
            series[name] = list(zip(group["epoch"].astype(float), group[column].astype(float)))
    return series


def _distinct_names(runs: list[RunArtifacts]) -> list[RunArtifacts]:
    """Prefix the parent directory when two runs share a directory name."""
    names = [run.name for run in runs]
    if len(set(names)) == len(names):
        return runs
    return [replace(run, name=f"{run.directory.parent.name}/{run.name}") for run in runs]


def baseline_for(run: RunArtifacts, runs: list[RunArtifacts]) -> RunArtifacts:
    """The ``nokd`` run with the same seed, else the first run."""
    for other in runs:
        if (
            other is not run
            and other.summary.get("mode") == "nokd"
            and other.summary.get("seed") == run.summary.get("seed")
        ):
            return other
    return runs[0]


def build_report(run_dirs: list[Path | str], out_dir: Path | str) -> ReportResult:
    """Plots and ``combined.csv`` for the given run directories."""
    if not run_dirs:
        raise InvalidArgumentError("report needs at least one run directory")
    runs = [load_run(d) for d in run_dirs]
    runs = _distinct_names(runs)
    out_dir = Path(out_dir)
    files = []

    combined = pd.concat(
        [run.epoch_log.assign(run=run.name)[["run", *EPOCH_COLUMNS]] for run in runs],
        ignore_index=True,
    )
    files.append(write_frame(combined, out_dir / "combined.csv"))

    files.append(
        write_text(
            out_dir / "rank_trajectories.svg",
            line_chart_svg("Rank per epoch", _trajectories(runs, "rank", False), "epoch", "rank"),
        )
    )
    files.append(
        write_text(
            out_dir / "temperature_trajectories.svg",
            line_chart_svg(
                "Mentor temperature per epoch",
                _trajectories(runs, "temperature", True),
                "epoch",
                "temperature",
            ),
        )
    )

    gains = {}
    rows = []
    for run in runs:
        baseline = baseline_for(run, runs)
        if run.per_class is None or baseline.per_class is None:
            continue
        gain = gain_from_accuracies(baseline.per_class["accuracy"], run.per_class["accuracy"])
        gains[run.name] = gain
        for cls, delta in enumerate(gain.deltas):
            rows.append({"run": run.name, "baseline": baseline.name, "class": cls, "delta": delta})
    if gains:
        files.append(
            write_frame(
                pd.DataFrame(rows, columns=["run", "baseline", "class", "delta"]),
                out_dir / "per_class_gain.csv",
            )
        )
        # chart the first run that has a distinct baseline, else the first run
        charted = next(
            (r for r in runs if r.name in gains and baseline_for(r, runs) is not r),
            next(r for r in runs if r.name in gains),
        )
        title = f"Per-class gain: {charted.name} vs {baseline_for(charted, runs).name}"
        files.append(
            write_text(out_dir / "per_class_gain.svg", bar_chart_svg(title, gains[charted.name]))
        )
    logger.info("Report written", extra={"out_dir": str(out_dir), "runs": len(runs)})
    return ReportResult(out_dir, files, gains)
