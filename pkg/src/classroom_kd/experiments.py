# -*- coding: utf-8 -*-
"""
Experiment orchestration: presets, data loading, mentor pretraining,
distillation runs and ablation suites.

Layout under the output root::

    <experiment>/mentors/<model-id>.ckdw
    <experiment>/mentors/summary.txt
    <experiment>/runs/<mode>-<ranking>-s<seed>/{epoch_log.csv, per_class.csv,
                                                summary.txt, student.ckdw, config.yaml}
    <suite>/{cells.csv, aggregate.csv, aggregate_wide.csv}
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from . import mlp
from .config import settings
from .context import run_context
from .datasets import generate_blobs, generate_blobs_spirals, generate_spirals, load_csv, split
from .errors import ClassroomKDError, ConfigError, MissingArtifactError
from .mlp import STUDENT_ID, TEACHER_ID, Classroom, peer_id
from .models import (
    LONG_SCHEDULE_OPTIMIZER,
    AblationSuite,
    ClassroomConfig,
    DatasetConfig,
    DistillConfig,
    ExperimentConfig,
    MentoringConfig,
    OptimizerConfig,
    dump_model,
    load_experiment_config,
)
from .pose import SimccPoseTask, generate_toy_pose
from .reporting import (
    EPOCH_LOG,
    PER_CLASS,
    SUMMARY,
    summary_lines,
    write_epoch_log,
    write_frame,
    write_per_class,
    write_summary,
    write_text,
)
from .tasks import CLASSIFICATION, Task, predictions
from .trainer import RunResult, distill_student, per_class_accuracy, pretrain_mentor

logger = logging.getLogger(__name__)

PRESET_PREFIX = "preset:"
MENTORS_DIR = "mentors"
RUNS_DIR = "runs"
WEIGHT_SUFFIX = ".ckdw"


# =============================================================================
# Presets
# =============================================================================


def _toy() -> ExperimentConfig:
    return ExperimentConfig(name="toy")


def _compare() -> ExperimentConfig:
    base = ExperimentConfig(name="compare")
    return base.model_copy(update={"classroom": base.classroom.with_peer_count(4)})


def _long_schedule() -> ExperimentConfig:
    return ExperimentConfig(
        name="long-schedule",
        distill=DistillConfig(
            mentoring=MentoringConfig(base_temperature=12.0, beta=1.0, delta=0.0),
            optimizer=LONG_SCHEDULE_OPTIMIZER,
        ),
    )


def _pose() -> ExperimentConfig:
    joints, bins = 4, 16
    width = joints * 2 * bins
    optimizer = OptimizerConfig(
        learning_rate=0.05, warmup_epochs=10, total_epochs=30, batch_size=32
    )
    return ExperimentConfig(
        name="pose",
        dataset=DatasetConfig(
            generator="pose", samples=1200, joints=joints, bins=bins, noise=0.02
        ),
        classroom=ClassroomConfig(
            student=[3, 32, width],
            teacher=[3, 256, width],
            peers=[[3, 64, width], [3, 128, width]],
            pretrain=optimizer,
        ),
        distill=DistillConfig(optimizer=optimizer),
    )


PRESETS = {"toy": _toy, "compare": _compare, "long-schedule": _long_schedule, "pose": _pose}


def get_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (available: {', '.join(PRESETS)})")
    return PRESETS[name]()


def resolve_config(reference: str | Path, base_dir: Path | None = None) -> ExperimentConfig:
    """``preset:<name>`` or a YAML path (relative paths resolve against ``base_dir``)."""
    reference = str(reference)
    if reference.startswith(PRESET_PREFIX):
        return get_preset(reference[len(PRESET_PREFIX):])
    path = Path(reference)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return load_experiment_config(path)


# =============================================================================
# Data and paths
# =============================================================================


def load_data(config: DatasetConfig):
    """Train/test split for the configured generator or CSV file."""
    if config.generator == "pose":
        data = generate_toy_pose(config.samples, config.joints, config.bins, config.noise, config.seed)
        return data.split(config.train_fraction, config.seed)
    if config.generator == "blobs":
        data = generate_blobs(
            config.class_count, config.samples_per_class, config.dim, config.spread, config.seed
        )
    elif config.generator == "spirals":
        data = generate_spirals(config.class_count, config.samples_per_class, config.noise, config.seed)
    elif config.generator == "blobs-spirals":
        data = generate_blobs_spirals(
            config.class_count, config.samples_per_class, config.spread, config.noise, config.seed
        )
    else:
        data = load_csv(config.path, config.class_count)
    return split(data, config.train_fraction, config.seed)


def task_for(config: DatasetConfig) -> Task:
    if config.generator == "pose":
        return SimccPoseTask(config.joints, config.bins, config.pck_threshold)
    return CLASSIFICATION


def experiment_dir(config: ExperimentConfig, out_root: Path | str) -> Path:
    return Path(out_root) / config.output_subdir


def mentor_ids(config: ExperimentConfig) -> list[str]:
    return [TEACHER_ID] + [peer_id(i) for i in range(len(config.classroom.peers))]


def run_name(config: ExperimentConfig, seed: int) -> str:
    return f"{config.distill.mentoring.mode}-{config.distill.ranking.method}-s{seed}"


# =============================================================================
# Pretraining
# =============================================================================


@dataclass(frozen=True)
class PretrainOutcome:
    mentors_dir: Path
    weight_files: dict[str, Path]
    test_top1: dict[str, float]


def run_pretrain(
        config: ExperimentConfig,
        out_root: Path | str,
        mentors_dir: Path | None = None,
) -> PretrainOutcome:
    """Pretrain the teacher and every peer; one weight file each plus a summary."""
    mentors_dir = mentors_dir or experiment_dir(config, out_root) / MENTORS_DIR
    spec = config.classroom.spec()
    train, test = load_data(config.dataset)
    task = task_for(config.dataset)
    specs = [spec.teacher, *spec.peers]
    files, scores, lines = {}, {}, []
    for model_id, mentor_spec, seed in zip(mentor_ids(config), specs, config.classroom.seeds()):
        with run_context(f"{config.name}/pretrain/{model_id}"):
            result = pretrain_mentor(
                mentor_spec, train, test, config.classroom.pretrain, init_seed=seed, task=task
            )
        files[model_id] = mlp.save_params(result.params, mentors_dir / f"{model_id}{WEIGHT_SUFFIX}")
        scores[model_id] = result.final_test.top1
        lines.append(
            f"{model_id} = {result.final_test.top1} "
            f"(widths={list(mentor_spec.layer_widths)}, params={result.params.param_count}, seed={seed})"
        )
    write_summary(lines, mentors_dir / SUMMARY)
    logger.info("Mentors pretrained", extra={"mentors_dir": str(mentors_dir), "test_top1": scores})
    return PretrainOutcome(mentors_dir, files, scores)


def load_mentors(config: ExperimentConfig, mentors_dir: Path) -> dict:
    spec = config.classroom.spec()
    mentors = {}
    for model_id, mentor_spec in zip(mentor_ids(config), [spec.teacher, *spec.peers]):
        path = mentors_dir / f"{model_id}{WEIGHT_SUFFIX}"
        if not path.is_file():
            raise MissingArtifactError(f"mentor weights not found: {path} (run 'ckd pretrain' first)")
        mentors[model_id] = mlp.load_params(path, mentor_spec)
    return mentors


# =============================================================================
# Distillation
# =============================================================================


@dataclass(frozen=True)
class RunOutcome:
    run_dir: Path
    result: RunResult


def run_distill(
        config: ExperimentConfig,
        out_root: Path | str,
        seed: int | None = None,
        mentors_dir: Path | None = None,
        run_dir: Path | None = None,
) -> RunOutcome:
    """
    Distill a freshly initialized student against the pretrained mentors.

    The student is initialized from ``seed`` (default: the distill optimizer
    seed), which also drives batch shuffling.
    """
    optimizer = config.distill.optimizer
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"seed must be >= 0, got {seed}")
        optimizer = optimizer.model_copy(update={"seed": seed})
    config = config.model_copy(
        update={"distill": config.distill.model_copy(update={"optimizer": optimizer})}
    )
    base = experiment_dir(config, out_root)
    mentors_dir = mentors_dir or base / MENTORS_DIR
    run_dir = run_dir or base / RUNS_DIR / run_name(config, optimizer.seed)

    mentors = load_mentors(config, mentors_dir)
    spec = config.classroom.spec()
    classroom = Classroom(
        student=mlp.init_params(spec.student, optimizer.seed),
        teacher=mentors[TEACHER_ID],
        peers=tuple(mentors[m] for m in mentor_ids(config)[1:]),
    )
    train, test = load_data(config.dataset)
    task = task_for(config.dataset)
    with run_context(f"{config.name}/{run_dir.name}"):
        result = distill_student(
            classroom,
            train,
            test,
            config.distill.mentoring,
            optimizer,
            config.distill.ranking,
            task=task,
        )

    write_epoch_log(result, run_dir / EPOCH_LOG)
    if task is CLASSIFICATION:
        accuracy, counts = per_class_accuracy(
            predictions(mlp.forward(result.params, test.features)), test.labels, test.class_count
        )
        write_per_class(accuracy, counts, run_dir / PER_CLASS)
    write_summary(
        summary_lines(
            result,
            experiment=config.name,
            ranking=config.distill.ranking.method,
            seed=optimizer.seed,
        ),
        run_dir / SUMMARY,
    )
    mlp.save_params(result.params, run_dir / f"{STUDENT_ID}{WEIGHT_SUFFIX}")
    write_text(run_dir / "config.yaml", dump_model(config))
    return RunOutcome(run_dir, result)


# =============================================================================
# Ablations
# =============================================================================

MODE_GRIDS = {
    "temperature-mode": ["classroom-adaptive", "classroom-fixed-tau"],
    "baseline-compare": ["nokd", "single-kd", "aver", "classroom-adaptive"],
    "module-toggle": ["aver", "classroom-no-filter", "classroom-fixed-tau", "classroom-adaptive"],
    "mentor-role": ["nokd", "single-kd", "classroom-fixed-tau", "classroom-adaptive"],
}
RANKING_METHODS = ["method-a", "method-b"]


def default_variations(suite: AblationSuite, base: ExperimentConfig) -> list:
    if suite.suite == "classroom-size":
        return list(range(len(base.classroom.peers) + 1))
    if suite.suite == "ranking-method":
        return list(RANKING_METHODS)
    return list(MODE_GRIDS[suite.suite])


def apply_variation(base: ExperimentConfig, suite: str, value) -> ExperimentConfig:
    """The base experiment with one suite variation applied."""
    distill = base.distill
    if suite == "classroom-size":
        if not isinstance(value, int) or not 0 <= value <= len(base.classroom.peers):
            raise ConfigError(
                f"classroom-size variation must be a peer count in [0, {len(base.classroom.peers)}], got {value!r}"
            )
        return base.model_copy(update={"classroom": base.classroom.with_peer_count(value)})
    if suite == "ranking-method":
        if value not in RANKING_METHODS:
            raise ConfigError(f"ranking-method variation must be one of {RANKING_METHODS}, got {value!r}")
        ranking = distill.ranking.model_copy(update={"method": value})
        return base.model_copy(update={"distill": distill.model_copy(update={"ranking": ranking})})
    allowed = MODE_GRIDS[suite] + ["classroom-adaptive", "classroom-fixed-tau", "classroom-no-filter"]
    if value not in allowed:
        raise ConfigError(f"{suite} variation must be a mentoring mode in {sorted(set(allowed))}, got {value!r}")
    mentoring = distill.mentoring.model_copy(update={"mode": value})
    return base.model_copy(update={"distill": distill.model_copy(update={"mentoring": mentoring})})


def variation_label(suite: str, value) -> str:
    return f"peers={value}" if suite == "classroom-size" else str(value)


@dataclass(frozen=True)
class Cell:
    variation: str
    seed: int
    config: dict
    mentors_dir: str
    run_dir: str
    out_root: str


def run_cell(cell: Cell) -> dict:
    """Run one (variation, seed) cell; failures are returned, not raised."""
    row = {"variation": cell.variation, "seed": cell.seed, "run_dir": cell.run_dir}
    try:
        config = ExperimentConfig.model_validate(cell.config)
        with run_context(f"{cell.variation}/s{cell.seed}"):
            outcome = run_distill(
                config,
                cell.out_root,
                seed=cell.seed,
                mentors_dir=Path(cell.mentors_dir),
                run_dir=Path(cell.run_dir),
            )
    except ClassroomKDError as e:
        logger.error("Ablation cell failed", extra={"variation": cell.variation, "seed": cell.seed, "error": str(e)})
        return {**row, "status": "failed", "error": str(e)}
    except Exception as e:
        logger.exception("Ablation cell crashed", extra={"variation": cell.variation, "seed": cell.seed})
        return {**row, "status": "failed", "error": f"{type(e).__name__}: {e}"}
    result = outcome.result
    return {
        **row,
        "status": "ok",
        "final_test_top1": result.final_test.top1,
        "final_test_top5": result.final_test.top5,
        "best_test_top1": result.best_test.top1,
        "error": "",
    }


CELL_COLUMNS = [
    "variation",
    "seed",
    "status",
    "final_test_top1",
    "final_test_top5",
    "best_test_top1",
    "run_dir",
    "error",
]


def aggregate_cells(cells: pd.DataFrame, order: list[str]) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Mean/std (population) per variation over successful cells, and a seed x variation table."""
    ok = cells[cells["status"] == "ok"]
    grouped = ok.groupby("variation", sort=False)
    aggregate = pd.DataFrame(
        {
            "cells": grouped["seed"].count(),
            "mean_top1": grouped["final_test_top1"].mean(),
            "std_top1": grouped["final_test_top1"].std(ddof=0),
            "mean_top5": grouped["final_test_top5"].mean(),
            "mean_best_top1": grouped["best_test_top1"].mean(),
        }
    )
    aggregate = aggregate.reindex([v for v in order if v in aggregate.index])
    aggregate["failed"] = [
        int(((cells["variation"] == v) & (cells["status"] != "ok")).sum()) for v in aggregate.index
    ]
    aggregate.index.name = "variation"
    aggregate = aggregate.reset_index()
    wide = ok.pivot(index="seed", columns="variation", values="final_test_top1")
    wide = wide.reindex(columns=[v for v in order if v in wide.columns]).reset_index()
    wide.columns.name = None
    return aggregate, wide


@dataclass(frozen=True)
class AblationOutcome:
    suite_dir: Path
    cells: pd.DataFrame
    aggregate: pd.DataFrame
    failed: int


def resolve_workers(suite: AblationSuite, workers: int | None = None) -> int:
    """Pool size: the argument, then CKD_WORKERS, then the suite file, then 1."""
    return workers or settings.WORKERS or suite.workers or 1


def run_ablation(
        suite: AblationSuite,
        out_root: Path | str,
        base_dir: Path | None = None,
        workers: int | None = None,
) -> AblationOutcome:
    """
    Every (variation, seed) cell of ``suite``, sequential or in a process
    pool. Mentors are pretrained once, before any cell, if missing.
    """
    base = suite.base if isinstance(suite.base, ExperimentConfig) else resolve_config(suite.base, base_dir)
    suite_dir = Path(out_root) / suite.output_subdir
    mentors_dir = suite_dir / MENTORS_DIR
    if not all((mentors_dir / f"{m}{WEIGHT_SUFFIX}").is_file() for m in mentor_ids(base)):
        run_pretrain(base, out_root, mentors_dir=mentors_dir)

    values = suite.variations if suite.variations is not None else default_variations(suite, base)
    cells = []
    for value in values:
        label = variation_label(suite.suite, value)
        config = apply_variation(base, suite.suite, value)
        for seed in suite.seeds:
            cells.append(
                Cell(
                    variation=label,
                    seed=seed,
                    config=config.model_dump(mode="json"),
                    mentors_dir=str(mentors_dir),
                    run_dir=str(suite_dir / "cells" / label / f"s{seed}"),
                    out_root=str(out_root),
                )
            )

    workers = resolve_workers(suite, workers)
    logger.info(
        "Ablation started",
        extra={"suite": suite.suite, "cells": len(cells), "workers": workers},
    )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(run_cell, cells))
    else:
        rows = [run_cell(cell) for cell in cells]

    frame = pd.DataFrame(rows, columns=CELL_COLUMNS)
    for column in ("final_test_top1", "final_test_top5", "best_test_top1"):
        frame[column] = pd.to_numeric(frame[column], errors="coerce")
    order = [variation_label(suite.suite, v) for v in values]
    aggregate, wide = aggregate_cells(frame, order)
    write_frame(frame, suite_dir / "cells.csv")
    write_frame(aggregate, suite_dir / "aggregate.csv")
    write_frame(wide, suite_dir / "aggregate_wide.csv")
    failed = int((frame["status"] != "ok").sum())
    logger.info("Ablation finished", extra={"suite": suite.suite, "failed": failed})
    return AblationOutcome(suite_dir, frame, aggregate, failed)
