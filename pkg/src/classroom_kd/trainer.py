# -*- coding: utf-8 -*-
"""
Training loops: mentor pretraining and classroom distillation.

Per distillation batch:

1. forward the student; mentor logits are precomputed once (mentors are frozen)
2. batch weight of every classroom model, then ranks
3. active mentors for the configured mode
4. loss and its gradient w.r.t. the student logits
5. backpropagate into the student only and take an SGD step

Every epoch is evaluated and summarized as an ``EpochLog``.
"""
import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import mlp
from .config import settings
from .datasets import BatchPlan, Dataset, batch_slices
from .errors import InvalidArgumentError, NumericalError
from .mentoring import (
    MentoringResult,
    aver_loss,
    classroom_loss,
    nokd_loss,
    single_kd_loss,
    total_loss,
)
from .mlp import STUDENT_ID, TEACHER_ID, Classroom, ModelParams, ParamGrads
from .models import CLASSROOM_MODES, MentoringConfig, MlpSpec, OptimizerConfig, RankingConfig
from .ranking import (
    ActiveSet,
    ClassroomOutputs,
    RankTable,
    check_rank_order,
    rank_classroom,
    select_active,
    select_all,
)
from .tasks import CLASSIFICATION, Accuracy, Task, predictions

logger = logging.getLogger(__name__)


# =============================================================================
# Optimizer
# =============================================================================


@dataclass(frozen=True)
class OptimizerState:
    """Momentum buffers, one per parameter array (``ModelParams.arrays`` order)."""

    momentum: float
    weight_decay: float
    velocities: tuple[np.ndarray, ...]

    @classmethod
    def for_params(cls, params: ModelParams, config: OptimizerConfig) -> "OptimizerState":
        return cls(
            config.momentum,
            config.weight_decay,
            tuple(np.zeros_like(a) for a in params.arrays()),
        )


def sgd_step(
        params: ModelParams,
        grads: ParamGrads,
        state: OptimizerState,
        lr: float,
        epoch: int | None = None,
        batch: int | None = None,
) -> tuple[ModelParams, OptimizerState]:
    """v <- mu * v + g + wd * theta; theta <- theta - lr * v."""
    arrays = params.arrays()
    grad_arrays = grads.arrays()
    if len(grad_arrays) != len(arrays) or any(
        g.shape != a.shape for g, a in zip(grad_arrays, arrays)
    ):
        raise InvalidArgumentError("gradient shapes do not match parameters")
    if not all(np.all(np.isfinite(g)) for g in grad_arrays):
        raise NumericalError("non-finite gradient", epoch=epoch, batch=batch)

    new_arrays, velocities = [], []
    for theta, g, v in zip(arrays, grad_arrays, state.velocities):
        v = state.momentum * v + g + state.weight_decay * theta
        velocities.append(v)
        new_arrays.append(theta - lr * v)
    if not all(np.all(np.isfinite(a)) for a in new_arrays):
        raise NumericalError("parameters diverged", epoch=epoch, batch=batch)
    new_state = OptimizerState(state.momentum, state.weight_decay, tuple(velocities))
    return ModelParams.from_arrays(params.spec, new_arrays), new_state


def lr_at(epoch: int, config: OptimizerConfig) -> float:
    """
    Constant ``learning_rate`` during warm-up, then reduced by
    ``lr_decay_factor`` (a fraction) at the start of every interval.
    """
    if epoch < 0:
        raise InvalidArgumentError(f"epoch must be >= 0, got {epoch}")
    if epoch < config.warmup_epochs:
        return config.learning_rate
    steps = (epoch - config.warmup_epochs) // config.lr_decay_interval_epochs + 1
    return config.learning_rate * (1.0 - config.lr_decay_factor) ** steps


# =============================================================================
# Results
# =============================================================================


@dataclass(frozen=True)
class ModelEpochStats:
    """Epoch means for one classroom model; mentor-only fields are None for the student."""

    model_id: str
    rank: float | None = None
    weight: float | None = None
    temperature: float | None = None
    active_fraction: float | None = None


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    lr: float
    train: Accuracy
    test: Accuracy
    models: tuple[ModelEpochStats, ...]
    task_loss: float
    distill_loss: float
    total_loss: float
    teacher_above_fraction: float | None = None

    def model(self, model_id: str) -> ModelEpochStats:
        for stats in self.models:
            if stats.model_id == model_id:
                return stats
        raise KeyError(model_id)


@dataclass(frozen=True)
class RunResult:
    params: ModelParams
    logs: tuple[EpochLog, ...]
    final_train: Accuracy
    final_test: Accuracy
    best_epoch: int | None
    best_test: Accuracy
    mode: str
    wall_seconds: float = 0.0
    config_echo: dict = field(default_factory=dict)


# =============================================================================
# Evaluation
# =============================================================================


def evaluate(params: ModelParams, dataset, task: Task = CLASSIFICATION) -> Accuracy:
    """Top-1 (and top-5 with >= 5 classes) accuracy in percent."""
    if len(dataset) == 0:
        raise InvalidArgumentError("cannot evaluate on an empty dataset")
    logits = mlp.forward(params, dataset.features)
    if not np.all(np.isfinite(logits)):
        raise NumericalError("non-finite logits during evaluation")
    return task.evaluate(logits, task.targets(dataset))


def per_class_accuracy(predicted, labels, class_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Accuracy (percent, 0 for absent classes) and sample count per class."""
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=class_count)
    correct = np.bincount(labels[predicted == labels], minlength=class_count)
    accuracy = np.divide(
        100.0 * correct, counts, out=np.zeros(class_count), where=counts > 0
    )
    return accuracy, counts


@dataclass(frozen=True)
class PerClassGain:
    deltas: np.ndarray
    improved: int
    degraded: int
    unchanged: int


def gain_from_accuracies(baseline, distilled) -> PerClassGain:
    baseline = np.asarray(baseline, dtype=np.float64)
    distilled = np.asarray(distilled, dtype=np.float64)
    if baseline.shape != distilled.shape:
        raise InvalidArgumentError(
            f"class count mismatch: {baseline.shape[0]} vs {distilled.shape[0]}"
        )
    deltas = distilled - baseline
    improved = int(np.sum(deltas > 0))
    degraded = int(np.sum(deltas < 0))
    return PerClassGain(deltas, improved, degraded, deltas.size - improved - degraded)


def per_class_gain(
        baseline: ModelParams | RunResult,
        distilled: ModelParams | RunResult,
        dataset: Dataset,
) -> PerClassGain:
    """Per-class accuracy of ``distilled`` minus ``baseline`` on ``dataset``."""
    accuracies = []
    for model in (baseline, distilled):
        params = model.params if isinstance(model, RunResult) else model
        if params.spec.output_dim != dataset.class_count:
            raise InvalidArgumentError(
                f"class count mismatch: model {params.spec.output_dim} vs dataset {dataset.class_count}"
            )
        predicted = predictions(mlp.forward(params, dataset.features))
        accuracies.append(per_class_accuracy(predicted, dataset.labels, dataset.class_count)[0])
    return gain_from_accuracies(*accuracies)


@dataclass(frozen=True)
class GridSearchResult:
    best_temperature: float
    accuracies: dict[float, float]


def temperature_grid_search(
        candidates: Sequence[float],
        runner: Callable[[float], float],
) -> GridSearchResult:
    """
    Run fixed-temperature distillation per candidate; ``runner`` returns the
    final test top-1. Ties go to the smaller temperature.
    """
    if not candidates:
        raise InvalidArgumentError("temperature_grid_search needs at least one candidate")
    accuracies = {}
    for tau in sorted(set(float(c) for c in candidates)):
        accuracies[tau] = float(runner(tau))
        logger.info("Grid search candidate", extra={"temperature": tau, "top1": accuracies[tau]})
    best = None
    for tau, acc in accuracies.items():
        if best is None or acc > accuracies[best]:
            best = tau
    return GridSearchResult(best, accuracies)


# =============================================================================
# Training loop
# =============================================================================


@dataclass
class _EpochAccumulator:
    """Running sums over the batches of one epoch."""

    model_ids: list[str]
    batches: int = 0
    task_loss: float = 0.0
    distill_loss: float = 0.0
    total_loss: float = 0.0
    teacher_above: int = 0
    ranked: int = 0
    rank_sum: dict[str, float] = field(default_factory=dict)
    weight_sum: dict[str, float] = field(default_factory=dict)
    active: dict[str, int] = field(default_factory=dict)
    temperature_sum: dict[str, float] = field(default_factory=dict)

    def add(self, result: MentoringResult, ranks: RankTable | None, active: ActiveSet | None):
        self.batches += 1
        b = result.breakdown
        self.task_loss += b.task_loss
        self.distill_loss += b.distill_sum()
        self.total_loss += result.value
        if ranks is not None:
            self.ranked += 1
            for model_id in self.model_ids:
                self.rank_sum[model_id] = self.rank_sum.get(model_id, 0.0) + ranks.ranks[model_id]
                self.weight_sum[model_id] = self.weight_sum.get(model_id, 0.0) + ranks.weights[model_id]
            if ranks.ranks[TEACHER_ID] > ranks.ranks[STUDENT_ID]:
                self.teacher_above += 1
        if active is not None:
            temperatures = b.temperatures()
            for model_id in active.ids:
                self.active[model_id] = self.active.get(model_id, 0) + 1
                self.temperature_sum[model_id] = (
                    self.temperature_sum.get(model_id, 0.0) + temperatures[model_id]
                )

    def model_stats(self) -> tuple[ModelEpochStats, ...]:
        if not self.ranked:
            return tuple(ModelEpochStats(m) for m in self.model_ids)
        stats = []
        for model_id in self.model_ids:
            rank = self.rank_sum[model_id] / self.ranked
            weight = self.weight_sum[model_id] / self.ranked
            if model_id == STUDENT_ID:
                stats.append(ModelEpochStats(model_id, rank, weight))
                continue
            hits = self.active.get(model_id, 0)
            temperature = self.temperature_sum[model_id] / hits if hits else None
            stats.append(ModelEpochStats(model_id, rank, weight, temperature, hits / self.batches))
        return tuple(stats)


BatchLossFn = Callable[
    [np.ndarray, np.ndarray, np.ndarray],
    tuple[MentoringResult, RankTable | None, ActiveSet | None],
]


def _fit(
        params: ModelParams,
        train,
        test,
        optimizer: OptimizerConfig,
        task: Task,
        batch_loss: BatchLossFn,
        model_ids: list[str],
        mode: str,
) -> RunResult:
    """Shared epoch loop; ``batch_loss(indices, logits, targets)`` assembles the loss."""
    started = time.monotonic()
    state = OptimizerState.for_params(params, optimizer)
    train_targets = task.targets(train)
    logs: list[EpochLog] = []

    for epoch in range(optimizer.total_epochs):
        lr = lr_at(epoch, optimizer)
        acc = _EpochAccumulator(model_ids)
        plan = BatchPlan(optimizer.batch_size, optimizer.seed, epoch)
        for batch, indices in enumerate(batch_slices(len(train), plan)):
            features = train.features[indices]
            targets = train_targets[indices]
            logits, cache = mlp.forward_with_cache(params, features)
            if not np.all(np.isfinite(logits)):
                raise NumericalError("non-finite logits", epoch=epoch, batch=batch)
            result, ranks, active = batch_loss(indices, logits, targets)
            if not np.isfinite(result.value):
                raise NumericalError("non-finite loss", epoch=epoch, batch=batch)
            if result.value > settings.MAX_LOSS:
                raise NumericalError(
                    f"loss {result.value:.3g} exceeds CKD_MAX_LOSS={settings.MAX_LOSS:g}, training diverged",
                    epoch=epoch,
                    batch=batch,
                )
            grads = mlp.backward_from_cache(params, cache, result.grad)
            params, state = sgd_step(params, grads, state, lr, epoch=epoch, batch=batch)
            acc.add(result, ranks, active)
            logger.debug(
                "Batch done",
                extra={"epoch": epoch, "batch": batch, "loss": result.value},
            )

        log = EpochLog(
            epoch=epoch,
            lr=lr,
            train=evaluate(params, train, task),
            test=evaluate(params, test, task),
            models=acc.model_stats(),
            task_loss=acc.task_loss / acc.batches,
            distill_loss=acc.distill_loss / acc.batches,
            total_loss=acc.total_loss / acc.batches,
            teacher_above_fraction=acc.teacher_above / acc.ranked if acc.ranked else None,
        )
        logs.append(log)
        logger.info(
            "Epoch complete",
            extra={
                "epoch": epoch,
                "lr": lr,
                "train_top1": log.train.top1,
                "test_top1": log.test.top1,
                "active_mentors": [
                    m.model_id for m in log.models if m.active_fraction
                ],
            },
        )

    final_train = evaluate(params, train, task)
    final_test = evaluate(params, test, task)
    if logs:
        best = max(logs, key=lambda entry: (entry.test.top1, -entry.epoch))
        best_epoch, best_test = best.epoch, best.test
    else:
        best_epoch, best_test = None, final_test
    return RunResult(
        params=params,
        logs=tuple(logs),
        final_train=final_train,
        final_test=final_test,
        best_epoch=best_epoch,
        best_test=best_test,
        mode=mode,
        wall_seconds=time.monotonic() - started,
        config_echo={"optimizer": optimizer.model_dump(mode="json")},
    )


def pretrain_mentor(
        spec: MlpSpec,
        train,
        test,
        optimizer: OptimizerConfig,
        *,
        init_seed: int | None = None,
        task: Task = CLASSIFICATION,
) -> RunResult:
    """
    Plain task-loss training from a fresh initialization.

    ``init_seed`` defaults to ``optimizer.seed``; the returned params are
    meant to be frozen.
    """
    seed = optimizer.seed if init_seed is None else init_seed
    params = mlp.init_params(spec, seed)
    logger.info(
        "Pretraining started",
        extra={"widths": list(spec.layer_widths), "seed": seed, "epochs": optimizer.total_epochs},
    )
    result = train_task_only(params, train, test, optimizer, task=task)
    logger.info("Pretraining finished", extra={"test_top1": result.final_test.top1})
    return result


def train_task_only(
        params: ModelParams,
        train,
        test,
        optimizer: OptimizerConfig,
        *,
        task: Task = CLASSIFICATION,
) -> RunResult:
    def batch_loss(indices, logits, targets):
        return nokd_loss(logits, targets, task_fn=task.task_loss), None, None

    return _fit(params, train, test, optimizer, task, batch_loss, [STUDENT_ID], "nokd")


def distill_student(
        classroom: Classroom,
        train,
        test,
        mentoring: MentoringConfig,
        optimizer: OptimizerConfig,
        ranking: RankingConfig = RankingConfig(),
        *,
        task: Task = CLASSIFICATION,
) -> RunResult:
    """
    Train ``classroom.student`` against the frozen mentors.

    Modes: ``classroom-adaptive`` (filtering + adaptive temperature),
    ``classroom-fixed-tau`` (filtering only), ``classroom-no-filter``
    (adaptive temperature, every mentor), ``aver``, ``single-kd`` and ``nokd``.
    """
    mode = mentoring.mode
    logger.info(
        "Distillation started",
        extra={
            "mode": mode,
            "ranking": ranking.method,
            "peers": len(classroom.peers),
            "epochs": optimizer.total_epochs,
        },
    )
    if mode == "nokd":
        result = train_task_only(classroom.student, train, test, optimizer, task=task)
        logger.info("Distillation finished", extra={"test_top1": result.final_test.top1})
        return result

    mentors = classroom.mentors()
    # frozen: logits over the whole train set are computed once
    mentor_logits = {m: mlp.forward(p, train.features) for m, p in mentors.items()}
    scale = ranking.resolve_scale(len(classroom.peers))
    model_ids = classroom.model_ids
    fns = {"task_fn": task.task_loss, "distill_fn": task.distill_loss}

    def batch_loss(indices, logits, targets):
        outputs = ClassroomOutputs(
            {STUDENT_ID: logits, **{m: mentor_logits[m][indices] for m in mentors}}
        )
        weights = {m: task.batch_weight(outputs.logits[m], targets) for m in model_ids}
        if sum(weights.values()) > 0:
            ranks = rank_classroom(weights, ranking, len(classroom.peers))
            check_rank_order(ranks)
        else:
            # nobody scores: every model ties
            ranks = RankTable(weights, {m: scale / len(model_ids) for m in model_ids}, scale)

        if mode in CLASSROOM_MODES:
            active = select_all(ranks) if mode == "classroom-no-filter" else select_active(ranks)
            result = classroom_loss(logits, outputs, ranks, active, targets, mentoring, **fns)
            result = total_loss(
                logits, outputs.logits[TEACHER_ID], result, targets, mentoring, **fns
            )
            return result, ranks, active
        if mode == "aver":
            mentor_out = {m: outputs.logits[m] for m in mentors}
            result = aver_loss(logits, mentor_out, targets, mentoring.base_temperature, **fns)
            return result, ranks, ActiveSet(STUDENT_ID, {m: 0.0 for m in mentor_out})
        result = single_kd_loss(
            logits, outputs.logits[TEACHER_ID], targets, mentoring.base_temperature, **fns
        )
        return result, ranks, ActiveSet(STUDENT_ID, {TEACHER_ID: 0.0})

    result = _fit(classroom.student, train, test, optimizer, task, batch_loss, model_ids, mode)
    logger.info("Distillation finished", extra={"mode": mode, "test_top1": result.final_test.top1})
    return result
