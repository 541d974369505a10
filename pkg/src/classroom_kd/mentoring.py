# -*- coding: utf-8 -*-
"""
Mentoring: per-mentor adaptive temperature and the composite rank-weighted
loss, plus the multi-mentor average, single-teacher and no-distillation
baselines.

Every loss returns a ``MentoringResult``: the value with its gradient
w.r.t. the student logits and an auditable ``LossBreakdown``. Mentor terms
are summed in classroom order so results are bit-reproducible.
"""
from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np

from . import numeric
from .errors import InvalidArgumentError
from .mlp import TEACHER_ID
from .models import CLASSROOM_MODES, MentoringConfig
from .numeric import LossWithGrad
from .ranking import ActiveSet, ClassroomOutputs, RankTable

TaskLossFn = Callable[[np.ndarray, np.ndarray], LossWithGrad]
DistillFn = Callable[[np.ndarray, np.ndarray, float], LossWithGrad]


def task_cross_entropy(logits, labels) -> LossWithGrad:
    """Mean cross-entropy with gradient (classification task loss)."""
    return numeric.cross_entropy(logits, labels)[1]


@dataclass(frozen=True)
class MentorTerm:
    model_id: str
    gamma: float
    temperature: float
    distill_loss: float


@dataclass(frozen=True)
class LossBreakdown:
    """Parts of one loss evaluation; ``recompose()`` rebuilds ``total``."""

    task_loss: float
    alpha: float
    beta: float
    mentors: tuple[MentorTerm, ...] = ()
    delta: float = 0.0
    # unscaled L_task + KL(teacher, tau=1); multiplied by ``delta`` in the total
    delta_term: float = 0.0
    total: float = 0.0

    def distill_sum(self) -> float:
        acc = 0.0
        for term in self.mentors:
            acc += term.gamma * term.distill_loss
        return acc

    def recompose(self) -> float:
        classroom = self.alpha * self.task_loss + self.beta * self.distill_sum()
        if self.delta == 0:
            return classroom
        return self.delta * self.delta_term + classroom

    def temperatures(self) -> dict[str, float]:
        return {t.model_id: t.temperature for t in self.mentors}


@dataclass(frozen=True)
class MentoringResult:
    loss: LossWithGrad
    breakdown: LossBreakdown

    @property
    def value(self) -> float:
        return self.loss.value

    @property
    def grad(self) -> np.ndarray:
        return self.loss.grad


def adapt_temperature(delta_r: float, base_temperature: float) -> float:
    """tau_m = 1 + delta_r * tau; larger rank gaps soften the mentor more."""
    if not delta_r >= 0:
        raise InvalidArgumentError(f"rank gap must be >= 0, got {delta_r}")
    if not base_temperature > 0:
        raise InvalidArgumentError(f"base temperature must be > 0, got {base_temperature}")
    return 1.0 + delta_r * base_temperature


def _weighted_distillation(
        student: np.ndarray,
        mentor_logits: dict[str, np.ndarray],
        gammas: dict[str, float],
        temperatures: dict[str, float],
        distill_fn: DistillFn,
) -> tuple[float, np.ndarray, tuple[MentorTerm, ...]]:
    """sum_m gamma_m * L_distill(m, s; tau_m) and its gradient, fixed order."""
    value = 0.0
    grad = np.zeros_like(student)
    terms = []
    for model_id, logits in mentor_logits.items():
        d = distill_fn(logits, student, temperatures[model_id])
        value += gammas[model_id] * d.value
        grad = grad + gammas[model_id] * d.grad
        terms.append(MentorTerm(model_id, gammas[model_id], temperatures[model_id], d.value))
    return value, grad, tuple(terms)


def classroom_loss(
        student_logits,
        outputs: ClassroomOutputs,
        rank_table: RankTable,
        active_set: ActiveSet,
        labels,
        config: MentoringConfig,
        *,
        task_fn: TaskLossFn = task_cross_entropy,
        distill_fn: DistillFn = numeric.kl_distill,
) -> MentoringResult:
    """
    alpha * L_task + beta * sum over active mentors of gamma_m * L_distill,
    with alpha the student's rank and gamma_m the mentor's rank.

    In ``classroom-fixed-tau`` every active mentor uses the base temperature;
    otherwise tau_m comes from the mentor's rank gap.
    """
    if config.mode not in CLASSROOM_MODES:
        raise InvalidArgumentError(f"classroom_loss does not handle mode '{config.mode}'")
    student = numeric.as_matrix(student_logits, "student logits")
    missing = [m for m in active_set.ids if m not in outputs.logits]
    if missing:
        raise InvalidArgumentError(f"active mentors missing from outputs: {missing}")

    task = task_fn(student, labels)
    alpha = rank_table.ranks[active_set.student_id]
    if config.mode == "classroom-fixed-tau":
        temperatures = {m: config.base_temperature for m in active_set.ids}
    else:
        temperatures = {
            m: adapt_temperature(gap, config.base_temperature)
            for m, gap in active_set.gaps.items()
        }
    mentors = {m: outputs.logits[m] for m in outputs.model_ids if m in active_set}
    gammas = {m: rank_table.ranks[m] for m in mentors}
    distill_value, distill_grad, terms = _weighted_distillation(
        student, mentors, gammas, temperatures, distill_fn
    )

    value = alpha * task.value + config.beta * distill_value
    grad = alpha * task.grad + config.beta * distill_grad
    breakdown = LossBreakdown(
        task_loss=task.value, alpha=alpha, beta=config.beta, mentors=terms, total=value
    )
    return MentoringResult(LossWithGrad(value, grad), breakdown)


def total_loss(
        student_logits,
        teacher_logits,
        classroom_result: MentoringResult,
        labels,
        config: MentoringConfig,
        *,
        task_fn: TaskLossFn = task_cross_entropy,
        distill_fn: DistillFn = numeric.kl_distill,
) -> MentoringResult:
    """delta * (L_task + L_distill(teacher, student; 1)) + classroom loss."""
    if config.delta == 0:
        return classroom_result
    if teacher_logits is None:
        raise InvalidArgumentError("delta > 0 requires teacher logits")
    student = numeric.as_matrix(student_logits, "student logits")
    task = task_fn(student, labels)
    kd = distill_fn(teacher_logits, student, 1.0)
    delta_term = task.value + kd.value
    value = config.delta * delta_term + classroom_result.value
    grad = config.delta * (task.grad + kd.grad) + classroom_result.grad
    breakdown = replace(
        classroom_result.breakdown, delta=config.delta, delta_term=delta_term, total=value
    )
    return MentoringResult(LossWithGrad(value, grad), breakdown)


def aver_loss(
        student_logits,
        mentor_outputs: dict[str, np.ndarray],
        labels,
        temperature: float,
        *,
        task_fn: TaskLossFn = task_cross_entropy,
        distill_fn: DistillFn = numeric.kl_distill,
) -> MentoringResult:
    """L_task + sum over all mentors of L_distill at one temperature, unit weights."""
    if not mentor_outputs:
        raise InvalidArgumentError("aver_loss needs at least one mentor")
    student = numeric.as_matrix(student_logits, "student logits")
    task = task_fn(student, labels)
    distill_value, distill_grad, terms = _weighted_distillation(
        student,
        mentor_outputs,
        {m: 1.0 for m in mentor_outputs},
        {m: temperature for m in mentor_outputs},
        distill_fn,
    )
    value = task.value + distill_value
    breakdown = LossBreakdown(
        task_loss=task.value, alpha=1.0, beta=1.0, mentors=terms, total=value
    )
    return MentoringResult(LossWithGrad(value, task.grad + distill_grad), breakdown)


def single_kd_loss(
        student_logits,
        teacher_logits,
        labels,
        temperature: float,
        *,
        task_fn: TaskLossFn = task_cross_entropy,
        distill_fn: DistillFn = numeric.kl_distill,
) -> MentoringResult:
    """L_task + L_distill(teacher, student; tau)."""
    return aver_loss(
        student_logits,
        {TEACHER_ID: teacher_logits},
        labels,
        temperature,
        task_fn=task_fn,
        distill_fn=distill_fn,
    )


def nokd_loss(student_logits, labels, *, task_fn: TaskLossFn = task_cross_entropy) -> MentoringResult:
    task = task_fn(numeric.as_matrix(student_logits, "student logits"), labels)
    breakdown = LossBreakdown(task_loss=task.value, alpha=1.0, beta=0.0, total=task.value)
    return MentoringResult(task, breakdown)
