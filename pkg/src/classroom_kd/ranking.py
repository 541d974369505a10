# -*- coding: utf-8 -*-
"""
Knowledge filtering: per-batch model weights, rank normalization and the
selection of mentors that currently outrank the student.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import numeric
from .errors import InvalidArgumentError, NumericalError
from .mlp import STUDENT_ID
from .models import RankingConfig

logger = logging.getLogger(__name__)

METHOD_B_STEP = 0.1


@dataclass(frozen=True)
class ClassroomOutputs:
    """Logits of every classroom model for one batch, in classroom order."""

    logits: dict[str, np.ndarray]
    student_id: str = STUDENT_ID

    def __post_init__(self):
        if self.student_id not in self.logits:
            raise InvalidArgumentError(f"student '{self.student_id}' missing from outputs")
        shapes = {k: np.shape(v) for k, v in self.logits.items()}
        if len(set(shapes.values())) != 1:
            raise InvalidArgumentError(f"classroom logits differ in shape: {shapes}")

    @property
    def model_ids(self) -> list[str]:
        return list(self.logits)

    @property
    def mentor_ids(self) -> list[str]:
        return [k for k in self.logits if k != self.student_id]

    @property
    def student(self) -> np.ndarray:
        return self.logits[self.student_id]


@dataclass(frozen=True)
class RankTable:
    """Batch weight and rank per model, plus the scale lambda."""

    weights: dict[str, float]
    ranks: dict[str, float]
    scale: float

    def rank_sum(self) -> float:
        return float(sum(self.ranks.values()))


@dataclass(frozen=True)
class ActiveSet:
    """Mentors allowed to teach this batch, each with its rank gap."""

    student_id: str
    gaps: dict[str, float] = field(default_factory=dict)

    @property
    def ids(self) -> list[str]:
        return list(self.gaps)

    def __contains__(self, model_id: str) -> bool:
        return model_id in self.gaps

    def __len__(self) -> int:
        return len(self.gaps)


def correct_class_prob(logits, labels) -> np.ndarray:
    """Per-sample softmax probability of the true class, exp(-CE_k)."""
    logits = numeric.as_matrix(logits, "logits")
    labels = numeric.as_labels(labels, logits.shape[0], logits.shape[1])
    logp = numeric.log_softmax(logits)
    return np.exp(logp[np.arange(logits.shape[0]), labels])


def batch_weight(p_gt) -> float:
    """Arithmetic mean of the true-class probabilities over the batch."""
    p_gt = np.asarray(p_gt, dtype=np.float64)
    if p_gt.ndim != 1 or p_gt.size == 0:
        raise InvalidArgumentError("batch_weight needs a non-empty 1-D vector")
    return float(p_gt.mean())


def classroom_weights(outputs: ClassroomOutputs, labels) -> dict[str, float]:
    """Batch weight of every classroom model, classroom order."""
    return {
        model_id: batch_weight(correct_class_prob(logits, labels))
        for model_id, logits in outputs.logits.items()
    }


def _check_weights(weights: dict[str, float], scale: float) -> None:
    if not weights:
        raise InvalidArgumentError("no models to rank")
    if not scale > 0:
        raise InvalidArgumentError(f"scale must be > 0, got {scale}")
    for model_id, w in weights.items():
        if not np.isfinite(w) or w < 0:
            raise InvalidArgumentError(f"weight of '{model_id}' must be finite and >= 0, got {w}")
    if sum(weights.values()) <= 0:
        raise InvalidArgumentError("zero total weight")


def rank_scores(weights: dict[str, float], scale: float) -> RankTable:
    """Method A: r = scale * w / sum(w); ranks sum to ``scale``."""
    _check_weights(weights, scale)
    total = float(sum(weights.values()))
    ranks = {k: scale * w / total for k, w in weights.items()}
    return RankTable(dict(weights), ranks, float(scale))


def rank_scores_method_b(weights: dict[str, float], scale: float = METHOD_B_STEP) -> RankTable:
    """
    Method B: uniformly spaced ranks scale * 1, scale * 2, ... by ascending
    weight. Equal weights are ordered by model id.
    """
    _check_weights(weights, scale)
    order = sorted(weights, key=lambda k: (weights[k], k))
    ranks = {k: scale * (order.index(k) + 1) for k in weights}
    return RankTable(dict(weights), ranks, float(scale))


def rank_classroom(weights: dict[str, float], config: RankingConfig, peer_count: int) -> RankTable:
    scale = config.resolve_scale(peer_count)
    if config.method == "method-b":
        return rank_scores_method_b(weights, scale)
    return rank_scores(weights, scale)


def select_active(rank_table: RankTable, student_id: str = STUDENT_ID) -> ActiveSet:
    """Mentors ranked strictly above the student, with gap (r_m - r_s) / r_m."""
    if student_id not in rank_table.ranks:
        raise InvalidArgumentError(f"student '{student_id}' missing from rank table")
    r_s = rank_table.ranks[student_id]
    gaps = {
        model_id: (r_m - r_s) / r_m
        for model_id, r_m in rank_table.ranks.items()
        if model_id != student_id and r_m > r_s
    }
    return ActiveSet(student_id, gaps)


def select_all(rank_table: RankTable, student_id: str = STUDENT_ID) -> ActiveSet:
    """
    Every mentor, gap |r_m - r_s| / r_m capped at 1 (0 for a zero-ranked
    mentor). Used when mentoring runs without filtering.
    """
    if student_id not in rank_table.ranks:
        raise InvalidArgumentError(f"student '{student_id}' missing from rank table")
    r_s = rank_table.ranks[student_id]
    gaps = {}
    for model_id, r_m in rank_table.ranks.items():
        if model_id == student_id:
            continue
        gaps[model_id] = min(abs(r_m - r_s) / r_m, 1.0) if r_m > 0 else 0.0
    return ActiveSet(student_id, gaps)


def check_rank_order(rank_table: RankTable) -> None:
    """A heavier model never ranks below a lighter one."""
    items = list(rank_table.weights)
    for a in items:
        for b in items:
            wa, wb = rank_table.weights[a], rank_table.weights[b]
            if wa > wb and rank_table.ranks[a] < rank_table.ranks[b]:
                raise NumericalError(
                    f"rank order violates weight order: {a} (w={wa}) vs {b} (w={wb})"
                )
