# -*- coding: utf-8 -*-
"""
Task plug-ins for the trainer.

A task supplies the four things the classroom pipeline needs from the
output space: the task loss, the distillation loss, the batch weight that
feeds ranking, and the evaluation score.
"""
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from . import numeric
from .numeric import LossWithGrad
from .ranking import batch_weight, correct_class_prob

TOP_K = 5


@dataclass(frozen=True)
class Accuracy:
    """Percentages; ``top5`` is None below five classes (and for pose)."""

    top1: float
    top5: float | None = None


@runtime_checkable
class Task(Protocol):
    name: str

    def targets(self, dataset) -> np.ndarray: ...

    def task_loss(self, logits: np.ndarray, targets: np.ndarray) -> LossWithGrad: ...

    def distill_loss(
            self, mentor_logits: np.ndarray, student_logits: np.ndarray, temperature: float
    ) -> LossWithGrad: ...

    def batch_weight(self, logits: np.ndarray, targets: np.ndarray) -> float: ...

    def evaluate(self, logits: np.ndarray, targets: np.ndarray) -> Accuracy: ...


def predictions(logits) -> np.ndarray:
    """Argmax per row; ties go to the lowest class index."""
    return np.argmax(numeric.as_matrix(logits, "logits"), axis=1)


def top_k_hits(logits, labels, k: int = TOP_K) -> np.ndarray:
    """Whether each label is among the k largest logits (stable order on ties)."""
    logits = numeric.as_matrix(logits, "logits")
    order = np.argsort(-logits, axis=1, kind="stable")[:, :k]
    return np.any(order == np.asarray(labels)[:, None], axis=1)


def accuracy_from_logits(logits, labels) -> Accuracy:
    logits = numeric.as_matrix(logits, "logits")
    labels = numeric.as_labels(labels, logits.shape[0], logits.shape[1])
    top1 = 100.0 * float(np.mean(predictions(logits) == labels))
    top5 = None
    if logits.shape[1] >= TOP_K:
        top5 = 100.0 * float(np.mean(top_k_hits(logits, labels)))
    return Accuracy(top1, top5)


class ClassificationTask:
    """Cross-entropy, temperature-scaled KL, mean true-class probability, top-1."""

    name = "classification"

    def targets(self, dataset) -> np.ndarray:
        return dataset.labels

    def task_loss(self, logits, targets) -> LossWithGrad:
        return numeric.cross_entropy(logits, targets)[1]

    def distill_loss(self, mentor_logits, student_logits, temperature) -> LossWithGrad:
        return numeric.kl_distill(mentor_logits, student_logits, temperature)

    def batch_weight(self, logits, targets) -> float:
        return batch_weight(correct_class_prob(logits, targets))

    def evaluate(self, logits, targets) -> Accuracy:
        return accuracy_from_logits(logits, targets)


CLASSIFICATION = ClassificationTask()
