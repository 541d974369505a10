# -*- coding: utf-8 -*-
"""
Structured-output distillation on a synthetic keypoint task.

A coordinate-classification head predicts, per joint, one distribution over
x bins and one over y bins. The flat model output of width K * (Dx + Dy) is
viewed as (N, K, Dx + Dy) and split on the last axis into x and y logits.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import numeric
from .config import settings
from .errors import InvalidArgumentError
from .models import POSE_FEATURE_DIM
from .numeric import LossWithGrad
from .tasks import Accuracy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimccOutput:
    """Per-joint coordinate-bin logits: x (N, K, Dx) and y (N, K, Dy)."""

    x_logits: np.ndarray
    y_logits: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x_logits, dtype=np.float64)
        y = np.asarray(self.y_logits, dtype=np.float64)
        if x.ndim != 3 or y.ndim != 3 or x.shape[:2] != y.shape[:2]:
            raise InvalidArgumentError(f"SimCC logits must be (N, K, D), got {x.shape} / {y.shape}")
        if x.shape[1] < 1 or x.shape[2] < 2 or y.shape[2] < 2:
            raise InvalidArgumentError("SimCC needs K >= 1 and at least 2 bins per axis")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("SimCC logits contain non-finite values")
        object.__setattr__(self, "x_logits", x)
        object.__setattr__(self, "y_logits", y)

    @property
    def joints(self) -> int:
        return self.x_logits.shape[1]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        n, k, dx = self.x_logits.shape
        return n, k, dx, self.y_logits.shape[2]

    def to_flat(self) -> np.ndarray:
        n, k, _, _ = self.shape
        return np.concatenate([self.x_logits, self.y_logits], axis=2).reshape(n, -1)


@dataclass(frozen=True)
class HeatmapOutput:
    """Per-joint 2-D logit grids (N, K, H, W)."""

    heatmaps: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.heatmaps, dtype=np.float64)
        if h.ndim != 4 or h.shape[1] < 1:
            raise InvalidArgumentError(f"heatmaps must be (N, K, H, W), got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise InvalidArgumentError("heatmaps contain non-finite values")
        object.__setattr__(self, "heatmaps", h)


@dataclass(frozen=True)
class KeypointGroundTruth:
    """True (x, y) bin index per sample and joint, plus visibility."""

    coords: np.ndarray
    visible: np.ndarray
    bins_x: int
    bins_y: int

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.int64)
        visible = np.asarray(self.visible, dtype=bool)
        if coords.ndim != 3 or coords.shape[2] != 2 or visible.shape != coords.shape[:2]:
            raise InvalidArgumentError(
                f"keypoints must be (N, K, 2) with (N, K) visibility, got {coords.shape} / {visible.shape}"
            )
        if coords.size and (
            coords.min() < 0
            or coords[..., 0].max() >= self.bins_x
            or coords[..., 1].max() >= self.bins_y
        ):
            raise InvalidArgumentError("keypoint bin index out of range")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "visible", visible)


@dataclass(frozen=True)
class SimccHead:
    """Maps flat model outputs to ``SimccOutput`` and back."""

    joints: int
    bins_x: int
    bins_y: int

    @property
    def width(self) -> int:
        return self.joints * (self.bins_x + self.bins_y)

    def split(self, flat) -> SimccOutput:
        flat = numeric.as_matrix(flat, "SimCC output")
        if flat.shape[1] != self.width:
            raise InvalidArgumentError(f"SimCC output width {flat.shape[1]} != {self.width}")
        grid = flat.reshape(flat.shape[0], self.joints, self.bins_x + self.bins_y)
        return SimccOutput(grid[:, :, : self.bins_x], grid[:, :, self.bins_x:])


@dataclass(frozen=True)
class PoseDataset:
    """Features (N x 3) and keypoint targets; visibility is all-true here."""

    features: np.ndarray
    keypoints: KeypointGroundTruth

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != self.keypoints.coords.shape[0]:
            raise InvalidArgumentError("features and keypoints disagree on sample count")
        features.setflags(write=False)
        object.__setattr__(self, "features", features)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def joints(self) -> int:
        return self.keypoints.coords.shape[1]

    def subset(self, indices: np.ndarray) -> "PoseDataset":
        kp = self.keypoints
        return PoseDataset(
            self.features[indices],
            KeypointGroundTruth(kp.coords[indices], kp.visible[indices], kp.bins_x, kp.bins_y),
        )

    def split(self, train_fraction: float, seed: int) -> tuple["PoseDataset", "PoseDataset"]:
        if not 0 < train_fraction < 1:
            raise InvalidArgumentError(f"train_fraction must lie in (0, 1), got {train_fraction}")
        order = np.random.default_rng(seed).permutation(len(self))
        cut = int(math.floor(train_fraction * len(self) + 0.5))
        if cut == 0 or cut == len(self):
            raise InvalidArgumentError("split leaves an empty train or test set")
        return self.subset(np.sort(order[:cut])), self.subset(np.sort(order[cut:]))


def generate_toy_pose(samples: int, joints: int, bins: int, noise: float, seed: int) -> PoseDataset:
    """
    Rigid star of ``joints`` points placed by features (cx, cy, angle).

    Joint j sits at radius 0.35 (0.25 for odd j) around the center, at angle
    pi * angle + 2 pi j / K; positions in [-1, 1] are binned uniformly and
    clipped to the grid.
    """
    for name, value in (("samples", samples), ("joints", joints)):
        if value < 1:
            raise InvalidArgumentError(f"{name} must be >= 1, got {value}")
    if bins < 2 or noise < 0:
        raise InvalidArgumentError("bins must be >= 2 and noise >= 0")
    rng = np.random.default_rng(seed)
    features = rng.uniform(-1.0, 1.0, size=(samples, POSE_FEATURE_DIM))
    center = 0.5 * features[:, :2]
    radius = np.where(np.arange(joints) % 2 == 0, 0.35, 0.25)
    angle = math.pi * features[:, 2:3] + 2 * math.pi * np.arange(joints) / joints
    positions = np.stack(
        [center[:, 0:1] + radius * np.cos(angle), center[:, 1:2] + radius * np.sin(angle)],
        axis=2,
    )
    positions = positions + rng.normal(0.0, noise, size=positions.shape)
    coords = np.clip(np.floor((positions + 1.0) / 2.0 * bins), 0, bins - 1).astype(np.int64)
    keypoints = KeypointGroundTruth(coords, np.ones((samples, joints), dtype=bool), bins, bins)
    return PoseDataset(features, keypoints)


def decode_keypoints(output: SimccOutput) -> np.ndarray:
    """Argmax bin per axis (lowest index on ties), shape (N, K, 2)."""
    return np.stack(
        [np.argmax(output.x_logits, axis=2), np.argmax(output.y_logits, axis=2)], axis=2
    )


def pck_weight(predicted, ground_truth: KeypointGroundTruth, threshold: float) -> float:
    """
    Fraction of visible joints predicted within ``threshold`` times the
    bin-grid diagonal of the true bin.
    """
    if not threshold > 0:
        raise InvalidArgumentError(f"threshold must be > 0, got {threshold}")
    predicted = np.asarray(predicted, dtype=np.float64)
    if predicted.shape != ground_truth.coords.shape:
        raise InvalidArgumentError(
            f"predicted keypoints {predicted.shape} vs ground truth {ground_truth.coords.shape}"
        )
    visible = ground_truth.visible
    if not visible.any():
        raise InvalidArgumentError("no visible joints")
    diagonal = math.hypot(ground_truth.bins_x, ground_truth.bins_y)
    distance = np.linalg.norm(predicted - ground_truth.coords, axis=2)
    hits = (distance <= threshold * diagonal) & visible
    return float(hits.sum() / visible.sum())


def _check_same(a: tuple, b: tuple, what: str) -> None:
    if a != b:
        raise InvalidArgumentError(f"{what}: shape mismatch {a} vs {b}")


def simcc_distill_loss(mentor: SimccOutput, student: SimccOutput, temperature: float) -> LossWithGrad:
    """
    (KL_x + KL_y) / K with each axis viewed as (N * K) rows of bins.

    The gradient is returned in the flat head layout (see ``SimccOutput.to_flat``).
    """
    _check_same(mentor.shape, student.shape, "simcc_distill_loss")
    n, k, dx, dy = student.shape
    lx = numeric.kl_distill(
        mentor.x_logits.reshape(n * k, dx), student.x_logits.reshape(n * k, dx), temperature
    )
    ly = numeric.kl_distill(
        mentor.y_logits.reshape(n * k, dy), student.y_logits.reshape(n * k, dy), temperature
    )
    grad = SimccOutput(lx.grad.reshape(n, k, dx) / k, ly.grad.reshape(n, k, dy) / k)
    return LossWithGrad((lx.value + ly.value) / k, grad.to_flat())


def heatmap_distill_loss(mentor: HeatmapOutput, student: HeatmapOutput, temperature: float) -> LossWithGrad:
    """Per joint, KL over the flattened H x W grid; summed over joints, divided by K."""
    _check_same(mentor.heatmaps.shape, student.heatmaps.shape, "heatmap_distill_loss")
    n, k, h, w = student.heatmaps.shape
    value = 0.0
    grad = np.zeros_like(student.heatmaps)
    for joint in range(k):
        term = numeric.kl_distill(
            mentor.heatmaps[:, joint].reshape(n, h * w),
            student.heatmaps[:, joint].reshape(n, h * w),
            temperature,
        )
        value += term.value
        grad[:, joint] = term.grad.reshape(n, h, w) / k
    return LossWithGrad(value / k, grad)


def simcc_task_loss(output: SimccOutput, ground_truth: KeypointGroundTruth) -> LossWithGrad:
    """Bin cross-entropy averaged over samples and joints, summed over both axes."""
    n, k, dx, dy = output.shape
    _check_same(ground_truth.coords.shape, (n, k, 2), "simcc_task_loss")
    _, cx = numeric.cross_entropy(output.x_logits.reshape(n * k, dx), ground_truth.coords[..., 0].ravel())
    _, cy = numeric.cross_entropy(output.y_logits.reshape(n * k, dy), ground_truth.coords[..., 1].ravel())
    grad = SimccOutput(cx.grad.reshape(n, k, dx), cy.grad.reshape(n, k, dy))
    return LossWithGrad(cx.value + cy.value, grad.to_flat())


class SimccPoseTask:
    """Task plug-in: bin cross-entropy, SimCC KL, PCK batch weight, PCK score."""

    name = "pose"

    def __init__(self, joints: int, bins: int, threshold: float | None = None):
        self.head = SimccHead(joints, bins, bins)
        self.threshold = settings.PCK_THRESHOLD if threshold is None else threshold

    def _truth(self, targets) -> KeypointGroundTruth:
        coords = np.asarray(targets)
        return KeypointGroundTruth(
            coords, np.ones(coords.shape[:2], dtype=bool), self.head.bins_x, self.head.bins_y
        )

    def targets(self, dataset: PoseDataset) -> np.ndarray:
        return dataset.keypoints.coords

    def task_loss(self, logits, targets) -> LossWithGrad:
        return simcc_task_loss(self.head.split(logits), self._truth(targets))

    def distill_loss(self, mentor_logits, student_logits, temperature) -> LossWithGrad:
        return simcc_distill_loss(
            self.head.split(mentor_logits), self.head.split(student_logits), temperature
        )

    def batch_weight(self, logits, targets) -> float:
        predicted = decode_keypoints(self.head.split(logits))
        return pck_weight(predicted, self._truth(targets), self.threshold)

    def evaluate(self, logits, targets) -> Accuracy:
        return Accuracy(100.0 * self.batch_weight(logits, targets))
