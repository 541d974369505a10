# -*- coding: utf-8 -*-
"""
Deterministic synthetic datasets, a strict CSV loader, stratified splitting
and seeded batch iteration.

Every generator is a pure function of its arguments (seed included).
"""
import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ArtifactIOError, DatasetFormatError, InvalidArgumentError

logger = logging.getLogger(__name__)

LABEL_COLUMN = "label"


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (N x D), integer labels and the class count."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] < 1:
            raise InvalidArgumentError(
                f"features must be a non-empty 2-D array, got {features.shape}"
            )
        if labels.shape != (features.shape[0],):
            raise InvalidArgumentError(
                f"labels shape {labels.shape} does not match {features.shape[0]} rows"
            )
        if not np.all(np.isfinite(features)):
            raise InvalidArgumentError("features contain non-finite values")
        if self.class_count < 1 or labels.min() < 0 or labels.max() >= self.class_count:
            raise InvalidArgumentError(
                f"labels must lie in [0, {self.class_count})"
            )
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.class_count)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)


@dataclass(frozen=True)
class BatchPlan:
    """How one epoch is cut into batches."""

    batch_size: int
    shuffle_seed: int
    epoch: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epoch < 0:
            raise InvalidArgumentError(f"epoch must be >= 0, got {self.epoch}")


@dataclass(frozen=True)
class Batch:
    """One mini-batch: source row indices plus the sliced arrays."""

    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray


def _check_counts(**counts: int) -> None:
    for name, value in counts.items():
        if value < 1:
            raise InvalidArgumentError(f"{name} must be >= 1, got {value}")


def generate_blobs(
        class_count: int,
        samples_per_class: int,
        dim: int,
        spread: float,
        seed: int,
) -> Dataset:
    """
    Balanced isotropic Gaussian clusters.

    Centers sit on a ring (first two dims) with a seeded angular jitter, at a
    radius that keeps neighbouring centers about six standard deviations
    apart, so every center is an extreme point of the ring and neighbouring
    classes overlap only in their tails. Extra dims get seeded uniform offsets.
    """
    _check_counts(class_count=class_count, samples_per_class=samples_per_class, dim=dim)
    if not spread > 0:
        raise InvalidArgumentError(f"spread must be > 0, got {spread}")
    rng = np.random.default_rng(seed)
    centers = _ring_centers(class_count, dim, spread, rng)
    features = np.repeat(centers, samples_per_class, axis=0)
    features = features + rng.normal(0.0, spread, size=features.shape)
    labels = np.repeat(np.arange(class_count), samples_per_class)
    return Dataset(features, labels, class_count)


def _ring_centers(
        class_count: int, dim: int, spread: float, rng: np.random.Generator,
        inner_radius: float = 0.0,
) -> np.ndarray:
    step = 2 * math.pi / class_count
    radius = inner_radius + 3.0 * spread / max(math.sin(step / 2), 0.25)
    angles = step * np.arange(class_count) + rng.uniform(-0.15, 0.15, class_count) * step
    centers = np.zeros((class_count, dim))
    if dim == 1:
        centers[:, 0] = 6.0 * spread * np.arange(class_count)
        return centers
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    if dim > 2:
        centers[:, 2:] = rng.uniform(-radius, radius, size=(class_count, dim - 2))
    return centers


def _spiral_arms(
        arm_count: int, samples_per_arm: int, noise: float, rng: np.random.Generator,
        turns: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    t = np.linspace(0.15, 1.0, samples_per_arm)
    points, labels = [], []
    for arm in range(arm_count):
        theta = 2 * math.pi * (turns * t + arm / arm_count)
        arm_points = np.column_stack([t * np.cos(theta), t * np.sin(theta)])
        points.append(arm_points + rng.normal(0.0, noise, size=arm_points.shape))
        labels.append(np.full(samples_per_arm, arm))
    return np.concatenate(points), np.concatenate(labels)


def generate_spirals(
        class_count: int,
        samples_per_class: int,
        noise: float,
        seed: int,
) -> Dataset:
    """Interleaved 2-D spiral arms, one arm per class, radius in [0.15, 1]."""
    _check_counts(class_count=class_count, samples_per_class=samples_per_class)
    if noise < 0:
        raise InvalidArgumentError(f"noise must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    features, labels = _spiral_arms(class_count, samples_per_class, noise, rng)
    return Dataset(features, labels, class_count)


def generate_blobs_spirals(
        class_count: int,
        samples_per_class: int,
        spread: float,
        noise: float,
        seed: int,
) -> Dataset:
    """
    Mixed benchmark: the first ceil(C/2) classes are spiral arms around the
    origin (radius <= 1), the remaining classes are blobs on an outer ring.
    """
    _check_counts(class_count=class_count, samples_per_class=samples_per_class)
    if not spread > 0 or noise < 0:
        raise InvalidArgumentError("spread must be > 0 and noise >= 0")
    rng = np.random.default_rng(seed)
    arm_count = math.ceil(class_count / 2)
    blob_count = class_count - arm_count
    features, labels = _spiral_arms(arm_count, samples_per_class, noise, rng, turns=0.5)
    if blob_count:
        centers = _ring_centers(blob_count, 2, spread, rng, inner_radius=1.5)
        blobs = np.repeat(centers, samples_per_class, axis=0)
        blobs = blobs + rng.normal(0.0, spread, size=blobs.shape)
        features = np.concatenate([features, blobs])
        labels = np.concatenate(
            [labels, arm_count + np.repeat(np.arange(blob_count), samples_per_class)]
        )
    return Dataset(features, labels, class_count)


# =============================================================================
# CSV
# =============================================================================


def save_csv(dataset: Dataset, path: Path | str) -> Path:
    """Write ``f0,...,f{D-1},label`` rows (UTF-8, LF, round-trip float repr)."""
    path = Path(path)
    frame = pd.DataFrame(
        dataset.features, columns=[f"f{i}" for i in range(dataset.dim)]
    )
    frame[LABEL_COLUMN] = dataset.labels
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(f"cannot write {path}: {e}") from e
    return path


def load_csv(path: Path | str, class_count: int | None = None) -> Dataset:
    """
    Load a dataset written by :func:`save_csv`.

    Args:
        path: CSV file
        class_count: declared class count; inferred as max label + 1 if omitted

    Raises:
        DatasetFormatError: naming the offending line (1-based, header = 1)
            or column
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetFormatError(f"{path}: file not found")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DatasetFormatError(f"{path}: no data rows") from None
    except pd.errors.ParserError as e:
        raise DatasetFormatError(f"{path}: {e}") from e

    columns = list(frame.columns)
    expected = [f"f{i}" for i in range(len(columns) - 1)] + [LABEL_COLUMN]
    if len(columns) < 2:
        raise DatasetFormatError(f"{path}: header needs at least one feature and '{LABEL_COLUMN}'")
    for position, (got, want) in enumerate(zip(columns, expected)):
        if got != want:
            raise DatasetFormatError(
                f"{path}: header column {position} is '{got}', expected '{want}'"
            )
    if frame.empty:
        raise DatasetFormatError(f"{path}: no data rows")

    features = np.empty((len(frame), len(columns) - 1))
    labels = np.empty(len(frame), dtype=np.int64)
    for row, values in enumerate(frame.itertuples(index=False, name=None)):
        line = row + 2
        if any(not isinstance(v, str) for v in values):
            raise DatasetFormatError(f"{path}: line {line}: missing fields")
        try:
            features[row] = [float(v) for v in values[:-1]]
        except ValueError:
            raise DatasetFormatError(f"{path}: line {line}: non-numeric feature value") from None
        if not np.all(np.isfinite(features[row])):
            raise DatasetFormatError(f"{path}: line {line}: non-finite feature value")
        label = values[-1].strip()
        if not (label.isascii() and label.isdigit()):
            raise DatasetFormatError(
                f"{path}: line {line}: label '{label}' is not a non-negative integer"
            )
        labels[row] = int(label)
        if class_count is not None and labels[row] >= class_count:
            raise DatasetFormatError(
                f"{path}: line {line}: label {labels[row]} >= declared class count {class_count}"
            )

    inferred = int(labels.max()) + 1
    logger.debug("Loaded CSV dataset", extra={"path": str(path), "rows": len(frame)})
    return Dataset(features, labels, class_count or inferred)


# =============================================================================
# Splitting and batching
# =============================================================================


def split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/test split; per class, round(fraction * count) go to train."""
    if not 0 < train_fraction < 1:
        raise InvalidArgumentError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for label in range(dataset.class_count):
        members = np.flatnonzero(dataset.labels == label)
        if members.size == 0:
            continue
        members = rng.permutation(members)
        cut = int(math.floor(train_fraction * members.size + 0.5))
        train_idx.append(members[:cut])
        test_idx.append(members[cut:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    if train_idx.size == 0 or test_idx.size == 0:
        raise InvalidArgumentError("split leaves an empty train or test set")
    return dataset.subset(train_idx), dataset.subset(test_idx)


def batch_order(sample_count: int, plan: BatchPlan) -> np.ndarray:
    """Epoch permutation: a pure function of (shuffle_seed, epoch)."""
    rng = np.random.default_rng([plan.shuffle_seed, plan.epoch])
    return rng.permutation(sample_count)


def batch_slices(sample_count: int, plan: BatchPlan) -> Iterator[np.ndarray]:
    """Index arrays of each batch; the final short batch is kept."""
    order = batch_order(sample_count, plan)
    for start in range(0, sample_count, plan.batch_size):
        yield order[start:start + plan.batch_size]


def iterate_batches(dataset: Dataset, plan: BatchPlan) -> Iterator[Batch]:
    for indices in batch_slices(len(dataset), plan):
        yield Batch(indices, dataset.features[indices], dataset.labels[indices])
