# -*- coding: utf-8 -*-
"""
Pytest configuration and fixtures.
"""
import numpy as np
import pytest

from classroom_kd.config import settings
from classroom_kd.datasets import generate_blobs, split
from classroom_kd.models import (
    ClassroomConfig,
    DatasetConfig,
    DistillConfig,
    ExperimentConfig,
    MentoringConfig,
    MlpSpec,
    OptimizerConfig,
)

# Smallest classroom that still learns the 4-class blobs in a few epochs
TINY_STUDENT = [2, 4, 4]
TINY_TEACHER = [2, 32, 4]
TINY_PEERS = [[2, 8, 4], [2, 16, 4]]

# Short schedule for training tests
FAST_OPTIMIZER = OptimizerConfig(
    learning_rate=0.05,
    warmup_epochs=2,
    total_epochs=4,
    lr_decay_interval_epochs=2,
    batch_size=16,
    seed=0,
)

# A full experiment small enough for end-to-end runs
TINY_EXPERIMENT = ExperimentConfig(
    name="tiny",
    dataset=DatasetConfig(
        generator="blobs", class_count=4, samples_per_class=30, spread=0.3, seed=3
    ),
    classroom=ClassroomConfig(
        student=TINY_STUDENT,
        teacher=TINY_TEACHER,
        peers=TINY_PEERS,
        pretrain=FAST_OPTIMIZER,
    ),
    distill=DistillConfig(
        mentoring=MentoringConfig(base_temperature=4.0),
        optimizer=FAST_OPTIMIZER,
    ),
)


@pytest.fixture
def rng():
    """Seeded generator for random test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture
def blobs():
    """Four well-separated 2-D blobs, 40 samples per class."""
    return generate_blobs(class_count=4, samples_per_class=40, dim=2, spread=0.3, seed=3)


@pytest.fixture
def blobs_split(blobs):
    """Stratified 80/20 split of the blobs fixture."""
    return split(blobs, 0.8, seed=3)


@pytest.fixture
def tiny_spec():
    return MlpSpec(layer_widths=[2, 8, 4])


@pytest.fixture
def fast_optimizer():
    return FAST_OPTIMIZER


@pytest.fixture
def tiny_experiment():
    return TINY_EXPERIMENT


@pytest.fixture
def embed_timestamp():
    """Temporarily turn on timestamps in generated artifacts."""
    original = settings.EMBED_TIMESTAMP
    settings.EMBED_TIMESTAMP = True
    yield
    settings.EMBED_TIMESTAMP = original
