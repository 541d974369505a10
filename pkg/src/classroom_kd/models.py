# -*- coding: utf-8 -*-
"""
Pydantic schemas for architectures, optimizer/mentoring settings and the
YAML experiment and ablation-suite files.

Every config model forbids unknown keys so a typo fails loudly.
"""
from pathlib import Path
from typing import Annotated, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

SCHEMA_VERSION = 1
POSE_FEATURE_DIM = 3

MentoringMode = Literal[
    "classroom-adaptive",
    "classroom-fixed-tau",
    "classroom-no-filter",
    "aver",
    "single-kd",
    "nokd",
]
RankingMethod = Literal["method-a", "method-b"]
GeneratorName = Literal["blobs", "spirals", "blobs-spirals", "csv", "pose"]
SuiteName = Literal[
    "classroom-size",
    "ranking-method",
    "temperature-mode",
    "baseline-compare",
    "module-toggle",
    "mentor-role",
]

# numpy seed sequences reject negative entries
Seed = Annotated[int, Field(ge=0)]

CLASSROOM_MODES = ("classroom-adaptive", "classroom-fixed-tau", "classroom-no-filter")


class StrictModel(BaseModel):
    """Base for config sections: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid", frozen=True)


class MlpSpec(StrictModel):
    """Fully-connected classifier: input, hidden..., output widths."""

    layer_widths: list[int] = Field(..., min_length=2)
    activation: Literal["relu"] = "relu"

    @model_validator(mode="after")
    def validate_widths(self) -> "MlpSpec":
        if any(w < 1 for w in self.layer_widths):
            raise ValueError(f"layer widths must be >= 1, got {self.layer_widths}")
        return self

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]

    @property
    def param_count(self) -> int:
        w = self.layer_widths
        return sum(a * b + b for a, b in zip(w[:-1], w[1:]))


class ClassroomSpec(StrictModel):
    """One student, one teacher and n >= 0 peers sharing input/output widths."""

    student: MlpSpec
    teacher: MlpSpec
    peers: list[MlpSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_io(self) -> "ClassroomSpec":
        specs = [self.student, self.teacher, *self.peers]
        if len({s.output_dim for s in specs}) != 1:
            raise ValueError("all classroom models must share the output width")
        if len({s.input_dim for s in specs}) != 1:
            raise ValueError("all classroom models must share the input width")
        return self

    @property
    def peer_count(self) -> int:
        return len(self.peers)


class OptimizerConfig(StrictModel):
    """SGD with momentum, L2 weight decay and warm-up + step decay."""

    learning_rate: float = Field(0.05, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    weight_decay: float = Field(5e-4, ge=0)
    # Fractional reduction per interval: 0.1 means "decayed by 10%"
    lr_decay_factor: float = Field(0.1, ge=0, lt=1)
    lr_decay_interval_epochs: int = Field(10, ge=1)
    warmup_epochs: int = Field(20, ge=0)
    total_epochs: int = Field(60, ge=0)
    batch_size: int = Field(32, ge=1)
    seed: Seed = 0

    @model_validator(mode="after")
    def validate_schedule(self) -> "OptimizerConfig":
        if self.warmup_epochs > self.total_epochs:
            raise ValueError("warmup_epochs must not exceed total_epochs")
        return self


LONG_SCHEDULE_OPTIMIZER = OptimizerConfig(
    learning_rate=0.05,
    momentum=0.9,
    weight_decay=5e-4,
    lr_decay_factor=0.1,
    lr_decay_interval_epochs=30,
    warmup_epochs=120,
    total_epochs=240,
    batch_size=64,
)

# Student optimizer for the desk classroom. At tau=12 the distillation term
# behaves like logit matching summed over mentors, and lr 0.05 with momentum
# 0.9 overshoots in the first epoch; pretraining keeps 0.05.
DESK_DISTILL_OPTIMIZER = OptimizerConfig(learning_rate=0.005)


class MentoringConfig(StrictModel):
    """Loss assembly: base temperature, distillation/teacher-KD weights, mode."""

    base_temperature: float = Field(12.0, gt=0)
    beta: float = Field(1.0, ge=0)
    delta: float = Field(0.0, ge=0)
    mode: MentoringMode = "classroom-adaptive"


class RankingConfig(StrictModel):
    """Knowledge-filtering rank rule; ``scale`` is lambda (default per method)."""

    method: RankingMethod = "method-a"
    scale: float | None = Field(None, gt=0)

    def resolve_scale(self, peer_count: int) -> float:
        if self.scale is not None:
            return self.scale
        return float(peer_count + 1) if self.method == "method-a" else 0.1


class DatasetConfig(StrictModel):
    generator: GeneratorName = "blobs-spirals"
    class_count: int = Field(10, ge=1)
    samples_per_class: int = Field(200, ge=1)
    dim: int = Field(2, ge=1)
    spread: float = Field(0.5, gt=0)
    noise: float = Field(0.06, ge=0)
    train_fraction: float = Field(0.8, gt=0, lt=1)
    seed: Seed = 7
    path: Path | None = None
    # pose only
    samples: int = Field(1200, ge=1)
    joints: int = Field(4, ge=1)
    bins: int = Field(16, ge=2)
    # None falls back to CKD_PCK_THRESHOLD
    pck_threshold: float | None = Field(None, gt=0)

    @model_validator(mode="after")
    def validate_source(self) -> "DatasetConfig":
        if self.generator == "csv" and self.path is None:
            raise ValueError("generator 'csv' requires 'path'")
        if self.generator in ("spirals", "blobs-spirals") and self.dim != 2:
            raise ValueError(f"generator '{self.generator}' is 2-D; set dim: 2")
        return self

    @property
    def input_dim(self) -> int:
        return POSE_FEATURE_DIM if self.generator == "pose" else self.dim

    @property
    def output_dim(self) -> int:
        if self.generator == "pose":
            return self.joints * 2 * self.bins
        return self.class_count


class ClassroomConfig(StrictModel):
    student: list[int] = Field(default_factory=lambda: [2, 16, 10])
    teacher: list[int] = Field(default_factory=lambda: [2, 128, 10])
    peers: list[list[int]] = Field(
        default_factory=lambda: [[2, w, 10] for w in (24, 32, 48, 64, 96)]
    )
    # teacher first, then one per peer; defaults to 100, 101, ...
    mentor_seeds: list[Seed] | None = None
    pretrain: OptimizerConfig = OptimizerConfig()

    @model_validator(mode="after")
    def validate_seeds(self) -> "ClassroomConfig":
        if self.mentor_seeds is not None and len(self.mentor_seeds) != 1 + len(self.peers):
            raise ValueError(
                f"mentor_seeds needs {1 + len(self.peers)} entries (teacher + peers), "
                f"got {len(self.mentor_seeds)}"
            )
        return self

    def seeds(self) -> list[int]:
        if self.mentor_seeds is not None:
            return list(self.mentor_seeds)
        return [100 + i for i in range(1 + len(self.peers))]

    def spec(self) -> ClassroomSpec:
        return ClassroomSpec(
            student=MlpSpec(layer_widths=self.student),
            teacher=MlpSpec(layer_widths=self.teacher),
            peers=[MlpSpec(layer_widths=p) for p in self.peers],
        )

    def with_peer_count(self, count: int) -> "ClassroomConfig":
        """Keep the first ``count`` peers (and their seeds)."""
        seeds = self.seeds()[: 1 + count]
        return self.model_copy(
            update={"peers": self.peers[:count], "mentor_seeds": seeds}
        )


class DistillConfig(StrictModel):
    mentoring: MentoringConfig = MentoringConfig()
    optimizer: OptimizerConfig = DESK_DISTILL_OPTIMIZER
    ranking: RankingConfig = RankingConfig()


class ExperimentConfig(StrictModel):
    """One classroom experiment: data, classroom, distillation."""

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = Field("toy", pattern=r"^[A-Za-z0-9_.-]+$")
    dataset: DatasetConfig = DatasetConfig()
    classroom: ClassroomConfig = ClassroomConfig()
    distill: DistillConfig = DistillConfig()
    # relative to the --out root; defaults to ``name``
    output_dir: str | None = None

    @model_validator(mode="after")
    def validate_shapes(self) -> "ExperimentConfig":
        spec = self.classroom.spec()
        if spec.student.input_dim != self.dataset.input_dim:
            raise ValueError(
                f"classroom input width {spec.student.input_dim} != "
                f"dataset feature dim {self.dataset.input_dim}"
            )
        if spec.student.output_dim != self.dataset.output_dim:
            raise ValueError(
                f"classroom output width {spec.student.output_dim} != "
                f"expected {self.dataset.output_dim}"
            )
        return self

    @property
    def output_subdir(self) -> str:
        return self.output_dir or self.name


class AblationSuite(StrictModel):
    """A grid of variations of one base experiment, replicated over seeds."""

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str | None = Field(None, pattern=r"^[A-Za-z0-9_.-]+$")
    suite: SuiteName
    # inline experiment, a YAML path (relative to the suite file) or "preset:<name>"
    base: ExperimentConfig | str = "preset:toy"
    variations: list[str | int] | None = None
    seeds: list[Seed] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    workers: int | None = Field(None, ge=1)

    @model_validator(mode="after")
    def validate_variations(self) -> "AblationSuite":
        if self.variations is not None and not self.variations:
            raise ValueError("variations must not be empty")
        return self

    @property
    def output_subdir(self) -> str:
        return self.name or self.suite


# =============================================================================
# YAML round trip
# =============================================================================


def _field_errors(error: ValidationError) -> list[str]:
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{location}: {item['msg']}")
    return lines


def parse_model(model: type[StrictModel], data: object, source: str) -> StrictModel:
    """Validate a mapping, converting pydantic errors to a field-level ConfigError."""
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"{source}: invalid configuration", _field_errors(e)) from None


def read_yaml(path: Path | str) -> object:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    try:
        return yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not valid YAML: {e}") from None


def dump_model(model: StrictModel) -> str:
    """Serialize a config to YAML text (parse(dump(x)) == x)."""
    return yaml.safe_dump(model.model_dump(mode="json"), sort_keys=False)


def load_experiment_config(path: Path | str) -> ExperimentConfig:
    return parse_model(ExperimentConfig, read_yaml(path), str(path))


def load_suite(path: Path | str) -> AblationSuite:
    return parse_model(AblationSuite, read_yaml(path), str(path))


def dump_experiment_config(config: ExperimentConfig) -> str:
    return dump_model(config)
