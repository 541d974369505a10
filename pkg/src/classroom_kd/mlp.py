# -*- coding: utf-8 -*-
"""
Model zoo: small fully-connected ReLU classifiers of graded capacity.

Parameters are immutable; training produces new ``ModelParams`` values.
Weights are stored input-major, ``h = x @ W + b``.
"""
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numeric
from .errors import ArtifactIOError, InvalidArgumentError, WeightFileError
from .models import ClassroomSpec, MlpSpec

logger = logging.getLogger(__name__)

WEIGHT_MAGIC = b"CKDW"
WEIGHT_VERSION = 1
_HEADER = struct.Struct("<4sHH")
_LAYER = struct.Struct("<II")

STUDENT_ID = "student"
TEACHER_ID = "teacher"


def peer_id(index: int) -> str:
    """1-based peer identifier (``peer1``, ``peer2``, ...)."""
    return f"peer{index + 1}"


@dataclass(frozen=True)
class ModelParams:
    """Per-layer weight matrices and bias vectors of one MLP."""

    spec: MlpSpec
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        widths = self.spec.layer_widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise InvalidArgumentError(
                f"expected {len(widths) - 1} layers, got "
                f"{len(self.weights)} weights / {len(self.biases)} biases"
            )
        weights, biases = [], []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.array(w, dtype=np.float64)
            b = np.array(b, dtype=np.float64)
            if w.shape != (widths[i], widths[i + 1]) or b.shape != (widths[i + 1],):
                raise InvalidArgumentError(
                    f"layer {i}: weight {w.shape} / bias {b.shape} do not match "
                    f"widths {widths[i]} -> {widths[i + 1]}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidArgumentError(f"layer {i}: non-finite parameters")
            w.setflags(write=False)
            b.setflags(write=False)
            weights.append(w)
            biases.append(b)
        object.__setattr__(self, "weights", tuple(weights))
        object.__setattr__(self, "biases", tuple(biases))

    @property
    def layer_count(self) -> int:
        return len(self.weights)

    @property
    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def arrays(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]`` in optimizer order."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @classmethod
    def from_arrays(cls, spec: MlpSpec, arrays: list[np.ndarray]) -> "ModelParams":
        return cls(spec, tuple(arrays[0::2]), tuple(arrays[1::2]))

    def equals(self, other: "ModelParams") -> bool:
        """Bit-exact equality of every parameter array."""
        return self.spec == other.spec and all(
            a.tobytes() == b.tobytes() for a, b in zip(self.arrays(), other.arrays())
        )


@dataclass(frozen=True)
class ParamGrads:
    """Gradients with the same layout as ``ModelParams``."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass(frozen=True)
class ForwardCache:
    """Layer inputs and pre-activations kept for the backward pass."""

    inputs: tuple[np.ndarray, ...]
    pre_activations: tuple[np.ndarray, ...]


def init_params(spec: MlpSpec, seed: int) -> ModelParams:
    """He-style init: W ~ N(0, 2 / fan_in), zero biases; deterministic in seed."""
    rng = np.random.default_rng(seed)
    widths = spec.layer_widths
    weights = tuple(
        rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        for fan_in, fan_out in zip(widths[:-1], widths[1:])
    )
    biases = tuple(np.zeros(w) for w in widths[1:])
    return ModelParams(spec, weights, biases)


def forward_with_cache(params: ModelParams, features) -> tuple[np.ndarray, ForwardCache]:
    x = numeric.as_matrix(features, "features")
    if x.shape[1] != params.spec.input_dim:
        raise InvalidArgumentError(
            f"feature dim {x.shape[1]} does not match input width {params.spec.input_dim}"
        )
    inputs, pres = [], []
    h = x
    last = params.layer_count - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        pre = numeric.add_bias(numeric.matmul(h, w), b)
        pres.append(pre)
        h = pre if i == last else numeric.relu(pre)
    return h, ForwardCache(tuple(inputs), tuple(pres))


def forward(params: ModelParams, features) -> np.ndarray:
    """Logits (N x output width); rows are independent of each other."""
    logits, _ = forward_with_cache(params, features)
    return logits


def backward(params: ModelParams, features, upstream) -> ParamGrads:
    """Parameter gradients given dLoss/dLogits."""
    _, cache = forward_with_cache(params, features)
    return backward_from_cache(params, cache, upstream)


def backward_from_cache(params: ModelParams, cache: ForwardCache, upstream) -> ParamGrads:
    grad = numeric.as_matrix(upstream, "upstream gradient")
    expected = (cache.inputs[0].shape[0], params.spec.output_dim)
    if grad.shape != expected:
        raise InvalidArgumentError(
            f"upstream gradient {grad.shape} does not match logits {expected}"
        )
    d_weights: list[np.ndarray] = [None] * params.layer_count
    d_biases: list[np.ndarray] = [None] * params.layer_count
    for i in reversed(range(params.layer_count)):
        if i != params.layer_count - 1:
            grad = numeric.relu_backward(cache.pre_activations[i], grad)
        d_biases[i] = numeric.add_bias_backward(grad)
        grad, d_weights[i] = numeric.matmul_backward(cache.inputs[i], params.weights[i], grad)
    return ParamGrads(tuple(d_weights), tuple(d_biases))


# =============================================================================
# Weight files
# =============================================================================


def encode_params(params: ModelParams) -> bytes:
    chunks = [_HEADER.pack(WEIGHT_MAGIC, WEIGHT_VERSION, params.layer_count)]
    for w, b in zip(params.weights, params.biases):
        chunks.append(_LAYER.pack(*w.shape))
        chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(chunks)


def decode_params(data: bytes, spec: MlpSpec | None = None, source: str = "<bytes>") -> ModelParams:
    """
    Parse a CKDW blob.

    Args:
        data: file contents
        spec: expected architecture; if omitted it is read from the layer shapes
        source: name used in error messages

    Raises:
        WeightFileError: bad magic, unsupported version, truncation, trailing
            bytes or a mismatch with ``spec``
    """
    if len(data) < _HEADER.size:
        raise WeightFileError(f"{source}: truncated file (no header)")
    magic, version, layer_count = _HEADER.unpack_from(data, 0)
    if magic != WEIGHT_MAGIC:
        raise WeightFileError(f"{source}: bad magic {magic!r}")
    if version != WEIGHT_VERSION:
        raise WeightFileError(f"{source}: unsupported version {version}")
    if layer_count < 1:
        raise WeightFileError(f"{source}: no layers")

    offset = _HEADER.size
    weights, biases, widths = [], [], []
    for layer in range(layer_count):
        if offset + _LAYER.size > len(data):
            raise WeightFileError(f"{source}: truncated file in layer {layer} header")
        rows, cols = _LAYER.unpack_from(data, offset)
        offset += _LAYER.size
        needed = (rows * cols + cols) * 8
        if offset + needed > len(data):
            raise WeightFileError(f"{source}: truncated file in layer {layer} data")
        w = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=offset).reshape(rows, cols)
        offset += rows * cols * 8
        b = np.frombuffer(data, dtype="<f8", count=cols, offset=offset)
        offset += cols * 8
        if widths and widths[-1] != rows:
            raise WeightFileError(
                f"{source}: layer {layer} has {rows} rows, previous layer has {widths[-1]} outputs"
            )
        if not widths:
            widths.append(rows)
        widths.append(cols)
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if offset != len(data):
        raise WeightFileError(f"{source}: {len(data) - offset} trailing bytes")

    if spec is not None and list(spec.layer_widths) != widths:
        raise WeightFileError(
            f"{source}: layer widths mismatch, expected {list(spec.layer_widths)}, "
            f"file has {widths}"
        )
    try:
        return ModelParams(spec or MlpSpec(layer_widths=widths), tuple(weights), tuple(biases))
    except InvalidArgumentError as e:
        raise WeightFileError(f"{source}: {e}") from e


def save_params(params: ModelParams, path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_params(params))
    except OSError as e:
        raise ArtifactIOError(f"cannot write weights {path}: {e}") from e
    logger.debug("Saved weights", extra={"path": str(path), "params": params.param_count})
    return path


def load_params(path: Path | str, spec: MlpSpec | None = None) -> ModelParams:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ArtifactIOError(f"cannot read weights {path}: {e}") from e
    return decode_params(data, spec, source=str(path))


# =============================================================================
# Classroom
# =============================================================================


@dataclass(frozen=True)
class Classroom:
    """Student, teacher and peers; ``model_ids`` is the fixed classroom order."""

    student: ModelParams
    teacher: ModelParams
    peers: tuple[ModelParams, ...] = field(default_factory=tuple)

    @property
    def model_ids(self) -> list[str]:
        return [STUDENT_ID, TEACHER_ID] + [peer_id(i) for i in range(len(self.peers))]

    @property
    def mentor_ids(self) -> list[str]:
        return self.model_ids[1:]

    def mentors(self) -> dict[str, ModelParams]:
        """Frozen mentors in classroom order (teacher first)."""
        out = {TEACHER_ID: self.teacher}
        out.update({peer_id(i): p for i, p in enumerate(self.peers)})
        return out

    def capacity_order(self) -> list[str]:
        """Model ids sorted by parameter count, smallest first (stable)."""
        counts = {STUDENT_ID: self.student.param_count}
        counts.update({k: v.param_count for k, v in self.mentors().items()})
        return sorted(counts, key=lambda k: counts[k])

    def with_student(self, student: ModelParams) -> "Classroom":
        return Classroom(student, self.teacher, self.peers)


def build_classroom(spec: ClassroomSpec, seeds: list[int]) -> Classroom:
    """
    Initialize every classroom model independently.

    Args:
        spec: architectures
        seeds: one per model in classroom order (student, teacher, peers...);
            duplicate seeds on identical peers give identical peers
    """
    expected = 2 + spec.peer_count
    if len(seeds) != expected:
        raise InvalidArgumentError(f"build_classroom needs {expected} seeds, got {len(seeds)}")
    classroom = Classroom(
        student=init_params(spec.student, seeds[0]),
        teacher=init_params(spec.teacher, seeds[1]),
        peers=tuple(init_params(p, s) for p, s in zip(spec.peers, seeds[2:])),
    )
    order = classroom.capacity_order()
    logger.debug("Built classroom", extra={"capacity_order": order})
    if order[-1] != TEACHER_ID:
        logger.warning("Teacher is not the largest classroom model", extra={"capacity_order": order})
    return classroom
