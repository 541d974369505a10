# -*- coding: utf-8 -*-
"""
Dense float64 kernels: softmax, cross-entropy and temperature-scaled KL with
analytic gradients, the linear/ReLU building blocks of the model zoo, and a
central finite-difference checker.

Every function is pure: inputs are never modified and no state is shared,
so callers may evaluate mentors concurrently.
"""
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .config import settings
from .errors import InvalidArgumentError

Matrix = np.ndarray
LabelVector = np.ndarray


@dataclass(frozen=True)
class LossWithGrad:
    """Scalar loss and its gradient w.r.t. the student logits."""

    value: float
    grad: Matrix

    def scaled(self, factor: float) -> "LossWithGrad":
        return LossWithGrad(factor * self.value, factor * self.grad)


def as_matrix(values, name: str = "matrix") -> Matrix:
    """Validate and convert to a finite 2-D float64 array."""
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return array


def as_labels(labels, rows: int, class_count: int) -> LabelVector:
    """Validate a label vector against a batch size and class count."""
    array = np.asarray(labels)
    if array.ndim != 1 or array.shape[0] != rows:
        raise InvalidArgumentError(
            f"labels must have shape ({rows},), got {array.shape}"
        )
    if array.size and not np.issubdtype(array.dtype, np.integer):
        raise InvalidArgumentError(f"labels must be integers, got {array.dtype}")
    array = array.astype(np.int64, copy=False)
    if array.size and (array.min() < 0 or array.max() >= class_count):
        bad = int(array[(array < 0) | (array >= class_count)][0])
        raise InvalidArgumentError(
            f"label {bad} out of range [0, {class_count})"
        )
    return array


def _check_temperature(temperature: float) -> float:
    temperature = float(temperature)
    if not np.isfinite(temperature) or temperature <= 0:
        raise InvalidArgumentError(f"temperature must be > 0, got {temperature}")
    return temperature


def _check_same_shape(a: Matrix, b: Matrix, what: str) -> None:
    if a.shape != b.shape:
        raise InvalidArgumentError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def log_softmax(logits, temperature: float = 1.0) -> Matrix:
    """Row-wise log-softmax of ``logits / temperature`` (max-subtracted)."""
    temperature = _check_temperature(temperature)
    z = as_matrix(logits, "logits") / temperature
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(logits, temperature: float = 1.0) -> Matrix:
    """Row-wise softmax of ``logits / temperature``; rows sum to 1."""
    temperature = _check_temperature(temperature)
    z = as_matrix(logits, "logits") / temperature
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels) -> tuple[np.ndarray, LossWithGrad]:
    """
    Per-sample cross-entropy and its batch mean with gradient.

    Returns:
        (per-sample losses, mean loss with gradient (softmax - onehot) / N)
    """
    logits = as_matrix(logits, "logits")
    n, c = logits.shape
    labels = as_labels(labels, n, c)
    logp = log_softmax(logits)
    rows = np.arange(n)
    per_sample = -logp[rows, labels]
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    grad /= n
    return per_sample, LossWithGrad(float(per_sample.mean()), grad)


def kl_distill(mentor_logits, student_logits, temperature: float) -> LossWithGrad:
    """
    tau^2 * mean_k KL(softmax(P/tau) || softmax(Q/tau)), P = mentor, Q = student.

    The mentor side is a constant: the gradient is w.r.t. the student only.
    """
    temperature = _check_temperature(temperature)
    mentor = as_matrix(mentor_logits, "mentor logits")
    student = as_matrix(student_logits, "student logits")
    _check_same_shape(mentor, student, "kl_distill")
    n = student.shape[0]
    log_p = log_softmax(mentor, temperature)
    log_q = log_softmax(student, temperature)
    p = np.exp(log_p)
    per_row = (p * (log_p - log_q)).sum(axis=1)
    # clamp round-off below zero; KL is non-negative
    value = temperature**2 * max(float(per_row.mean()), 0.0)
    grad = temperature * (np.exp(log_q) - p) / n
    return LossWithGrad(value, grad)


def finite_difference_check(
        loss_fn: Callable[[Matrix], LossWithGrad],
        inputs,
        epsilon: float | None = None,
) -> float:
    """
    Compare the analytic gradient of ``loss_fn`` with central differences.

    Returns:
        max over entries of |analytic - numeric| / max(1, |analytic|)
    """
    epsilon = settings.GRAD_CHECK_EPSILON if epsilon is None else epsilon
    if not 0 < epsilon <= 1e-2:
        raise InvalidArgumentError(f"epsilon must lie in (0, 1e-2], got {epsilon}")
    x = np.array(inputs, dtype=np.float64)
    analytic = np.asarray(loss_fn(x.copy()).grad, dtype=np.float64)
    numeric = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        original = x[idx]
        x[idx] = original + epsilon
        plus = loss_fn(x.copy()).value
        x[idx] = original - epsilon
        minus = loss_fn(x.copy()).value
        x[idx] = original
        numeric[idx] = (plus - minus) / (2 * epsilon)
    errors = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    return float(errors.max()) if errors.size else 0.0


# =============================================================================
# Model-zoo kernels
# =============================================================================


def matmul(x: Matrix, weight: Matrix) -> Matrix:
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise InvalidArgumentError(
            f"matmul: cannot multiply {x.shape} by {weight.shape}"
        )
    return x @ weight


def matmul_backward(x: Matrix, weight: Matrix, upstream: Matrix) -> tuple[Matrix, Matrix]:
    """Gradients (d_x, d_weight) of ``x @ weight`` given the upstream gradient."""
    if upstream.shape != (x.shape[0], weight.shape[1]):
        raise InvalidArgumentError(
            f"matmul_backward: upstream {upstream.shape} does not match "
            f"({x.shape[0]}, {weight.shape[1]})"
        )
    return upstream @ weight.T, x.T @ upstream


def add_bias(x: Matrix, bias: np.ndarray) -> Matrix:
    if bias.ndim != 1 or x.ndim != 2 or bias.shape[0] != x.shape[1]:
        raise InvalidArgumentError(f"add_bias: bias {bias.shape} vs input {x.shape}")
    return x + bias


def add_bias_backward(upstream: Matrix) -> np.ndarray:
    return upstream.sum(axis=0)


def relu(x: Matrix) -> Matrix:
    return np.maximum(x, 0.0)


def relu_backward(pre_activation: Matrix, upstream: Matrix) -> Matrix:
    _check_same_shape(pre_activation, upstream, "relu_backward")
    return upstream * (pre_activation > 0)
