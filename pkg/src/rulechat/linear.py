"""Multinomial logistic regression trained by full-batch gradient descent.

Small and dependency-free on purpose: the feature spaces here are tiny
tf-idf blocks, a convex loss, and zero initialization, so plain batch
descent converges quickly and bit-identically across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .core import TrainingError, ValidationError


@dataclass(frozen=True)
class LinearClassifier:
    """weights has one row per class; the last feature column is the
    bias and is excluded from L2 regularization."""

    weights: np.ndarray
    classes: tuple[str, ...]
    trained_on: str

    def __post_init__(self) -> None:
        if self.weights.shape[0] != len(self.classes):
            raise ValidationError("weight row count must equal class count")


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _check_features(x: sparse.csr_matrix, weights: np.ndarray) -> None:
    if x.shape[1] != weights.shape[1]:
        raise ValidationError(
            f"feature dimension mismatch: got {x.shape[1]}, model expects "
            f"{weights.shape[1]}"
        )


def lr_gradient(
    weights: np.ndarray,
    x: sparse.csr_matrix,
    y: np.ndarray,
    l2: float,
) -> np.ndarray:
    """Analytic gradient of mean cross-entropy plus L2 (bias column free)."""
    n = x.shape[0]
    probs = softmax(x @ weights.T)
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), y] = 1.0
    grad = (probs - onehot).T @ x / n
    grad = np.asarray(grad)
    reg = l2 * weights
    reg[:, -1] = 0.0
    return grad + reg


def lr_loss(
    weights: np.ndarray, x: sparse.csr_matrix, y: np.ndarray, l2: float
) -> float:
    n = x.shape[0]
    probs = softmax(x @ weights.T)
    nll = -np.mean(np.log(probs[np.arange(n), y] + 1e-300))
    penalty = 0.5 * l2 * float(np.sum(weights[:, :-1] ** 2))
    return float(nll + penalty)


def train_multinomial(
    x: sparse.csr_matrix,
    y: np.ndarray,
    classes: tuple[str, ...],
    epochs: int = 300,
    learning_rate: float = 1.0,
    l2: float = 1e-4,
    trained_on: str = "",
) -> LinearClassifier:
    """Gradient descent from zero weights; deterministic by construction."""
    if x.shape[0] == 0:
        raise TrainingError("no training rows")
    if x.shape[0] != y.shape[0]:
        raise TrainingError("feature and label counts differ")
    present = set(int(c) for c in np.unique(y))
    missing = [classes[i] for i in range(len(classes)) if i not in present]
    if missing:
        raise TrainingError(f"missing training examples for classes: {missing}")
    weights = np.zeros((len(classes), x.shape[1]))
    for _ in range(epochs):
        weights = weights - learning_rate * lr_gradient(weights, x, y, l2)
    return LinearClassifier(weights=weights, classes=classes, trained_on=trained_on)


def predict_probabilities(
    model: LinearClassifier, x: sparse.csr_matrix
) -> np.ndarray:
    _check_features(x, model.weights)
    return softmax(x @ model.weights.T)
