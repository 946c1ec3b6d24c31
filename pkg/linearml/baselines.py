"""Comparison algorithms: batch gradient-descent logistic regression and plain k-NN."""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from linearml.dataset import Dataset, SparseVector, Task
from linearml.errors import ConfigInvalid, EmptyInput, KTooLarge, NonFiniteLoss
from linearml.projection_core import Projection, project

logger = logging.getLogger(__name__)

# rows per block when computing feature-space distances
DISTANCE_CHUNK = 32


@dataclass(frozen=True)
class LogisticModel:
    bias: float
    weights: Tuple[float, ...]
    lr: float
    iters: int
    l2: float
    seed: int = 0
    loss_history: Tuple[float, ...] = field(default=(), compare=False, repr=False)

    def as_projection(self) -> Projection:
        return Projection(self.bias, self.weights)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _log_loss(z: np.ndarray, y: np.ndarray, w: np.ndarray, l2: float) -> float:
    # log(1 + e^z) - y z, written to stay finite for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w))


def logistic_train(d: Dataset, lr: float = 0.1, iters: int = 1000, l2: float = 0.0, seed: int = 0) -> LogisticModel:
    """Full-batch gradient descent on the L2-regularised log-loss, starting from zero"""
    if d.task is not Task.BINARY:
        raise ConfigInvalid(f"logistic regression needs a binary dataset, got {d.task.value}")
    if lr <= 0:
        raise ConfigInvalid(f"lr must be positive, got {lr}")
    if iters < 1:
        raise ConfigInvalid(f"iters must be at least 1, got {iters}")
    if l2 < 0:
        raise ConfigInvalid(f"l2 must be non-negative, got {l2}")
    if len(d) == 0:
        raise EmptyInput("cannot train on an empty dataset")

    X = d.to_matrix()
    y = d.targets()
    n = len(y)
    w = np.zeros(X.shape[1])
    b = 0.0
    history: List[float] = []

    for iteration in range(iters):
        z = X @ w + b
        loss = _log_loss(z, y, w, l2)
        if not np.isfinite(loss):
            logger.error(f"Log-loss became non-finite at iteration {iteration} (lr={lr})")
            raise NonFiniteLoss(f"loss diverged at iteration {iteration}; lower the learning rate")
        history.append(loss)
        residual = _sigmoid(z) - y
        w = w - lr * (X.T @ residual / n + l2 * w)
        b = b - lr * float(np.mean(residual))

    final_loss = _log_loss(X @ w + b, y, w, l2)
    if not np.isfinite(final_loss) or not np.all(np.isfinite(w)) or not np.isfinite(b):
        raise NonFiniteLoss("training ended with non-finite parameters; lower the learning rate")
    history.append(final_loss)
    logger.info(f"Logistic regression: loss {history[0]:.6f} -> {final_loss:.6f} over {iters} iterations")
    return LogisticModel(float(b), tuple(float(v) for v in w), lr, iters, l2, seed, tuple(history))


def logistic_predict(m: LogisticModel, x: SparseVector) -> int:
    """1 iff sigmoid(W^t X) > 0.5, i.e. iff W^t X > 0"""
    return 1 if project(m.as_projection(), x) > 0 else 0


def _vote(squared_distances: np.ndarray, labels: np.ndarray, k: int) -> int:
    nearest = np.argsort(squared_distances, kind='stable')[:k]
    ones = int(np.count_nonzero(labels[nearest] == 1))
    return 1 if 2 * ones > k else 0


def knn_baseline_predict_many(train: Dataset, queries: Sequence[SparseVector], k: int) -> List[int]:
    """Majority label of the k nearest training points by Euclidean distance; ties give 0"""
    if k < 1:
        raise ConfigInvalid(f"k must be at least 1, got {k}")
    if k > len(train):
        raise KTooLarge(f"k={k} exceeds the {len(train)} training examples")
    X = train.to_matrix()
    labels = train.targets()
    rows = np.array([q.to_dense(train.n_features) for q in queries]).reshape(len(queries), train.n_features)

    predictions = []
    for start in range(0, len(rows), DISTANCE_CHUNK):
        block = rows[start:start + DISTANCE_CHUNK]
        diff = X[None, :, :] - block[:, None, :]
        squared = np.einsum('qnf,qnf->qn', diff, diff)
        predictions.extend(_vote(row, labels, k) for row in squared)
    return predictions


def knn_baseline_predict(train: Dataset, x: SparseVector, k: int) -> int:
    return knn_baseline_predict_many(train, [x], k)[0]
