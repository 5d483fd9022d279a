# -*- coding: utf-8 -*-
#
# target.py
#

"""
Target detector: a two-layer graph convolutional network on the homogeneous
projection, trained full batch with Adam in numpy.
"""

import logging

from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np

from sklearn.model_selection import train_test_split

from ..dmg.graph import Dmg, HomogeneousProjection


logger = logging.getLogger(__name__)

BENIGN = 0
MALICIOUS = 1
UNLABELED = -1

LABEL_CODES = {'benign': BENIGN, 'malicious': MALICIOUS}


class TrainingDivergenceError(RuntimeError):
    """The training loss became non-finite."""


@dataclass(frozen=True)
class TrainingHyper:

    hidden: int = 16
    epochs: int = 200
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    train_fraction: float = 0.5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self):

        if self.hidden < 1 or self.epochs < 0:
            raise ValueError('hidden must be >= 1 and epochs >= 0')
        if self.learning_rate <= 0:
            raise ValueError(f'learning_rate must be > 0, got {self.learning_rate}')
        if not 0 < self.train_fraction <= 1:
            raise ValueError(
                f'train_fraction must be in (0, 1], got {self.train_fraction}'
            )


@dataclass(frozen=True, eq=False)
class TargetModel:
    """Trained weights of H = relu(A_hat X W1 + b1), logits = A_hat H W2 + b2."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    hyper: TrainingHyper
    seed: int = 0
    train_accuracy: float = float('nan')
    test_accuracy: float = float('nan')

    def logits(self, projection: HomogeneousProjection) -> np.ndarray:

        if projection.num_features != self.W1.shape[0]:
            raise ValueError(
                f'Projection has {projection.num_features} features, model '
                f'expects {self.W1.shape[0]}'
            )
        hidden = np.maximum(projection.A_hat @ projection.X_full @ self.W1 + self.b1, 0)
        return projection.A_hat @ hidden @ self.W2 + self.b2


def predict_labels(logits: np.ndarray) -> np.ndarray:
    """Argmax over (benign, malicious) logits, ties go to malicious."""

    return np.where(logits[:, MALICIOUS] >= logits[:, BENIGN], MALICIOUS, BENIGN)


def label_vector(dmg: Dmg, labels: Dict[str, str]) -> np.ndarray:
    """Label codes per node; non-domains and unknown domains are unlabeled."""

    y = np.full(dmg.num_nodes, UNLABELED, dtype=int)
    for node in dmg.domain_ids:
        label = labels.get(dmg.name_of(node))
        if label is not None:
            y[node] = LABEL_CODES[label]
    return y


def _glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:

    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _split(labeled: np.ndarray, y: np.ndarray, fraction: float, seed: int
           ) -> Tuple[np.ndarray, np.ndarray]:

    if fraction >= 1.0 or len(labeled) < 2:
        return labeled, np.array([], dtype=int)

    classes, counts = np.unique(y[labeled], return_counts=True)
    stratify = y[labeled] if len(classes) > 1 and counts.min() >= 2 else None
    train, test = train_test_split(
        labeled, train_size=fraction, random_state=seed, stratify=stratify
    )
    return np.sort(train), np.sort(test)


def train_target(projection: HomogeneousProjection,
                 labels: np.ndarray,
                 hyper: TrainingHyper = TrainingHyper(),
                 seed: int = 0,
                 exclude: Iterable[int] = ()) -> TargetModel:
    """Train the target graph convolutional network.

    Args:
        projection: Graph to train on.
        labels: Label code per node (-1 for unlabeled rows).
        hyper: Training hyperparameters.
        seed: Seed of the weight initialization and the train/test split.
        exclude: Labeled nodes kept out of training, evaluated as test nodes.

    Returns:
        The trained model with train and held-out accuracy.

    Raises:
        TrainingDivergenceError: Non-finite loss.

    """
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (projection.num_nodes,):
        raise ValueError(
            f'Expected {projection.num_nodes} labels, got {labels.shape}'
        )

    excluded = np.array(sorted(set(exclude)), dtype=int)
    labeled = np.setdiff1d(np.flatnonzero(labels >= 0), excluded)
    if len(labeled) == 0:
        raise ValueError('No labeled nodes to train on')

    train, test = _split(labeled, labels, hyper.train_fraction, seed)
    test = np.union1d(test, excluded[labels[excluded] >= 0])

    rng = np.random.default_rng(seed)
    num_features = projection.num_features
    params = {
        'W1': _glorot(rng, num_features, hyper.hidden),
        'b1': np.zeros(hyper.hidden),
        'W2': _glorot(rng, hyper.hidden, 2),
        'b2': np.zeros(2),
    }
    moments = {key: np.zeros_like(value) for key, value in params.items()}
    velocities = {key: np.zeros_like(value) for key, value in params.items()}

    A_hat = projection.A_hat
    AX = np.asarray(A_hat @ projection.X_full)
    onehot = np.eye(2)[labels[train]]

    loss = float('nan')
    for epoch in range(1, hyper.epochs + 1):
        Z1 = AX @ params['W1'] + params['b1']
        H = np.maximum(Z1, 0)
        AH = np.asarray(A_hat @ H)
        Z2 = AH[train] @ params['W2'] + params['b2']

        shifted = Z2 - Z2.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = -np.mean(np.sum(onehot * log_probs, axis=1)) + 0.5 * (
            hyper.weight_decay * (
                np.sum(params['W1'] ** 2) + np.sum(params['W2'] ** 2)
            )
        )
        if not np.isfinite(loss):
            raise TrainingDivergenceError(
                f'Non-finite loss at epoch {epoch}; try a learning rate below '
                f'{hyper.learning_rate}'
            )

        delta = (np.exp(log_probs) - onehot) / len(train)
        dZ2 = np.zeros((projection.num_nodes, 2))
        dZ2[train] = delta
        dZ1 = np.asarray(A_hat @ (dZ2 @ params['W2'].T)) * (Z1 > 0)
        grads = {
            'W2': AH[train].T @ delta + hyper.weight_decay * params['W2'],
            'b2': delta.sum(axis=0),
            'W1': AX.T @ dZ1 + hyper.weight_decay * params['W1'],
            'b1': dZ1.sum(axis=0),
        }

        for key, grad in grads.items():
            moments[key] = hyper.adam_beta1 * moments[key] + (
                1 - hyper.adam_beta1) * grad
            velocities[key] = hyper.adam_beta2 * velocities[key] + (
                1 - hyper.adam_beta2) * grad ** 2
            m_hat = moments[key] / (1 - hyper.adam_beta1 ** epoch)
            v_hat = velocities[key] / (1 - hyper.adam_beta2 ** epoch)
            params[key] = params[key] - hyper.learning_rate * m_hat / (
                np.sqrt(v_hat) + hyper.adam_epsilon)

    model = TargetModel(hyper=hyper, seed=seed, **params)
    predicted = predict_labels(model.logits(projection))
    train_accuracy = float(np.mean(predicted[train] == labels[train]))
    test_accuracy = float(np.mean(predicted[test] == labels[test])) if len(
        test) else float('nan')

    logger.info(
        'Trained target (loss %.4f): train accuracy %.3f, held-out accuracy '
        '%.3f', loss, train_accuracy, test_accuracy,
    )
    return TargetModel(
        hyper=hyper, seed=seed, train_accuracy=train_accuracy,
        test_accuracy=test_accuracy, **params,
    )
