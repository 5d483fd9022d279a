# -*- coding: utf-8 -*-
#
# surrogate.py
#

"""
Two-hop linearized graph convolution surrogate, logits = B X W, fit by
logistic regression on rows of B X against black-box query labels.
"""

import hashlib
import logging

from dataclasses import dataclass

import numpy as np
import pandas as pd

from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

from ..dmg.graph import HomogeneousProjection
from .base import NodeRowClassifier
from .base import check_feature_rows


logger = logging.getLogger(__name__)


class SurrogateTrainingError(ValueError):
    """The query dataset cannot train a surrogate."""


@dataclass(frozen=True)
class SurrogateHyper:
    """Logistic regression settings; C = inf disables the penalty."""

    C: float = 1.0
    max_iter: int = 2000
    tol: float = 1e-6
    validation_fraction: float = 0.2

    def __post_init__(self):

        if self.C <= 0:
            raise ValueError(f'C must be > 0, got {self.C}')
        if not 0 <= self.validation_fraction < 1:
            raise ValueError('validation_fraction must be in [0, 1)')


class LogRegSurrogate(NodeRowClassifier):
    """Logistic regression without intercept on propagated feature rows.

    Columns are divided by their standard deviation before the fit (no
    centering, so a zero row stays at margin zero) and the weights are
    mapped back to raw units. Rescaling one input column therefore rescales
    its weight inversely and leaves every prediction unchanged.

    Args:
        hyper (SurrogateHyper): Fit settings.
        random_state (int): Seed of the solver.

    """

    NAME = 'LogRegSurrogate'

    def __init__(self, hyper: SurrogateHyper = SurrogateHyper(),
                 random_state: int = 0):

        super().__init__(
            model=LogisticRegression(
                C=hyper.C, fit_intercept=False, solver='lbfgs',
                max_iter=hyper.max_iter, tol=hyper.tol,
                random_state=random_state,
            ),
            random_state=random_state,
        )
        self.hyper = hyper

    def fit(self, X, y=None, **kwargs):

        X = check_feature_rows(X)
        self.scaler_ = StandardScaler(with_mean=False).fit(X)
        return super().fit(self.scaler_.transform(X), y, **kwargs)

    def predict(self, X):
        return super().predict(self.scaler_.transform(check_feature_rows(X)))

    def weight_matrix(self) -> np.ndarray:
        """(k' x 2) raw-unit weights whose logit difference is the fitted margin."""

        coef = np.ravel(self.model.coef_) / self.scaler_.scale_
        return np.column_stack([-0.5 * coef, 0.5 * coef])


@dataclass(frozen=True, eq=False)
class SurrogateModel:

    W: np.ndarray
    fingerprint: str
    training_accuracy: float = float('nan')
    validation_accuracy: float = float('nan')

    def margins(self, projection: HomogeneousProjection, X=None) -> np.ndarray:
        """Malicious minus benign logit per node."""

        logits = surrogate_forward(
            projection, projection.X_full if X is None else X, self.W
        )
        return logits[:, 1] - logits[:, 0]


def surrogate_forward(projection: HomogeneousProjection, X: np.ndarray,
                      W: np.ndarray) -> np.ndarray:
    """Returns B X W."""

    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    if X.ndim != 2 or X.shape[0] != projection.num_nodes:
        raise ValueError(
            f'X of shape {X.shape} does not match {projection.num_nodes} nodes'
        )
    if W.ndim != 2 or W.shape[0] != X.shape[1]:
        raise ValueError(f'W of shape {W.shape} does not match X {X.shape}')

    return np.asarray(projection.B @ X) @ W


def message_at(projection: HomogeneousProjection, X: np.ndarray, j: int
               ) -> np.ndarray:
    """Row j of B X, the pre-weight message arriving at node j."""

    X = np.asarray(X, dtype=float)
    return np.asarray(projection.B[j] @ X).ravel()


def dataset_fingerprint(query_dataset: pd.DataFrame) -> str:

    canonical = query_dataset.sort_values('node_id').to_csv(index=False)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def train_surrogate(query_dataset: pd.DataFrame,
                    surrogate_projection: HomogeneousProjection,
                    hyper: SurrogateHyper = SurrogateHyper(),
                    seed: int = 0) -> SurrogateModel:
    """Fit the surrogate weights from query labels.

    Args:
        query_dataset: Columns `node_id` and `label` (benign/malicious) of
            nodes of the surrogate graph.
        surrogate_projection: Graph the queried nodes belong to.
        hyper: Fit settings.
        seed: Seed of the validation split and the solver.

    Raises:
        SurrogateTrainingError: Only one label class was observed.

    """
    node_ids = query_dataset['node_id'].to_numpy(dtype=int)
    y = (query_dataset['label'].to_numpy() == 'malicious').astype(int)
    if len(np.unique(y)) < 2:
        raise SurrogateTrainingError(
            f'Query dataset of {len(y)} rows holds a single class'
        )

    rows = np.asarray(surrogate_projection.B @ surrogate_projection.X_full)[node_ids]

    if hyper.validation_fraction > 0:
        counts = np.bincount(y)
        stratify = y if counts.min() >= 2 else None
        X_train, X_valid, y_train, y_valid = train_test_split(
            rows, y, test_size=hyper.validation_fraction, random_state=seed,
            stratify=stratify,
        )
    else:
        X_train, X_valid, y_train, y_valid = rows, rows, y, y

    if len(np.unique(y_train)) < 2:
        raise SurrogateTrainingError('Training split holds a single class')

    estimator = LogRegSurrogate(hyper, random_state=seed)
    estimator.fit(X_train, y_train)

    training_accuracy = float(np.mean(estimator.predict(X_train) == y_train))
    validation_accuracy = float(np.mean(estimator.predict(X_valid) == y_valid))
    logger.info(
        'Trained surrogate on %d queries: training accuracy %.3f, validation '
        'accuracy %.3f', len(y), training_accuracy, validation_accuracy,
    )

    W = estimator.weight_matrix()
    W.setflags(write=False)
    return SurrogateModel(
        W=W,
        fingerprint=dataset_fingerprint(query_dataset),
        training_accuracy=training_accuracy,
        validation_accuracy=validation_accuracy,
    )
