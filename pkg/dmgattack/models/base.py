# -*- coding: utf-8 -*-
#
# base.py
#

"""
Node-row estimators: scikit-learn models fit on one feature row per graph
node, and the row checks shared by the surrogate and the defenses.
"""

import logging

import numpy as np

from sklearn.base import BaseEstimator
from sklearn.base import ClassifierMixin
from sklearn.utils import check_X_y


logger = logging.getLogger(__name__)


def check_feature_rows(X) -> np.ndarray:
    """Feature rows as a finite two-dimensional float matrix.

    Args:
        X (array-like): One row per node, or a single row.

    Raises:
        ValueError: More than two dimensions or non-finite entries.

    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f'Feature rows must be 2-dimensional, got shape {X.shape}')
    if not np.all(np.isfinite(X)):
        bad = np.unique(np.nonzero(~np.isfinite(X))[0])
        raise ValueError(f'Non-finite features in rows {bad[:10].tolist()}')
    return X


class NodeRowClassifier(BaseEstimator, ClassifierMixin):
    """Binary classifier over node feature rows, labels 0 (benign) and 1
    (malicious).

    Args:
        model: The wrapped scikit-learn estimator.
        random_state (int): Seed forced onto the wrapped model.

    """

    def __init__(self, model=None, random_state=0):

        super().__init__()

        self.model = model
        self.random_state = random_state

    def fit(self, X, y=None, **kwargs):

        X, y = check_X_y(check_feature_rows(X), y)
        classes = np.unique(y)
        if not np.array_equal(classes, [0, 1]):
            raise ValueError(f'Need both labels 0 and 1, got {classes.tolist()}')

        logger.debug(
            'Fitting %s on %d rows, %d malicious',
            type(self.model).__name__, len(y), int(np.sum(y)),
        )
        self.model.fit(X, y, **kwargs)
        return self

    def predict(self, X):
        return np.asarray(self.model.predict(check_feature_rows(X)), dtype=int)
