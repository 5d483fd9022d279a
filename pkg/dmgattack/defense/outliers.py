# -*- coding: utf-8 -*-
#
# outliers.py
#

"""
Isolation-forest outlier detection on domain feature rows.

The defender flags a fixed number of the most anomalous domains, which then
count as detected regardless of the classifier's verdict.
"""

import hashlib
import logging

from typing import Sequence

import numpy as np
import pandas as pd

from sklearn.ensemble import IsolationForest

from ..dmg.features import EDITABLE_INDICES, NUM_FEATURES
from ..models.base import check_feature_rows


logger = logging.getLogger(__name__)

DEFAULT_NUM_TREES = 100

DEFAULT_SUBSAMPLE = 256

FEATURE_VIEWS = ('all', 'editable')

EULER_GAMMA = 0.5772156649


class ConstantFeaturesError(ValueError):
    """No feature column has a splittable range."""


def average_path_length(n: int) -> float:
    """c(n), the mean path length of an unsuccessful binary search tree lookup."""

    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    harmonic = np.log(n - 1) + EULER_GAMMA
    return 2.0 * harmonic - 2.0 * (n - 1) / n


def anomaly_score(path_length, n: int):
    """2^(-E[h(x)] / c(n)), in (0, 1]."""

    return np.power(2.0, -np.asarray(path_length, dtype=float) / average_path_length(n))


def outlier_feature_rows(features: np.ndarray, view: str = 'all') -> np.ndarray:
    """Columns of the domain features the outlier detector sees."""

    if view not in FEATURE_VIEWS:
        raise ValueError(f'Feature view must be one of {FEATURE_VIEWS}, got {view!r}')

    features = check_feature_rows(features)
    if features.shape[1] < NUM_FEATURES:
        raise ValueError(
            f'Expected at least {NUM_FEATURES} feature columns, got {features.shape[1]}'
        )
    if view == 'editable':
        return features[:, list(EDITABLE_INDICES)]
    return features[:, :NUM_FEATURES]


def iforest_fit(rows: np.ndarray,
                n_trees: int = DEFAULT_NUM_TREES,
                subsample: int = DEFAULT_SUBSAMPLE,
                seed: int = 0) -> IsolationForest:
    """Fit an isolation forest.

    Args:
        rows: One feature row per node.
        n_trees: Number of isolation trees.
        subsample: Rows drawn per tree, capped at the number of rows.
        seed: Seed of the subsamples and splits.

    Raises:
        ValueError: Fewer than two rows.
        ConstantFeaturesError: Every column is constant.

    """
    rows = check_feature_rows(rows)
    if rows.shape[0] < 2:
        raise ValueError(f'Need at least 2 rows, got {rows.shape[0]}')
    if np.all(np.ptp(rows, axis=0) == 0):
        raise ConstantFeaturesError(
            f'All {rows.shape[1]} feature columns are constant'
        )

    model = IsolationForest(
        n_estimators=n_trees,
        max_samples=min(subsample, rows.shape[0]),
        contamination='auto',
        random_state=seed,
    )
    model.fit(rows)
    logger.debug(
        'Fitted isolation forest: %d trees on %d rows', n_trees, rows.shape[0]
    )
    return model


def iforest_score(model: IsolationForest, rows: np.ndarray) -> np.ndarray:
    """Anomaly score in (0, 1] per row, higher is more anomalous."""

    # score_samples returns the negated anomaly score.
    return -model.score_samples(check_feature_rows(rows))


def tree_signature(model: IsolationForest) -> str:
    """Digest of the split features, thresholds and subsamples of all trees."""

    digest = hashlib.sha256()
    for estimator, samples in zip(model.estimators_, model.estimators_samples_):
        tree = estimator.tree_
        digest.update(np.asarray(tree.feature, dtype=np.int64).tobytes())
        digest.update(np.asarray(tree.threshold, dtype=np.float64).tobytes())
        digest.update(np.asarray(samples, dtype=np.int64).tobytes())
    return digest.hexdigest()


def flag_outliers(model: IsolationForest, rows: np.ndarray, target_count: int,
                  node_ids: Sequence[int] = None) -> list:
    """The target_count most anomalous nodes, ties to the lower node id."""

    rows = check_feature_rows(rows)
    if node_ids is None:
        node_ids = np.arange(rows.shape[0])
    node_ids = np.asarray(node_ids)
    if node_ids.shape[0] != rows.shape[0]:
        raise ValueError(f'{node_ids.shape[0]} node ids for {rows.shape[0]} rows')
    if not 0 <= target_count <= rows.shape[0]:
        raise ValueError(
            f'target_count must be in [0, {rows.shape[0]}], got {target_count}'
        )
    if target_count == 0:
        return []

    scores = iforest_score(model, rows)
    order = np.lexsort((node_ids, -scores))
    return sorted(int(node) for node in node_ids[order[:target_count]])


def outlier_report(model: IsolationForest, rows: np.ndarray, target_count: int,
                   node_ids: Sequence[int] = None) -> pd.DataFrame:
    """Table of (node_id, score, flagged)."""

    rows = check_feature_rows(rows)
    if node_ids is None:
        node_ids = np.arange(rows.shape[0])
    flagged = set(flag_outliers(model, rows, target_count, node_ids))
    return pd.DataFrame({
        'node_id': np.asarray(node_ids, dtype=int),
        'score': iforest_score(model, rows),
        'flagged': [int(node) in flagged for node in node_ids],
    })
