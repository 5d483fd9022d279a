# -*- coding: utf-8 -*-
#
# purification.py
#

"""
Graph purification: drop domain-domain edges whose endpoints have
Jaccard-dissimilar binarized features before inference.
"""

import logging

from typing import FrozenSet, List, NamedTuple, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp

from ..dmg.features import NUM_FEATURES
from ..dmg.graph import HomogeneousProjection, projection_from_adjacency


logger = logging.getLogger(__name__)

DEFAULT_JACCARD_THRESHOLD = 0.02

class PurificationReport(NamedTuple):
    """Outcome of a purification pass.

    Attributes:
        dropped: Dropped edges (u, v, jaccard) with u < v.
        checked: Every domain-domain edge (u, v, jaccard) that was examined.
        flagged: Domains that lost at least one edge.
        adjacency: The surviving adjacency.
        projection: The purified graph with the original features.

    """

    dropped: List[Tuple[int, int, float]]
    checked: List[Tuple[int, int, float]]
    flagged: FrozenSet[int]
    adjacency: sp.csr_matrix
    projection: HomogeneousProjection

    def edge_table(self) -> pd.DataFrame:
        """Table of (u, v, jaccard, dropped)."""

        dropped = {(u, v) for u, v, _ in self.dropped}
        return pd.DataFrame(
            [(u, v, value, (u, v) in dropped) for u, v, value in self.checked],
            columns=['u', 'v', 'jaccard', 'dropped'],
        )


def binarize(X: np.ndarray) -> np.ndarray:
    """Binary view of the domain feature columns, nonzero as 1.

    The length level is the one real-valued editable column; every real
    name has a nonzero length, so its bit is set on all domain rows.
    """
    X = np.asarray(X, dtype=float)[:, :NUM_FEATURES]
    return (X != 0).astype(float)


def feature_jaccard(x: np.ndarray, y: np.ndarray) -> float:
    """Jaccard similarity of two binary vectors; two empty sets count as 1."""

    x, y = np.asarray(x) != 0, np.asarray(y) != 0
    union = np.count_nonzero(x | y)
    if union == 0:
        return 1.0
    return np.count_nonzero(x & y) / union


def jaccard_purify(projection: HomogeneousProjection,
                   threshold: float = DEFAULT_JACCARD_THRESHOLD
                   ) -> PurificationReport:
    """Drop domain-domain edges with feature Jaccard below the threshold.

    Args:
        projection: The graph to purify.
        threshold: Minimum Jaccard similarity of a surviving edge.

    Returns:
        The report with the purified projection.

    """
    if not 0 <= threshold <= 1:
        raise ValueError(f'threshold must be in [0, 1], got {threshold}')

    is_domain = np.array([kind == 'domain' for kind in projection.kinds])
    binary = binarize(projection.X_full)

    upper = sp.triu(projection.A, k=1).tocoo()
    checked, dropped = [], []
    for u, v in zip(upper.row.tolist(), upper.col.tolist()):
        if not (is_domain[u] and is_domain[v]):
            continue
        value = feature_jaccard(binary[u], binary[v])
        checked.append((u, v, value))
        if value < threshold:
            dropped.append((u, v, value))

    A = projection.A.tolil(copy=True)
    for u, v, _ in dropped:
        A[u, v] = 0.0
        A[v, u] = 0.0
    A = A.tocsr()
    A.eliminate_zeros()

    flagged = frozenset(node for u, v, _ in dropped for node in (u, v))
    logger.info(
        'Purification dropped %d of %d domain-domain edges, flagging %d domains',
        len(dropped), len(checked), len(flagged),
    )
    return PurificationReport(
        dropped=dropped,
        checked=checked,
        flagged=flagged,
        adjacency=A,
        projection=projection_from_adjacency(A, projection.X_full, projection.kinds),
    )
