# -*- coding: utf-8 -*-
#
# query.py
#

"""
Black-box access to the target detector.

`query_target` is the adversary's only channel to the target: one label per
query, charged against a query budget. `detector_verdicts` is the defender's
own batch inference and does not consume adversary budget.
"""

import logging
import threading

from functools import lru_cache
from typing import Iterable

import numpy as np
import pandas as pd

from ..dmg.graph import HomogeneousProjection
from .target import MALICIOUS, TargetModel, predict_labels


logger = logging.getLogger(__name__)

DEFAULT_MAX_QUERIES = 600

LABEL_NAMES = ('benign', 'malicious')


class QueryBudgetError(RuntimeError):
    """The query budget is exhausted."""


class NotADomainError(ValueError):
    """Only domain nodes can be classified."""


class QueryBudgetLedger:
    """Counter of queries spent against a fixed budget.

    Args:
        max_queries (int): Number of queries allowed.

    """

    def __init__(self, max_queries: int = DEFAULT_MAX_QUERIES):

        if max_queries < 0:
            raise ValueError(f'max_queries must be >= 0, got {max_queries}')

        self.max_queries = max_queries
        self.used = 0

        self._lock = threading.Lock()

    @property
    def remaining(self) -> int:
        return self.max_queries - self.used

    def charge(self, count: int = 1) -> None:

        with self._lock:
            if self.used + count > self.max_queries:
                raise QueryBudgetError(
                    f'Query budget of {self.max_queries} exhausted '
                    f'({self.used} used)'
                )
            self.used += count

    def __repr__(self):
        return f'QueryBudgetLedger(max_queries={self.max_queries}, used={self.used})'


@lru_cache(maxsize=4)
def _cached_labels(model: TargetModel, projection: HomogeneousProjection
                   ) -> np.ndarray:

    labels = predict_labels(model.logits(projection))
    labels.setflags(write=False)
    return labels


def detector_verdicts(model: TargetModel, projection: HomogeneousProjection,
                      node_ids: Iterable[int]) -> np.ndarray:
    """Whether the target flags each node as malicious."""

    node_ids = np.asarray(list(node_ids), dtype=int)
    for node_id in node_ids:
        if not projection.is_domain(int(node_id)):
            raise NotADomainError(f'Node {node_id} is not a domain')
    return _cached_labels(model, projection)[node_ids] == MALICIOUS


def query_target(model: TargetModel, projection: HomogeneousProjection,
                 node_id: int, ledger: QueryBudgetLedger) -> str:
    """Ask the target for the label of one domain node.

    Raises:
        QueryBudgetError: The ledger has no budget left.
        NotADomainError: `node_id` is not a domain node.

    """
    if not projection.is_domain(node_id):
        raise NotADomainError(f'Node {node_id} is not a domain')

    ledger.charge()
    return LABEL_NAMES[int(_cached_labels(model, projection)[node_id])]


def collect_query_dataset(model: TargetModel,
                          projection: HomogeneousProjection,
                          ledger: QueryBudgetLedger,
                          num_queries: int = None,
                          seed: int = 0) -> pd.DataFrame:
    """Query randomly drawn domain nodes of a graph.

    Args:
        model: The black-box target.
        projection: Graph the queried nodes belong to.
        ledger: Budget charged per query.
        num_queries: Number of distinct nodes to query. Defaults to the
            remaining budget.
        seed: Seed of the node draw.

    Returns:
        Columns `node_id` and `label`, ordered by node id.

    """
    domains = np.flatnonzero(np.asarray(projection.kinds) == 'domain')
    if num_queries is None:
        num_queries = ledger.remaining
    num_queries = min(num_queries, len(domains))

    rng = np.random.default_rng(seed)
    node_ids = np.sort(rng.choice(domains, size=num_queries, replace=False))

    labels = [query_target(model, projection, int(node), ledger) for node in node_ids]
    logger.info(
        'Collected %d query labels (%d malicious), %d queries left',
        len(labels), labels.count('malicious'), ledger.remaining,
    )
    return pd.DataFrame({'node_id': node_ids.astype(int), 'label': labels})
