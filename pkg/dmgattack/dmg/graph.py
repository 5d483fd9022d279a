# -*- coding: utf-8 -*-
#
# graph.py
#

"""
Construction of the heterogeneous domain maliciousness graph (DMG) from DNS
log records, and its homogeneous projection used by the graph models.
"""

import json
import logging

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from sklearn.feature_extraction.text import CountVectorizer

from .dnslog import DnsLogRecord
from .features import (
    DEFAULT_CONFIG,
    NUM_FEATURES,
    FeatureConfig,
    apex_of,
    feature_matrix,
)


logger = logging.getLogger(__name__)

NODE_KINDS = ('domain', 'ip', 'client')

EDGE_KINDS = ('query', 'apex', 'resolve', 'similar')

# Endpoint kinds per edge kind, in canonical (lower node id first) order.
EDGE_SCHEMA = {
    'query': ('domain', 'client'),
    'apex': ('domain', 'domain'),
    'resolve': ('domain', 'ip'),
    'similar': ('domain', 'domain'),
}

DEFAULT_SIMILARITY_THRESHOLD = 0.5

# Rows of the n-gram intersection matrix computed per block.
SIMILARITY_BLOCK_SIZE = 512


class Node(NamedTuple):

    node_id: int
    kind: str
    name: str


Edge = Tuple[int, int, str]


def canonical_edge(u: int, v: int, kind: str) -> Edge:
    return (u, v, kind) if u < v else (v, u, kind)


@dataclass(frozen=True, eq=False)
class Dmg:
    """Heterogeneous graph of domain, IP and client nodes.

    Node ids follow the canonical ordering: domains, then IPs, then clients,
    each sorted by name. Domain node ids therefore coincide with the rows of
    the feature matrix.

    """

    nodes: Tuple[Node, ...]
    edges: FrozenSet[Edge]
    features: np.ndarray
    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    ngram_n: int = 2
    feature_config: FeatureConfig = field(default=DEFAULT_CONFIG)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def domain_ids(self) -> Tuple[int, ...]:
        return tuple(node.node_id for node in self.nodes if node.kind == 'domain')

    @cached_property
    def index(self) -> Dict[Tuple[str, str], int]:
        return {(node.kind, node.name): node.node_id for node in self.nodes}

    @cached_property
    def adjacency_lists(self) -> Dict[int, List[Tuple[int, str]]]:

        adjacency = defaultdict(list)
        for u, v, kind in sorted(self.edges):
            adjacency[u].append((v, kind))
            adjacency[v].append((u, kind))
        return dict(adjacency)

    def node_id(self, kind: str, name: str) -> int:
        return self.index[(kind, name)]

    def name_of(self, node_id: int) -> str:
        return self.nodes[node_id].name

    def kind_of(self, node_id: int) -> str:
        return self.nodes[node_id].kind

    def neighbors(self, node_id: int, kinds: Iterable[str] = EDGE_KINDS
                  ) -> List[int]:

        kinds = set(kinds)
        return sorted({
            other for other, kind in self.adjacency_lists.get(node_id, [])
            if kind in kinds
        })

    def edges_of_kind(self, kind: str) -> List[Edge]:
        return sorted(edge for edge in self.edges if edge[2] == kind)

    def named_edges(self) -> List[Tuple[str, str, str]]:
        """Edges with endpoint names, for comparisons across rebuilds."""

        named = []
        for u, v, kind in self.edges:
            name_u, name_v = self.nodes[u].name, self.nodes[v].name
            named.append((min(name_u, name_v), max(name_u, name_v), kind))
        return sorted(named)

    def to_json(self) -> str:
        """Canonical serialization with sorted node and edge arrays."""

        document = {
            'ngram_n': self.ngram_n,
            'similarity_threshold': self.similarity_threshold,
            'nodes': [list(node) for node in self.nodes],
            'edges': [list(edge) for edge in sorted(self.edges)],
        }
        return json.dumps(document, sort_keys=True, separators=(',', ':'))


def similar_pairs(names: Sequence[str], threshold: float, n: int = 2
                  ) -> List[Tuple[int, int]]:
    """Index pairs (i < j) with n-gram Jaccard similarity >= threshold."""

    if len(names) < 2:
        return []

    vectorizer = CountVectorizer(
        analyzer='char', ngram_range=(n, n), lowercase=False, binary=True,
        dtype=np.int64,
    )
    try:
        grams = vectorizer.fit_transform(names).tocsr()
    except ValueError:
        # No name is long enough to hold an n-gram.
        return []

    sizes = np.asarray(grams.sum(axis=1)).ravel()
    grams_t = grams.T.tocsc()

    pairs = []
    for start in range(0, len(names), SIMILARITY_BLOCK_SIZE):
        stop = min(start + SIMILARITY_BLOCK_SIZE, len(names))
        shared = (grams[start:stop] @ grams_t).toarray()
        union = sizes[start:stop, np.newaxis] + sizes[np.newaxis, :] - shared
        with np.errstate(divide='ignore', invalid='ignore'):
            similarity = np.where(union > 0, shared / union, 0.0)
        rows, cols = np.nonzero(similarity >= threshold)
        for row, col in zip(rows + start, cols):
            if col > row:
                pairs.append((int(row), int(col)))
    return pairs


def build_dmg(records: Iterable[DnsLogRecord],
              similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
              n: int = 2,
              feature_config: FeatureConfig = DEFAULT_CONFIG) -> Dmg:
    """Construct the DMG from resolution records.

    Args:
        records: Parsed log records, in any order.
        similarity_threshold: Minimum n-gram similarity of a similar edge.
        n: Character n-gram size.
        feature_config: Feature extraction settings.

    Returns:
        The graph with canonically ordered nodes.

    """
    if not 0 < similarity_threshold <= 1:
        raise ValueError(
            f'similarity_threshold must be in (0, 1], got {similarity_threshold}'
        )

    records = list(records)
    domains = sorted({record.qname for record in records})
    ips = sorted({record.resolved_ip for record in records})
    clients = sorted({record.client_id for record in records})

    nodes = []
    for kind, names in zip(NODE_KINDS, (domains, ips, clients)):
        for name in names:
            nodes.append(Node(len(nodes), kind, name))
    index = {(node.kind, node.name): node.node_id for node in nodes}

    edges = set()
    for record in records:
        domain_id = index[('domain', record.qname)]
        edges.add(canonical_edge(
            domain_id, index[('client', record.client_id)], 'query'
        ))
        edges.add(canonical_edge(
            domain_id, index[('ip', record.resolved_ip)], 'resolve'
        ))

    apex_groups = defaultdict(list)
    for domain_id, name in enumerate(domains):
        apex_groups[apex_of(name, feature_config.two_part_suffixes)].append(
            domain_id
        )
    for members in apex_groups.values():
        for u, v in combinations(members, 2):
            edges.add(canonical_edge(u, v, 'apex'))

    for u, v in similar_pairs(domains, similarity_threshold, n):
        edges.add(canonical_edge(u, v, 'similar'))

    features = feature_matrix(domains, feature_config)
    features.setflags(write=False)

    logger.debug(
        'Built DMG: %d domains, %d ips, %d clients, %d edges',
        len(domains), len(ips), len(clients), len(edges),
    )
    return Dmg(
        nodes=tuple(nodes),
        edges=frozenset(edges),
        features=features,
        similarity_threshold=similarity_threshold,
        ngram_n=n,
        feature_config=feature_config,
    )


@dataclass(frozen=True, eq=False)
class HomogeneousProjection:
    """Edge-type agnostic view of a graph.

    Attributes:
        A: Symmetric 0/1 adjacency.
        A_hat: D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
        B: A_hat squared, the two-hop propagation matrix.
        X_full: Node features followed by a one-hot node-kind tag.
        kinds: Node kind per row.

    """

    A: sp.csr_matrix
    A_hat: sp.csr_matrix
    B: sp.csr_matrix
    X_full: np.ndarray
    kinds: Tuple[str, ...]

    @property
    def num_nodes(self) -> int:
        return self.A.shape[0]

    @property
    def num_features(self) -> int:
        return self.X_full.shape[1]

    def is_domain(self, node_id: int) -> bool:
        return 0 <= node_id < len(self.kinds) and self.kinds[node_id] == 'domain'

    def with_features(self, X_full: np.ndarray) -> 'HomogeneousProjection':
        """Same graph with another feature matrix."""

        X_full = np.array(X_full, dtype=float)
        if X_full.shape[0] != self.num_nodes:
            raise ValueError(
                f'Feature rows {X_full.shape[0]} != nodes {self.num_nodes}'
            )
        X_full.setflags(write=False)
        return HomogeneousProjection(
            self.A, self.A_hat, self.B, X_full, self.kinds
        )


def kind_tags(kinds: Sequence[str]) -> np.ndarray:

    tags = np.zeros((len(kinds), len(NODE_KINDS)), dtype=float)
    for row, kind in enumerate(kinds):
        tags[row, NODE_KINDS.index(kind)] = 1.0
    return tags


def full_feature_matrix(features: np.ndarray, kinds: Sequence[str]
                        ) -> np.ndarray:
    """Node features padded with zero rows for non-domains, plus kind tags.

    Args:
        features: Rows for the domain nodes, which come first.
        kinds: Node kind per node.

    """
    padded = np.zeros((len(kinds), NUM_FEATURES), dtype=float)
    padded[:features.shape[0]] = features
    return np.hstack([padded, kind_tags(kinds)])


def projection_from_adjacency(A, X_full: np.ndarray, kinds: Sequence[str]
                              ) -> HomogeneousProjection:
    """Normalize an adjacency matrix and square it.

    Args:
        A: Symmetric 0/1 adjacency (dense or sparse).
        X_full: Full feature matrix.
        kinds: Node kind per row.

    """
    A = sp.csr_matrix(A, dtype=float)
    num_nodes = A.shape[0]
    if A.shape != (num_nodes, num_nodes):
        raise ValueError(f'Adjacency must be square, got {A.shape}')
    if X_full.shape[0] != num_nodes:
        raise ValueError(
            f'Feature rows {X_full.shape[0]} != nodes {num_nodes}'
        )

    A_tilde = A + sp.identity(num_nodes, format='csr')
    degrees = np.asarray(A_tilde.sum(axis=1)).ravel()
    scaling = sp.diags(1.0 / np.sqrt(degrees))

    A_hat = (scaling @ A_tilde @ scaling).tocsr()
    B = (A_hat @ A_hat).tocsr()

    X_full = np.array(X_full, dtype=float)
    X_full.setflags(write=False)
    return HomogeneousProjection(A, A_hat, B, X_full, tuple(kinds))


def homogeneous_projection(dmg: Dmg) -> HomogeneousProjection:
    """Collapse all edge kinds into one normalized adjacency."""

    num_nodes = dmg.num_nodes
    rows, cols = [], []
    for u, v, _ in dmg.edges:
        rows.extend((u, v))
        cols.extend((v, u))

    A = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(num_nodes, num_nodes)
    )
    # Multi-edges between one pair collapse to a single entry.
    A.data[:] = 1.0

    kinds = tuple(node.kind for node in dmg.nodes)
    return projection_from_adjacency(
        A, full_feature_matrix(dmg.features, kinds), kinds
    )
