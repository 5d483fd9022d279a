# -*- coding: utf-8 -*-
#
# state.py
#

"""
The adversary's working copy G' = (A', X') of its subgraph.

Local node order: the owned domains (rows 0..n-1, aligned with the subgraph
node ids), then the owned IPs. Domain-domain structure is kept as an apex
label per domain and a similar-pair matrix, resolutions as a domain x IP
indicator matrix, so that a planned edit can be scored without synthesizing
the name that realizes it.
"""

import logging

from dataclasses import dataclass, replace
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from ..dmg.features import (
    DEFAULT_CONFIG,
    NUM_FEATURES,
    FeatureConfig,
    apex_of,
    extract_features,
)
from ..dmg.graph import (
    DEFAULT_SIMILARITY_THRESHOLD,
    HomogeneousProjection,
    kind_tags,
    projection_from_adjacency,
)
from ..synth.adversary import AdversarySubgraph


logger = logging.getLogger(__name__)

EDIT_OPS = ('resolve_swap', 'apex_share', 'similar_add', 'similar_drop')

# Edge kind the adversary may flip, per edit.
EDIT_KINDS = {
    'resolve_swap': 'resolve',
    'apex_share': 'apex',
    'similar_add': 'similar',
    'similar_drop': 'similar',
}

EDITABLE_EDGE_KINDS = ('apex', 'resolve', 'similar')


class InvalidEdgeKindError(ValueError):
    """The edge kind cannot be flipped by the adversary."""


class EdgeEdit(NamedTuple):
    """One edge edit between two adversary domains (local indices).

    The first domain is the one whose name or resolutions change.
    """

    op: str
    a: int
    b: int

    @property
    def kind(self) -> str:
        return EDIT_KINDS[self.op]


def fresh_apex_label(node: int) -> str:
    """Placeholder apex of a domain moved to a newly registered apex."""
    return f'<fresh:{node}>'


@dataclass(frozen=True, eq=False)
class AttackState:
    """Working graph of the adversary.

    Attributes:
        node_ids: Global ids of the owned domains.
        names: Current domain names.
        ip_names: Owned addresses.
        apexes: Apex label per domain.
        similar: Symmetric boolean (n x n) similar-pair matrix.
        resolves: Boolean (n x p) resolution matrix.
        X: Feature rows with kind tags, (n + p) x k'.

    """

    node_ids: Tuple[int, ...]
    names: Tuple[str, ...]
    ip_names: Tuple[str, ...]
    apexes: Tuple[str, ...]
    similar: np.ndarray
    resolves: np.ndarray
    X: np.ndarray
    feature_config: FeatureConfig = DEFAULT_CONFIG
    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    ngram_n: int = 2

    @property
    def num_domains(self) -> int:
        return len(self.names)

    @property
    def num_nodes(self) -> int:
        return len(self.names) + len(self.ip_names)

    @property
    def kinds(self) -> Tuple[str, ...]:
        return ('domain',) * len(self.names) + ('ip',) * len(self.ip_names)

    def apex_matrix(self) -> np.ndarray:

        codes = np.unique(np.asarray(self.apexes), return_inverse=True)[1].ravel()
        same = codes[:, np.newaxis] == codes[np.newaxis, :]
        np.fill_diagonal(same, False)
        return same

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency over domains then IPs."""

        num_domains = self.num_domains
        A = np.zeros((self.num_nodes, self.num_nodes))
        A[:num_domains, :num_domains] = self.apex_matrix() | self.similar
        A[:num_domains, num_domains:] = self.resolves
        A[num_domains:, :num_domains] = self.resolves.T
        return A

    def projection(self) -> HomogeneousProjection:
        return projection_from_adjacency(self.adjacency(), self.X, self.kinds)

    def domain_neighbors(self, node: int) -> List[int]:
        """Adversary domains adjacent to `node` in A'."""

        row = self.apex_matrix()[node] | self.similar[node]
        return np.flatnonzero(row).tolist()

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def margins(self, W: np.ndarray, A: np.ndarray = None) -> np.ndarray:
        """Surrogate malicious margin of every domain under adjacency A."""

        if A is None:
            A = self.adjacency()
        return propagated_margins(A, self.X, W)[:self.num_domains]

    def named_edges(self) -> List[Tuple[str, str, str]]:
        """Edges among owned domains and IPs by endpoint names."""

        edges = set()
        apex = self.apex_matrix()
        for u in range(self.num_domains):
            for v in range(u + 1, self.num_domains):
                pair = (min(self.names[u], self.names[v]),
                        max(self.names[u], self.names[v]))
                if apex[u, v]:
                    edges.add(pair + ('apex',))
                if self.similar[u, v]:
                    edges.add(pair + ('similar',))
            for ip in np.flatnonzero(self.resolves[u]):
                name, address = self.names[u], self.ip_names[ip]
                edges.add((min(name, address), max(name, address), 'resolve'))
        return sorted(edges)

    def apply(self, edit: EdgeEdit) -> 'AttackState':
        """Structural effect of an edit, names and features unchanged."""

        check_edit(self, edit)
        a, b = edit.a, edit.b

        if edit.op == 'resolve_swap':
            resolves = self.resolves.copy()
            resolves[[a, b]] = resolves[[b, a]]
            return replace(self, resolves=resolves)

        if edit.op == 'apex_share':
            apexes = list(self.apexes)
            apexes[a] = self.apexes[b]
            return replace(self, apexes=tuple(apexes))

        similar = self.similar.copy()
        if edit.op == 'similar_add':
            similar[a, b] = similar[b, a] = True
            return replace(self, similar=similar)

        similar[a, b] = similar[b, a] = False
        apexes = list(self.apexes)
        apexes[a] = fresh_apex_label(self.node_ids[a])
        return replace(self, similar=similar, apexes=tuple(apexes))

    def with_name(self, node: int, name: str) -> 'AttackState':
        """Rename a domain, re-extracting its features.

        The caller guarantees the new name keeps the similar relations the
        state records.
        """

        names = list(self.names)
        names[node] = name
        apexes = list(self.apexes)
        apexes[node] = apex_of(name, self.feature_config.two_part_suffixes)

        X = np.array(self.X)
        features = extract_features(name, self.feature_config)
        X[node, :len(features)] = features
        X.setflags(write=False)
        return replace(self, names=tuple(names), apexes=tuple(apexes), X=X)

    def with_resolves(self, node: int, addresses: Sequence[str]) -> 'AttackState':

        resolves = self.resolves.copy()
        resolves[node] = False
        for address in addresses:
            resolves[node, self.ip_names.index(address)] = True
        return replace(self, resolves=resolves)

    def domain_features(self) -> np.ndarray:
        """Feature rows of the domains without kind tags."""

        return np.array(self.X[:self.num_domains, :NUM_FEATURES])


def propagated_margins(A: np.ndarray, X: np.ndarray, W: np.ndarray
                       ) -> np.ndarray:
    """Rows of B X (W[:, 1] - W[:, 0]) with B the squared normalized A."""

    W = np.asarray(W, dtype=float)
    values = np.asarray(X, dtype=float) @ (W[:, 1] - W[:, 0])

    scaling = 1.0 / np.sqrt(A.sum(axis=1) + 1.0)
    for _ in range(2):
        scaled = scaling * values
        values = scaling * (A @ scaled + scaled)
    return values


def check_edit(state: AttackState, edit: EdgeEdit) -> None:
    """Raise if an edit is malformed or has no effect on the state."""

    if edit.op not in EDIT_OPS:
        raise InvalidEdgeKindError(f'Unknown edge edit {edit.op!r}')

    a, b = edit.a, edit.b
    for node in (a, b):
        if not 0 <= node < state.num_domains:
            raise ValueError(f'Domain {node} is not owned by the adversary')
    if a == b:
        raise ValueError(f'Edge edit on the self pair ({a}, {a})')

    if edit.op == 'resolve_swap':
        if np.array_equal(state.resolves[a], state.resolves[b]):
            raise ValueError(f'Domains {a} and {b} resolve to the same IPs')
        if state.resolves[a].sum() != state.resolves[b].sum():
            raise ValueError(
                f'Domains {a} and {b} resolve to different numbers of IPs'
            )
    elif edit.op == 'apex_share':
        if state.apexes[a] == state.apexes[b]:
            raise ValueError(f'Domains {a} and {b} already share an apex')
    elif edit.op == 'similar_add':
        if state.similar[a, b]:
            raise ValueError(f'Domains {a} and {b} are already similar')
    elif not state.similar[a, b]:
        raise ValueError(f'Domains {a} and {b} are not similar')


def state_from_subgraph(subgraph: AdversarySubgraph,
                        feature_config: FeatureConfig = DEFAULT_CONFIG,
                        similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
                        ngram_n: int = 2) -> AttackState:
    """Working state from the adversary's known edges and own features."""

    if subgraph.size == 0:
        raise ValueError('The adversary subgraph is empty')

    num_domains = subgraph.size
    local = {node: pos for pos, node in enumerate(subgraph.node_ids)}
    ip_local = {node: pos for pos, node in enumerate(subgraph.ip_ids)}

    similar = np.zeros((num_domains, num_domains), dtype=bool)
    resolves = np.zeros((num_domains, len(subgraph.ip_ids)), dtype=bool)
    for u, v, kind in subgraph.known_edges:
        if kind == 'similar':
            similar[local[u], local[v]] = similar[local[v], local[u]] = True
        elif kind == 'resolve':
            resolves[local[u], ip_local[v]] = True

    kinds = ('domain',) * num_domains + ('ip',) * len(subgraph.ip_ids)
    features = np.zeros((len(kinds), subgraph.estimated_features.shape[1]))
    features[:num_domains] = subgraph.estimated_features
    X = np.hstack([features, kind_tags(kinds)])
    X.setflags(write=False)

    apexes = tuple(
        apex_of(name, feature_config.two_part_suffixes) for name in subgraph.names
    )
    return AttackState(
        node_ids=tuple(subgraph.node_ids),
        names=tuple(subgraph.names),
        ip_names=tuple(subgraph.ip_names),
        apexes=apexes,
        similar=similar,
        resolves=resolves,
        X=X,
        feature_config=feature_config,
        similarity_threshold=similarity_threshold,
        ngram_n=ngram_n,
    )
