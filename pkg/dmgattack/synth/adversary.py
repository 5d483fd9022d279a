# -*- coding: utf-8 -*-
#
# adversary.py
#

"""
The adversary's view of its own part of the graph, obtained either by
sampling connected malicious domains of an existing graph or by registering
brand-new domains on a small pool of adversary addresses.
"""

import math
import logging
import ipaddress

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, NamedTuple, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from scipy.sparse.csgraph import connected_components

from ..dmg.dnslog import DnsLogRecord
from ..dmg.features import (
    NUM_FEATURES,
    EditableTarget,
    apex_of,
    feature_matrix,
)
from ..dmg.graph import Dmg, Edge, build_dmg
from ..dmg.names import UnrealizableEditError, synthesize_name

from .generator import ALPHANUMERIC, CONSONANTS, MALICIOUS, MALICIOUS_TLDS


logger = logging.getLogger(__name__)

# Edge kinds the adversary observes among its own nodes.
KNOWN_EDGE_KINDS = ('apex', 'resolve', 'similar')

# First address of the adversary hosting range (198.18.0.0/15).
ADVERSARY_ADDRESS_BASE = int(ipaddress.IPv4Address('198.18.0.0'))

MAX_RETRIES = 100


class AdversarySamplingError(ValueError):
    """No malicious component holds the requested number of domains."""

    def __init__(self, requested: int, largest: int):

        super().__init__(
            f'Requested {requested} connected malicious domains, the largest '
            f'malicious component has {largest}'
        )
        self.requested = requested
        self.largest = largest


class NameCollisionError(RuntimeError):
    """Fresh names kept colliding with existing ones."""


@dataclass(frozen=True, eq=False)
class AdversarySubgraph:
    """Estimate G' = (A', X') of the adversary's subgraph.

    Attributes:
        node_ids: Owned domain node ids, ascending.
        names: Domain names aligned with `node_ids`.
        ip_ids: Owned IP node ids, ascending.
        ip_names: Addresses aligned with `ip_ids`.
        known_edges: Graph edges among owned domains and owned IPs.
        estimated_features: The adversary's own feature extraction, rows
            aligned with `node_ids`.

    """

    node_ids: Tuple[int, ...]
    names: Tuple[str, ...]
    ip_ids: Tuple[int, ...]
    ip_names: Tuple[str, ...]
    known_edges: FrozenSet[Edge]
    estimated_features: np.ndarray

    @property
    def size(self) -> int:
        return len(self.node_ids)

    def is_connected(self) -> bool:
        """Whether the owned domains are connected through known edges."""

        if self.size <= 1:
            return True

        local = {node: pos for pos, node in enumerate(self.node_ids + self.ip_ids)}
        rows, cols = [], []
        for u, v, _ in self.known_edges:
            rows.append(local[u])
            cols.append(local[v])
        graph = sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(local), len(local))
        )
        _, components = connected_components(graph, directed=False)
        return len(set(components[:self.size])) == 1


class CreatedAdversary(NamedTuple):

    subgraph: AdversarySubgraph
    records: List[DnsLogRecord]
    dmg: Dmg
    intended: Tuple[EditableTarget, ...]


def subgraph_from_names(dmg: Dmg, names: Sequence[str]) -> AdversarySubgraph:
    """The adversary subgraph formed by the given domain names of a graph.

    Owned IPs are the addresses the domains resolve to.

    """
    node_ids = sorted(dmg.node_id('domain', name) for name in names)
    ip_ids = sorted({
        other for node in node_ids for other in dmg.neighbors(node, ['resolve'])
    })

    owned = set(node_ids) | set(ip_ids)
    known_edges = frozenset(
        edge for edge in dmg.edges
        if edge[2] in KNOWN_EDGE_KINDS and edge[0] in owned and edge[1] in owned
    )
    names = tuple(dmg.name_of(node) for node in node_ids)

    features = feature_matrix(names, dmg.feature_config)
    features.setflags(write=False)
    return AdversarySubgraph(
        node_ids=tuple(node_ids),
        names=names,
        ip_ids=tuple(ip_ids),
        ip_names=tuple(dmg.name_of(node) for node in ip_ids),
        known_edges=known_edges,
        estimated_features=features,
    )


def _malicious_graph(dmg: Dmg, malicious: set):
    """Sparse graph of malicious domains, their IPs and edges among them."""

    rows, cols = [], []
    for u, v, kind in dmg.edges:
        if kind in ('apex', 'similar') and u in malicious and v in malicious:
            rows.append(u)
            cols.append(v)
        elif kind == 'resolve' and (u in malicious or v in malicious):
            rows.append(u)
            cols.append(v)
    graph = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(dmg.num_nodes, dmg.num_nodes)
    )
    return (graph + graph.T).tocsr()


def sample_adversary(dmg: Dmg, labels: Dict[str, str], m: int, seed: int
                     ) -> AdversarySubgraph:
    """Sample m connected malicious domains by randomized frontier search.

    Domains count as connected through apex and similar edges and through a
    shared resolution address.

    Args:
        dmg: The graph.
        labels: Ground truth per domain name.
        m: Number of domains to sample.
        seed: Seed of the frontier shuffling.

    Raises:
        AdversarySamplingError: No malicious component with m domains.

    """
    if m < 1:
        raise ValueError(f'Adversary size must be >= 1, got {m}')

    malicious = {
        node for node in dmg.domain_ids
        if labels.get(dmg.name_of(node)) == MALICIOUS
    }
    graph = _malicious_graph(dmg, malicious)
    _, components = connected_components(graph, directed=False)

    sizes = {}
    for node in malicious:
        sizes[components[node]] = sizes.get(components[node], 0) + 1
    largest = max(sizes.values(), default=0)
    if largest < m:
        raise AdversarySamplingError(m, largest)

    rng = np.random.default_rng(seed)
    eligible = sorted(node for node in malicious if sizes[components[node]] >= m)
    start = int(eligible[int(rng.integers(len(eligible)))])

    selected, visited = [], {start}
    frontier = [start]
    while len(selected) < m:
        # Swap-remove a uniformly drawn frontier entry.
        pos = int(rng.integers(len(frontier)))
        frontier[pos], frontier[-1] = frontier[-1], frontier[pos]
        node = frontier.pop()
        if node in malicious:
            selected.append(node)
        for other in graph[node].indices.tolist():
            if other not in visited and (
                    other in malicious or dmg.kind_of(other) == 'ip'):
                visited.add(other)
                frontier.append(other)

    subgraph = subgraph_from_names(dmg, [dmg.name_of(node) for node in selected])
    logger.info(
        'Sampled %d adversary domains with %d owned IPs (largest component %d)',
        subgraph.size, len(subgraph.ip_ids), largest,
    )
    return subgraph


def _fresh_addresses(rng, count: int, taken: set) -> List[str]:

    addresses = []
    for _ in range(count * MAX_RETRIES):
        if len(addresses) == count:
            break
        offset = int(rng.integers(1, 2 ** 17 - 1))
        address = str(ipaddress.IPv4Address(ADVERSARY_ADDRESS_BASE + offset))
        if address not in taken and address not in addresses:
            addresses.append(address)
    if len(addresses) < count:
        raise NameCollisionError('Could not draw fresh adversary addresses')
    return addresses


def _fresh_apex(rng, taken_apexes: set) -> str:

    for _ in range(MAX_RETRIES):
        label = ''.join(rng.choice(list(CONSONANTS), size=int(rng.integers(7, 11))))
        apex = f'{label}.{rng.choice(MALICIOUS_TLDS)}'
        if apex not in taken_apexes:
            taken_apexes.add(apex)
            return apex
    raise NameCollisionError('Could not draw a fresh adversary apex')


def _draw_target(rng) -> EditableTarget:

    has_www = int(rng.random() < 0.2)
    single = int(rng.random() < 0.15)
    repetition = int(rng.random() < 0.15 and not (has_www and single))
    return EditableTarget(
        length=float(rng.integers(2, 5)),
        has_www=has_www,
        single_char_subdomain=single,
        prefix_repetition=repetition,
        contains_digits=int(rng.random() < 0.7),
    )


def create_adversary(dmg: Dmg,
                     records: Sequence[DnsLogRecord],
                     m: int,
                     seed: int,
                     num_ips: int = 5,
                     group_size: int = 20) -> CreatedAdversary:
    """Register m new domains on adversary-owned addresses.

    Domains are split over fresh apexes of at most `group_size` members.
    Consecutive apex groups share one address so the new domains form a
    connected subgraph. Each domain is queried by one to three existing
    clients.

    Args:
        dmg: Current graph.
        records: The log the graph was built from.
        m: Number of domains to create.
        seed: Seed of the name and address draws.
        num_ips: Size of the adversary address pool.
        group_size: Maximum number of domains per apex.

    Returns:
        The new subgraph, the appended records, the rebuilt graph and the
        intended editable features of each created name.

    """
    if m < 0:
        raise ValueError(f'Adversary size must be >= 0, got {m}')
    if m == 0:
        empty = AdversarySubgraph(
            (), (), (), (), frozenset(), np.zeros((0, NUM_FEATURES))
        )
        return CreatedAdversary(empty, [], dmg, ())

    rng = np.random.default_rng(seed)
    config = dmg.feature_config

    domains = {dmg.name_of(node) for node in dmg.domain_ids}
    taken_apexes = {apex_of(name, config.two_part_suffixes) for name in domains}
    addresses = _fresh_addresses(
        rng, num_ips, {node.name for node in dmg.nodes if node.kind == 'ip'}
    )

    num_groups = math.ceil(m / group_size)
    apexes = [_fresh_apex(rng, taken_apexes) for _ in range(num_groups)]

    clients = [node.name for node in dmg.nodes if node.kind == 'client']
    if not clients:
        clients = [f'advc{index:04d}' for index in range(3)]

    timestamp = max((record.timestamp for record in records), default=0)

    names, intended, appended = [], [], []
    for index in range(m):
        group = index % num_groups
        for _ in range(MAX_RETRIES):
            target = _draw_target(rng)
            content = [''.join(rng.choice(list(ALPHANUMERIC),
                                          size=int(rng.integers(5, 12))))]
            try:
                name = synthesize_name(
                    target, apexes[group], content=content, rng=rng,
                    config=config,
                )
            except UnrealizableEditError:
                continue
            if name not in domains:
                break
        else:
            raise NameCollisionError(
                f'No fresh name for created domain {index} after '
                f'{MAX_RETRIES} attempts'
            )
        domains.add(name)
        names.append(name)
        intended.append(target)

        # Groups g and g + 1 share address g + 1.
        address = addresses[(group + (index // num_groups) % 2) % num_ips]
        num_clients = int(rng.integers(1, min(3, len(clients)) + 1))
        for client in rng.choice(clients, size=num_clients, replace=False):
            timestamp += 1
            appended.append(DnsLogRecord(timestamp, str(client), name, address))

    new_dmg = build_dmg(
        list(records) + appended,
        similarity_threshold=dmg.similarity_threshold,
        n=dmg.ngram_n,
        feature_config=config,
    )
    subgraph = subgraph_from_names(new_dmg, names)
    logger.info(
        'Created %d adversary domains under %d apexes on %d addresses',
        m, num_groups, num_ips,
    )
    return CreatedAdversary(subgraph, appended, new_dmg, tuple(intended))
